#pragma once

#include "nhim/grid.hpp"
#include "nhim/map_definition.hpp"
#include "nhim/model.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nhim {

enum class SectionKind { Unstable, Stable };

const char* to_string(SectionKind k);

/**
 * A discretized section. Unstable sections live over N x B^u and take values
 * in B^s; stable sections live over N x B^s and take values in B^u. Domain
 * coordinates are the base angles followed by the fiber coordinates.
 */
class SectionGrid {
 public:
  SectionGrid(const GeometricModel& model, SectionKind kind, int base_count, int fiber_count);

  static SectionGrid constant(const GeometricModel& model, SectionKind kind, int base_count,
                              int fiber_count, const Vector& value);
  static SectionGrid from_function(const GeometricModel& model, SectionKind kind, int base_count,
                                   int fiber_count,
                                   const std::function<Vector(const Vector&)>& fn);

  SectionKind kind() const noexcept { return kind_; }
  const GeometricModel& model() const noexcept { return model_; }
  const RegularGrid& domain() const noexcept { return domain_; }
  int base_count() const noexcept { return base_count_; }
  int fiber_count() const noexcept { return fiber_count_; }
  int size() const noexcept { return domain_.size(); }
  int domain_dim() const noexcept { return domain_.dim(); }
  int value_dim() const noexcept { return static_cast<int>(values_.cols()); }

  const Matrix& values() const noexcept { return values_; }
  Matrix& values() noexcept { return values_; }

  /// Multilinear value at a domain point, extrapolated outside.
  Vector value_at(const Vector& domain_point, Matrix* gradient = nullptr) const;

  /// Ambient point of the graph over a domain point with the given value.
  Vector ambient(const Vector& domain_point, const Vector& value) const;
  Vector ambient_at_node(int node) const;

  /// Largest excursion of a value outside its closed fiber box (0 if inside).
  double fiber_violation() const;

 private:
  GeometricModel model_;
  SectionKind kind_;
  int base_count_;
  int fiber_count_;
  RegularGrid domain_;
  Matrix values_;
};

struct NewtonStats {
  int max_steps = 0;
  long long total_steps = 0;
  double max_residual = 0.0;
  int coarse_searches = 0;
};

struct TransformStep {
  SectionGrid section;
  // Solved preimage coordinates per node (base + fiber unknowns), reused as
  // seeds by the next application.
  std::vector<Vector> correspondence;
  NewtonStats newton;
};

struct NewtonOptions {
  double tol = 1e-12;
  int max_steps = 50;
};

/// Throws NodeFailure (NewtonFailure, ValueOutsideFiber, NonInjectiveCover).
/// Without seeds every node is also solved from a second, distant seed to
/// detect a non-injective cover.
TransformStep apply_unstable_transform(const MapDefinition& map, const GeometricModel& model,
                                       const SectionGrid& section,
                                       const std::vector<Vector>* seeds = nullptr,
                                       const NewtonOptions& newton = {});

TransformStep apply_stable_transform(const MapDefinition& map, const GeometricModel& model,
                                     const SectionGrid& section,
                                     const std::vector<Vector>* seeds = nullptr,
                                     const NewtonOptions& newton = {});

/// Dispatches on the section kind.
TransformStep apply_transform(const MapDefinition& map, const GeometricModel& model,
                              const SectionGrid& section, const std::vector<Vector>* seeds = nullptr,
                              const NewtonOptions& newton = {});

enum class Acceleration { None, Anderson };

struct SolverOptions {
  double tol_change = 1e-12;
  double tol_residual = 1e-11;
  int max_iter = 200;
  double newton_tol = 1e-12;
  int newton_max = 50;
  int depth_k = 40;
  Acceleration acceleration = Acceleration::None;
  int anderson_depth = 5;
  double lip_slack = 0.05;
};

struct TransformReport {
  SectionKind kind = SectionKind::Unstable;
  int iterations = 0;
  std::vector<double> changes;    // sup |G(sigma_k) - sigma_k| per iteration
  std::vector<double> lipschitz;  // estimate of each new iterate
  double residual = 0.0;          // recomputed on the returned section
  double lipschitz_final = 0.0;
  NewtonStats newton;
  bool converged = false;
  bool stalled = false;             // change criterion met, residual not
  bool max_iter_reached = false;
  bool lipschitz_exceeded = false;  // some iterate above 1 + lip_slack
  bool slow_contraction = false;    // change ratio close to 1 at the end
  bool failed = false;
  std::string failure;
};

struct TransformResult {
  SectionGrid section;
  TransformReport report;
};

/// Iterates the transform from `init`. On a node failure the last good
/// section is returned with `failed` set.
TransformResult iterate_transform(const MapDefinition& map, const GeometricModel& model,
                                  const SectionGrid& init, const SolverOptions& options = {});

struct LipschitzEstimate {
  double global = 0.0;
  std::vector<double> per_node;
};

/// Max over adjacent node pairs of |delta value| / |delta domain|.
LipschitzEstimate lipschitz_estimate(const SectionGrid& section);

/// The invariant manifold as a graph over a base grid: per node the stable
/// and unstable fiber coordinates, and optionally a tangent plane.
struct ManifoldGrid {
  int n = 0;
  int s = 0;
  int u = 0;
  RegularGrid base;
  Matrix fiber;  // size() x (s + u)
  std::vector<PlaneBasis> tangents;

  int size() const noexcept { return base.size(); }
  Vector point(int node) const;
  /// Ambient point over a base position, interpolating the fiber values.
  Vector point_over(const Vector& base_point, Matrix* gradient = nullptr) const;

  static ManifoldGrid zero_section(const GeometricModel& model, int base_count);
};

struct IntersectionReport {
  double max_residual = 0.0;
  int max_iterations = 0;
  bool slow_convergence = false;
};

/// Throws NoIntersection if the alternating iteration leaves B.
ManifoldGrid intersect_graphs(const SectionGrid& unstable, const SectionGrid& stable,
                              const GeometricModel& model, IntersectionReport* report = nullptr);

/// sup over nodes p of the fiber distance between g(p) and the manifold over
/// the base of g(p).
double manifold_invariance_error(const MapDefinition& map, const ManifoldGrid& manifold);

}  // namespace nhim
