#pragma once

#include "nhim/graph_transform.hpp"
#include "nhim/hyperbolicity.hpp"
#include "nhim/map_definition.hpp"
#include "nhim/model.hpp"
#include "nhim/tangent.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nhim {

struct PipelineOptions {
  SolverOptions solver;
  int section_base = 64;
  int section_fiber = 33;
  CheckGrid check;
  bool tangents = true;
};

struct DemoSystem {
  std::string name;
  std::string description;
  GeometricModel model;
  MapDefinition map;
  bool expect_topological = true;  // false for the registered must-fail
  bool expect_classical = false;
  PipelineOptions options;          // grids and solver used by `demo`
  std::vector<double> shift;        // unit shift direction for sweeps
};

/// Each entry is checked against its documented properties when the registry
/// is first built; a failing self-check throws ModelError.
const std::vector<DemoSystem>& registry();
/// Throws ConfigError for an unknown name.
const DemoSystem& find_demo(const std::string& name);

struct RandomTrigSpec {
  int degree = 3;
  double bound = 1.0;
};

/// Coordinate-wise perturbation formulas in the map's variables.
struct PerturbationFamily {
  std::string name;
  std::vector<std::string> formulas;
  std::optional<RandomTrigSpec> random;
  std::uint64_t seed = 0;
};

PerturbationFamily shift_family(const std::vector<double>& direction);

/// p_i = sum over degrees d and coordinates j of a cos(d z_j) + b sin(d z_j)
/// with seeded uniform coefficients scaled so that |p_i| <= bound.
PerturbationFamily random_trig_family(const MapDefinition& map, int degree, double bound,
                                      std::uint64_t seed);

struct PerturbedMap {
  MapDefinition map;
  double c1_size = 0.0;  // sup over a sample grid of |delta f| + |delta J|
};

/// f + eps * p. eps = 0 returns the original map unchanged; otherwise the
/// inverse formulas are dropped.
PerturbedMap perturb(const MapDefinition& map, const GeometricModel& model,
                     const PerturbationFamily& family, double eps);

double c0_distance(const ManifoldGrid& a, const ManifoldGrid& b);
double c0_distance(const SectionGrid& a, const SectionGrid& b);
/// c0_distance plus the largest Grassmann distance between tangent planes.
double c1_distance(const ManifoldGrid& a, const ManifoldGrid& b, const std::vector<PlaneBasis>& ta,
                   const std::vector<PlaneBasis>& tb);
double c1_distance(const SectionGrid& a, const SectionGrid& b, const std::vector<PlaneBasis>& ta,
                   const std::vector<PlaneBasis>& tb);

/// Tangent of the graph at every node of a section.
std::vector<PlaneBasis> graph_tangents(const SectionGrid& section);

struct ManifoldComputation {
  std::optional<TransformResult> unstable;
  std::optional<TransformResult> stable;
  std::optional<ManifoldGrid> manifold;
  IntersectionReport intersection;
  std::optional<TangentField> tangents;
  std::optional<TangentInvariance> invariance;
  bool inside_box = false;
  double tangent_cone_margin_s = 0.0;
  double tangent_cone_margin_u = 0.0;
  bool ok = false;
  std::string failure;
};

/// Both transforms from the zero section, their intersection and, when
/// requested, the tangent field of N_g by cone iteration.
ManifoldComputation compute_manifold(const GeometricModel& model, const MapDefinition& map,
                                     const PipelineOptions& options);

struct SweepRow {
  double eps = 0.0;
  double c1_size = 0.0;
  CheckReport check;
  bool transforms_attempted = false;
  bool unstable_converged = false;
  bool stable_converged = false;
  bool manifold_ok = false;
  bool inside_box = false;
  bool tangents_in_cones = false;
  double c0 = 0.0;
  double c1 = 0.0;
  double unstable_residual = 0.0;
  double stable_residual = 0.0;
  std::optional<ManifoldGrid> manifold;
  double runtime_seconds = 0.0;  // excluded from determinism comparisons
  std::string failure;
};

struct SweepReport {
  std::string demo;
  std::string family;
  std::uint64_t seed = 0;
  std::vector<SweepRow> rows;
  // max over rows of |margin(eps) - margin(0)| / eps
  double check_stability_constant = 0.0;
};

SweepReport run_persistence_sweep(const DemoSystem& demo, const PerturbationFamily& family,
                                  const std::vector<double>& eps_list,
                                  const PipelineOptions& options);

struct EscapeResult {
  Vector point;
  int forward_exit = -1;   // -1: stayed in B for k_max steps
  int backward_exit = -1;
  bool backward_inverse_failed = false;
};

/// First iterate outside B in each time direction. Backward steps use the
/// inverse restricted to B; an inverse failure counts as an exit and is
/// flagged.
std::vector<EscapeResult> escape_time_probe(const MapDefinition& map, const GeometricModel& model,
                                            const std::vector<Vector>& points, int k_max);

}  // namespace nhim
