#pragma once

#include "nhim/grid.hpp"
#include "nhim/map_definition.hpp"
#include "nhim/model.hpp"

#include <string>
#include <vector>

namespace nhim {

/// Sampling of B: `base` nodes per angle, `fiber` nodes per fiber axis
/// (box faces included), `directions` quasi-random cone-boundary directions.
struct CheckGrid {
  int base = 256;
  int fiber = 201;
  int directions = 64;
};

struct BoundaryMargins {
  // min over the grid of dist(g(z), stable boundary stratum); +inf when s = 0.
  // Negative (minus the depth outside B^s) when the image of a grid edge
  // crosses the stratum between samples.
  double image_vs_stable_boundary = 0.0;
  Vector worst_image_point;
  // min over the unstable boundary stratum of dist(g(z), B); when u = 0 this
  // is min over B of the signed distance from g(z) to the boundary of B
  double unstable_boundary_escape = 0.0;
  Vector worst_escape_point;
  bool contained_mode = false;
  long long samples = 0;
  long long boundary_samples = 0;
};

struct ConeMargins {
  // +inf when a cone is the whole space or {0} (nothing to check)
  double cone_margin_s = 0.0;
  Vector worst_s;
  double cone_margin_u = 0.0;
  Vector worst_u;
  long long samples = 0;
  int singular_points = 0;
};

struct CheckReport {
  bool pass = false;
  BoundaryMargins boundary;
  ConeMargins cones;
  CheckGrid grid;
  std::string sampling;
};

/// Tensor grid of sample points of B (box faces included).
RegularGrid box_grid(const GeometricModel& model, const CheckGrid& grid);

/// Errors from the map propagate as DomainError naming the sample point.
BoundaryMargins check_boundary_conditions(const GeometricModel& model, const MapDefinition& map,
                                          const CheckGrid& grid = {});

ConeMargins check_cone_invariance(const GeometricModel& model, const MapDefinition& map,
                                  const CheckGrid& grid = {});

/// min over unit v on the boundary of `cone` of cone_margin(L v, cone), where
/// `inverse` is L^{-1}. Exact: for two good/bad components in dimension 2 the
/// four boundary rays are enumerated; otherwise the Lagrange dual of the
/// quadratic program is maximized (tight in dimension >= 3). Returns +inf when
/// the cone is degenerate.
double pushed_cone_margin(const GeometricModel& model, const Matrix& L, const Matrix& inverse,
                          ConeKind cone);

CheckReport run_topological_check(const GeometricModel& model, const MapDefinition& map,
                                  const CheckGrid& grid = {});

struct SplittingSample {
  Vector point;
  PlaneBasis stable;
  PlaneBasis unstable;
  PlaneBasis tangent;
  double invariance_residual = 0.0;  // gd(J Eu_x, Eu_g(x))
};

struct SplittingEstimate {
  std::vector<SplittingSample> samples;
  int power_iters = 0;
  double max_invariance_residual = 0.0;
  // max gd between consecutive samples (empirical continuity)
  double continuity = 0.0;
};

/// N is taken to be the zero section N x {0}; each base point is lifted to it.
/// Throws ModelError if g does not map N into itself (1e-10).
SplittingEstimate estimate_splitting(const GeometricModel& model, const MapDefinition& map,
                                     const std::vector<Vector>& base_points, int power_iters = 40);

struct ClassicalRates {
  int r = 1;
  double lambda_s = 0.0;   // max |T f restricted to Es|
  double lambda_u = 0.0;   // max |T f^-1 restricted to Eu|
  double tangent_expansion = 0.0;    // max |T f restricted to TN|
  double tangent_contraction = 0.0;  // max |T f^-1 restricted to TN|
  std::vector<double> stable_products;    // k = 1..r, empty when n = 0
  std::vector<double> unstable_products;
  double lambda = 0.0;
  bool pass = false;
};

ClassicalRates check_classical_rates(const GeometricModel& model, const MapDefinition& map,
                                     const SplittingEstimate& splitting, int r = 1);

/// Operator norm of M restricted to the plane (largest singular value of M B).
double restricted_norm(const Matrix& M, const PlaneBasis& plane);

}  // namespace nhim
