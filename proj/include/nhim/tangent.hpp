#pragma once

#include "nhim/graph_transform.hpp"
#include "nhim/map_definition.hpp"
#include "nhim/model.hpp"

#include <string>
#include <vector>

namespace nhim {

/// Which invariant object a tangent field belongs to: the manifold N_g
/// (dimension n), its unstable set (n + u) or its stable set (n + s).
enum class TangentTarget { N, Nu, Ns };

const char* to_string(TangentTarget t);

struct TangentField {
  TangentTarget which = TangentTarget::N;
  int depth = 0;
  std::vector<PlaneBasis> planes;
  std::vector<double> residuals;   // gd(depth k, depth k - 1) per node
  std::vector<int> achieved_depth;  // < depth where an orbit left B
  double max_residual = 0.0;
  bool truncated = false;
};

/// Column space of J(p) * plane, re-orthonormalized. Throws ModelError on
/// rank collapse.
PlaneBasis pushforward_plane(const MapDefinition& map, const Vector& p, const PlaneBasis& plane);

/// Cone iteration at one point near the manifold: the seed plane is pushed
/// forward from g^-k(z) (Nu), pulled back from g^k(z) (Ns), or both and
/// intersected (N). Orbits follow the manifold interpolant.
PlaneBasis tangent_at_point(const MapDefinition& map, const GeometricModel& model,
                            const ManifoldGrid& manifold, const Vector& z, TangentTarget which,
                            int depth_k, double* residual = nullptr, int* achieved = nullptr);

TangentField compute_tangent_by_cone_iteration(const MapDefinition& map, const GeometricModel& model,
                                               const ManifoldGrid& manifold, TangentTarget which,
                                               int depth_k);

/// Tangent plane of a graph from centered differences (periodic axes wrap).
/// `first_order` is set when a bounded edge forced a one-sided difference.
PlaneBasis tangent_from_graph(const ManifoldGrid& manifold, int node, bool* first_order = nullptr);
PlaneBasis tangent_from_graph(const SectionGrid& section, int node, bool* first_order = nullptr);

struct TangentInvariance {
  double max_residual = 0.0;  // max gd(pushforward of D_z, D recomputed at g(z))
  double continuity = 0.0;    // max gd between adjacent nodes
};

TangentInvariance verify_tangent_invariance(const MapDefinition& map, const GeometricModel& model,
                                            const ManifoldGrid& manifold, const TangentField& tangents);

}  // namespace nhim
