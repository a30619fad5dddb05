#include "nhim/tangent.hpp"

#include "nhim/errors.hpp"
#include "nhim/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace nhim {

namespace {

constexpr double kOrbitSlack = 1e-9;

bool fiber_inside(const GeometricModel& model, const Vector& z) {
  for (int i = model.n(); i < model.m(); ++i)
    if (std::abs(z[i]) > model.radius(i) + kOrbitSlack) return false;
  return true;
}

// Preimage of z along the manifold: the point over x' whose image lies over
// the base of z.
std::optional<Vector> backward_step(const MapDefinition& map, const GeometricModel& model,
                                    const ManifoldGrid& manifold, const Vector& z) {
  const int n = model.n();
  if (n == 0) return manifold.point_over(Vector(0));
  const Vector x = z.head(n);
  const auto residual = [&](const Vector& xp, Vector& r, Matrix& jr) {
    Matrix grad;
    const Vector p = manifold.point_over(xp, &grad);
    Vector gp;
    Matrix J;
    map.eval_with_jacobian(p, gp, J);
    r.resize(n);
    for (int i = 0; i < n; ++i) r[i] = wrap_difference(gp[i] - x[i]);
    Matrix dz(model.m(), n);
    dz.topRows(n) = Matrix::Identity(n, n);
    dz.bottomRows(model.m() - n) = grad;
    jr = (J * dz).topRows(n);
  };
  std::vector<Vector> seeds;
  {
    const Vector gz = map.eval(z);
    Vector guess = x;
    for (int i = 0; i < n; ++i) guess[i] = x[i] - wrap_difference(gz[i] - x[i]);
    seeds.push_back(guess);
    seeds.push_back(x);
  }
  for (const Vector& seed : seeds) {
    Vector xp = seed;
    Vector r;
    Matrix jr;
    bool ok = false;
    try {
      for (int it = 0; it < 60; ++it) {
        residual(xp, r, jr);
        if (r.lpNorm<Eigen::Infinity>() <= 1e-14) {
          ok = true;
          break;
        }
        Eigen::FullPivLU<Matrix> lu(jr);
        if (!lu.isInvertible()) break;
        xp += lu.solve(-r);
      }
      if (!ok && r.lpNorm<Eigen::Infinity>() <= 1e-12) ok = true;
    } catch (const DomainError&) {
      ok = false;
    }
    if (ok) {
      const Vector p = manifold.point_over(xp);
      if (!fiber_inside(model, p)) return std::nullopt;
      return p;
    }
  }
  return std::nullopt;
}

std::optional<Vector> forward_step(const MapDefinition& map, const GeometricModel& model,
                                   const ManifoldGrid& manifold, const Vector& z) {
  const Vector q = map.eval(z);
  if (!fiber_inside(model, q)) return std::nullopt;
  return manifold.point_over(q.head(model.n()));
}

std::vector<int> axes_range(int from, int count) {
  std::vector<int> out;
  for (int i = 0; i < count; ++i) out.push_back(from + i);
  return out;
}

PlaneBasis seed_plane(const GeometricModel& model, bool unstable) {
  std::vector<int> axes = axes_range(0, model.n());
  const auto extra = unstable ? axes_range(model.unstable_offset(), model.u())
                              : axes_range(model.stable_offset(), model.s());
  axes.insert(axes.end(), extra.begin(), extra.end());
  return PlaneBasis::coordinate(model.m(), axes);
}

PlaneBasis apply(const Matrix& M, const PlaneBasis& plane) {
  if (plane.dim() == 0) return plane;
  try {
    return PlaneBasis::from_spanning(M * plane.basis());
  } catch (const ModelError&) {
    throw ModelError("tangent: plane collapsed under the tangent map");
  }
}

PlaneBasis intersect(const PlaneBasis& a, const PlaneBasis& b, int dim) {
  const int m = a.ambient_dim();
  if (dim <= 0) return PlaneBasis(Matrix(m, 0));
  const int p = a.dim(), q = b.dim();
  Matrix M(m, p + q);
  M << a.basis(), -b.basis();
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
  const Matrix null = svd.matrixV().rightCols(dim);
  return PlaneBasis::from_spanning(a.basis() * null.topRows(p));
}

// Unstable-side plane at orbit[0] from the seed at orbit[depth].
PlaneBasis push_along(const MapDefinition& map, const std::vector<Vector>& past, int depth,
                      const PlaneBasis& seed) {
  PlaneBasis p = seed;
  for (int j = depth; j >= 1; --j) p = apply(map.jacobian(past[static_cast<std::size_t>(j)]), p);
  return p;
}

PlaneBasis pull_along(const MapDefinition& map, const std::vector<Vector>& future, int depth,
                      const PlaneBasis& seed) {
  PlaneBasis p = seed;
  for (int j = depth - 1; j >= 0; --j) {
    Eigen::FullPivLU<Matrix> lu(map.jacobian(future[static_cast<std::size_t>(j)]));
    if (!lu.isInvertible()) throw SingularJacobian("tangent: singular Jacobian along the orbit");
    p = apply(lu.inverse(), p);
  }
  return p;
}

}  // namespace

const char* to_string(TangentTarget t) {
  switch (t) {
    case TangentTarget::N: return "N";
    case TangentTarget::Nu: return "Nu";
    case TangentTarget::Ns: return "Ns";
  }
  return "?";
}

PlaneBasis pushforward_plane(const MapDefinition& map, const Vector& p, const PlaneBasis& plane) {
  return apply(map.jacobian(p), plane);
}

PlaneBasis tangent_at_point(const MapDefinition& map, const GeometricModel& model,
                            const ManifoldGrid& manifold, const Vector& z, TangentTarget which,
                            int depth_k, double* residual, int* achieved) {
  if (depth_k < 1) throw ModelError("tangent: depth must be at least 1");
  const bool need_u = which != TangentTarget::Ns;
  const bool need_s = which != TangentTarget::Nu;
  int reached = depth_k;
  PlaneBasis u_k = seed_plane(model, true), u_prev = u_k;
  PlaneBasis s_k = seed_plane(model, false), s_prev = s_k;
  if (need_u) {
    std::vector<Vector> past{z};
    for (int j = 1; j <= depth_k; ++j) {
      auto p = backward_step(map, model, manifold, past.back());
      if (!p) break;
      past.push_back(*p);
    }
    const int k = static_cast<int>(past.size()) - 1;
    reached = std::min(reached, k);
    u_k = push_along(map, past, k, seed_plane(model, true));
    u_prev = push_along(map, past, std::max(k - 1, 0), seed_plane(model, true));
  }
  if (need_s) {
    std::vector<Vector> future{z};
    for (int j = 1; j <= depth_k; ++j) {
      auto p = forward_step(map, model, manifold, future.back());
      if (!p) break;
      future.push_back(*p);
    }
    const int k = static_cast<int>(future.size()) - 1;
    reached = std::min(reached, k);
    s_k = pull_along(map, future, k, seed_plane(model, false));
    s_prev = pull_along(map, future, std::max(k - 1, 0), seed_plane(model, false));
  }
  PlaneBasis out = u_k, prev = u_prev;
  if (which == TangentTarget::Ns) {
    out = s_k;
    prev = s_prev;
  } else if (which == TangentTarget::N) {
    out = intersect(u_k, s_k, model.n());
    prev = intersect(u_prev, s_prev, model.n());
  }
  if (residual) *residual = out.dim() ? grassmann_distance(out, prev) : 0.0;
  if (achieved) *achieved = reached;
  return out;
}

TangentField compute_tangent_by_cone_iteration(const MapDefinition& map, const GeometricModel& model,
                                               const ManifoldGrid& manifold, TangentTarget which,
                                               int depth_k) {
  const int count = manifold.size();
  TangentField field;
  field.which = which;
  field.depth = depth_k;
  field.planes.assign(static_cast<std::size_t>(count), PlaneBasis(Matrix(model.m(), 0)));
  field.residuals.assign(static_cast<std::size_t>(count), 0.0);
  field.achieved_depth.assign(static_cast<std::size_t>(count), depth_k);
  parallel_for(count, [&](int i) {
    const auto ui = static_cast<std::size_t>(i);
    field.planes[ui] = tangent_at_point(map, model, manifold, manifold.point(i), which, depth_k,
                                        &field.residuals[ui], &field.achieved_depth[ui]);
  });
  for (int i = 0; i < count; ++i) {
    field.max_residual = std::max(field.max_residual, field.residuals[static_cast<std::size_t>(i)]);
    if (field.achieved_depth[static_cast<std::size_t>(i)] < depth_k) field.truncated = true;
  }
  return field;
}

PlaneBasis tangent_from_graph(const ManifoldGrid& manifold, int node, bool* first_order) {
  const int n = manifold.n;
  const int m = n + manifold.s + manifold.u;
  Matrix cols = Matrix::Zero(m, n);
  bool one_sided = false;
  for (int a = 0; a < n; ++a) {
    const int up = manifold.base.neighbor(node, a, +1);
    const int down = manifold.base.neighbor(node, a, -1);
    const double h = manifold.base.axis(a).step();
    cols(a, a) = 1.0;
    if (up >= 0 && down >= 0) {
      cols.col(a).tail(m - n) = (manifold.fiber.row(up) - manifold.fiber.row(down)).transpose() / (2 * h);
    } else {
      one_sided = true;
      const int hi = up >= 0 ? up : node;
      const int lo = down >= 0 ? down : node;
      cols.col(a).tail(m - n) = (manifold.fiber.row(hi) - manifold.fiber.row(lo)).transpose() / h;
    }
  }
  if (first_order) *first_order = one_sided;
  return PlaneBasis::from_spanning(cols);
}

PlaneBasis tangent_from_graph(const SectionGrid& section, int node, bool* first_order) {
  const GeometricModel& model = section.model();
  const RegularGrid& grid = section.domain();
  const int n = model.n();
  const int m = model.m();
  const bool unstable = section.kind() == SectionKind::Unstable;
  const int domain_fiber_offset = unstable ? model.unstable_offset() : model.stable_offset();
  const int value_offset = unstable ? model.stable_offset() : model.unstable_offset();
  Matrix cols = Matrix::Zero(m, grid.dim());
  bool one_sided = false;
  for (int a = 0; a < grid.dim(); ++a) {
    const int up = grid.neighbor(node, a, +1);
    const int down = grid.neighbor(node, a, -1);
    const double h = grid.axis(a).step();
    cols(a < n ? a : domain_fiber_offset + (a - n), a) = 1.0;
    Vector slope;
    if (up >= 0 && down >= 0) {
      slope = (section.values().row(up) - section.values().row(down)).transpose() / (2 * h);
    } else {
      one_sided = true;
      const int hi = up >= 0 ? up : node;
      const int lo = down >= 0 ? down : node;
      slope = (section.values().row(hi) - section.values().row(lo)).transpose() / h;
    }
    cols.col(a).segment(value_offset, section.value_dim()) = slope;
  }
  if (first_order) *first_order = one_sided;
  return PlaneBasis::from_spanning(cols);
}

TangentInvariance verify_tangent_invariance(const MapDefinition& map, const GeometricModel& model,
                                            const ManifoldGrid& manifold, const TangentField& tangents) {
  const int count = manifold.size();
  if (static_cast<int>(tangents.planes.size()) != count)
    throw ModelError("verify_tangent_invariance: field does not match the manifold grid");
  std::vector<double> residual(static_cast<std::size_t>(count), 0.0);
  parallel_for(count, [&](int i) {
    const PlaneBasis& d = tangents.planes[static_cast<std::size_t>(i)];
    if (d.dim() == 0) return;
    const Vector z = manifold.point(i);
    const PlaneBasis pushed = pushforward_plane(map, z, d);
    const Vector q = map.eval(z);
    const PlaneBasis at_image = tangent_at_point(map, model, manifold, q, tangents.which, tangents.depth);
    residual[static_cast<std::size_t>(i)] = grassmann_distance(pushed, at_image);
  });
  TangentInvariance out;
  for (double r : residual) out.max_residual = std::max(out.max_residual, r);
  for (int i = 0; i < count; ++i) {
    const PlaneBasis& a = tangents.planes[static_cast<std::size_t>(i)];
    if (a.dim() == 0) continue;
    for (int ax = 0; ax < manifold.base.dim(); ++ax) {
      const int j = manifold.base.neighbor(i, ax, +1);
      if (j < 0 || j == i) continue;
      out.continuity = std::max(out.continuity, grassmann_distance(a, tangents.planes[static_cast<std::size_t>(j)]));
    }
  }
  return out;
}

}  // namespace nhim
