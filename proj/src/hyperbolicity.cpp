#include "nhim/hyperbolicity.hpp"

#include "nhim/errors.hpp"
#include "nhim/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace nhim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_point(const Vector& p) {
  std::ostringstream os;
  os.precision(17);
  os << "(";
  for (Eigen::Index i = 0; i < p.size(); ++i) os << (i ? ", " : "") << p[i];
  os << ")";
  return os.str();
}

Vector eval_at_sample(const MapDefinition& map, const Vector& z) {
  try {
    return map.eval(z);
  } catch (const DomainError& e) {
    throw DomainError(std::string(e.what()) + " at sample " + format_point(z), e.coordinate());
  }
}

bool on_unstable_face(const GeometricModel& model, const Vector& z) {
  for (int i = model.unstable_offset(); i < model.m(); ++i)
    if (std::abs(std::abs(z[i]) - model.radius(i)) <= kBoundaryTolerance) return true;
  return false;
}

// Smallest index achieving the minimum, so reductions do not depend on threads.
int argmin(const std::vector<double>& values) {
  int best = -1;
  double v = kInf;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (best < 0 || values[i] < v) {
      v = values[i];
      best = static_cast<int>(i);
    }
  return best;
}

double margin_from_fraction(double gamma, double f) {
  f = std::clamp(f, 0.0, 1.0);
  return gamma * std::sqrt(f) - std::sqrt(1.0 - f);
}

double min_eigenvalue(const Matrix& A) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

// Seeded directions on the cone boundary |v_bad| = gamma |v_good|.
std::vector<Vector> boundary_directions(const GeometricModel& model, ConeKind cone, int count) {
  const auto good = model.cone_good_indices(cone);
  const auto bad = model.cone_bad_indices(cone);
  std::vector<Vector> out;
  if (good.empty() || bad.empty()) return out;
  std::mt19937_64 rng(cone == ConeKind::Stable ? 0x5eedULL : 0x5eed5ULL);
  std::normal_distribution<double> normal;
  for (int k = 0; k < count; ++k) {
    Vector g(good.size()), b(bad.size());
    for (auto& x : g) x = normal(rng);
    for (auto& x : b) x = normal(rng);
    g.normalize();
    b.normalize();
    Vector v = Vector::Zero(model.m());
    for (std::size_t i = 0; i < good.size(); ++i) v[good[i]] = g[static_cast<Eigen::Index>(i)];
    for (std::size_t i = 0; i < bad.size(); ++i)
      v[bad[i]] = model.gamma() * b[static_cast<Eigen::Index>(i)];
    out.push_back(v / v.norm());
  }
  return out;
}

Vector lift(const GeometricModel& model, const Vector& base) {
  Vector z = Vector::Zero(model.m());
  z.head(model.n()) = base;
  return z;
}

PlaneBasis push(const Matrix& M, const PlaneBasis& plane) {
  if (plane.dim() == 0) return plane;
  try {
    return PlaneBasis::from_spanning(M * plane.basis());
  } catch (const ModelError&) {
    throw ModelError("splitting: plane collapsed under the tangent map");
  }
}

std::vector<int> range(int from, int count) {
  std::vector<int> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = from + i;
  return out;
}

}  // namespace

RegularGrid box_grid(const GeometricModel& model, const CheckGrid& grid) {
  std::vector<GridAxis> axes;
  for (int i = 0; i < model.n(); ++i) axes.push_back(angle_axis(grid.base));
  for (int i = model.n(); i < model.m(); ++i) axes.push_back(interval_axis(model.radius(i), grid.fiber));
  return RegularGrid(std::move(axes));
}

BoundaryMargins check_boundary_conditions(const GeometricModel& model, const MapDefinition& map,
                                          const CheckGrid& grid) {
  check_compatible(model, map);
  const RegularGrid samples = box_grid(model, grid);
  const int count = samples.size();
  const bool contained = model.u() == 0;
  std::vector<double> first(static_cast<std::size_t>(count), kInf);
  std::vector<double> second(static_cast<std::size_t>(count), kInf);
  // Signed excess of the image over the stable box and over the unstable box.
  std::vector<double> excess_s(static_cast<std::size_t>(count), -kInf);
  std::vector<double> excess_u(static_cast<std::size_t>(count), -kInf);
  parallel_for(count, [&](int i) {
    const Vector z = samples.node(i);
    const Vector image = eval_at_sample(map, z);
    for (int k = model.stable_offset(); k < model.unstable_offset(); ++k)
      excess_s[static_cast<std::size_t>(i)] =
          std::max(excess_s[static_cast<std::size_t>(i)], std::abs(image[k]) - model.radius(k));
    for (int k = model.unstable_offset(); k < model.m(); ++k)
      excess_u[static_cast<std::size_t>(i)] =
          std::max(excess_u[static_cast<std::size_t>(i)], std::abs(image[k]) - model.radius(k));
    first[static_cast<std::size_t>(i)] = distance_to_stable_boundary(model, image);
    if (contained)
      second[static_cast<std::size_t>(i)] = signed_distance_to_boundary(model, image);
    else if (on_unstable_face(model, z))
      second[static_cast<std::size_t>(i)] = distance_to_box(model, image);
  });
  BoundaryMargins out;
  out.contained_mode = contained;
  out.samples = count;
  for (int i = 0; i < count; ++i)
    if (contained || on_unstable_face(model, samples.node(i))) ++out.boundary_samples;
  const int a = argmin(first);
  const int b = argmin(second);
  out.image_vs_stable_boundary = first[static_cast<std::size_t>(a)];
  out.worst_image_point = samples.node(a);
  // The image of a grid edge whose ends lie on both sides of the stable
  // boundary, inside the unstable slab, meets the stratum between samples.
  // The margin is then minus the depth reached outside.
  for (int i = 0; i < count; ++i) {
    const auto si = static_cast<std::size_t>(i);
    if (excess_u[si] > 0.0) continue;
    for (int axis = 0; axis < samples.dim(); ++axis) {
      const int j = samples.neighbor(i, axis, 1);
      if (j < 0) continue;
      const auto sj = static_cast<std::size_t>(j);
      if (excess_u[sj] > 0.0 || !((excess_s[si] < 0.0) != (excess_s[sj] < 0.0))) continue;
      const int outside = excess_s[si] > excess_s[sj] ? i : j;
      const double depth = std::max(excess_s[si], excess_s[sj]);
      if (-depth < out.image_vs_stable_boundary) {
        out.image_vs_stable_boundary = -depth;
        out.worst_image_point = samples.node(outside);
      }
    }
  }
  out.unstable_boundary_escape = second[static_cast<std::size_t>(b)];
  out.worst_escape_point = samples.node(b);
  return out;
}

double pushed_cone_margin(const GeometricModel& model, const Matrix& L, const Matrix& inverse,
                          ConeKind cone) {
  const auto good = model.cone_good_indices(cone);
  const auto bad = model.cone_bad_indices(cone);
  if (good.empty() || bad.empty()) return kInf;
  const int m = model.m();
  const double gamma = model.gamma();
  if (m == 2) {
    double best = kInf;
    for (double sb : {1.0, -1.0}) {
      Vector v = Vector::Zero(2);
      v[good[0]] = 1.0;
      v[bad[0]] = sb * gamma;
      best = std::min(best, cone_margin(model, Vector(L * v), cone));
    }
    return best;
  }
  Matrix P = Matrix::Zero(m, m);
  Matrix D = Matrix::Zero(m, m);
  for (int i : good) {
    P(i, i) = 1.0;
    D(i, i) = gamma * gamma;
  }
  for (int i : bad) D(i, i) = -1.0;
  Matrix Q = inverse.transpose() * D * inverse;
  Q = 0.5 * (Q + Q.transpose());
  const auto h = [&](double nu) { return min_eigenvalue(P - nu * Q); };
  // h is concave; grow the bracket until both ends fall below h(0).
  const double h0 = h(0.0);
  double lo = -1.0, hi = 1.0;
  for (int k = 0; k < 200 && h(hi) >= h0; ++k) hi *= 2.0;
  for (int k = 0; k < 200 && h(lo) >= h0; ++k) lo *= 2.0;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double hc = h(c), hd = h(d);
  double best = std::max(h0, std::max(hc, hd));
  for (int it = 0; it < 200 && (b - a) > 1e-13 * std::max(1.0, std::abs(a) + std::abs(b)); ++it) {
    if (hc > hd) {
      b = d;
      d = c;
      hd = hc;
      c = b - phi * (b - a);
      hc = h(c);
    } else {
      a = c;
      c = d;
      hc = hd;
      d = a + phi * (b - a);
      hd = h(d);
    }
    best = std::max(best, std::max(hc, hd));
  }
  return margin_from_fraction(gamma, best);
}

ConeMargins check_cone_invariance(const GeometricModel& model, const MapDefinition& map,
                                  const CheckGrid& grid) {
  check_compatible(model, map);
  const RegularGrid samples = box_grid(model, grid);
  const int count = samples.size();
  const auto dirs_s = boundary_directions(model, ConeKind::Stable, grid.directions);
  const auto dirs_u = boundary_directions(model, ConeKind::Unstable, grid.directions);
  const auto good_s = model.cone_good_indices(ConeKind::Stable);
  const auto good_u = model.cone_good_indices(ConeKind::Unstable);
  const bool vacuous_s = good_s.empty() || model.cone_bad_indices(ConeKind::Stable).empty();
  const bool vacuous_u = good_u.empty() || model.cone_bad_indices(ConeKind::Unstable).empty();
  std::vector<double> ms(static_cast<std::size_t>(count), kInf);
  std::vector<double> mu(static_cast<std::size_t>(count), kInf);
  std::vector<char> singular(static_cast<std::size_t>(count), 0);
  parallel_for(count, [&](int i) {
    const Vector z = samples.node(i);
    Matrix J;
    try {
      J = map.jacobian(z);
    } catch (const DomainError& e) {
      throw DomainError(std::string(e.what()) + " at sample " + format_point(z), e.coordinate());
    }
    Eigen::FullPivLU<Matrix> lu(J);
    if (!lu.isInvertible()) {
      singular[static_cast<std::size_t>(i)] = 1;
      if (!vacuous_s) ms[static_cast<std::size_t>(i)] = -kInf;
      if (!vacuous_u) mu[static_cast<std::size_t>(i)] = -kInf;
      return;
    }
    const Matrix Jinv = lu.inverse();
    if (!vacuous_s) {
      double v = pushed_cone_margin(model, J, Jinv, ConeKind::Stable);
      for (const auto& d : dirs_s) v = std::min(v, cone_margin(model, Vector(J * d), ConeKind::Stable));
      Vector e = Vector::Zero(model.m());
      e[good_s[0]] = 1.0;
      v = std::min(v, cone_margin(model, Vector(J * e), ConeKind::Stable));
      ms[static_cast<std::size_t>(i)] = v;
    }
    if (!vacuous_u) {
      double v = pushed_cone_margin(model, Jinv, J, ConeKind::Unstable);
      for (const auto& d : dirs_u)
        v = std::min(v, cone_margin(model, Vector(Jinv * d), ConeKind::Unstable));
      Vector e = Vector::Zero(model.m());
      e[good_u[0]] = 1.0;
      v = std::min(v, cone_margin(model, Vector(Jinv * e), ConeKind::Unstable));
      mu[static_cast<std::size_t>(i)] = v;
    }
  });
  ConeMargins out;
  out.samples = count;
  for (char c : singular) out.singular_points += c;
  const int a = argmin(ms);
  const int b = argmin(mu);
  out.cone_margin_s = ms[static_cast<std::size_t>(a)];
  out.worst_s = samples.node(a);
  out.cone_margin_u = mu[static_cast<std::size_t>(b)];
  out.worst_u = samples.node(b);
  return out;
}

CheckReport run_topological_check(const GeometricModel& model, const MapDefinition& map,
                                  const CheckGrid& grid) {
  CheckReport r;
  r.grid = grid;
  r.boundary = check_boundary_conditions(model, map, grid);
  r.cones = check_cone_invariance(model, map, grid);
  r.pass = r.boundary.image_vs_stable_boundary > 0.0 && r.boundary.unstable_boundary_escape > 0.0 &&
           r.cones.cone_margin_s > 0.0 && r.cones.cone_margin_u > 0.0;
  std::ostringstream os;
  os << "regular grid: " << (model.n() ? std::to_string(grid.base) + " per angle, " : "")
     << grid.fiber << " per fiber axis, " << grid.directions
     << " boundary directions plus dual extremal";
  r.sampling = os.str();
  return r;
}

double restricted_norm(const Matrix& M, const PlaneBasis& plane) {
  if (plane.dim() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(M * plane.basis());
  return svd.singularValues()[0];
}

SplittingEstimate estimate_splitting(const GeometricModel& model, const MapDefinition& map,
                                     const std::vector<Vector>& base_points, int power_iters) {
  check_compatible(model, map);
  if (power_iters < 1) throw ModelError("splitting: power_iters must be positive");
  const int n = model.n();
  const int m = model.m();
  InverseOptions inv;
  const auto on_n = [&](const Vector& z) {
    const double off = z.tail(m - n).lpNorm<Eigen::Infinity>();
    if (off > 1e-10)
      throw ModelError("splitting: N is not invariant, image leaves the zero section by " +
                       std::to_string(off));
  };
  const PlaneBasis u_seed = PlaneBasis::coordinate(m, range(model.unstable_offset(), model.u()));
  const PlaneBasis s_seed = PlaneBasis::coordinate(m, range(model.stable_offset(), model.s()));
  const PlaneBasis tn = PlaneBasis::coordinate(m, range(0, n));

  SplittingEstimate out;
  out.power_iters = power_iters;
  out.samples.resize(base_points.size(), SplittingSample{Vector(), tn, tn, tn, 0.0});
  parallel_for(static_cast<int>(base_points.size()), [&](int idx) {
    const Vector z0 = lift(model, base_points[static_cast<std::size_t>(idx)]);
    // backward orbit z_{-k}..z_0 and forward orbit z_0..z_k on N
    std::vector<Vector> past{z0}, future{z0};
    for (int k = 0; k < power_iters; ++k) {
      Vector pre = map_inverse_eval(map, past.back(), past.back(), inv);
      on_n(pre);
      pre.tail(m - n).setZero();
      past.push_back(pre);
      Vector img = map.eval(future.back());
      on_n(img);
      img.tail(m - n).setZero();
      future.push_back(img);
    }
    const auto push_from = [&](int depth) {
      PlaneBasis p = u_seed;
      for (int k = depth; k >= 1; --k) p = push(map.jacobian(past[static_cast<std::size_t>(k)]), p);
      return p;
    };
    PlaneBasis eu = push_from(power_iters);
    PlaneBasis es = s_seed;
    for (int k = power_iters - 1; k >= 0; --k) {
      const Matrix J = map.jacobian(future[static_cast<std::size_t>(k)]);
      Eigen::FullPivLU<Matrix> lu(J);
      if (!lu.isInvertible()) throw SingularJacobian("splitting: singular Jacobian on N");
      es = push(lu.inverse(), es);
    }
    // Eu at g(z0) from the same backward orbit, one step shorter in the past.
    PlaneBasis eu_next = u_seed;
    for (int k = power_iters - 1; k >= 0; --k)
      eu_next = push(map.jacobian(past[static_cast<std::size_t>(k)]), eu_next);
    const PlaneBasis pushed = push(map.jacobian(z0), eu);
    SplittingSample& s = out.samples[static_cast<std::size_t>(idx)];
    s.point = z0;
    s.stable = es;
    s.unstable = eu;
    s.tangent = tn;
    s.invariance_residual = pushed.dim() ? grassmann_distance(pushed, eu_next) : 0.0;
  });
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    out.max_invariance_residual = std::max(out.max_invariance_residual, out.samples[i].invariance_residual);
    if (i > 0) {
      const auto& a = out.samples[i - 1];
      const auto& b = out.samples[i];
      if (a.stable.dim()) out.continuity = std::max(out.continuity, grassmann_distance(a.stable, b.stable));
      if (a.unstable.dim())
        out.continuity = std::max(out.continuity, grassmann_distance(a.unstable, b.unstable));
    }
  }
  return out;
}

ClassicalRates check_classical_rates(const GeometricModel& model, const MapDefinition& map,
                                     const SplittingEstimate& splitting, int r) {
  if (r < 1) throw ModelError("classical rates: r must be at least 1");
  ClassicalRates out;
  out.r = r;
  const bool with_base = model.n() > 0;
  if (with_base) {
    out.stable_products.assign(static_cast<std::size_t>(r), 0.0);
    out.unstable_products.assign(static_cast<std::size_t>(r), 0.0);
  }
  for (const auto& s : splitting.samples) {
    const Matrix J = map.jacobian(s.point);
    Eigen::FullPivLU<Matrix> lu(J);
    if (!lu.isInvertible()) throw SingularJacobian("classical rates: singular Jacobian on N");
    const Matrix Jinv = lu.inverse();
    const double rs = restricted_norm(J, s.stable);
    const double ru = s.unstable.dim() ? restricted_norm(Jinv, push(J, s.unstable)) : 0.0;
    const double tf = restricted_norm(J, s.tangent);
    const double ti = restricted_norm(Jinv, s.tangent);
    out.lambda_s = std::max(out.lambda_s, rs);
    out.lambda_u = std::max(out.lambda_u, ru);
    out.tangent_expansion = std::max(out.tangent_expansion, tf);
    out.tangent_contraction = std::max(out.tangent_contraction, ti);
    if (with_base) {
      double ps = rs, pu = ru;
      for (int k = 0; k < r; ++k) {
        ps *= ti;
        pu *= tf;
        out.stable_products[static_cast<std::size_t>(k)] =
            std::max(out.stable_products[static_cast<std::size_t>(k)], ps);
        out.unstable_products[static_cast<std::size_t>(k)] =
            std::max(out.unstable_products[static_cast<std::size_t>(k)], pu);
      }
    }
  }
  out.lambda = std::max(out.lambda_s, out.lambda_u);
  for (double v : out.stable_products) out.lambda = std::max(out.lambda, v);
  for (double v : out.unstable_products) out.lambda = std::max(out.lambda, v);
  out.pass = out.lambda < 1.0;
  return out;
}

}  // namespace nhim
