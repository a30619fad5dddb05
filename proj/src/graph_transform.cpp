#include "nhim/graph_transform.hpp"

#include "nhim/errors.hpp"
#include "nhim/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <sstream>

namespace nhim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Preimages may sit on a box face up to rounding.
constexpr double kDomainSlack = 1e-9;
constexpr int kCoarsePerAxis = 8;

std::vector<GridAxis> section_axes(const GeometricModel& model, SectionKind kind, int base_count,
                                   int fiber_count) {
  std::vector<GridAxis> axes;
  for (int i = 0; i < model.n(); ++i) axes.push_back(angle_axis(base_count));
  const int offset = kind == SectionKind::Unstable ? model.unstable_offset() : model.stable_offset();
  const int count = kind == SectionKind::Unstable ? model.u() : model.s();
  for (int i = 0; i < count; ++i) axes.push_back(interval_axis(model.radius(offset + i), fiber_count));
  return axes;
}

struct NewtonResult {
  Vector w;
  double residual = kInf;
  int steps = 0;
};

// Damped Newton on r(w) = 0; `eval` fills the residual and its Jacobian and
// may throw DomainError, which is treated as a rejected trial.
template <class Eval>
NewtonResult newton_solve(const Eval& eval, Vector w, const NewtonOptions& opt) {
  NewtonResult out;
  const int d = static_cast<int>(w.size());
  Vector r;
  Matrix jr;
  try {
    eval(w, r, jr);
  } catch (const DomainError&) {
    return out;
  }
  double res = d ? r.lpNorm<Eigen::Infinity>() : 0.0;
  out.w = w;
  out.residual = res;
  for (int step = 0; step < opt.max_steps && res > opt.tol; ++step) {
    Eigen::FullPivLU<Matrix> lu(jr);
    if (!lu.isInvertible()) break;
    const Vector delta = lu.solve(-r);
    double t = 1.0;
    bool improved = false;
    Vector trial, tr;
    Matrix tj;
    for (int h = 0; h < 10; ++h, t *= 0.5) {
      trial = w + t * delta;
      try {
        eval(trial, tr, tj);
      } catch (const DomainError&) {
        continue;
      }
      const double tres = tr.lpNorm<Eigen::Infinity>();
      if (tres < res) {
        improved = true;
        res = tres;
        break;
      }
    }
    ++out.steps;
    if (!improved) break;
    w = trial;
    r = tr;
    jr = tj;
    out.w = w;
    out.residual = res;
  }
  return out;
}

// Coarse tensor samples of the unknowns: angles over [0, 2pi), fiber unknowns
// over their box.
std::vector<Vector> coarse_samples(int n_angles, const std::vector<double>& radii) {
  const int d = n_angles + static_cast<int>(radii.size());
  std::vector<Vector> out;
  long long total = 1;
  for (int i = 0; i < d; ++i) total *= kCoarsePerAxis;
  for (long long k = 0; k < total; ++k) {
    Vector w(d);
    long long rem = k;
    for (int a = d - 1; a >= 0; --a) {
      const int i = static_cast<int>(rem % kCoarsePerAxis);
      rem /= kCoarsePerAxis;
      if (a < n_angles) {
        w[a] = kTwoPi * i / kCoarsePerAxis;
      } else {
        const double r = radii[static_cast<std::size_t>(a - n_angles)];
        w[a] = -r + 2.0 * r * i / (kCoarsePerAxis - 1);
      }
    }
    out.push_back(w);
  }
  return out;
}

double unknown_distance(const Vector& a, const Vector& b, int n_angles) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double diff = i < n_angles ? wrap_difference(a[i] - b[i]) : a[i] - b[i];
    d = std::max(d, std::abs(diff));
  }
  return d;
}

std::string describe(const Vector& v) {
  std::ostringstream os;
  os.precision(10);
  os << "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ")";
  return os.str();
}

// One node problem of either transform, with unknowns w of dimension d.
struct NodeProblem {
  int n_angles = 0;                 // leading unknowns that are angles
  std::vector<double> unknown_box;  // radii of the remaining unknowns
  bool box_is_domain = true;        // unknowns outside the box are rejected
  std::function<void(const Vector&, Vector&, Matrix&)> eval;
  std::function<Vector(const Vector&)> value;  // new section value at the solution
};

bool inside_unknown_box(const NodeProblem& p, const Vector& w) {
  for (std::size_t i = 0; i < p.unknown_box.size(); ++i)
    if (std::abs(w[p.n_angles + static_cast<Eigen::Index>(i)]) > p.unknown_box[i] + kDomainSlack)
      return false;
  return true;
}

struct NodeOutcome {
  Vector w;
  Vector value;
};

NodeOutcome solve_node(const NodeProblem& p, int node, const std::vector<Vector>& seeds,
                       bool check_injective, const NewtonOptions& opt, NewtonStats& stats) {
  const int d = p.n_angles + static_cast<int>(p.unknown_box.size());
  if (d == 0) {
    Vector w(0);
    return {w, p.value(w)};
  }
  std::vector<Vector> coarse;
  auto coarse_best = [&](const Vector* avoid) -> std::optional<Vector> {
    if (coarse.empty()) {
      coarse = coarse_samples(p.n_angles, p.unknown_box);
      ++stats.coarse_searches;
    }
    double best = kInf;
    std::optional<Vector> pick;
    double spread = 0.0;
    for (double r : p.unknown_box) spread = std::max(spread, r);
    if (p.n_angles) spread = std::max(spread, kPi / 2);
    for (const auto& c : coarse) {
      if (avoid && unknown_distance(c, *avoid, p.n_angles) < 0.5 * spread) continue;
      Vector r;
      Matrix j;
      try {
        p.eval(c, r, j);
      } catch (const DomainError&) {
        continue;
      }
      const double v = r.lpNorm<Eigen::Infinity>();
      if (v < best) {
        best = v;
        pick = c;
      }
    }
    return pick;
  };

  double best_residual = kInf;
  bool converged_outside = false;
  std::optional<Vector> solution;
  auto attempt = [&](const Vector& seed) -> std::optional<Vector> {
    NewtonResult r = newton_solve(p.eval, seed, opt);
    stats.total_steps += r.steps;
    stats.max_steps = std::max(stats.max_steps, r.steps);
    best_residual = std::min(best_residual, r.residual);
    if (r.residual > opt.tol) return std::nullopt;
    if (!inside_unknown_box(p, r.w)) {
      converged_outside = true;
      return std::nullopt;
    }
    stats.max_residual = std::max(stats.max_residual, r.residual);
    return r.w;
  };
  for (const auto& s : seeds) {
    if ((solution = attempt(s))) break;
  }
  if (!solution) {
    if (auto c = coarse_best(nullptr)) solution = attempt(*c);
  }
  if (!solution) {
    if (converged_outside && !p.box_is_domain)
      throw NodeFailure("ValueOutsideFiber", node, "every solution lies outside the fiber box");
    throw NodeFailure("NewtonFailure", node,
                      converged_outside ? "preimage lies outside the domain"
                                        : "best residual " + std::to_string(best_residual));
  }
  if (check_injective) {
    if (auto c = coarse_best(&*solution)) {
      NewtonResult r = newton_solve(p.eval, *c, opt);
      stats.total_steps += r.steps;
      if (r.residual <= opt.tol && inside_unknown_box(p, r.w) &&
          unknown_distance(r.w, *solution, p.n_angles) > 1e-7)
        throw NodeFailure("NonInjectiveCover", node,
                          "solutions " + describe(*solution) + " and " + describe(r.w));
    }
  }
  Vector w = *solution;
  for (int i = 0; i < p.n_angles; ++i) w[i] = reduce_angle(w[i]);
  return {w, p.value(w)};
}

// Solves every node. With seeds, nodes are independent and run in parallel;
// without, they run in order so each node can start from a solved neighbour.
TransformStep solve_all(const SectionGrid& section, const std::vector<Vector>* seeds,
                        const NewtonOptions& opt,
                        const std::function<NodeProblem(int)>& problem_for) {
  const int count = section.size();
  TransformStep step{section, std::vector<Vector>(static_cast<std::size_t>(count)), {}};
  const GeometricModel& model = section.model();
  const int value_dim = section.value_dim();
  const bool fiber_s = section.kind() == SectionKind::Unstable;
  const auto check_value = [&](int node, const Vector& v) {
    const int offset = fiber_s ? model.stable_offset() : model.unstable_offset();
    for (int i = 0; i < value_dim; ++i)
      if (std::abs(v[i]) > model.radius(offset + i) + kBoundaryTolerance)
        throw NodeFailure("ValueOutsideFiber", node, "value " + describe(v) + " leaves the fiber box");
  };
  if (seeds && static_cast<int>(seeds->size()) == count) {
    std::vector<NewtonStats> stats(static_cast<std::size_t>(count));
    parallel_for(count, [&](int i) {
      const NodeProblem p = problem_for(i);
      const NodeOutcome o = solve_node(p, i, {(*seeds)[static_cast<std::size_t>(i)]}, false, opt,
                                       stats[static_cast<std::size_t>(i)]);
      check_value(i, o.value);
      step.correspondence[static_cast<std::size_t>(i)] = o.w;
      step.section.values().row(i) = o.value.transpose();
    });
    for (const auto& s : stats) {
      step.newton.max_steps = std::max(step.newton.max_steps, s.max_steps);
      step.newton.total_steps += s.total_steps;
      step.newton.max_residual = std::max(step.newton.max_residual, s.max_residual);
      step.newton.coarse_searches += s.coarse_searches;
    }
    return step;
  }
  const RegularGrid& grid = section.domain();
  std::vector<char> solved(static_cast<std::size_t>(count), 0);
  for (int i = 0; i < count; ++i) {
    std::vector<Vector> s;
    for (int a = 0; a < grid.dim() && s.empty(); ++a) {
      for (int dir : {-1, 1}) {
        const int j = grid.neighbor(i, a, dir);
        if (j >= 0 && solved[static_cast<std::size_t>(j)]) {
          s.push_back(step.correspondence[static_cast<std::size_t>(j)]);
          break;
        }
      }
    }
    const NodeProblem p = problem_for(i);
    const NodeOutcome o = solve_node(p, i, s, true, opt, step.newton);
    check_value(i, o.value);
    step.correspondence[static_cast<std::size_t>(i)] = o.w;
    step.section.values().row(i) = o.value.transpose();
    solved[static_cast<std::size_t>(i)] = 1;
  }
  return step;
}

}  // namespace

const char* to_string(SectionKind k) { return k == SectionKind::Unstable ? "unstable" : "stable"; }

SectionGrid::SectionGrid(const GeometricModel& model, SectionKind kind, int base_count,
                         int fiber_count)
    : model_(model),
      kind_(kind),
      base_count_(base_count),
      fiber_count_(fiber_count),
      domain_(section_axes(model, kind, base_count, fiber_count)),
      values_(Matrix::Zero(domain_.size(), kind == SectionKind::Unstable ? model.s() : model.u())) {}

SectionGrid SectionGrid::constant(const GeometricModel& model, SectionKind kind, int base_count,
                                  int fiber_count, const Vector& value) {
  SectionGrid g(model, kind, base_count, fiber_count);
  if (value.size() != g.value_dim()) throw ModelError("section: constant has wrong dimension");
  for (int i = 0; i < g.size(); ++i) g.values_.row(i) = value.transpose();
  return g;
}

SectionGrid SectionGrid::from_function(const GeometricModel& model, SectionKind kind,
                                       int base_count, int fiber_count,
                                       const std::function<Vector(const Vector&)>& fn) {
  SectionGrid g(model, kind, base_count, fiber_count);
  for (int i = 0; i < g.size(); ++i) {
    const Vector v = fn(g.domain_.node(i));
    if (v.size() != g.value_dim()) throw ModelError("section: value has wrong dimension");
    g.values_.row(i) = v.transpose();
  }
  return g;
}

Vector SectionGrid::value_at(const Vector& domain_point, Matrix* gradient) const {
  return domain_.interpolate(values_, domain_point, gradient);
}

Vector SectionGrid::ambient(const Vector& domain_point, const Vector& value) const {
  const int n = model_.n();
  Vector z(model_.m());
  z.head(n) = domain_point.head(n);
  if (kind_ == SectionKind::Unstable) {
    z.segment(n, model_.s()) = value;
    z.tail(model_.u()) = domain_point.tail(model_.u());
  } else {
    z.segment(n, model_.s()) = domain_point.tail(model_.s());
    z.tail(model_.u()) = value;
  }
  return z;
}

Vector SectionGrid::ambient_at_node(int node) const {
  return ambient(domain_.node(node), values_.row(node).transpose());
}

double SectionGrid::fiber_violation() const {
  const int offset = kind_ == SectionKind::Unstable ? model_.stable_offset() : model_.unstable_offset();
  double worst = 0.0;
  for (int i = 0; i < size(); ++i)
    for (int j = 0; j < value_dim(); ++j)
      worst = std::max(worst, std::abs(values_(i, j)) - model_.radius(offset + j));
  return worst;
}

TransformStep apply_unstable_transform(const MapDefinition& map, const GeometricModel& model,
                                       const SectionGrid& section, const std::vector<Vector>* seeds,
                                       const NewtonOptions& newton) {
  if (section.kind() != SectionKind::Unstable)
    throw ModelError("apply_unstable_transform: section is not unstable");
  check_compatible(model, map);
  const int n = model.n(), s = model.s(), u = model.u(), m = model.m();
  const int d = n + u;
  std::vector<double> box;
  for (int i = 0; i < u; ++i) box.push_back(model.radius(model.unstable_offset() + i));
  return solve_all(section, seeds, newton, [&, box](int node) {
    const Vector zeta = section.domain().node(node);
    NodeProblem p;
    p.n_angles = n;
    p.unknown_box = box;
    p.eval = [&, zeta](const Vector& w, Vector& r, Matrix& jr) {
      Matrix grad;
      const Vector sigma = section.value_at(w, &grad);
      const Vector z = section.ambient(w, sigma);
      Vector gz;
      Matrix J;
      map.eval_with_jacobian(z, gz, J);
      Matrix dz = Matrix::Zero(m, d);
      for (int i = 0; i < n; ++i) dz(i, i) = 1.0;
      if (s) dz.middleRows(n, s) = grad;
      for (int i = 0; i < u; ++i) dz(n + s + i, n + i) = 1.0;
      r.resize(d);
      jr.resize(d, d);
      for (int i = 0; i < n; ++i) r[i] = wrap_difference(gz[i] - zeta[i]);
      for (int i = 0; i < u; ++i) r[n + i] = gz[n + s + i] - zeta[n + i];
      const Matrix Jdz = J * dz;
      jr.topRows(n) = Jdz.topRows(n);
      jr.bottomRows(u) = Jdz.bottomRows(u);
    };
    p.value = [&](const Vector& w) {
      const Vector z = section.ambient(w, section.value_at(w));
      return Vector(map.eval(z).segment(n, s));
    };
    return p;
  });
}

TransformStep apply_stable_transform(const MapDefinition& map, const GeometricModel& model,
                                     const SectionGrid& section, const std::vector<Vector>* seeds,
                                     const NewtonOptions& newton) {
  if (section.kind() != SectionKind::Stable)
    throw ModelError("apply_stable_transform: section is not stable");
  check_compatible(model, map);
  const int n = model.n(), s = model.s(), u = model.u();
  std::vector<double> box;
  for (int i = 0; i < u; ++i) box.push_back(model.radius(model.unstable_offset() + i));
  return solve_all(section, seeds, newton, [&, box](int node) {
    const Vector zeta = section.domain().node(node);
    NodeProblem p;
    p.n_angles = 0;
    p.unknown_box = box;
    p.box_is_domain = false;
    p.eval = [&, zeta](const Vector& eta, Vector& r, Matrix& jr) {
      const Vector z = section.ambient(zeta, eta);
      Vector gz;
      Matrix J;
      map.eval_with_jacobian(z, gz, J);
      Vector q(n + s);
      q << gz.head(n + s);
      Matrix grad;
      const Vector tau = section.value_at(q, &grad);
      r = gz.tail(u) - tau;
      jr = J.bottomRightCorner(u, u) - grad * J.topRightCorner(n + s, u);
    };
    p.value = [](const Vector& eta) { return eta; };
    return p;
  });
}

TransformStep apply_transform(const MapDefinition& map, const GeometricModel& model,
                              const SectionGrid& section, const std::vector<Vector>* seeds,
                              const NewtonOptions& newton) {
  return section.kind() == SectionKind::Unstable
             ? apply_unstable_transform(map, model, section, seeds, newton)
             : apply_stable_transform(map, model, section, seeds, newton);
}

namespace {

Vector flatten(const Matrix& values) {
  return Eigen::Map<const Vector>(values.data(), values.size());
}

Matrix unflatten(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

}  // namespace

TransformResult iterate_transform(const MapDefinition& map, const GeometricModel& model,
                                  const SectionGrid& init, const SolverOptions& options) {
  const NewtonOptions newton{options.newton_tol, options.newton_max};
  TransformReport report;
  report.kind = init.kind();
  SectionGrid current = init;
  std::vector<Vector> seeds;
  bool have_seeds = false;
  bool change_met = false;
  const auto rows = init.values().rows();
  const auto cols = init.values().cols();
  std::deque<Vector> dx, df;
  const auto merge_stats = [&](const NewtonStats& s) {
    report.newton.max_steps = std::max(report.newton.max_steps, s.max_steps);
    report.newton.total_steps += s.total_steps;
    report.newton.max_residual = std::max(report.newton.max_residual, s.max_residual);
    report.newton.coarse_searches += s.coarse_searches;
  };
  const double lip_limit = 1.0 + options.lip_slack;
  try {
    TransformStep step = apply_transform(map, model, current, nullptr, newton);
    merge_stats(step.newton);
    have_seeds = true;
    bool accelerate = options.acceleration == Acceleration::Anderson && options.anderson_depth > 0;
    for (int it = 0;; ++it) {
      seeds = step.correspondence;
      ++report.iterations;
      const Vector x = flatten(current.values());
      const Vector gx = flatten(step.section.values());
      const Vector f = gx - x;
      const double change = f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;
      report.changes.push_back(change);
      const double lip = lipschitz_estimate(step.section).global;
      report.lipschitz.push_back(lip);
      if (lip > lip_limit) report.lipschitz_exceeded = true;
      if (change < options.tol_change) {
        current = std::move(step.section);
        change_met = true;
        break;
      }
      if (it + 1 >= options.max_iter) {
        current = std::move(step.section);
        break;
      }
      Vector next = gx;
      std::optional<TransformStep> next_step;
      if (accelerate && !dx.empty()) {
        const auto k = static_cast<Eigen::Index>(dx.size());
        Matrix DX(x.size(), k), DF(x.size(), k);
        for (Eigen::Index j = 0; j < k; ++j) {
          DX.col(j) = dx[static_cast<std::size_t>(j)];
          DF.col(j) = df[static_cast<std::size_t>(j)];
        }
        Eigen::ColPivHouseholderQR<Matrix> qr(DF);
        qr.setThreshold(1e-10);
        const Vector gamma = qr.solve(f);
        const Vector correction = x + f - (DX + DF) * gamma - gx;
        // Shorten the extrapolation until the mixed iterate stays in the box
        // and lowers the residual; otherwise fall back to the plain step.
        SectionGrid probe = current;
        double t = 1.0;
        int evaluated = 0;
        for (int h = 0; h < 60 && evaluated < 20 && correction.allFinite(); ++h, t *= 0.5) {
          const Vector candidate = gx + t * correction;
          probe.values() = unflatten(candidate, rows, cols);
          if (probe.fiber_violation() > 0.0) continue;
          ++evaluated;
          try {
            TransformStep trial = apply_transform(map, model, probe, &seeds, newton);
            merge_stats(trial.newton);
            const Vector fc = flatten(trial.section.values()) - candidate;
            if (fc.lpNorm<Eigen::Infinity>() < change) {
              next = candidate;
              next_step = std::move(trial);
              break;
            }
          } catch (const NodeFailure&) {
          }
        }
        if (!next_step) {
          dx.clear();
          df.clear();
        }
      }
      current.values() = unflatten(next, rows, cols);
      if (!next_step) {
        next_step = apply_transform(map, model, current, &seeds, newton);
        merge_stats(next_step->newton);
      }
      step = std::move(*next_step);
      if (accelerate) {
        const Vector fn = flatten(step.section.values()) - next;
        dx.push_back(next - x);
        df.push_back(fn - f);
        if (static_cast<int>(dx.size()) > options.anderson_depth) {
          dx.pop_front();
          df.pop_front();
        }
      }
    }
    if (!change_met) report.max_iter_reached = true;
    const TransformStep check = apply_transform(map, model, current, have_seeds ? &seeds : nullptr, newton);
    merge_stats(check.newton);
    const Vector diff = flatten(check.section.values()) - flatten(current.values());
    report.residual = diff.size() ? diff.lpNorm<Eigen::Infinity>() : 0.0;
  } catch (const NodeFailure& e) {
    report.failed = true;
    report.failure = e.what();
  }
  report.lipschitz_final = lipschitz_estimate(current).global;
  if (!report.failed) {
    report.converged = change_met && report.residual <= 10.0 * options.tol_residual;
    report.stalled = change_met && !report.converged;
  }
  const auto& c = report.changes;
  if (c.size() >= 3 && c[c.size() - 2] > 0.0 && c.back() / c[c.size() - 2] > 0.9 &&
      options.acceleration == Acceleration::None)
    report.slow_contraction = true;
  return {std::move(current), std::move(report)};
}

LipschitzEstimate lipschitz_estimate(const SectionGrid& section) {
  LipschitzEstimate out;
  const RegularGrid& grid = section.domain();
  out.per_node.assign(static_cast<std::size_t>(grid.size()), 0.0);
  if (section.value_dim() == 0) return out;
  for (int i = 0; i < grid.size(); ++i) {
    for (int a = 0; a < grid.dim(); ++a) {
      const int j = grid.neighbor(i, a, +1);
      if (j < 0 || j == i) continue;
      const double h = grid.axis(a).step();
      const double slope = (section.values().row(j) - section.values().row(i)).norm() / h;
      out.per_node[static_cast<std::size_t>(i)] = std::max(out.per_node[static_cast<std::size_t>(i)], slope);
      out.per_node[static_cast<std::size_t>(j)] = std::max(out.per_node[static_cast<std::size_t>(j)], slope);
      out.global = std::max(out.global, slope);
    }
  }
  return out;
}

Vector ManifoldGrid::point(int node) const {
  Vector z(n + s + u);
  z.head(n) = base.node(node);
  z.tail(s + u) = fiber.row(node).transpose();
  return z;
}

Vector ManifoldGrid::point_over(const Vector& base_point, Matrix* gradient) const {
  Vector z(n + s + u);
  z.head(n) = base_point;
  for (int i = 0; i < n; ++i) z[i] = reduce_angle(z[i]);
  z.tail(s + u) = base.interpolate(fiber, base_point, gradient);
  return z;
}

ManifoldGrid ManifoldGrid::zero_section(const GeometricModel& model, int base_count) {
  ManifoldGrid g;
  g.n = model.n();
  g.s = model.s();
  g.u = model.u();
  std::vector<GridAxis> axes;
  for (int i = 0; i < g.n; ++i) axes.push_back(angle_axis(base_count));
  g.base = RegularGrid(std::move(axes));
  g.fiber = Matrix::Zero(g.base.size(), g.s + g.u);
  return g;
}

ManifoldGrid intersect_graphs(const SectionGrid& unstable, const SectionGrid& stable,
                              const GeometricModel& model, IntersectionReport* report) {
  if (unstable.kind() != SectionKind::Unstable || stable.kind() != SectionKind::Stable)
    throw ModelError("intersect_graphs: expected an unstable and a stable section");
  if (unstable.base_count() != stable.base_count())
    throw ModelError("intersect_graphs: sections use different base grids");
  const int n = model.n(), s = model.s(), u = model.u();
  ManifoldGrid out = ManifoldGrid::zero_section(model, unstable.base_count());
  IntersectionReport local;
  const auto inside = [&](const Vector& xs, const Vector& xu) {
    for (int i = 0; i < s; ++i)
      if (std::abs(xs[i]) > model.radius(n + i) + kDomainSlack) return false;
    for (int i = 0; i < u; ++i)
      if (std::abs(xu[i]) > model.radius(n + s + i) + kDomainSlack) return false;
    return true;
  };
  for (int node = 0; node < out.size(); ++node) {
    const Vector x = out.base.node(node);
    Vector xs = Vector::Zero(s), xu = Vector::Zero(u);
    const auto du = [&](const Vector& v) {
      Vector p(n + u);
      p << x, v;
      return p;
    };
    const auto ds = [&](const Vector& v) {
      Vector p(n + s);
      p << x, v;
      return p;
    };
    int it = 0;
    for (; it < 500; ++it) {
      const Vector ns = unstable.value_at(du(xu));
      const Vector nu = stable.value_at(ds(ns));
      if (!inside(ns, nu))
        throw NoIntersection("intersect_graphs: iteration leaves B over base node " + std::to_string(node));
      double change = 0.0;
      if (s) change = std::max(change, (ns - xs).lpNorm<Eigen::Infinity>());
      if (u) change = std::max(change, (nu - xu).lpNorm<Eigen::Infinity>());
      xs = ns;
      xu = nu;
      if (change < 1e-15) break;
    }
    local.max_iterations = std::max(local.max_iterations, it + 1);
    // Newton polish on (xs - su(x, xu), xu - ss(x, xs)).
    double res = kInf;
    for (int step = 0; step < 30; ++step) {
      Matrix gu, gs;
      const Vector vs = unstable.value_at(du(xu), &gu);
      const Vector vu = stable.value_at(ds(xs), &gs);
      Vector F(s + u);
      F << xs - vs, xu - vu;
      res = F.size() ? F.lpNorm<Eigen::Infinity>() : 0.0;
      const Matrix a = gu.rightCols(u);  // d su / d xu
      const Matrix b = gs.rightCols(s);  // d ss / d xs
      if (step == 0 && s && u) {
        const double prod = (a.size() ? a.norm() : 0.0) * (b.size() ? b.norm() : 0.0);
        if (prod >= 1.0) local.slow_convergence = true;
      }
      if (res <= 1e-15 || F.size() == 0) break;
      Matrix JF = Matrix::Identity(s + u, s + u);
      JF.topRightCorner(s, u) = -a;
      JF.bottomLeftCorner(u, s) = -b;
      const Vector delta = JF.fullPivLu().solve(-F);
      xs += delta.head(s);
      xu += delta.tail(u);
    }
    {
      const Vector vs = unstable.value_at(du(xu));
      const Vector vu = stable.value_at(ds(xs));
      Vector F(s + u);
      F << xs - vs, xu - vu;
      res = F.size() ? F.lpNorm<Eigen::Infinity>() : 0.0;
    }
    if (!(res <= 1e-12))
      throw NoIntersection("intersect_graphs: residual " + std::to_string(res) + " over base node " +
                           std::to_string(node));
    if (!inside(xs, xu))
      throw NoIntersection("intersect_graphs: intersection outside B over base node " + std::to_string(node));
    local.max_residual = std::max(local.max_residual, res);
    out.fiber.row(node).head(s) = xs.transpose();
    out.fiber.row(node).tail(u) = xu.transpose();
  }
  if (report) *report = local;
  return out;
}

double manifold_invariance_error(const MapDefinition& map, const ManifoldGrid& manifold) {
  double worst = 0.0;
  const int n = manifold.n;
  for (int i = 0; i < manifold.size(); ++i) {
    const Vector q = map.eval(manifold.point(i));
    const Vector on = manifold.point_over(q.head(n));
    worst = std::max(worst, (q.tail(manifold.s + manifold.u) - on.tail(manifold.s + manifold.u))
                                .lpNorm<Eigen::Infinity>());
  }
  return worst;
}

}  // namespace nhim
