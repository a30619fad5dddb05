#include "nhim/persistence.hpp"

#include "nhim/errors.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

namespace nhim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string number_text(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

void require(bool ok, const std::string& demo, const std::string& what) {
  if (!ok) throw ModelError("demo " + demo + ": self-check failed: " + what);
}

PipelineOptions demo_options(int section_base, int section_fiber, CheckGrid check,
                             Acceleration accel) {
  PipelineOptions o;
  o.section_base = section_base;
  o.section_fiber = section_fiber;
  o.check = check;
  o.solver.acceleration = accel;
  o.solver.max_iter = 300;
  return o;
}

DemoSystem pitchfork() {
  DemoSystem d{"pitchfork-saddle",
               "f(x,y) = (x - x^3, 2y) on [-0.5,0.5]^2: topologically but not classically "
               "normally hyperbolic at the origin",
               make_model(0, 1, 1, {0.5}, {0.5}),
               MapDefinition({"x", "y"}, {}, std::vector<std::string>{"x - x^3", "2*y"},
                             {false, false}),
               true,
               false,
               demo_options(1, 201, {1, 201, 64}, Acceleration::Anderson),
               {1.0, 0.0}};
  Vector o = Vector::Zero(2);
  require(d.map.eval(o).norm() == 0.0, d.name, "origin is fixed");
  Vector edge(2);
  edge << 0.5, 0.0;
  require(std::abs(d.map.eval(edge)[0] - 0.375) < 1e-15, d.name, "image of the stable face");
  return d;
}

DemoSystem circle_skew() {
  DemoSystem d{"circle-skew",
               "skew product over b(theta) = theta - alpha sin(theta) with fibre maps "
               "interpolating ((1-beta)x, y+y^3) at theta=0 and (x-x^3, (1+beta)y) at theta=pi",
               make_model(1, 1, 1, {0.25}, {0.25}),
               MapDefinition({"theta", "x", "y"}, {{"alpha", 0.5}, {"beta", 0.75}},
                             std::vector<std::string>{
                                 "theta - alpha*sin(theta)",
                                 "(1 - beta*(1 + cos(theta))/2)*x - ((1 - cos(theta))/2)*x^3",
                                 "(1 + beta*(1 - cos(theta))/2)*y + ((1 + cos(theta))/2)*y^3"},
                             {true, false, false}),
               true,
               false,
               demo_options(64, 17, {32, 17, 32}, Acceleration::Anderson),
               {0.0, 1.0, 0.0}};
  const double delta = 0.25;
  double worst_ratio = 0.0;
  for (int k = 0; k < 512; ++k) {
    const double th = kTwoPi * k / 512;
    Vector z(3);
    z << th, 0.0, 0.0;
    const Vector g0 = d.map.eval(z);
    require(std::abs(g0[1]) + std::abs(g0[2]) == 0.0, d.name, "fibre maps fix 0");
    for (int j = 0; j <= 64; ++j) {
      const double x = -delta + 2 * delta * j / 64;
      z << th, x, 0.0;
      require(std::abs(d.map.eval(z)[1]) < delta, d.name, "stable fibre map sends [-d,d] into (-d,d)");
      z << th, 0.0, x;
      const Vector w = d.map.eval(z);
      require(std::abs(x) < delta || std::abs(w[2]) > delta, d.name,
              "unstable fibre map sends the boundary outside");
    }
    z << th, 0.0, 0.0;
    const Matrix J = d.map.jacobian(z);
    const double base = std::abs(J(0, 0));
    worst_ratio = std::max({worst_ratio, std::abs(J(1, 1)) / base, base / std::abs(J(2, 2))});
  }
  require(worst_ratio < 1.0, d.name, "dominated splitting on N");
  return d;
}

MapDefinition rotation_map(const std::string& forcing) {
  const std::map<std::string, double> p{{"omega", kTwoPi * 85.0 / 512.0}, {"forcing", 0.05}};
  if (forcing.empty())
    return MapDefinition({"theta", "x", "y"}, p,
                         std::vector<std::string>{"theta + omega", "x/2", "2*y"}, {true, false, false},
                         std::vector<std::string>{"theta - omega", "2*x", "y/2"});
  return MapDefinition({"theta", "x"}, p,
                       std::vector<std::string>{"theta + omega", "x/2 + forcing*cos(theta)"},
                       {true, false},
                       std::vector<std::string>{"theta - omega", "2*(x - forcing*cos(theta - omega))"});
}

DemoSystem rotation_saddle() {
  DemoSystem d{"rotation-saddle",
               "(theta + omega, x/2, 2y) with omega = 2pi*85/512: classically normally "
               "hyperbolic control",
               make_model(1, 1, 1, {0.5}, {0.5}),
               rotation_map(""),
               true,
               true,
               demo_options(512, 9, {32, 17, 32}, Acceleration::None),
               {0.0, 1.0, 0.0}};
  require(inverse_round_trip_error(d.map, d.model) < 1e-8, d.name, "inverse formulas round trip");
  return d;
}

DemoSystem forced_rotation() {
  DemoSystem d{"forced-rotation",
               "(theta + omega, x/2 + forcing cos(theta)): invariant curve Re(A e^{i theta}) with "
               "A = forcing / (e^{i omega} - 1/2)",
               make_model(1, 1, 0, {0.5}, {}),
               rotation_map("forced"),
               true,
               true,
               demo_options(512, 3, {512, 201, 64}, Acceleration::None),
               {0.0, 1.0}};
  d.options.solver.tol_change = 1e-14;
  d.options.solver.tol_residual = 1e-14;
  require(inverse_round_trip_error(d.map, d.model) < 1e-8, d.name, "inverse formulas round trip");
  return d;
}

DemoSystem non_example() {
  DemoSystem d{"non-example",
               "f(x,y) = (x - x^3, y + y^3): the origin is not topologically normally hyperbolic "
               "(cone condition fails); must fail",
               make_model(0, 1, 1, {0.5}, {0.5}),
               MapDefinition({"x", "y"}, {}, std::vector<std::string>{"x - x^3", "y + y^3"},
                             {false, false}),
               false,
               false,
               demo_options(1, 201, {1, 201, 64}, Acceleration::None),
               {1.0, 0.0}};
  require((d.map.jacobian(Vector::Zero(2)) - Matrix::Identity(2, 2)).norm() == 0.0, d.name,
          "Jacobian at the origin is the identity");
  return d;
}

double section_c0(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ModelError("c0_distance: grids do not match");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) worst = std::max(worst, (a.row(i) - b.row(i)).norm());
  return worst;
}

double tangent_gap(const std::vector<PlaneBasis>& ta, const std::vector<PlaneBasis>& tb) {
  if (ta.size() != tb.size()) throw ModelError("c1_distance: tangent fields do not match");
  double worst = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i)
    if (ta[i].dim()) worst = std::max(worst, grassmann_distance(ta[i], tb[i]));
  return worst;
}

}  // namespace

const std::vector<DemoSystem>& registry() {
  static const std::vector<DemoSystem> demos = [] {
    std::vector<DemoSystem> v;
    v.push_back(pitchfork());
    v.push_back(circle_skew());
    v.push_back(rotation_saddle());
    v.push_back(forced_rotation());
    v.push_back(non_example());
    return v;
  }();
  return demos;
}

const DemoSystem& find_demo(const std::string& name) {
  for (const auto& d : registry())
    if (d.name == name) return d;
  std::string known;
  for (const auto& d : registry()) known += (known.empty() ? "" : ", ") + d.name;
  throw ConfigError("unknown demo '" + name + "' (known: " + known + ")");
}

PerturbationFamily shift_family(const std::vector<double>& direction) {
  PerturbationFamily f;
  f.name = "shift";
  for (double c : direction) f.formulas.push_back(number_text(c));
  return f;
}

PerturbationFamily random_trig_family(const MapDefinition& map, int degree, double bound,
                                      std::uint64_t seed) {
  if (degree < 1) throw ConfigError("sweep.random.degree: must be at least 1");
  if (!(bound > 0.0)) throw ConfigError("sweep.random.bound: must be positive");
  PerturbationFamily f;
  f.name = "random-trig";
  f.random = RandomTrigSpec{degree, bound};
  f.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  const int m = map.dim();
  const double scale = bound / (2.0 * degree * m);
  for (int i = 0; i < m; ++i) {
    std::string text;
    for (int d = 1; d <= degree; ++d) {
      for (const auto& var : map.variables()) {
        const std::string arg = d == 1 ? var : std::to_string(d) + "*" + var;
        for (const char* fn : {"cos", "sin"}) {
          const double a = coef(rng) * scale;
          if (!text.empty()) text += " + ";
          text += number_text(a) + "*" + fn + "(" + arg + ")";
        }
      }
    }
    f.formulas.push_back(text);
  }
  return f;
}

PerturbedMap perturb(const MapDefinition& map, const GeometricModel& model,
                     const PerturbationFamily& family, double eps) {
  if (static_cast<int>(family.formulas.size()) != map.dim())
    throw ConfigError("sweep.family: expected " + std::to_string(map.dim()) + " components");
  if (eps == 0.0) return {map, 0.0};
  const auto decls = map.declarations();
  std::vector<dsl::Expression> exprs;
  for (int i = 0; i < map.dim(); ++i) {
    const auto p = dsl::parse_expression(family.formulas[static_cast<std::size_t>(i)], decls);
    const auto& f = map.forward()[static_cast<std::size_t>(i)];
    const bool zero = p.root()->kind == dsl::NodeKind::Number && p.root()->value == 0.0;
    exprs.push_back(zero ? f : dsl::Expression::add(f, dsl::Expression::mul(dsl::Expression::number(eps), p)));
  }
  PerturbedMap out{MapDefinition(map.variables(), map.parameters(), std::move(exprs), map.periodic()), 0.0};
  int per_axis = std::max(3, static_cast<int>(std::floor(std::pow(20000.0, 1.0 / model.m()))));
  const RegularGrid grid = box_grid(model, {per_axis, per_axis, 0});
  for (int k = 0; k < grid.size(); ++k) {
    const Vector z = grid.node(k);
    Vector a, b;
    Matrix ja, jb;
    map.eval_with_jacobian(z, a, ja);
    out.map.eval_with_jacobian(z, b, jb);
    const double d0 = periodic_residual(map, b, a).norm();
    const double d1 = (jb - ja).norm() == 0.0 ? 0.0 : Eigen::JacobiSVD<Matrix>(jb - ja).singularValues()[0];
    out.c1_size = std::max(out.c1_size, d0 + d1);
  }
  return out;
}

double c0_distance(const ManifoldGrid& a, const ManifoldGrid& b) {
  if (!(a.base == b.base)) throw ModelError("c0_distance: base grids do not match");
  return section_c0(a.fiber, b.fiber);
}

double c0_distance(const SectionGrid& a, const SectionGrid& b) {
  if (a.kind() != b.kind() || !(a.domain() == b.domain()))
    throw ModelError("c0_distance: section grids do not match");
  return section_c0(a.values(), b.values());
}

double c1_distance(const ManifoldGrid& a, const ManifoldGrid& b, const std::vector<PlaneBasis>& ta,
                   const std::vector<PlaneBasis>& tb) {
  return c0_distance(a, b) + tangent_gap(ta, tb);
}

double c1_distance(const SectionGrid& a, const SectionGrid& b, const std::vector<PlaneBasis>& ta,
                   const std::vector<PlaneBasis>& tb) {
  return c0_distance(a, b) + tangent_gap(ta, tb);
}

std::vector<PlaneBasis> graph_tangents(const SectionGrid& section) {
  std::vector<PlaneBasis> out;
  for (int i = 0; i < section.size(); ++i) out.push_back(tangent_from_graph(section, i));
  return out;
}

ManifoldComputation compute_manifold(const GeometricModel& model, const MapDefinition& map,
                                     const PipelineOptions& options) {
  ManifoldComputation out;
  const SectionGrid zu(model, SectionKind::Unstable, options.section_base, options.section_fiber);
  const SectionGrid zs(model, SectionKind::Stable, options.section_base, options.section_fiber);
  out.unstable = iterate_transform(map, model, zu, options.solver);
  out.stable = iterate_transform(map, model, zs, options.solver);
  for (const auto* r : {&*out.unstable, &*out.stable}) {
    if (r->report.failed) {
      out.failure = std::string(to_string(r->report.kind)) + " transform: " + r->report.failure;
      return out;
    }
  }
  try {
    out.manifold = intersect_graphs(out.unstable->section, out.stable->section, model, &out.intersection);
  } catch (const NoIntersection& e) {
    out.failure = e.what();
    return out;
  }
  out.inside_box = true;
  for (int i = 0; i < out.manifold->size(); ++i)
    if (classify_point(model, out.manifold->point(i)) == PointClass::Outside) out.inside_box = false;
  out.tangent_cone_margin_s = kInf;
  out.tangent_cone_margin_u = kInf;
  if (options.tangents) {
    try {
      out.tangents = compute_tangent_by_cone_iteration(map, model, *out.manifold, TangentTarget::N,
                                                       options.solver.depth_k);
      out.manifold->tangents = out.tangents->planes;
      for (const auto& p : out.tangents->planes) {
        out.tangent_cone_margin_s = std::min(out.tangent_cone_margin_s, plane_in_cone_margin(model, p, ConeKind::Stable));
        out.tangent_cone_margin_u = std::min(out.tangent_cone_margin_u, plane_in_cone_margin(model, p, ConeKind::Unstable));
      }
      out.invariance = verify_tangent_invariance(map, model, *out.manifold, *out.tangents);
    } catch (const Error& e) {
      out.failure = std::string("tangent field: ") + e.what();
      return out;
    }
  }
  out.ok = out.unstable->report.converged && out.stable->report.converged && out.inside_box &&
           out.tangent_cone_margin_s >= 0.0 && out.tangent_cone_margin_u >= 0.0;
  if (!out.ok) {
    if (!out.unstable->report.converged) out.failure = "unstable transform did not converge";
    else if (!out.stable->report.converged) out.failure = "stable transform did not converge";
    else if (!out.inside_box) out.failure = "manifold leaves B";
    else out.failure = "tangent planes leave the cones";
  }
  return out;
}

SweepReport run_persistence_sweep(const DemoSystem& demo, const PerturbationFamily& family,
                                  const std::vector<double>& eps_list,
                                  const PipelineOptions& options) {
  SweepReport report;
  report.demo = demo.name;
  report.family = family.name;
  report.seed = family.seed;
  const CheckReport base_check = run_topological_check(demo.model, demo.map, options.check);
  std::optional<ManifoldComputation> baseline;
  if (demo.expect_topological && base_check.pass) baseline = compute_manifold(demo.model, demo.map, options);
  for (double eps : eps_list) {
    const auto start = std::chrono::steady_clock::now();
    SweepRow row;
    row.eps = eps;
    try {
      const PerturbedMap pm = perturb(demo.map, demo.model, family, eps);
      row.c1_size = pm.c1_size;
      row.check = run_topological_check(demo.model, pm.map, options.check);
      if (!demo.expect_topological) {
        row.failure = "registered must-fail demo: transforms not attempted";
      } else if (!row.check.pass) {
        row.failure = "topological check failed";
      } else {
        row.transforms_attempted = true;
        ManifoldComputation mc = compute_manifold(demo.model, pm.map, options);
        row.unstable_converged = mc.unstable && mc.unstable->report.converged;
        row.stable_converged = mc.stable && mc.stable->report.converged;
        if (mc.unstable) row.unstable_residual = mc.unstable->report.residual;
        if (mc.stable) row.stable_residual = mc.stable->report.residual;
        row.inside_box = mc.inside_box;
        row.tangents_in_cones = mc.tangents && mc.tangent_cone_margin_s >= 0.0 && mc.tangent_cone_margin_u >= 0.0;
        row.manifold_ok = mc.ok;
        row.failure = mc.failure;
        if (mc.manifold) {
          row.manifold = mc.manifold;
          if (baseline && baseline->manifold) {
            row.c0 = c0_distance(*mc.manifold, *baseline->manifold);
            row.c1 = row.c0;
            if (mc.manifold->tangents.size() == baseline->manifold->tangents.size() &&
                !mc.manifold->tangents.empty())
              row.c1 = c1_distance(*mc.manifold, *baseline->manifold, mc.manifold->tangents,
                                   baseline->manifold->tangents);
          }
        }
      }
    } catch (const Error& e) {
      row.failure = e.what();
    }
    row.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (eps != 0.0) {
      const double pairs[4][2] = {
          {row.check.boundary.image_vs_stable_boundary, base_check.boundary.image_vs_stable_boundary},
          {row.check.boundary.unstable_boundary_escape, base_check.boundary.unstable_boundary_escape},
          {row.check.cones.cone_margin_s, base_check.cones.cone_margin_s},
          {row.check.cones.cone_margin_u, base_check.cones.cone_margin_u}};
      for (const auto& p : pairs)
        if (std::isfinite(p[0]) && std::isfinite(p[1]))
          report.check_stability_constant =
              std::max(report.check_stability_constant, std::abs(p[0] - p[1]) / std::abs(eps));
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::vector<EscapeResult> escape_time_probe(const MapDefinition& map, const GeometricModel& model,
                                            const std::vector<Vector>& points, int k_max) {
  InverseOptions inv;
  inv.domain = model;
  std::vector<EscapeResult> out;
  for (const Vector& p0 : points) {
    EscapeResult r;
    r.point = p0;
    Vector z = p0;
    for (int k = 1; k <= k_max; ++k) {
      z = map.eval(z);
      if (classify_point(model, z) == PointClass::Outside) {
        r.forward_exit = k;
        break;
      }
    }
    z = p0;
    for (int k = 1; k <= k_max; ++k) {
      try {
        z = map_inverse_eval(map, z, z, inv);
      } catch (const Error&) {
        r.backward_exit = k;
        r.backward_inverse_failed = true;
        break;
      }
      if (classify_point(model, z) == PointClass::Outside) {
        r.backward_exit = k;
        break;
      }
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace nhim
