#include "nhim/cli.hpp"

#include "nhim/config.hpp"
#include "nhim/errors.hpp"
#include "nhim/report_io.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>

namespace nhim::cli {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitFail = 2;
constexpr int kExitSolver = 3;

struct Flags {
  std::string config;
  std::string out = "nhim-out";
  std::string which = "both";
  std::string format = "csv";
  std::optional<int> grid;
  std::optional<double> tol;
  std::optional<int> max_iter;
  std::optional<std::vector<double>> eps_list;
  std::optional<std::uint64_t> seed;
  std::optional<int> points;
  std::string demo;
};

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void apply_overrides(RunConfig& c, const Flags& f) {
  if (f.grid) {
    if (*f.grid < 1) throw ConfigError("--grid: must be at least 1");
    if (c.demo.empty() ? c.model.n > 0 : find_demo(c.demo).model.n() > 0) {
      c.grid.base_count = *f.grid;
      c.grid.check_base = *f.grid;
    } else {
      c.grid.fiber_count = *f.grid;
      c.grid.check_fiber = *f.grid;
    }
  }
  if (f.tol) {
    if (!(*f.tol > 0.0)) throw ConfigError("--tol: must be positive");
    c.solver.tol_change = *f.tol;
    c.solver.tol_residual = *f.tol;
  }
  if (f.max_iter) {
    if (*f.max_iter < 1) throw ConfigError("--max-iter: must be at least 1");
    c.solver.max_iter = *f.max_iter;
  }
  if (f.eps_list) c.sweep.eps = *f.eps_list;
  if (f.seed) c.sweep.seed = *f.seed;
  if (f.points) {
    if (*f.points < 0) throw ConfigError("--points: must be non-negative");
    c.escape.points = *f.points;
  }
}

RunConfig load(const Flags& f) {
  if (f.config.empty()) throw ConfigError("--config PATH is required");
  RunConfig c = load_config(f.config);
  apply_overrides(c, f);
  return c;
}

std::string out_path(const Flags& f, const std::string& name) {
  std::filesystem::create_directories(f.out);
  return (std::filesystem::path(f.out) / name).string();
}

std::vector<Vector> splitting_points(const GeometricModel& model) {
  if (model.n() == 0) return {Vector(0)};
  const int q = model.n() == 1 ? 64 : 8;
  std::vector<GridAxis> axes(static_cast<std::size_t>(model.n()), angle_axis(q));
  const RegularGrid g(axes);
  std::vector<Vector> pts;
  for (int i = 0; i < g.size(); ++i) pts.push_back(g.node(i));
  return pts;
}

struct CheckOutcome {
  CheckReport report;
  std::optional<ClassicalRates> classical;
  std::string classical_note;
  Json payload;
};

CheckOutcome run_check(const RunConfig& c) {
  const GeometricModel model = build_model(c);
  const MapDefinition map = build_map(c);
  CheckOutcome out;
  out.report = run_topological_check(model, map, pipeline_options(c).check);
  Json splitting = nullptr;
  try {
    const SplittingEstimate sp = estimate_splitting(model, map, splitting_points(model));
    out.classical = check_classical_rates(model, map, sp, 1);
    splitting = {{"power_iters", sp.power_iters},
                 {"samples", sp.samples.size()},
                 {"max_invariance_residual", sp.max_invariance_residual},
                 {"continuity", sp.continuity}};
  } catch (const ModelError& e) {
    out.classical_note = e.what();
  }
  out.payload = {{"topological", to_json(out.report)},
                 {"classical", out.classical ? to_json(*out.classical) : Json(nullptr)},
                 {"classical_note", out.classical_note},
                 {"splitting", splitting}};
  return out;
}

void print_check(const CheckOutcome& o) {
  const CheckReport& r = o.report;
  std::printf("check: %s image_vs_stable_boundary=%s unstable_boundary_escape=%s cone_margin_s=%s cone_margin_u=%s\n",
              r.pass ? "pass" : "fail", format_double(r.boundary.image_vs_stable_boundary).c_str(),
              format_double(r.boundary.unstable_boundary_escape).c_str(),
              format_double(r.cones.cone_margin_s).c_str(), format_double(r.cones.cone_margin_u).c_str());
  if (!r.pass) {
    std::printf("  worst cone points: s=%s u=%s\n", to_json(r.cones.worst_s).dump().c_str(),
                to_json(r.cones.worst_u).dump().c_str());
  }
  if (o.classical)
    std::printf("classical: %s lambda=%s lambda_s=%s lambda_u=%s\n", o.classical->pass ? "pass" : "fail",
                format_double(o.classical->lambda).c_str(), format_double(o.classical->lambda_s).c_str(),
                format_double(o.classical->lambda_u).c_str());
  else
    std::printf("classical: not applicable (%s)\n", o.classical_note.c_str());
}

int cmd_check(const Flags& f) {
  const RunConfig c = load(f);
  const Clock clock;
  CheckOutcome o = run_check(c);
  o.payload["timing"] = {{"seconds", clock.seconds()}};
  write_report_json(make_report("check", c, o.payload), out_path(f, "check.json"));
  print_check(o);
  return o.report.pass ? kExitOk : kExitFail;
}

void print_manifold(const ManifoldComputation& mc) {
  if (mc.unstable)
    std::printf("unstable: iterations=%d residual=%s converged=%d\n", mc.unstable->report.iterations,
                format_double(mc.unstable->report.residual).c_str(), mc.unstable->report.converged);
  if (mc.stable)
    std::printf("stable: iterations=%d residual=%s converged=%d\n", mc.stable->report.iterations,
                format_double(mc.stable->report.residual).c_str(), mc.stable->report.converged);
  if (mc.manifold)
    std::printf("manifold: nodes=%d intersection_residual=%s inside_box=%d\n", mc.manifold->size(),
                format_double(mc.intersection.max_residual).c_str(), mc.inside_box);
  if (mc.invariance)
    std::printf("tangents: residual=%s invariance=%s\n", format_double(mc.tangents->max_residual).c_str(),
                format_double(mc.invariance->max_residual).c_str());
  std::printf("pipeline: %s%s%s\n", mc.ok ? "ok" : "failed", mc.failure.empty() ? "" : ": ",
              mc.failure.c_str());
}

void write_manifold_outputs(const Flags& f, const ManifoldComputation& mc) {
  if (mc.unstable) write_text(section_csv(mc.unstable->section), out_path(f, "unstable_section.csv"));
  if (mc.stable) write_text(section_csv(mc.stable->section), out_path(f, "stable_section.csv"));
  if (mc.manifold) write_manifold_csv(*mc.manifold, out_path(f, "manifold.csv"));
}

int cmd_compute(const Flags& f) {
  const RunConfig c = load(f);
  const GeometricModel model = build_model(c);
  const MapDefinition map = build_map(c);
  const PipelineOptions opts = pipeline_options(c);
  const Clock clock;
  if (f.which == "both") {
    const ManifoldComputation mc = compute_manifold(model, map, opts);
    Json payload = to_json(mc);
    payload["timing"] = {{"seconds", clock.seconds()}};
    write_manifold_outputs(f, mc);
    write_report_json(make_report("compute", c, payload), out_path(f, "compute.json"));
    print_manifold(mc);
    return mc.ok ? kExitOk : kExitSolver;
  }
  const SectionKind kind = f.which == "unstable" ? SectionKind::Unstable : SectionKind::Stable;
  const SectionGrid zero(model, kind, opts.section_base, opts.section_fiber);
  const TransformResult r = iterate_transform(map, model, zero, opts.solver);
  Json payload = {{"transform", to_json(r.report)}, {"timing", {{"seconds", clock.seconds()}}}};
  write_text(section_csv(r.section), out_path(f, f.which + "_section.csv"));
  write_report_json(make_report("compute", c, payload), out_path(f, "compute.json"));
  std::printf("%s: iterations=%d residual=%s converged=%d\n", f.which.c_str(), r.report.iterations,
              format_double(r.report.residual).c_str(), r.report.converged);
  return r.report.converged ? kExitOk : kExitSolver;
}

int cmd_tangent(const Flags& f) {
  const RunConfig c = load(f);
  const GeometricModel model = build_model(c);
  const MapDefinition map = build_map(c);
  PipelineOptions opts = pipeline_options(c);
  opts.tangents = false;
  const Clock clock;
  const ManifoldComputation mc = compute_manifold(model, map, opts);
  const TangentTarget which = f.which == "unstable" ? TangentTarget::Nu
                              : f.which == "stable" ? TangentTarget::Ns
                                                    : TangentTarget::N;
  Json payload = {{"manifold", to_json(mc)}};
  int code = kExitOk;
  if (!mc.manifold || !mc.unstable->report.converged || !mc.stable->report.converged) {
    std::printf("tangent: manifold not available: %s\n", mc.failure.c_str());
    code = kExitSolver;
  } else {
    try {
      const TangentField t = compute_tangent_by_cone_iteration(map, model, *mc.manifold, which, opts.solver.depth_k);
      const TangentInvariance inv = verify_tangent_invariance(map, model, *mc.manifold, t);
      payload["tangents"] = to_json(t);
      payload["invariance"] = to_json(inv);
      write_text(tangent_csv(*mc.manifold, t), out_path(f, "tangent.csv"));
      std::printf("tangent: which=%s depth=%d residual=%s invariance=%s continuity=%s truncated=%d\n",
                  to_string(which), t.depth, format_double(t.max_residual).c_str(),
                  format_double(inv.max_residual).c_str(), format_double(inv.continuity).c_str(), t.truncated);
    } catch (const Error& e) {
      payload["failure"] = e.what();
      std::printf("tangent: failed: %s\n", e.what());
      code = kExitSolver;
    }
  }
  payload["timing"] = {{"seconds", clock.seconds()}};
  write_report_json(make_report("tangent", c, payload), out_path(f, "tangent.json"));
  return code;
}

int cmd_sweep(const Flags& f) {
  const RunConfig c = load(f);
  if (c.sweep.eps.empty()) throw ConfigError("sweep.eps: empty (set it or pass --eps-list)");
  const DemoSystem demo = build_demo(c);
  const PerturbationFamily family = build_family(c, demo);
  const SweepReport r = run_persistence_sweep(demo, family, c.sweep.eps, demo.options);
  write_report_json(make_report("sweep", c, to_json(r)), out_path(f, "sweep.json"));
  if (f.format == "csv") write_text(sweep_csv(r), out_path(f, "sweep.csv"));
  int code = kExitOk;
  for (const auto& row : r.rows) {
    std::printf("eps=%s check=%s manifold=%s c0=%s c1=%s%s%s\n", format_double(row.eps).c_str(),
                row.check.pass ? "pass" : "fail", row.manifold_ok ? "ok" : "none",
                format_double(row.c0).c_str(), format_double(row.c1).c_str(),
                row.failure.empty() ? "" : " : ", row.failure.c_str());
    if (row.transforms_attempted && !row.manifold_ok) code = kExitSolver;
  }
  std::printf("check_stability_constant=%s\n", format_double(r.check_stability_constant).c_str());
  return code;
}

int cmd_escape(const Flags& f) {
  const RunConfig c = load(f);
  const GeometricModel model = build_model(c);
  const MapDefinition map = build_map(c);
  std::mt19937_64 rng(c.sweep.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vector> pts;
  for (int i = 0; i < c.escape.points; ++i) {
    Vector z(model.m());
    for (int k = 0; k < model.m(); ++k) {
      if (k < model.n()) z[k] = kTwoPi * unit(rng);
      else z[k] = model.radius(k) * (2.0 * unit(rng) - 1.0);
    }
    pts.push_back(z);
  }
  const Clock clock;
  const auto rows = escape_time_probe(map, model, pts, c.escape.k_max);
  Json table = Json::array();
  for (const auto& r : rows) table.push_back(to_json(r));
  write_report_json(make_report("escape", c,
                                {{"k_max", c.escape.k_max},
                                 {"rows", table},
                                 {"timing", {{"seconds", clock.seconds()}}}}),
                    out_path(f, "escape.json"));
  if (f.format == "csv") write_text(escape_csv(rows), out_path(f, "escape.csv"));
  int fwd = 0, bwd = 0, failed = 0;
  for (const auto& r : rows) {
    fwd += r.forward_exit >= 0;
    bwd += r.backward_exit >= 0;
    failed += r.backward_inverse_failed;
  }
  std::printf("escape: points=%zu forward_exits=%d backward_exits=%d inverse_failures=%d k_max=%d\n",
              rows.size(), fwd, bwd, failed, c.escape.k_max);
  return kExitOk;
}

int cmd_demo(const Flags& f) {
  RunConfig c = demo_config(f.demo);
  apply_overrides(c, f);
  const DemoSystem& demo = find_demo(f.demo);
  std::printf("demo: %s\n  %s\n", demo.name.c_str(), demo.description.c_str());
  const Clock clock;
  CheckOutcome o = run_check(c);
  Json payload = {{"demo", demo.name}, {"check", o.payload}};
  print_check(o);
  int code = o.report.pass ? kExitOk : kExitFail;
  if (o.report.pass && demo.expect_topological) {
    const ManifoldComputation mc = compute_manifold(build_model(c), build_map(c), pipeline_options(c));
    payload["pipeline"] = to_json(mc);
    write_manifold_outputs(f, mc);
    print_manifold(mc);
    if (!mc.ok) code = kExitSolver;
  }
  payload["timing"] = {{"seconds", clock.seconds()}};
  write_report_json(make_report("demo", c, payload), out_path(f, "demo.json"));
  return code;
}

void add_common(CLI::App* sub, Flags& f, bool needs_config) {
  if (needs_config) sub->add_option("--config", f.config, "run configuration (JSON)");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--grid", f.grid, "base nodes per angle (fiber nodes when n = 0)");
  sub->add_option("--tol", f.tol, "solver tolerance on change and residual");
  sub->add_option("--max-iter", f.max_iter, "graph transform iteration cap");
  sub->add_option("--seed", f.seed, "seed for random families and sample points");
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Topological normal hyperbolicity: checks, graph transforms, tangents, persistence"};
  app.require_subcommand(1);
  Flags f;
  auto* check = app.add_subcommand("check", "hyperbolicity check (exit 0 pass, 2 fail)");
  auto* compute = app.add_subcommand("compute", "graph transforms and their intersection");
  auto* tangent = app.add_subcommand("tangent", "tangent field by cone iteration");
  auto* sweep = app.add_subcommand("sweep", "persistence sweep over a perturbation family");
  auto* escape = app.add_subcommand("escape", "escape-time probe of random points of B");
  auto* demo = app.add_subcommand("demo", "run a registered demo end to end");
  for (auto* sub : {check, compute, tangent, sweep, escape}) add_common(sub, f, true);
  add_common(demo, f, false);
  demo->add_option("name", f.demo, "demo name")->required();
  for (auto* sub : {compute, tangent})
    sub->add_option("--which", f.which, "unstable | stable | both")
        ->check(CLI::IsMember({"unstable", "stable", "both"}));
  sweep->add_option("--eps-list", f.eps_list, "comma separated eps values")->delimiter(',');
  for (auto* sub : {sweep, escape})
    sub->add_option("--format", f.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  escape->add_option("--points", f.points, "number of random points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  try {
    if (check->parsed()) return cmd_check(f);
    if (compute->parsed()) return cmd_compute(f);
    if (tangent->parsed()) return cmd_tangent(f);
    if (sweep->parsed()) return cmd_sweep(f);
    if (escape->parsed()) return cmd_escape(f);
    if (demo->parsed()) return cmd_demo(f);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitSolver;
  }
  return kExitUsage;
}

}  // namespace nhim::cli
