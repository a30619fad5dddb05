#include "nhim/report_io.hpp"

#include "nhim/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace nhim {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

namespace {

Json num(double v) {
  if (std::isfinite(v)) return v == 0.0 ? Json(0.0) : Json(v);
  return Json(format_double(v));
}

Json nums(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

Json matrix_rows(const Matrix& m) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(num(m(i, j)));
    a.push_back(row);
  }
  return a;
}

void append_row(std::string& out, const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_double(values[i]);
  }
  out += '\n';
}

std::vector<std::string> coordinate_names(int n, int s, int u) {
  std::vector<std::string> names;
  for (int i = 1; i <= n; ++i) names.push_back("theta_" + std::to_string(i));
  for (int i = 1; i <= s; ++i) names.push_back("xi_s_" + std::to_string(i));
  for (int i = 1; i <= u; ++i) names.push_back("xi_u_" + std::to_string(i));
  return names;
}

std::string header(const std::vector<std::string>& names) {
  std::string h;
  for (std::size_t i = 0; i < names.size(); ++i) h += (i ? "," : "") + names[i];
  return h + '\n';
}

void tangent_names(std::vector<std::string>& names, int m, int k) {
  for (int a = 1; a <= k; ++a)
    for (int i = 1; i <= m; ++i) names.push_back("t_" + std::to_string(a) + "_" + std::to_string(i));
}

void push_plane(std::vector<double>& row, const PlaneBasis& p) {
  for (int a = 0; a < p.dim(); ++a)
    for (int i = 0; i < p.ambient_dim(); ++i) row.push_back(p.basis()(i, a));
}

std::string manifold_rows(const ManifoldGrid& g, const std::vector<PlaneBasis>* planes,
                          const TangentField* field) {
  const int m = g.n + g.s + g.u;
  std::vector<std::string> names = coordinate_names(g.n, g.s, g.u);
  const int k = planes && !planes->empty() ? planes->front().dim() : 0;
  if (planes && !planes->empty()) tangent_names(names, m, k);
  if (field) {
    names.push_back("residual");
    names.push_back("achieved_depth");
  }
  std::string out = header(names);
  for (int node = 0; node < g.size(); ++node) {
    const Vector z = g.point(node);
    std::vector<double> row(z.data(), z.data() + z.size());
    if (planes && !planes->empty()) push_plane(row, (*planes)[static_cast<std::size_t>(node)]);
    if (field) {
      row.push_back(field->residuals[static_cast<std::size_t>(node)]);
      row.push_back(field->achieved_depth[static_cast<std::size_t>(node)]);
    }
    append_row(out, row);
  }
  return out;
}

}  // namespace

std::string manifold_csv(const ManifoldGrid& manifold) {
  return manifold_rows(manifold, &manifold.tangents, nullptr);
}

void write_manifold_csv(const ManifoldGrid& manifold, const std::string& path) {
  write_text(manifold_csv(manifold), path);
}

std::string section_csv(const SectionGrid& section) {
  const GeometricModel& m = section.model();
  const bool unstable = section.kind() == SectionKind::Unstable;
  std::vector<std::string> names = coordinate_names(m.n(), unstable ? 0 : m.s(), unstable ? m.u() : 0);
  const auto values = coordinate_names(0, unstable ? m.s() : 0, unstable ? 0 : m.u());
  names.insert(names.end(), values.begin(), values.end());
  std::string out = header(names);
  for (int node = 0; node < section.size(); ++node) {
    const Vector w = section.domain().node(node);
    std::vector<double> row(w.data(), w.data() + w.size());
    for (Eigen::Index j = 0; j < section.values().cols(); ++j) row.push_back(section.values()(node, j));
    append_row(out, row);
  }
  return out;
}

std::string tangent_csv(const ManifoldGrid& manifold, const TangentField& field) {
  return manifold_rows(manifold, &field.planes, &field);
}

std::string escape_csv(const std::vector<EscapeResult>& rows) {
  std::string out;
  const int m = rows.empty() ? 0 : static_cast<int>(rows.front().point.size());
  std::vector<std::string> names;
  for (int i = 1; i <= m; ++i) names.push_back("z_" + std::to_string(i));
  names.insert(names.end(), {"forward_exit", "backward_exit", "backward_inverse_failed"});
  out = header(names);
  for (const auto& r : rows) {
    std::vector<double> row(r.point.data(), r.point.data() + r.point.size());
    row.push_back(r.forward_exit);
    row.push_back(r.backward_exit);
    row.push_back(r.backward_inverse_failed ? 1 : 0);
    append_row(out, row);
  }
  return out;
}

std::string sweep_csv(const SweepReport& report) {
  std::string out =
      "eps,c1_size,check_pass,image_vs_stable_boundary,unstable_boundary_escape,cone_margin_s,"
      "cone_margin_u,transforms_attempted,unstable_converged,stable_converged,manifold_ok,"
      "inside_box,tangents_in_cones,c0,c1,unstable_residual,stable_residual\n";
  for (const auto& r : report.rows) {
    append_row(out, {r.eps, r.c1_size, double(r.check.pass), r.check.boundary.image_vs_stable_boundary,
                     r.check.boundary.unstable_boundary_escape, r.check.cones.cone_margin_s,
                     r.check.cones.cone_margin_u, double(r.transforms_attempted),
                     double(r.unstable_converged), double(r.stable_converged), double(r.manifold_ok),
                     double(r.inside_box), double(r.tangents_in_cones), r.c0, r.c1,
                     r.unstable_residual, r.stable_residual});
  }
  return out;
}

Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

Json to_json(const CheckReport& r) {
  const BoundaryMargins& b = r.boundary;
  const ConeMargins& c = r.cones;
  return {{"verdict", r.pass ? "pass" : "fail"},
          {"boundary",
           {{"image_vs_stable_boundary", num(b.image_vs_stable_boundary)},
            {"worst_image_point", to_json(b.worst_image_point)},
            {"unstable_boundary_escape", num(b.unstable_boundary_escape)},
            {"worst_escape_point", to_json(b.worst_escape_point)},
            {"contained_mode", b.contained_mode},
            {"samples", b.samples},
            {"boundary_samples", b.boundary_samples}}},
          {"cones",
           {{"cone_margin_s", num(c.cone_margin_s)},
            {"worst_s", to_json(c.worst_s)},
            {"cone_margin_u", num(c.cone_margin_u)},
            {"worst_u", to_json(c.worst_u)},
            {"samples", c.samples},
            {"singular_points", c.singular_points}}},
          {"grid", {{"base", r.grid.base}, {"fiber", r.grid.fiber}, {"directions", r.grid.directions}}},
          {"sampling", r.sampling}};
}

Json to_json(const ClassicalRates& r) {
  return {{"r", r.r},
          {"lambda_s", num(r.lambda_s)},
          {"lambda_u", num(r.lambda_u)},
          {"tangent_expansion", num(r.tangent_expansion)},
          {"tangent_contraction", num(r.tangent_contraction)},
          {"stable_products", nums(r.stable_products)},
          {"unstable_products", nums(r.unstable_products)},
          {"lambda", num(r.lambda)},
          {"verdict", r.pass ? "pass" : "fail"}};
}

Json to_json(const SplittingEstimate& r) {
  Json samples = Json::array();
  for (const auto& s : r.samples)
    samples.push_back({{"point", to_json(s.point)},
                       {"stable", matrix_rows(s.stable.basis())},
                       {"unstable", matrix_rows(s.unstable.basis())},
                       {"tangent", matrix_rows(s.tangent.basis())},
                       {"invariance_residual", num(s.invariance_residual)}});
  return {{"power_iters", r.power_iters},
          {"max_invariance_residual", num(r.max_invariance_residual)},
          {"continuity", num(r.continuity)},
          {"samples", samples}};
}

Json to_json(const TransformReport& r) {
  return {{"kind", to_string(r.kind)},
          {"iterations", r.iterations},
          {"changes", nums(r.changes)},
          {"lipschitz", nums(r.lipschitz)},
          {"residual", num(r.residual)},
          {"lipschitz_final", num(r.lipschitz_final)},
          {"newton",
           {{"max_steps", r.newton.max_steps},
            {"total_steps", r.newton.total_steps},
            {"max_residual", num(r.newton.max_residual)},
            {"coarse_searches", r.newton.coarse_searches}}},
          {"converged", r.converged},
          {"stalled", r.stalled},
          {"max_iter_reached", r.max_iter_reached},
          {"lipschitz_exceeded", r.lipschitz_exceeded},
          {"slow_contraction", r.slow_contraction},
          {"failed", r.failed},
          {"failure", r.failure}};
}

Json to_json(const IntersectionReport& r) {
  return {{"max_residual", num(r.max_residual)},
          {"max_iterations", r.max_iterations},
          {"slow_convergence", r.slow_convergence}};
}

Json to_json(const TangentField& t) {
  return {{"which", to_string(t.which)},
          {"depth", t.depth},
          {"max_residual", num(t.max_residual)},
          {"truncated", t.truncated},
          {"residuals", nums(t.residuals)},
          {"achieved_depth", t.achieved_depth}};
}

Json to_json(const TangentInvariance& t) {
  return {{"max_residual", num(t.max_residual)}, {"continuity", num(t.continuity)}};
}

Json to_json(const ManifoldComputation& m) {
  Json j;
  j["unstable"] = m.unstable ? to_json(m.unstable->report) : Json(nullptr);
  j["stable"] = m.stable ? to_json(m.stable->report) : Json(nullptr);
  j["intersection"] = to_json(m.intersection);
  j["manifold_nodes"] = m.manifold ? m.manifold->size() : 0;
  j["manifold_fiber"] = m.manifold ? matrix_rows(m.manifold->fiber) : Json(nullptr);
  j["tangents"] = m.tangents ? to_json(*m.tangents) : Json(nullptr);
  j["invariance"] = m.invariance ? to_json(*m.invariance) : Json(nullptr);
  j["inside_box"] = m.inside_box;
  j["tangent_cone_margin_s"] = num(m.tangent_cone_margin_s);
  j["tangent_cone_margin_u"] = num(m.tangent_cone_margin_u);
  j["ok"] = m.ok;
  j["failure"] = m.failure;
  return j;
}

Json to_json(const SweepReport& r, bool include_timing) {
  Json rows = Json::array();
  Json times = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"eps", num(row.eps)},
                    {"c1_size", num(row.c1_size)},
                    {"check", to_json(row.check)},
                    {"transforms_attempted", row.transforms_attempted},
                    {"unstable_converged", row.unstable_converged},
                    {"stable_converged", row.stable_converged},
                    {"manifold_ok", row.manifold_ok},
                    {"inside_box", row.inside_box},
                    {"tangents_in_cones", row.tangents_in_cones},
                    {"c0", num(row.c0)},
                    {"c1", num(row.c1)},
                    {"unstable_residual", num(row.unstable_residual)},
                    {"stable_residual", num(row.stable_residual)},
                    {"manifold_fiber", row.manifold ? matrix_rows(row.manifold->fiber) : Json(nullptr)},
                    {"failure", row.failure}});
    times.push_back(num(row.runtime_seconds));
  }
  Json j = {{"demo", r.demo},
            {"family", r.family},
            {"seed", r.seed},
            {"check_stability_constant", num(r.check_stability_constant)},
            {"rows", rows}};
  if (include_timing) j["timing"] = {{"row_runtime_seconds", times}};
  return j;
}

Json to_json(const EscapeResult& r) {
  return {{"point", to_json(r.point)},
          {"forward_exit", r.forward_exit},
          {"backward_exit", r.backward_exit},
          {"backward_inverse_failed", r.backward_inverse_failed}};
}

Json make_report(const std::string& command, const RunConfig& config, Json payload) {
  Json j;
  j["tool"] = "nhim";
  j["version"] = kLibraryVersion;
  j["command"] = command;
  j["config"] = to_json(config);
  Json timing = Json::object();
  if (payload.is_object() && payload.contains("timing")) {
    timing = payload["timing"];
    payload.erase("timing");
  }
  j["result"] = std::move(payload);
  j["timing"] = std::move(timing);
  return j;
}

void write_text(const std::string& text, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(path + ": cannot open for writing");
  out << text;
  out.flush();
  if (!out) throw Error(path + ": write failed");
}

void write_report_json(const Json& report, const std::string& path) {
  write_text(report.dump(2) + "\n", path);
}

Json strip_timing(Json report) {
  if (report.is_object()) report.erase("timing");
  return report;
}

}  // namespace nhim
