#include "nhim/config.hpp"

#include "nhim/errors.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace nhim {

namespace {

struct Location {
  int line = 1;
  int column = 1;
};

Location locate(const std::string& text, std::size_t offset) {
  Location loc;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++loc.line;
      loc.column = 1;
    } else {
      ++loc.column;
    }
  }
  return loc;
}

class Reader {
 public:
  Reader(std::string source, const std::string& text) : source_(std::move(source)), text_(text) {}

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    std::string where = source_;
    const std::string leaf = key.substr(key.find_last_of('.') + 1);
    const auto pos = text_.find("\"" + leaf.substr(0, leaf.find('[')) + "\"");
    if (!text_.empty() && pos != std::string::npos) {
      const Location loc = locate(text_, pos);
      where += ":" + std::to_string(loc.line) + ":" + std::to_string(loc.column);
    }
    throw ConfigError(where + ": " + key + ": " + message);
  }

  void object(const Json& j, const std::string& key, const std::set<std::string>& allowed) const {
    if (!j.is_object()) fail(key.empty() ? "<root>" : key, "expected an object");
    for (const auto& [k, v] : j.items()) {
      (void)v;
      if (!allowed.count(k)) fail(join(key, k), "unknown key");
    }
  }

  static std::string join(const std::string& prefix, const std::string& k) {
    return prefix.empty() ? k : prefix + "." + k;
  }

  double number(const Json& j, const std::string& key) const {
    if (!j.is_number()) fail(key, "expected a number");
    return j.get<double>();
  }

  int integer(const Json& j, const std::string& key) const {
    if (!j.is_number_integer()) fail(key, "expected an integer");
    return j.get<int>();
  }

  std::uint64_t unsigned_integer(const Json& j, const std::string& key) const {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
      fail(key, "expected a non-negative integer");
    return j.get<std::uint64_t>();
  }

  std::string string(const Json& j, const std::string& key) const {
    if (!j.is_string()) fail(key, "expected a string");
    return j.get<std::string>();
  }

  bool boolean(const Json& j, const std::string& key) const {
    if (!j.is_boolean()) fail(key, "expected a boolean");
    return j.get<bool>();
  }

  template <class T, class F>
  std::vector<T> array(const Json& j, const std::string& key, F&& item) const {
    if (!j.is_array()) fail(key, "expected an array");
    std::vector<T> out;
    for (std::size_t i = 0; i < j.size(); ++i)
      out.push_back(item(j[i], key + "[" + std::to_string(i) + "]"));
    return out;
  }

  std::vector<double> numbers(const Json& j, const std::string& key) const {
    return array<double>(j, key, [this](const Json& v, const std::string& k) { return number(v, k); });
  }

  std::vector<std::string> strings(const Json& j, const std::string& key) const {
    return array<std::string>(j, key, [this](const Json& v, const std::string& k) { return string(v, k); });
  }

 private:
  std::string source_;
  const std::string& text_;
};

template <class T, class F>
void set_if(const Json& obj, const char* name, T& field, F&& read) {
  if (obj.contains(name)) field = read(obj.at(name));
}

void read_model(const Reader& r, const Json& j, ModelConfig& m) {
  r.object(j, "model", {"n", "s", "u", "radii_s", "radii_u", "gamma"});
  for (const char* k : {"n", "s", "u", "radii_s", "radii_u"})
    if (!j.contains(k)) r.fail(std::string("model.") + k, "required");
  m.n = r.integer(j["n"], "model.n");
  m.s = r.integer(j["s"], "model.s");
  m.u = r.integer(j["u"], "model.u");
  m.radii_s = r.numbers(j["radii_s"], "model.radii_s");
  m.radii_u = r.numbers(j["radii_u"], "model.radii_u");
  set_if(j, "gamma", m.gamma, [&](const Json& v) { return r.number(v, "model.gamma"); });
}

void read_map(const Reader& r, const Json& j, MapConfig& m) {
  r.object(j, "map", {"variables", "formulas", "inverse", "params", "periodic"});
  for (const char* k : {"variables", "formulas"})
    if (!j.contains(k)) r.fail(std::string("map.") + k, "required");
  m.variables = r.strings(j["variables"], "map.variables");
  m.formulas = r.strings(j["formulas"], "map.formulas");
  if (j.contains("inverse") && !j["inverse"].is_null()) m.inverse = r.strings(j["inverse"], "map.inverse");
  if (j.contains("params")) {
    const Json& p = j["params"];
    if (!p.is_object()) r.fail("map.params", "expected an object");
    for (const auto& [k, v] : p.items()) m.params[k] = r.number(v, "map.params." + k);
  }
  if (j.contains("periodic")) {
    m.periodic = r.array<bool>(j["periodic"], "map.periodic",
                               [&](const Json& v, const std::string& k) { return r.boolean(v, k); });
  }
}

void read_grid(const Reader& r, const Json& j, GridConfig& g) {
  r.object(j, "grid", {"base_count", "fiber_count", "check_base", "check_fiber", "check_directions"});
  set_if(j, "base_count", g.base_count, [&](const Json& v) { return r.integer(v, "grid.base_count"); });
  set_if(j, "fiber_count", g.fiber_count, [&](const Json& v) { return r.integer(v, "grid.fiber_count"); });
  set_if(j, "check_base", g.check_base, [&](const Json& v) { return r.integer(v, "grid.check_base"); });
  set_if(j, "check_fiber", g.check_fiber, [&](const Json& v) { return r.integer(v, "grid.check_fiber"); });
  set_if(j, "check_directions", g.check_directions,
         [&](const Json& v) { return r.integer(v, "grid.check_directions"); });
}

void read_solver(const Reader& r, const Json& j, SolverConfig& s) {
  r.object(j, "solver", {"tol_change", "tol_residual", "max_iter", "newton_tol", "newton_max", "depth_k",
                         "acceleration", "anderson_depth", "lip_slack"});
  set_if(j, "tol_change", s.tol_change, [&](const Json& v) { return r.number(v, "solver.tol_change"); });
  set_if(j, "tol_residual", s.tol_residual, [&](const Json& v) { return r.number(v, "solver.tol_residual"); });
  set_if(j, "max_iter", s.max_iter, [&](const Json& v) { return r.integer(v, "solver.max_iter"); });
  set_if(j, "newton_tol", s.newton_tol, [&](const Json& v) { return r.number(v, "solver.newton_tol"); });
  set_if(j, "newton_max", s.newton_max, [&](const Json& v) { return r.integer(v, "solver.newton_max"); });
  set_if(j, "depth_k", s.depth_k, [&](const Json& v) { return r.integer(v, "solver.depth_k"); });
  set_if(j, "acceleration", s.acceleration, [&](const Json& v) { return r.string(v, "solver.acceleration"); });
  set_if(j, "anderson_depth", s.anderson_depth,
         [&](const Json& v) { return r.integer(v, "solver.anderson_depth"); });
  set_if(j, "lip_slack", s.lip_slack, [&](const Json& v) { return r.number(v, "solver.lip_slack"); });
  if (s.acceleration != "none" && s.acceleration != "anderson")
    r.fail("solver.acceleration", "expected \"none\" or \"anderson\"");
  if (s.max_iter < 1) r.fail("solver.max_iter", "must be at least 1");
  if (s.newton_max < 1) r.fail("solver.newton_max", "must be at least 1");
  if (s.depth_k < 1) r.fail("solver.depth_k", "must be at least 1");
  if (!(s.tol_change > 0.0)) r.fail("solver.tol_change", "must be positive");
  if (!(s.tol_residual > 0.0)) r.fail("solver.tol_residual", "must be positive");
}

void read_sweep(const Reader& r, const Json& j, SweepConfig& s) {
  r.object(j, "sweep", {"family", "direction", "formulas", "degree", "bound", "eps", "seed"});
  set_if(j, "family", s.family, [&](const Json& v) { return r.string(v, "sweep.family"); });
  set_if(j, "direction", s.direction, [&](const Json& v) { return r.numbers(v, "sweep.direction"); });
  set_if(j, "formulas", s.formulas, [&](const Json& v) { return r.strings(v, "sweep.formulas"); });
  set_if(j, "degree", s.degree, [&](const Json& v) { return r.integer(v, "sweep.degree"); });
  set_if(j, "bound", s.bound, [&](const Json& v) { return r.number(v, "sweep.bound"); });
  set_if(j, "eps", s.eps, [&](const Json& v) { return r.numbers(v, "sweep.eps"); });
  set_if(j, "seed", s.seed, [&](const Json& v) { return r.unsigned_integer(v, "sweep.seed"); });
  if (s.family != "shift" && s.family != "random_trig" && s.family != "formulas")
    r.fail("sweep.family", "expected \"shift\", \"random_trig\" or \"formulas\"");
}

void read_escape(const Reader& r, const Json& j, EscapeConfig& e) {
  r.object(j, "escape", {"points", "k_max"});
  set_if(j, "points", e.points, [&](const Json& v) { return r.integer(v, "escape.points"); });
  set_if(j, "k_max", e.k_max, [&](const Json& v) { return r.integer(v, "escape.k_max"); });
  if (e.points < 0) r.fail("escape.points", "must be non-negative");
  if (e.k_max < 1) r.fail("escape.k_max", "must be at least 1");
}

}  // namespace

RunConfig config_from_json(const Json& j, const std::string& source, const std::string& text) {
  const Reader r(source, text);
  r.object(j, "", {"demo", "model", "map", "grid", "solver", "sweep", "escape"});
  RunConfig c;
  if (j.contains("demo")) {
    c = demo_config(r.string(j["demo"], "demo"));
    if (j.contains("model")) r.fail("model", "not allowed together with demo");
    if (j.contains("map")) r.fail("map", "not allowed together with demo");
  } else {
    if (!j.contains("model")) r.fail("model", "required (or name a demo)");
    if (!j.contains("map")) r.fail("map", "required (or name a demo)");
    read_model(r, j["model"], c.model);
    read_map(r, j["map"], c.map);
    if (c.map.periodic.empty()) {
      c.map.periodic.assign(c.map.formulas.size(), false);
      for (int i = 0; i < c.model.n && i < static_cast<int>(c.map.periodic.size()); ++i)
        c.map.periodic[static_cast<std::size_t>(i)] = true;
    }
  }
  if (j.contains("grid")) read_grid(r, j["grid"], c.grid);
  if (j.contains("solver")) read_solver(r, j["solver"], c.solver);
  if (j.contains("sweep")) read_sweep(r, j["sweep"], c.sweep);
  if (j.contains("escape")) read_escape(r, j["escape"], c.escape);
  // Building the model and map validates dimensions and formulas up front.
  try {
    const GeometricModel model = build_model(c);
    check_compatible(model, build_map(c));
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  } catch (const Error& e) {
    throw ConfigError(source + ": " + (c.demo.empty() ? "map/model: " : "demo: ") + e.what());
  }
  return c;
}

RunConfig parse_config_text(const std::string& text, const std::string& source) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    const Location loc = locate(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ConfigError(source + ":" + std::to_string(loc.line) + ":" + std::to_string(loc.column) +
                      ": invalid JSON (offset " + std::to_string(e.byte) + "): " + e.what());
  }
  return config_from_json(j, source, text);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

RunConfig demo_config(const std::string& name) {
  const DemoSystem& d = find_demo(name);
  RunConfig c;
  c.demo = d.name;
  const GeometricModel& m = d.model;
  c.model = {m.n(), m.s(), m.u(), m.radii_s(), m.radii_u(), m.gamma()};
  c.map.variables = d.map.variables();
  c.map.formulas = d.map.formula_texts();
  c.map.inverse = d.map.inverse_texts();
  c.map.params = d.map.parameters();
  c.map.periodic = d.map.periodic();
  const PipelineOptions& o = d.options;
  c.grid = {o.section_base, o.section_fiber, o.check.base, o.check.fiber, o.check.directions};
  const SolverOptions& s = o.solver;
  c.solver = {s.tol_change, s.tol_residual, s.max_iter, s.newton_tol, s.newton_max, s.depth_k,
              s.acceleration == Acceleration::Anderson ? "anderson" : "none", s.anderson_depth,
              s.lip_slack};
  c.sweep.direction = d.shift;
  return c;
}

Json to_json(const RunConfig& c) {
  Json j;
  if (!c.demo.empty()) {
    j["demo"] = c.demo;
  } else {
    j["model"] = {{"n", c.model.n},
                  {"s", c.model.s},
                  {"u", c.model.u},
                  {"radii_s", c.model.radii_s},
                  {"radii_u", c.model.radii_u},
                  {"gamma", c.model.gamma}};
    Json map;
    map["variables"] = c.map.variables;
    map["formulas"] = c.map.formulas;
    map["inverse"] = c.map.inverse ? Json(*c.map.inverse) : Json(nullptr);
    map["params"] = Json::object();
    for (const auto& [k, v] : c.map.params) map["params"][k] = v;
    map["periodic"] = c.map.periodic;
    j["map"] = map;
  }
  j["grid"] = {{"base_count", c.grid.base_count},
               {"fiber_count", c.grid.fiber_count},
               {"check_base", c.grid.check_base},
               {"check_fiber", c.grid.check_fiber},
               {"check_directions", c.grid.check_directions}};
  j["solver"] = {{"tol_change", c.solver.tol_change},
                 {"tol_residual", c.solver.tol_residual},
                 {"max_iter", c.solver.max_iter},
                 {"newton_tol", c.solver.newton_tol},
                 {"newton_max", c.solver.newton_max},
                 {"depth_k", c.solver.depth_k},
                 {"acceleration", c.solver.acceleration},
                 {"anderson_depth", c.solver.anderson_depth},
                 {"lip_slack", c.solver.lip_slack}};
  j["sweep"] = {{"family", c.sweep.family},   {"direction", c.sweep.direction},
                {"formulas", c.sweep.formulas}, {"degree", c.sweep.degree},
                {"bound", c.sweep.bound},       {"eps", c.sweep.eps},
                {"seed", c.sweep.seed}};
  j["escape"] = {{"points", c.escape.points}, {"k_max", c.escape.k_max}};
  return j;
}

GeometricModel build_model(const RunConfig& c) {
  if (!c.demo.empty()) return find_demo(c.demo).model;
  return GeometricModel(c.model.n, c.model.s, c.model.u, c.model.radii_s, c.model.radii_u, c.model.gamma);
}

MapDefinition build_map(const RunConfig& c) {
  if (!c.demo.empty()) return find_demo(c.demo).map;
  return MapDefinition(c.map.variables, c.map.params, c.map.formulas, c.map.periodic, c.map.inverse);
}

PipelineOptions pipeline_options(const RunConfig& c) {
  PipelineOptions o;
  o.section_base = c.grid.base_count;
  o.section_fiber = c.grid.fiber_count;
  o.check = {c.grid.check_base, c.grid.check_fiber, c.grid.check_directions};
  SolverOptions& s = o.solver;
  s.tol_change = c.solver.tol_change;
  s.tol_residual = c.solver.tol_residual;
  s.max_iter = c.solver.max_iter;
  s.newton_tol = c.solver.newton_tol;
  s.newton_max = c.solver.newton_max;
  s.depth_k = c.solver.depth_k;
  s.acceleration = c.solver.acceleration == "anderson" ? Acceleration::Anderson : Acceleration::None;
  s.anderson_depth = c.solver.anderson_depth;
  s.lip_slack = c.solver.lip_slack;
  return o;
}

DemoSystem build_demo(const RunConfig& c) {
  DemoSystem d = c.demo.empty()
                     ? DemoSystem{"custom", "map from configuration", build_model(c), build_map(c),
                                  true, false, {}, {}}
                     : find_demo(c.demo);
  d.options = pipeline_options(c);
  if (!c.sweep.direction.empty()) d.shift = c.sweep.direction;
  return d;
}

PerturbationFamily build_family(const RunConfig& c, const DemoSystem& demo) {
  if (c.sweep.family == "random_trig")
    return random_trig_family(demo.map, c.sweep.degree, c.sweep.bound, c.sweep.seed);
  if (c.sweep.family == "formulas") {
    if (static_cast<int>(c.sweep.formulas.size()) != demo.map.dim())
      throw ConfigError("sweep.formulas: expected " + std::to_string(demo.map.dim()) + " formulas");
    PerturbationFamily f;
    f.name = "formulas";
    f.formulas = c.sweep.formulas;
    f.seed = c.sweep.seed;
    return f;
  }
  const std::vector<double>& dir = c.sweep.direction.empty() ? demo.shift : c.sweep.direction;
  if (static_cast<int>(dir.size()) != demo.map.dim())
    throw ConfigError("sweep.direction: expected " + std::to_string(demo.map.dim()) + " components");
  PerturbationFamily f = shift_family(dir);
  f.seed = c.sweep.seed;
  return f;
}

}  // namespace nhim
