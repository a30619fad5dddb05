#pragma once

#include "nhim/graph_transform.hpp"
#include "nhim/map_definition.hpp"
#include "nhim/model.hpp"
#include "nhim/persistence.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nhim {

using Json = nlohmann::ordered_json;

struct ModelConfig {
  int n = 0;
  int s = 0;
  int u = 0;
  std::vector<double> radii_s;
  std::vector<double> radii_u;
  double gamma = 1.0;
  bool operator==(const ModelConfig&) const = default;
};

struct MapConfig {
  std::vector<std::string> variables;
  std::vector<std::string> formulas;
  std::optional<std::vector<std::string>> inverse;
  std::map<std::string, double> params;
  std::vector<bool> periodic;
  bool operator==(const MapConfig&) const = default;
};

struct GridConfig {
  int base_count = 64;
  int fiber_count = 33;
  int check_base = 256;
  int check_fiber = 201;
  int check_directions = 64;
  bool operator==(const GridConfig&) const = default;
};

struct SolverConfig {
  double tol_change = 1e-12;
  double tol_residual = 1e-11;
  int max_iter = 200;
  double newton_tol = 1e-12;
  int newton_max = 50;
  int depth_k = 40;
  std::string acceleration = "none";  // "none" | "anderson"
  int anderson_depth = 5;
  double lip_slack = 0.05;
  bool operator==(const SolverConfig&) const = default;
};

struct SweepConfig {
  std::string family = "shift";  // "shift" | "random_trig" | "formulas"
  std::vector<double> direction;     // shift; empty means the demo's direction
  std::vector<std::string> formulas;  // formulas
  int degree = 3;                     // random_trig
  double bound = 1.0;
  std::vector<double> eps;
  std::uint64_t seed = 0;
  bool operator==(const SweepConfig&) const = default;
};

struct EscapeConfig {
  int points = 100;
  int k_max = 60;
  bool operator==(const EscapeConfig&) const = default;
};

/// A run is either a registered demo (model and map taken from the registry)
/// or an explicit model + map pair.
struct RunConfig {
  std::string demo;
  ModelConfig model;
  MapConfig map;
  GridConfig grid;
  SolverConfig solver;
  SweepConfig sweep;
  EscapeConfig escape;
  bool operator==(const RunConfig&) const = default;
};

/// Strict parse: unknown keys and wrong types throw ConfigError naming the key.
/// `source` prefixes messages; `text`, when given, is used to locate keys.
RunConfig config_from_json(const Json& j, const std::string& source = "config",
                           const std::string& text = "");
RunConfig parse_config_text(const std::string& text, const std::string& source = "config");
/// Throws ConfigError with the path, and line/column for syntax errors.
RunConfig load_config(const std::string& path);

/// Configuration with the given demo's model, map, grids and solver.
RunConfig demo_config(const std::string& name);

/// Every field, defaults included. Parsing the result gives back `c`.
Json to_json(const RunConfig& c);

GeometricModel build_model(const RunConfig& c);
MapDefinition build_map(const RunConfig& c);
PipelineOptions pipeline_options(const RunConfig& c);
/// The registered demo, or an ad-hoc one built from the model and map blocks.
DemoSystem build_demo(const RunConfig& c);
PerturbationFamily build_family(const RunConfig& c, const DemoSystem& demo);

}  // namespace nhim
