#include "nhim/map_definition.hpp"

#include "nhim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace nhim {

namespace {

std::vector<dsl::Expression> parse_all(const std::vector<std::string>& texts,
                                       const dsl::Declarations& decls, const char* what) {
  std::vector<dsl::Expression> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    try {
      out.push_back(dsl::parse_expression(texts[i], decls));
    } catch (const ParseError& e) {
      throw ParseError(std::string(what) + " " + std::to_string(i) + ": " +
                           std::string(e.what()).substr(0, std::string(e.what()).rfind(" at offset")),
                       e.offset());
    }
  }
  return out;
}

Vector apply(const std::vector<dsl::Expression>& exprs, const std::vector<bool>& periodic,
             const Vector& p) {
  Vector out(static_cast<Eigen::Index>(exprs.size()));
  std::span<const double> vars(p.data(), static_cast<std::size_t>(p.size()));
  for (std::size_t i = 0; i < exprs.size(); ++i) {
    double v;
    try {
      v = exprs[i].evaluate(vars);
    } catch (const DomainError& e) {
      throw DomainError(e.what(), static_cast<int>(i));
    }
    out[static_cast<Eigen::Index>(i)] = periodic[i] ? reduce_angle(v) : v;
  }
  return out;
}

// Projects fiber coordinates onto the closed box; base angles are reduced.
void project_to_box(const GeometricModel& model, Vector& p) {
  for (int i = 0; i < model.n(); ++i) p[i] = reduce_angle(p[i]);
  for (int i = model.n(); i < model.m(); ++i) {
    const double r = model.radius(i);
    p[i] = std::clamp(p[i], -r, r);
  }
}

}  // namespace

MapDefinition::MapDefinition(std::vector<std::string> variables,
                             std::map<std::string, double> parameters,
                             const std::vector<std::string>& formulas, std::vector<bool> periodic,
                             const std::optional<std::vector<std::string>>& inverse)
    : variables_(std::move(variables)),
      parameters_(std::move(parameters)),
      periodic_(std::move(periodic)) {
  const dsl::Declarations decls{variables_, parameters_};
  forward_ = parse_all(formulas, decls, "formula");
  if (inverse) inverse_ = parse_all(*inverse, decls, "inverse formula");
  validate();
}

MapDefinition::MapDefinition(std::vector<std::string> variables,
                             std::map<std::string, double> parameters,
                             std::vector<dsl::Expression> forward, std::vector<bool> periodic,
                             std::optional<std::vector<dsl::Expression>> inverse)
    : variables_(std::move(variables)),
      parameters_(std::move(parameters)),
      forward_(std::move(forward)),
      inverse_(std::move(inverse)),
      periodic_(std::move(periodic)) {
  validate();
}

void MapDefinition::validate() const {
  const std::size_t m = variables_.size();
  if (m == 0 || m > static_cast<std::size_t>(kMaxAmbientDim))
    throw ConfigError("variables: expected between 1 and " + std::to_string(kMaxAmbientDim) +
                      " names");
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      if (variables_[i] == variables_[j])
        throw ConfigError("variables: duplicate name '" + variables_[i] + "'");
  for (const auto& v : variables_)
    if (parameters_.count(v)) throw ConfigError("params: '" + v + "' is also a variable");
  if (forward_.size() != m)
    throw ConfigError("formulas: expected " + std::to_string(m) + " formulas, got " +
                      std::to_string(forward_.size()));
  if (inverse_ && inverse_->size() != m)
    throw ConfigError("inverse: expected " + std::to_string(m) + " formulas, got " +
                      std::to_string(inverse_->size()));
  if (periodic_.size() != m)
    throw ConfigError("periodic: expected " + std::to_string(m) + " flags, got " +
                      std::to_string(periodic_.size()));
  for (const auto& e : forward_)
    if (e.empty()) throw ConfigError("formulas: empty expression");
}

std::vector<std::string> MapDefinition::formula_texts() const {
  std::vector<std::string> out;
  for (const auto& e : forward_) out.push_back(e.to_string());
  return out;
}

std::optional<std::vector<std::string>> MapDefinition::inverse_texts() const {
  if (!inverse_) return std::nullopt;
  std::vector<std::string> out;
  for (const auto& e : *inverse_) out.push_back(e.to_string());
  return out;
}

Vector MapDefinition::eval(const Vector& p) const {
  if (p.size() != dim()) throw ModelError("map eval: point has wrong dimension");
  return apply(forward_, periodic_, p);
}

void MapDefinition::eval_with_jacobian(const Vector& p, Vector& value, Matrix& jac) const {
  const int m = dim();
  if (p.size() != m) throw ModelError("map eval: point has wrong dimension");
  std::array<Jet, kMaxAmbientDim> vars;
  for (int i = 0; i < m; ++i) vars[static_cast<std::size_t>(i)] = Jet::variable(p[i], i, m);
  std::span<const Jet> span(vars.data(), static_cast<std::size_t>(m));
  value.resize(m);
  jac.resize(m, m);
  for (int i = 0; i < m; ++i) {
    Jet r;
    try {
      r = forward_[static_cast<std::size_t>(i)].evaluate(span);
    } catch (const DomainError& e) {
      throw DomainError(e.what(), i);
    }
    value[i] = periodic_[static_cast<std::size_t>(i)] ? reduce_angle(r.value) : r.value;
    for (int j = 0; j < m; ++j) jac(i, j) = r.dim > 0 ? r.grad[static_cast<std::size_t>(j)] : 0.0;
  }
}

Matrix MapDefinition::jacobian(const Vector& p) const {
  Vector v;
  Matrix j;
  eval_with_jacobian(p, v, j);
  return j;
}

Vector MapDefinition::eval_inverse_formulas(const Vector& q) const {
  if (!inverse_) throw ModelError("map has no inverse formulas");
  if (q.size() != dim()) throw ModelError("map inverse: point has wrong dimension");
  return apply(*inverse_, periodic_, q);
}

void check_compatible(const GeometricModel& model, const MapDefinition& map) {
  if (map.dim() != model.m())
    throw ConfigError("map: " + std::to_string(map.dim()) + " variables for an ambient dimension " +
                      std::to_string(model.m()));
  for (int i = 0; i < model.m(); ++i) {
    const bool want = i < model.n();
    if (map.periodic()[static_cast<std::size_t>(i)] != want)
      throw ConfigError("periodic: coordinate " + std::to_string(i) +
                        (want ? " is a base angle and must be periodic"
                              : " is a fiber coordinate and must not be periodic"));
  }
}

AmbientPoint map_eval(const MapDefinition& map, const AmbientPoint& p) {
  const Vector image = map.eval(p.coords());
  return AmbientPoint(Vector(image.head(p.n())), Vector(image.segment(p.n(), p.s())),
                      Vector(image.tail(p.u())));
}

Matrix map_jacobian(const MapDefinition& map, const AmbientPoint& p) {
  return map.jacobian(p.coords());
}

Vector periodic_residual(const MapDefinition& map, const Vector& image, const Vector& q) {
  Vector r = image - q;
  for (int i = 0; i < map.dim(); ++i)
    if (map.periodic()[static_cast<std::size_t>(i)]) r[i] = wrap_difference(r[i]);
  return r;
}

Vector map_inverse_eval(const MapDefinition& map, const Vector& q, const Vector& guess,
                        const InverseOptions& options) {
  if (map.has_inverse()) return map.eval_inverse_formulas(q);
  const int m = map.dim();
  Vector p = guess;
  if (options.domain) project_to_box(*options.domain, p);
  Vector value;
  Matrix jac;
  map.eval_with_jacobian(p, value, jac);
  Vector r = periodic_residual(map, value, q);
  double res = r.lpNorm<Eigen::Infinity>();
  Vector best = p;
  double best_res = res;
  for (int step = 0; step < options.max_steps && res > options.tolerance; ++step) {
    Eigen::FullPivLU<Matrix> lu(jac);
    if (!lu.isInvertible() || std::abs(lu.determinant()) < 1e-300)
      throw SingularJacobian("map inverse: singular Jacobian at step " + std::to_string(step));
    const Vector delta = lu.solve(-r);
    // Backtrack on the residual so far guesses do not wander off.
    double t = 1.0;
    bool improved = false;
    Vector trial(m);
    Vector trial_value;
    Matrix trial_jac;
    double trial_res = res;
    for (int halving = 0; halving < 12; ++halving, t *= 0.5) {
      trial = p + t * delta;
      if (options.domain) project_to_box(*options.domain, trial);
      try {
        map.eval_with_jacobian(trial, trial_value, trial_jac);
      } catch (const DomainError&) {
        continue;
      }
      trial_res = periodic_residual(map, trial_value, q).lpNorm<Eigen::Infinity>();
      if (trial_res < res) {
        improved = true;
        break;
      }
    }
    if (!improved) break;
    p = trial;
    value = trial_value;
    jac = trial_jac;
    r = periodic_residual(map, value, q);
    res = trial_res;
    if (res < best_res) {
      best_res = res;
      best = p;
    }
  }
  if (best_res > options.accept_residual)
    throw NoConvergence("map inverse: Newton did not converge", best_res);
  for (int i = 0; i < m; ++i)
    if (map.periodic()[static_cast<std::size_t>(i)]) best[i] = reduce_angle(best[i]);
  return best;
}

AmbientPoint map_inverse_eval(const MapDefinition& map, const GeometricModel& model,
                              const AmbientPoint& q, const AmbientPoint& guess,
                              const InverseOptions& options) {
  return AmbientPoint(model, map_inverse_eval(map, q.coords(), guess.coords(), options));
}

double inverse_round_trip_error(const MapDefinition& map, const GeometricModel& model,
                                int samples, std::uint64_t seed) {
  if (!map.has_inverse()) throw ModelError("map has no inverse formulas");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) {
    Vector p(model.m());
    for (int i = 0; i < model.n(); ++i) p[i] = (unit(rng) + 1.0) * kPi;
    for (int i = model.n(); i < model.m(); ++i) p[i] = unit(rng) * model.radius(i);
    const Vector a = map.eval_inverse_formulas(map.eval(p));
    const Vector b = map.eval(map.eval_inverse_formulas(p));
    worst = std::max(worst, periodic_residual(map, a, p).lpNorm<Eigen::Infinity>());
    worst = std::max(worst, periodic_residual(map, b, p).lpNorm<Eigen::Infinity>());
  }
  return worst;
}

}  // namespace nhim
