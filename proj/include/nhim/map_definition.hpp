#pragma once

#include "nhim/expression.hpp"
#include "nhim/model.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nhim {

/**
 * A map V -> V given coordinate-wise by formulas in the variables
 * (base angles, then stable, then unstable coordinates). Jacobians come from
 * forward-mode jets, so every engine sees derivatives consistent with the
 * evaluation. Outputs flagged periodic are reduced to [0, 2pi).
 */
class MapDefinition {
 public:
  /// Parses the formulas; throws ParseError (message prefixed with the
  /// formula index) or ConfigError for inconsistent sizes.
  MapDefinition(std::vector<std::string> variables, std::map<std::string, double> parameters,
                const std::vector<std::string>& formulas, std::vector<bool> periodic,
                const std::optional<std::vector<std::string>>& inverse = std::nullopt);

  MapDefinition(std::vector<std::string> variables, std::map<std::string, double> parameters,
                std::vector<dsl::Expression> forward, std::vector<bool> periodic,
                std::optional<std::vector<dsl::Expression>> inverse = std::nullopt);

  int dim() const noexcept { return static_cast<int>(forward_.size()); }
  const std::vector<std::string>& variables() const noexcept { return variables_; }
  const std::map<std::string, double>& parameters() const noexcept { return parameters_; }
  const std::vector<dsl::Expression>& forward() const noexcept { return forward_; }
  const std::optional<std::vector<dsl::Expression>>& inverse() const noexcept { return inverse_; }
  const std::vector<bool>& periodic() const noexcept { return periodic_; }
  bool has_inverse() const noexcept { return inverse_.has_value(); }

  dsl::Declarations declarations() const { return {variables_, parameters_}; }
  std::vector<std::string> formula_texts() const;
  std::optional<std::vector<std::string>> inverse_texts() const;

  /// Throws DomainError naming the coordinate whose formula failed.
  Vector eval(const Vector& p) const;
  Matrix jacobian(const Vector& p) const;
  void eval_with_jacobian(const Vector& p, Vector& value, Matrix& jac) const;
  /// Requires has_inverse().
  Vector eval_inverse_formulas(const Vector& q) const;

 private:
  void validate() const;

  std::vector<std::string> variables_;
  std::map<std::string, double> parameters_;
  std::vector<dsl::Expression> forward_;
  std::optional<std::vector<dsl::Expression>> inverse_;
  std::vector<bool> periodic_;
};

/// Periodic flags must be set exactly on the base coordinates of the model.
void check_compatible(const GeometricModel& model, const MapDefinition& map);

AmbientPoint map_eval(const MapDefinition& map, const AmbientPoint& p);
Matrix map_jacobian(const MapDefinition& map, const AmbientPoint& p);

struct InverseOptions {
  double tolerance = 1e-12;       // stop once |g(p) - q|_inf <= tolerance
  int max_steps = 50;
  double accept_residual = 1e-10;  // otherwise NoConvergence
  // When set, Newton iterates are projected onto the closed box B, so a
  // preimage outside B is reported as NoConvergence instead of being found.
  std::optional<GeometricModel> domain;
};

/// Inverse via the inverse formulas when present, else Newton from `guess`.
/// Throws NoConvergence (with the best residual) or SingularJacobian.
Vector map_inverse_eval(const MapDefinition& map, const Vector& q, const Vector& guess,
                        const InverseOptions& options = {});
AmbientPoint map_inverse_eval(const MapDefinition& map, const GeometricModel& model,
                              const AmbientPoint& q, const AmbientPoint& guess,
                              const InverseOptions& options = {});

/// Residual of g(p) - q with periodic components wrapped to (-pi, pi].
Vector periodic_residual(const MapDefinition& map, const Vector& image, const Vector& q);

/// Max |g(g^-1(p)) - p| and |g^-1(g(p)) - p| over `samples` seeded interior
/// points of B, using the inverse formulas. Requires has_inverse().
double inverse_round_trip_error(const MapDefinition& map, const GeometricModel& model,
                                int samples = 100, std::uint64_t seed = 1);

}  // namespace nhim
