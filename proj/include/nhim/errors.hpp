#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nhim {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid construction parameters (dimensions, radii, aperture, plane bases).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Syntax or name-resolution failure in a map formula.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t offset)
      : Error(message + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// A formula was evaluated outside its domain (log of non-positive, ...).
/// `coordinate` is the index of the formula, or -1 when unknown.
class DomainError : public Error {
 public:
  DomainError(const std::string& message, int coordinate = -1)
      : Error(coordinate >= 0 ? "coordinate " + std::to_string(coordinate) + ": " + message
                              : message),
        coordinate_(coordinate) {}
  int coordinate() const noexcept { return coordinate_; }

 private:
  int coordinate_;
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& message, double best_residual)
      : Error(message + " (best residual " + std::to_string(best_residual) + ")"),
        best_residual_(best_residual) {}
  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

class SingularJacobian : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A graph-transform node could not be solved. `kind` is one of
/// "NewtonFailure", "ValueOutsideFiber", "NonInjectiveCover".
class NodeFailure : public Error {
 public:
  NodeFailure(const std::string& kind, int node, const std::string& detail)
      : Error(kind + " at node " + std::to_string(node) + ": " + detail), kind_(kind), node_(node) {}
  const std::string& kind() const noexcept { return kind_; }
  int node() const noexcept { return node_; }

 private:
  std::string kind_;
  int node_;
};

/// The stable/unstable graphs do not meet inside B over some base node.
class NoIntersection : public Error {
 public:
  using Error::Error;
};

}  // namespace nhim
