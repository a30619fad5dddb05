#pragma once

#include <Eigen/Dense>

#include <vector>

namespace nhim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;
inline constexpr double kPi = 3.141592653589793238462643383279;

/// Largest ambient dimension m = n + s + u supported by the dual-number engine.
inline constexpr int kMaxAmbientDim = 8;

/// Absolute tolerance used when classifying points against box faces.
inline constexpr double kBoundaryTolerance = 1e-12;

/// Reduces an angle to [0, 2*pi).
double reduce_angle(double angle);

/// Wraps an angle difference to (-pi, pi].
double wrap_difference(double delta);

enum class ConeKind { Stable, Unstable };

/**
 * The box model B = N x B^s x B^u over a base N that is either a point
 * (base_dim = 0) or the flat torus (R / 2piZ)^n.
 *
 * Coordinates are ordered base angles, then stable fiber, then unstable
 * fiber. B^s and B^u are the axis-aligned boxes prod [-r_i, r_i]. The cones
 *   C^s = { |v_s| <= gamma |(v_base, v_u)| },  C^u = { |v_u| <= gamma |(v_base, v_s)| }
 * are measured in the Euclidean product metric.
 */
class GeometricModel {
 public:
  /// Throws ModelError naming the offending field.
  GeometricModel(int base_dim, int stable_dim, int unstable_dim, std::vector<double> radii_s,
                 std::vector<double> radii_u, double gamma = 1.0);

  int n() const noexcept { return n_; }
  int s() const noexcept { return s_; }
  int u() const noexcept { return u_; }
  int m() const noexcept { return n_ + s_ + u_; }

  int stable_offset() const noexcept { return n_; }
  int unstable_offset() const noexcept { return n_ + s_; }

  const std::vector<double>& radii_s() const noexcept { return radii_s_; }
  const std::vector<double>& radii_u() const noexcept { return radii_u_; }
  double gamma() const noexcept { return gamma_; }

  /// Radius of the fiber box along ambient coordinate `i` (i >= n).
  double radius(int i) const;

  /// Ambient indices of the "bad" component v2 of `cone`.
  std::vector<int> cone_bad_indices(ConeKind cone) const;
  /// Ambient indices of the "good" component v1 of `cone`.
  std::vector<int> cone_good_indices(ConeKind cone) const;

  bool operator==(const GeometricModel&) const = default;

 private:
  int n_;
  int s_;
  int u_;
  std::vector<double> radii_s_;
  std::vector<double> radii_u_;
  double gamma_;
};

GeometricModel make_model(int base_dim, int stable_dim, int unstable_dim,
                          std::vector<double> radii_s, std::vector<double> radii_u,
                          double gamma = 1.0);

/// A point z of V = N x R^s x R^u. Base angles are kept in [0, 2pi).
class AmbientPoint {
 public:
  AmbientPoint(const GeometricModel& model, Vector coords);
  AmbientPoint(const Vector& base, const Vector& xi_s, const Vector& xi_u);

  const Vector& coords() const noexcept { return coords_; }
  int n() const noexcept { return n_; }
  int s() const noexcept { return s_; }
  int u() const noexcept { return u_; }

  auto base() const { return coords_.head(n_); }
  auto xi_s() const { return coords_.segment(n_, s_); }
  auto xi_u() const { return coords_.tail(u_); }

 private:
  Vector coords_;
  int n_;
  int s_;
  int u_;
};

/// A tangent vector at a point of V, split the same way as AmbientPoint.
class TangentVector {
 public:
  TangentVector(const GeometricModel& model, Vector components);
  TangentVector(const Vector& d_base, const Vector& d_s, const Vector& d_u);

  const Vector& components() const noexcept { return v_; }
  auto d_base() const { return v_.head(n_); }
  auto d_s() const { return v_.segment(n_, s_); }
  auto d_u() const { return v_.tail(u_); }

 private:
  Vector v_;
  int n_;
  int s_;
  int u_;
};

/// Column-orthonormal m x k basis of a k-plane in R^m. A zero-dimensional
/// plane is allowed and is represented by an m x 0 matrix.
class PlaneBasis {
 public:
  /// Takes an already orthonormal basis; throws ModelError if B^T B != I (1e-12).
  explicit PlaneBasis(Matrix orthonormal);

  /// Orthonormalizes arbitrary spanning columns (Householder QR).
  /// Throws ModelError if the columns are rank deficient.
  static PlaneBasis from_spanning(const Matrix& columns);

  /// Plane spanned by the listed coordinate axes.
  static PlaneBasis coordinate(int ambient_dim, const std::vector<int>& axes);

  int ambient_dim() const noexcept { return static_cast<int>(basis_.rows()); }
  int dim() const noexcept { return static_cast<int>(basis_.cols()); }
  const Matrix& basis() const noexcept { return basis_; }
  Matrix projector() const { return basis_ * basis_.transpose(); }

 private:
  PlaneBasis() = default;
  Matrix basis_;
};

enum class PointClass { Interior, OnStableBoundary, OnUnstableBoundary, OnCorner, Outside };

const char* to_string(PointClass c);

PointClass classify_point(const GeometricModel& model, const AmbientPoint& p);
PointClass classify_point(const GeometricModel& model, const Vector& coords);

/// (gamma |v1| - |v2|) / |v|. Throws ModelError for the zero vector.
double cone_margin(const GeometricModel& model, const TangentVector& v, ConeKind cone);
double cone_margin(const GeometricModel& model, const Vector& v, ConeKind cone);

/// Minimum of cone_margin over the unit vectors of `plane`, from the smallest
/// eigenvalue of B^T P1 B (the good-part Rayleigh quotient). Cones are the
/// same at every point of the trivial model, so no base point is needed.
double plane_in_cone_margin(const GeometricModel& model, const PlaneBasis& plane, ConeKind cone);

/// Operator norm of the difference of the orthogonal projectors.
double grassmann_distance(const PlaneBasis& a, const PlaneBasis& b);

/// Euclidean distance from the fiber part of `coords` to a boundary stratum
/// of B, or to B itself. The base is unconstrained.
double distance_to_stable_boundary(const GeometricModel& model, const Vector& coords);
double distance_to_unstable_boundary(const GeometricModel& model, const Vector& coords);
double distance_to_box(const GeometricModel& model, const Vector& coords);
/// Positive inside B (distance to the topological boundary), negative outside.
double signed_distance_to_boundary(const GeometricModel& model, const Vector& coords);

}  // namespace nhim
