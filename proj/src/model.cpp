#include "nhim/model.hpp"

#include "nhim/errors.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace nhim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Distance from a box-local point to the box prod [-r_i, r_i].
double box_distance_sq(const Vector& q, int offset, const std::vector<double>& radii) {
  double acc = 0.0;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double excess = std::abs(q[offset + static_cast<int>(i)]) - radii[i];
    if (excess > 0.0) acc += excess * excess;
  }
  return acc;
}

// Distance to the boundary of the box (as a set). Infinite when the box has
// dimension zero, since its boundary is then empty.
double box_boundary_distance(const Vector& q, int offset, const std::vector<double>& radii) {
  if (radii.empty()) return kInf;
  const double outside = box_distance_sq(q, offset, radii);
  if (outside > 0.0) return std::sqrt(outside);
  double best = kInf;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    best = std::min(best, radii[i] - std::abs(q[offset + static_cast<int>(i)]));
  }
  return best;
}

}  // namespace

double reduce_angle(double angle) {
  double r = std::fmod(angle, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

double wrap_difference(double delta) {
  double r = std::fmod(delta, kTwoPi);
  if (r > kPi) r -= kTwoPi;
  if (r <= -kPi) r += kTwoPi;
  return r;
}

GeometricModel::GeometricModel(int base_dim, int stable_dim, int unstable_dim,
                               std::vector<double> radii_s, std::vector<double> radii_u,
                               double gamma)
    : n_(base_dim),
      s_(stable_dim),
      u_(unstable_dim),
      radii_s_(std::move(radii_s)),
      radii_u_(std::move(radii_u)),
      gamma_(gamma) {
  if (n_ < 0) throw ModelError("base_dim must be >= 0");
  if (s_ < 0) throw ModelError("stable_dim must be >= 0");
  if (u_ < 0) throw ModelError("unstable_dim must be >= 0");
  if (m() < 1) throw ModelError("ambient dimension n+s+u must be >= 1");
  if (m() > kMaxAmbientDim) {
    throw ModelError("ambient dimension n+s+u must be <= " + std::to_string(kMaxAmbientDim));
  }
  if (static_cast<int>(radii_s_.size()) != s_) {
    throw ModelError("radii_s: expected " + std::to_string(s_) + " entries");
  }
  if (static_cast<int>(radii_u_.size()) != u_) {
    throw ModelError("radii_u: expected " + std::to_string(u_) + " entries");
  }
  for (double r : radii_s_) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ModelError("radii_s: radius must be positive");
  }
  for (double r : radii_u_) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ModelError("radii_u: radius must be positive");
  }
  if (!(gamma_ > 0.0 && gamma_ <= 1.0)) throw ModelError("gamma: aperture must lie in (0, 1]");
}

double GeometricModel::radius(int i) const {
  if (i >= n_ && i < n_ + s_) return radii_s_[static_cast<std::size_t>(i - n_)];
  if (i >= n_ + s_ && i < m()) return radii_u_[static_cast<std::size_t>(i - n_ - s_)];
  throw ModelError("radius: coordinate " + std::to_string(i) + " is not a fiber coordinate");
}

std::vector<int> GeometricModel::cone_bad_indices(ConeKind cone) const {
  std::vector<int> out;
  const int first = cone == ConeKind::Stable ? n_ : n_ + s_;
  const int count = cone == ConeKind::Stable ? s_ : u_;
  for (int i = 0; i < count; ++i) out.push_back(first + i);
  return out;
}

std::vector<int> GeometricModel::cone_good_indices(ConeKind cone) const {
  std::vector<int> out;
  for (int i = 0; i < n_; ++i) out.push_back(i);
  const int first = cone == ConeKind::Stable ? n_ + s_ : n_;
  const int count = cone == ConeKind::Stable ? u_ : s_;
  for (int i = 0; i < count; ++i) out.push_back(first + i);
  return out;
}

GeometricModel make_model(int base_dim, int stable_dim, int unstable_dim,
                          std::vector<double> radii_s, std::vector<double> radii_u, double gamma) {
  return GeometricModel(base_dim, stable_dim, unstable_dim, std::move(radii_s),
                        std::move(radii_u), gamma);
}

AmbientPoint::AmbientPoint(const GeometricModel& model, Vector coords)
    : coords_(std::move(coords)), n_(model.n()), s_(model.s()), u_(model.u()) {
  if (coords_.size() != model.m()) throw ModelError("AmbientPoint: dimension mismatch");
  for (int i = 0; i < n_; ++i) coords_[i] = reduce_angle(coords_[i]);
}

AmbientPoint::AmbientPoint(const Vector& base, const Vector& xi_s, const Vector& xi_u)
    : coords_(base.size() + xi_s.size() + xi_u.size()),
      n_(static_cast<int>(base.size())),
      s_(static_cast<int>(xi_s.size())),
      u_(static_cast<int>(xi_u.size())) {
  coords_ << base, xi_s, xi_u;
  for (int i = 0; i < n_; ++i) coords_[i] = reduce_angle(coords_[i]);
}

TangentVector::TangentVector(const GeometricModel& model, Vector components)
    : v_(std::move(components)), n_(model.n()), s_(model.s()), u_(model.u()) {
  if (v_.size() != model.m()) throw ModelError("TangentVector: dimension mismatch");
}

TangentVector::TangentVector(const Vector& d_base, const Vector& d_s, const Vector& d_u)
    : v_(d_base.size() + d_s.size() + d_u.size()),
      n_(static_cast<int>(d_base.size())),
      s_(static_cast<int>(d_s.size())),
      u_(static_cast<int>(d_u.size())) {
  v_ << d_base, d_s, d_u;
}

PlaneBasis::PlaneBasis(Matrix orthonormal) : basis_(std::move(orthonormal)) {
  if (basis_.cols() > basis_.rows()) throw ModelError("PlaneBasis: plane dim exceeds ambient dim");
  if (basis_.cols() == 0) return;
  const Matrix gram = basis_.transpose() * basis_;
  const double err =
      (gram - Matrix::Identity(basis_.cols(), basis_.cols())).cwiseAbs().maxCoeff();
  if (!(err <= 1e-12)) throw ModelError("PlaneBasis: basis is not orthonormal");
}

PlaneBasis PlaneBasis::from_spanning(const Matrix& columns) {
  PlaneBasis out;
  const auto m = columns.rows();
  const auto k = columns.cols();
  if (k > m) throw ModelError("PlaneBasis: more spanning columns than ambient dimension");
  if (k == 0) {
    out.basis_ = Matrix(m, 0);
    return out;
  }
  if (!columns.allFinite()) throw ModelError("PlaneBasis: non-finite spanning columns");
  Eigen::ColPivHouseholderQR<Matrix> qr(columns);
  const Matrix r = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
  const double lead = std::abs(r(0, 0));
  const double last = std::abs(r(k - 1, k - 1));
  if (!(lead > 0.0) || last <= 1e-13 * lead) {
    throw ModelError("PlaneBasis: spanning columns are rank deficient");
  }
  out.basis_ = qr.householderQ() * Matrix::Identity(m, k);
  return out;
}

PlaneBasis PlaneBasis::coordinate(int ambient_dim, const std::vector<int>& axes) {
  Matrix b = Matrix::Zero(ambient_dim, static_cast<int>(axes.size()));
  for (std::size_t j = 0; j < axes.size(); ++j) b(axes[j], static_cast<int>(j)) = 1.0;
  return PlaneBasis(std::move(b));
}

const char* to_string(PointClass c) {
  switch (c) {
    case PointClass::Interior: return "Interior";
    case PointClass::OnStableBoundary: return "OnStableBoundary";
    case PointClass::OnUnstableBoundary: return "OnUnstableBoundary";
    case PointClass::OnCorner: return "OnCorner";
    case PointClass::Outside: return "Outside";
  }
  return "?";
}

PointClass classify_point(const GeometricModel& model, const Vector& coords) {
  bool on_s = false;
  bool on_u = false;
  for (int i = model.n(); i < model.m(); ++i) {
    const double excess = std::abs(coords[i]) - model.radius(i);
    if (excess > kBoundaryTolerance) return PointClass::Outside;
    if (excess >= -kBoundaryTolerance) {
      (i < model.unstable_offset() ? on_s : on_u) = true;
    }
  }
  if (on_s && on_u) return PointClass::OnCorner;
  if (on_s) return PointClass::OnStableBoundary;
  if (on_u) return PointClass::OnUnstableBoundary;
  return PointClass::Interior;
}

PointClass classify_point(const GeometricModel& model, const AmbientPoint& p) {
  return classify_point(model, p.coords());
}

double cone_margin(const GeometricModel& model, const Vector& v, ConeKind cone) {
  if (v.size() != model.m()) throw ModelError("cone_margin: dimension mismatch");
  const double norm = v.norm();
  if (!(norm > 0.0)) throw ModelError("cone_margin: zero vector");
  double good = 0.0;
  double bad = 0.0;
  const int bad_lo = cone == ConeKind::Stable ? model.n() : model.unstable_offset();
  const int bad_hi = cone == ConeKind::Stable ? model.unstable_offset() : model.m();
  for (int i = 0; i < model.m(); ++i) {
    (i >= bad_lo && i < bad_hi ? bad : good) += v[i] * v[i];
  }
  return (model.gamma() * std::sqrt(good) - std::sqrt(bad)) / norm;
}

double cone_margin(const GeometricModel& model, const TangentVector& v, ConeKind cone) {
  return cone_margin(model, v.components(), cone);
}

double plane_in_cone_margin(const GeometricModel& model, const PlaneBasis& plane, ConeKind cone) {
  if (plane.ambient_dim() != model.m()) throw ModelError("plane_in_cone_margin: dimension mismatch");
  if (plane.dim() == 0) return std::numeric_limits<double>::infinity();
  Matrix good_rows = Matrix::Zero(model.m(), plane.dim());
  for (int i : model.cone_good_indices(cone)) good_rows.row(i) = plane.basis().row(i);
  const Matrix form = good_rows.transpose() * good_rows;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(form, Eigen::EigenvaluesOnly);
  const double a2 = std::clamp(eig.eigenvalues()[0], 0.0, 1.0);
  return model.gamma() * std::sqrt(a2) - std::sqrt(1.0 - a2);
}

double grassmann_distance(const PlaneBasis& a, const PlaneBasis& b) {
  if (a.ambient_dim() != b.ambient_dim() || a.dim() != b.dim()) {
    throw ModelError("grassmann_distance: ambient or plane dimension mismatch");
  }
  if (a.dim() == 0) return 0.0;
  const Matrix diff = a.projector() - b.projector();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(diff, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

double distance_to_stable_boundary(const GeometricModel& model, const Vector& coords) {
  const double ds = box_boundary_distance(coords, model.stable_offset(), model.radii_s());
  if (!std::isfinite(ds)) return ds;
  const double du2 = box_distance_sq(coords, model.unstable_offset(), model.radii_u());
  return std::sqrt(ds * ds + du2);
}

double distance_to_unstable_boundary(const GeometricModel& model, const Vector& coords) {
  const double du = box_boundary_distance(coords, model.unstable_offset(), model.radii_u());
  if (!std::isfinite(du)) return du;
  const double ds2 = box_distance_sq(coords, model.stable_offset(), model.radii_s());
  return std::sqrt(du * du + ds2);
}

double distance_to_box(const GeometricModel& model, const Vector& coords) {
  return std::sqrt(box_distance_sq(coords, model.stable_offset(), model.radii_s()) +
                   box_distance_sq(coords, model.unstable_offset(), model.radii_u()));
}

double signed_distance_to_boundary(const GeometricModel& model, const Vector& coords) {
  const double outside = distance_to_box(model, coords);
  if (outside > 0.0) return -outside;
  double best = kInf;
  for (int i = model.n(); i < model.m(); ++i) {
    best = std::min(best, model.radius(i) - std::abs(coords[i]));
  }
  return best;
}

}  // namespace nhim
