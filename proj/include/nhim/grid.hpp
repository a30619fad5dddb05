#pragma once

#include "nhim/model.hpp"

#include <vector>

namespace nhim {

/// One axis of a tensor grid. Periodic axes cover [lo, lo + period) with
/// `count` equispaced nodes and no duplicated endpoint; bounded axes include
/// both endpoints.
struct GridAxis {
  double lo = 0.0;
  double hi = 0.0;
  int count = 1;
  bool periodic = false;

  double step() const noexcept {
    if (periodic) return (hi - lo) / count;
    return count > 1 ? (hi - lo) / (count - 1) : 0.0;
  }
  double node(int i) const noexcept { return lo + i * step(); }
};

GridAxis angle_axis(int count);
GridAxis interval_axis(double radius, int count);

/**
 * Regular tensor grid with multilinear interpolation. Node `flat` has the
 * first axis varying slowest. Outside a bounded axis the edge cell is
 * extended linearly, which Newton solvers rely on when a trial point leaves
 * the domain.
 */
class RegularGrid {
 public:
  RegularGrid() = default;
  explicit RegularGrid(std::vector<GridAxis> axes);

  int dim() const noexcept { return static_cast<int>(axes_.size()); }
  int size() const noexcept { return size_; }
  const GridAxis& axis(int i) const { return axes_[static_cast<std::size_t>(i)]; }
  const std::vector<GridAxis>& axes() const noexcept { return axes_; }

  std::vector<int> multi_index(int flat) const;
  int flat_index(const std::vector<int>& idx) const;
  Vector node(int flat) const;

  /// Adjacent node along `axis` in direction +1/-1, or -1 past a bounded edge.
  int neighbor(int flat, int axis, int direction) const;

  /// Index of the node closest to x (periodic axes wrap).
  int nearest(const Vector& x) const;

  /// Multilinear interpolation of per-node rows of `values` (size() x k).
  /// When `gradient` is non-null it receives the k x dim() derivative.
  Vector interpolate(const Matrix& values, const Vector& x, Matrix* gradient = nullptr) const;

  bool operator==(const RegularGrid& other) const;

 private:
  std::vector<GridAxis> axes_;
  std::vector<int> strides_;
  int size_ = 1;
};

}  // namespace nhim
