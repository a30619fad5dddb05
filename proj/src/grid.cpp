#include "nhim/grid.hpp"

#include "nhim/errors.hpp"

#include <algorithm>
#include <cmath>

namespace nhim {

GridAxis angle_axis(int count) { return {0.0, kTwoPi, count, true}; }

GridAxis interval_axis(double radius, int count) { return {-radius, radius, count, false}; }

RegularGrid::RegularGrid(std::vector<GridAxis> axes) : axes_(std::move(axes)) {
  strides_.assign(axes_.size(), 1);
  size_ = 1;
  for (int a = dim() - 1; a >= 0; --a) {
    const GridAxis& ax = axes_[static_cast<std::size_t>(a)];
    if (ax.count < 1 || (!ax.periodic && ax.count < 2 && ax.hi > ax.lo))
      throw ModelError("grid: axis " + std::to_string(a) + " needs at least 2 nodes");
    if (ax.hi < ax.lo) throw ModelError("grid: axis " + std::to_string(a) + " is reversed");
    strides_[static_cast<std::size_t>(a)] = size_;
    size_ *= ax.count;
  }
}

std::vector<int> RegularGrid::multi_index(int flat) const {
  std::vector<int> idx(axes_.size());
  for (int a = 0; a < dim(); ++a) {
    idx[static_cast<std::size_t>(a)] = flat / strides_[static_cast<std::size_t>(a)];
    flat %= strides_[static_cast<std::size_t>(a)];
  }
  return idx;
}

int RegularGrid::flat_index(const std::vector<int>& idx) const {
  int flat = 0;
  for (int a = 0; a < dim(); ++a) flat += idx[static_cast<std::size_t>(a)] * strides_[static_cast<std::size_t>(a)];
  return flat;
}

Vector RegularGrid::node(int flat) const {
  Vector x(dim());
  const auto idx = multi_index(flat);
  for (int a = 0; a < dim(); ++a) x[a] = axes_[static_cast<std::size_t>(a)].node(idx[static_cast<std::size_t>(a)]);
  return x;
}

int RegularGrid::neighbor(int flat, int axis, int direction) const {
  auto idx = multi_index(flat);
  const GridAxis& ax = axes_[static_cast<std::size_t>(axis)];
  int& i = idx[static_cast<std::size_t>(axis)];
  i += direction;
  if (ax.periodic) {
    i = ((i % ax.count) + ax.count) % ax.count;
  } else if (i < 0 || i >= ax.count) {
    return -1;
  }
  return flat_index(idx);
}

int RegularGrid::nearest(const Vector& x) const {
  std::vector<int> idx(axes_.size());
  for (int a = 0; a < dim(); ++a) {
    const GridAxis& ax = axes_[static_cast<std::size_t>(a)];
    const double h = ax.step();
    if (h == 0.0) {
      idx[static_cast<std::size_t>(a)] = 0;
      continue;
    }
    long i = std::lround((x[a] - ax.lo) / h);
    if (ax.periodic) {
      i = ((i % ax.count) + ax.count) % ax.count;
    } else {
      i = std::clamp<long>(i, 0, ax.count - 1);
    }
    idx[static_cast<std::size_t>(a)] = static_cast<int>(i);
  }
  return flat_index(idx);
}

Vector RegularGrid::interpolate(const Matrix& values, const Vector& x, Matrix* gradient) const {
  const int d = dim();
  const int k = static_cast<int>(values.cols());
  std::vector<int> lower(static_cast<std::size_t>(d)), upper(static_cast<std::size_t>(d));
  std::vector<double> t(static_cast<std::size_t>(d)), inv_h(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) {
    const GridAxis& ax = axes_[static_cast<std::size_t>(a)];
    const auto ua = static_cast<std::size_t>(a);
    const double h = ax.step();
    if (ax.count == 1 || h == 0.0) {
      lower[ua] = upper[ua] = 0;
      t[ua] = 0.0;
      inv_h[ua] = 0.0;
      continue;
    }
    inv_h[ua] = 1.0 / h;
    double s = (x[a] - ax.lo) / h;
    if (ax.periodic) {
      s -= ax.count * std::floor(s / ax.count);
      int i = static_cast<int>(std::floor(s));
      if (i >= ax.count) i = ax.count - 1;
      lower[ua] = i;
      upper[ua] = (i + 1) % ax.count;
      t[ua] = s - i;
    } else {
      int i = static_cast<int>(std::floor(s));
      i = std::clamp(i, 0, ax.count - 2);
      lower[ua] = i;
      upper[ua] = i + 1;
      t[ua] = s - i;
    }
  }
  Vector out = Vector::Zero(k);
  if (gradient) *gradient = Matrix::Zero(k, d);
  const int corners = 1 << d;
  std::vector<int> idx(static_cast<std::size_t>(d));
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    for (int a = 0; a < d; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      const bool hi = (c >> a) & 1;
      idx[ua] = hi ? upper[ua] : lower[ua];
      w *= hi ? t[ua] : 1.0 - t[ua];
    }
    const int flat = flat_index(idx);
    out += w * values.row(flat).transpose();
    if (gradient) {
      for (int a = 0; a < d; ++a) {
        double dw = inv_h[static_cast<std::size_t>(a)];
        for (int b = 0; b < d && dw != 0.0; ++b) {
          const auto ub = static_cast<std::size_t>(b);
          const bool hi = (c >> b) & 1;
          if (b == a)
            dw *= hi ? 1.0 : -1.0;
          else
            dw *= hi ? t[ub] : 1.0 - t[ub];
        }
        gradient->col(a) += dw * values.row(flat).transpose();
      }
    }
  }
  return out;
}

bool RegularGrid::operator==(const RegularGrid& other) const {
  if (axes_.size() != other.axes_.size()) return false;
  for (std::size_t a = 0; a < axes_.size(); ++a) {
    const GridAxis& p = axes_[a];
    const GridAxis& q = other.axes_[a];
    if (p.lo != q.lo || p.hi != q.hi || p.count != q.count || p.periodic != q.periodic) return false;
  }
  return true;
}

}  // namespace nhim
