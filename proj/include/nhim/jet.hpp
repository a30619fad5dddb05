#pragma once

#include "nhim/model.hpp"

#include <array>
#include <cmath>

namespace nhim {

/// Forward-mode dual number: a value and its gradient with respect to the
/// `dim` active variables. Storage is fixed so a jet never allocates.
struct Jet {
  double value = 0.0;
  std::array<double, kMaxAmbientDim> grad{};
  int dim = 0;

  Jet() = default;
  Jet(double v, int d) : value(v), dim(d) {}

  static Jet variable(double v, int index, int d) {
    Jet j(v, d);
    j.grad[static_cast<std::size_t>(index)] = 1.0;
    return j;
  }

  template <class F>
  Jet& scale_grad(F&& f) {
    for (int i = 0; i < dim; ++i) grad[i] = f(grad[i]);
    return *this;
  }
};

inline double value_of(double x) { return x; }
inline double value_of(const Jet& x) { return x.value; }

inline Jet operator-(Jet a) {
  a.value = -a.value;
  for (int i = 0; i < a.dim; ++i) a.grad[i] = -a.grad[i];
  return a;
}

inline Jet operator+(Jet a, const Jet& b) {
  a.value += b.value;
  for (int i = 0; i < a.dim; ++i) a.grad[i] += b.grad[i];
  return a;
}

inline Jet operator-(Jet a, const Jet& b) {
  a.value -= b.value;
  for (int i = 0; i < a.dim; ++i) a.grad[i] -= b.grad[i];
  return a;
}

inline Jet operator*(const Jet& a, const Jet& b) {
  Jet r(a.value * b.value, a.dim);
  for (int i = 0; i < a.dim; ++i) r.grad[i] = a.grad[i] * b.value + a.value * b.grad[i];
  return r;
}

inline Jet operator/(const Jet& a, const Jet& b) {
  const double inv = 1.0 / b.value;
  Jet r(a.value * inv, a.dim);
  for (int i = 0; i < a.dim; ++i) r.grad[i] = (a.grad[i] - r.value * b.grad[i]) * inv;
  return r;
}

// Chain rule helper: f(a) with derivative df at a.value.
inline Jet chain(const Jet& a, double f, double df) {
  Jet r(f, a.dim);
  for (int i = 0; i < a.dim; ++i) r.grad[i] = df * a.grad[i];
  return r;
}

inline Jet sin(const Jet& a) { return chain(a, std::sin(a.value), std::cos(a.value)); }
inline Jet cos(const Jet& a) { return chain(a, std::cos(a.value), -std::sin(a.value)); }
inline Jet tan(const Jet& a) {
  const double t = std::tan(a.value);
  return chain(a, t, 1.0 + t * t);
}
inline Jet exp(const Jet& a) {
  const double e = std::exp(a.value);
  return chain(a, e, e);
}
inline Jet log(const Jet& a) { return chain(a, std::log(a.value), 1.0 / a.value); }
inline Jet sqrt(const Jet& a) {
  const double r = std::sqrt(a.value);
  return chain(a, r, 0.5 / r);
}
inline Jet abs(const Jet& a) {
  // Subgradient 0 at the kink.
  const double sign = a.value > 0.0 ? 1.0 : (a.value < 0.0 ? -1.0 : 0.0);
  return chain(a, std::abs(a.value), sign);
}
inline Jet tanh(const Jet& a) {
  const double t = std::tanh(a.value);
  return chain(a, t, 1.0 - t * t);
}

}  // namespace nhim
