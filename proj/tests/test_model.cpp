#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nhim/errors.hpp"
#include "nhim/model.hpp"

#include <cmath>
#include <random>
#include <string>

using namespace nhim;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Brute-force margin from the definition, independent of the library.
double margin_oracle(const Vector& v, const std::vector<int>& good, const std::vector<int>& bad,
                     double gamma) {
  double g = 0, b = 0;
  for (int i : good) g += v[i] * v[i];
  for (int i : bad) b += v[i] * v[i];
  return (gamma * std::sqrt(g) - std::sqrt(b)) / v.norm();
}

}  // namespace

TEST_CASE("make_model validates every field") {
  const GeometricModel m = make_model(0, 1, 1, {0.5}, {0.5});
  CHECK(m.m() == 2);
  CHECK(m.gamma() == 1.0);
  const GeometricModel t = make_model(1, 1, 1, {0.5}, {0.5});
  CHECK(t.m() == 3);
  CHECK(t.stable_offset() == 1);
  CHECK(t.unstable_offset() == 2);

  try {
    make_model(0, 1, 0, {-1.0}, {});
    FAIL("negative radius accepted");
  } catch (const ModelError& e) {
    CHECK(std::string(e.what()).find("radius must be positive") != std::string::npos);
  }
  CHECK_THROWS_AS(make_model(0, 0, 0, {}, {}), ModelError);
  CHECK_THROWS_AS(make_model(-1, 1, 1, {0.5}, {0.5}), ModelError);
  CHECK_THROWS_AS(make_model(0, 1, 1, {0.5}, {0.5}, 0.0), ModelError);
  CHECK_THROWS_AS(make_model(0, 1, 1, {0.5}, {0.5}, 1.5), ModelError);
  CHECK_THROWS_AS(make_model(0, 2, 1, {0.5}, {0.5}), ModelError);
  CHECK_THROWS_AS(make_model(5, 2, 2, {1, 1}, {1, 1}), ModelError);
}

TEST_CASE("ambient points keep angles in [0, 2pi)") {
  const GeometricModel m = make_model(1, 1, 1, {0.5}, {0.5});
  const AmbientPoint p(m, vec({7.0, 0.1, -0.2}));
  CHECK(p.base()[0] == doctest::Approx(7.0 - kTwoPi).epsilon(1e-15));
  const AmbientPoint q(m, vec({-0.5, 0.0, 0.0}));
  CHECK(q.base()[0] == doctest::Approx(kTwoPi - 0.5).epsilon(1e-15));
  CHECK(q.base()[0] < kTwoPi);
  CHECK(reduce_angle(-1e-20) < kTwoPi);
}

TEST_CASE("classify_point on the square model") {
  const GeometricModel m = make_model(0, 1, 1, {0.5}, {0.5});
  CHECK(classify_point(m, vec({0.2, 0.2})) == PointClass::Interior);
  CHECK(classify_point(m, vec({0.5, 0.2})) == PointClass::OnStableBoundary);
  CHECK(classify_point(m, vec({0.2, -0.5})) == PointClass::OnUnstableBoundary);
  CHECK(classify_point(m, vec({0.5, 0.5})) == PointClass::OnCorner);
  CHECK(classify_point(m, vec({0.6, 0.0})) == PointClass::Outside);
  CHECK(classify_point(m, vec({0.5 + 5e-13, 0.0})) == PointClass::OnStableBoundary);
}

TEST_CASE("property: classify_point assigns one consistent label") {
  const GeometricModel m = make_model(1, 2, 1, {0.5, 0.3}, {0.4});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.7, 0.7);
  std::uniform_int_distribution<int> snap(0, 5);
  for (int trial = 0; trial < 5000; ++trial) {
    Vector z = vec({u(rng) * 5, u(rng), u(rng), u(rng)});
    // Put some coordinates exactly on faces.
    if (snap(rng) == 0) z[1] = 0.5;
    if (snap(rng) == 0) z[3] = -0.4;
    const double r[] = {0.5, 0.3, 0.4};
    bool outside = false, on_s = false, on_u = false;
    for (int k = 0; k < 3; ++k) {
      const double a = std::abs(z[k + 1]);
      if (a > r[k] + 1e-12) outside = true;
      else if (a >= r[k] - 1e-12) (k < 2 ? on_s : on_u) = true;
    }
    PointClass expect = PointClass::Interior;
    if (outside) expect = PointClass::Outside;
    else if (on_s && on_u) expect = PointClass::OnCorner;
    else if (on_s) expect = PointClass::OnStableBoundary;
    else if (on_u) expect = PointClass::OnUnstableBoundary;
    CHECK(classify_point(m, z) == expect);
  }
}

TEST_CASE("cone_margin examples and errors") {
  const GeometricModel m = make_model(0, 1, 1, {0.5}, {0.5});
  CHECK(cone_margin(m, vec({0.3, 0.4}), ConeKind::Stable) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(cone_margin(m, vec({0.4, 0.3}), ConeKind::Stable) == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(cone_margin(m, vec({1.0, 1.0}), ConeKind::Stable) == doctest::Approx(0.0));
  CHECK(cone_margin(m, vec({0.4, 0.3}), ConeKind::Unstable) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK_THROWS_AS(cone_margin(m, vec({0.0, 0.0}), ConeKind::Stable), ModelError);
}

TEST_CASE("property: cone_margin is scale invariant and matches the definition") {
  const GeometricModel m = make_model(1, 1, 2, {0.5}, {0.5, 0.5}, 0.7);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int i = 0; i < 2000; ++i) {
    const Vector v = vec({g(rng), g(rng), g(rng), g(rng)});
    const double alpha = (i % 2 ? -1.0 : 1.0) * std::exp(g(rng) * 3);
    const double ms = cone_margin(m, v, ConeKind::Stable);
    CHECK(std::abs(cone_margin(m, Vector(alpha * v), ConeKind::Stable) - ms) < 1e-14);
    CHECK(std::abs(ms - margin_oracle(v, {0, 2, 3}, {1}, 0.7)) < 1e-14);
    CHECK(std::abs(cone_margin(m, v, ConeKind::Unstable) - margin_oracle(v, {0, 1}, {2, 3}, 0.7)) < 1e-14);
  }
}

TEST_CASE("plane_in_cone_margin examples") {
  const GeometricModel m = make_model(0, 1, 1, {0.5}, {0.5});
  const auto line = [](double a, double b) {
    Matrix c(2, 1);
    c << a, b;
    return PlaneBasis::from_spanning(c);
  };
  CHECK(plane_in_cone_margin(m, line(0, 1), ConeKind::Stable) == doctest::Approx(1.0));
  CHECK(plane_in_cone_margin(m, line(1, 0), ConeKind::Stable) == doctest::Approx(-1.0));
  CHECK(std::abs(plane_in_cone_margin(m, line(1, 1), ConeKind::Stable)) < 1e-15);
}

TEST_CASE("property: plane_in_cone_margin equals the sampled minimum") {
  const GeometricModel m = make_model(1, 2, 1, {0.5, 0.5}, {0.5}, 0.8);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 1 + trial % 3;
    Matrix span(4, k);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < k; ++j) span(i, j) = g(rng);
    const PlaneBasis plane = PlaneBasis::from_spanning(span);
    for (ConeKind cone : {ConeKind::Stable, ConeKind::Unstable}) {
      const double exact = plane_in_cone_margin(m, plane, cone);
      double sampled = 1e300;
      const std::vector<int> good = cone == ConeKind::Stable ? std::vector<int>{0, 3} : std::vector<int>{0, 1, 2};
      const std::vector<int> bad = cone == ConeKind::Stable ? std::vector<int>{1, 2} : std::vector<int>{3};
      for (int s = 0; s < 10000; ++s) {
        Vector c(k);
        for (int j = 0; j < k; ++j) c[j] = g(rng);
        sampled = std::min(sampled, margin_oracle(plane.basis() * c, good, bad, 0.8));
      }
      if (k == 1) {
        CHECK(std::abs(exact - sampled) < 1e-12);
      } else {
        // The sampled minimum approaches the exact one from above.
        CHECK(exact <= sampled + 1e-12);
        CHECK(sampled - exact < (k == 2 ? 1e-6 : 5e-2));
      }
    }
  }
}

TEST_CASE("property: plane margin agrees with a dense parametrization on 2-planes") {
  // On a 2-plane the unit circle is one-parameter; a fine scan plus local
  // refinement gives an independent minimum to 1e-9.
  const GeometricModel m = make_model(1, 1, 1, {0.5}, {0.5});
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 10; ++trial) {
    Matrix span(3, 2);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 2; ++j) span(i, j) = g(rng);
    const PlaneBasis plane = PlaneBasis::from_spanning(span);
    const auto f = [&](double t) {
      const Vector w = plane.basis() * vec({std::cos(t), std::sin(t)});
      return margin_oracle(w, {0, 2}, {1}, 1.0);
    };
    double best_t = 0, best = 1e300;
    for (int i = 0; i < 10000; ++i) {
      const double t = kPi * i / 10000;
      if (f(t) < best) best = f(t), best_t = t;
    }
    double a = best_t - kPi / 10000, b = best_t + kPi / 10000;
    for (int it = 0; it < 200; ++it) {
      const double c = a + (b - a) * 0.381966, d = b - (b - a) * 0.381966;
      if (f(c) < f(d)) b = d;
      else a = c;
    }
    CHECK(std::abs(plane_in_cone_margin(m, plane, ConeKind::Stable) - f(0.5 * (a + b))) < 1e-9);
  }
}

TEST_CASE("grassmann_distance examples") {
  const auto line = [](double a, double b) {
    Matrix c(2, 1);
    c << a, b;
    return PlaneBasis::from_spanning(c);
  };
  CHECK(grassmann_distance(line(1, 0), line(1, 0)) == doctest::Approx(0.0));
  CHECK(grassmann_distance(line(1, 0), line(0, 1)) == doctest::Approx(1.0));
  CHECK(grassmann_distance(line(1, 0), line(1, 1)) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
  CHECK_THROWS_AS(grassmann_distance(line(1, 0), PlaneBasis::coordinate(3, {0})), ModelError);
}

TEST_CASE("property: grassmann_distance is a metric on random triples") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  const auto random_plane = [&](int m, int k) {
    Matrix s(m, k);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < k; ++j) s(i, j) = g(rng);
    return PlaneBasis::from_spanning(s);
  };
  for (int trial = 0; trial < 500; ++trial) {
    const int m = 2 + trial % 4, k = 1 + trial % (m - 1);
    const PlaneBasis a = random_plane(m, k), b = random_plane(m, k), c = random_plane(m, k);
    const double ab = grassmann_distance(a, b), ba = grassmann_distance(b, a);
    CHECK(std::abs(ab - ba) < 1e-12);
    CHECK(ab <= 1.0 + 1e-12);
    CHECK(grassmann_distance(a, c) <= ab + grassmann_distance(b, c) + 1e-12);
    CHECK(grassmann_distance(a, a) < 1e-12);
  }
}

TEST_CASE("property: a plane strictly inside C^s meets the pure stable subspace only at 0") {
  const GeometricModel m = make_model(1, 2, 1, {0.5, 0.5}, {0.5});
  std::mt19937_64 rng(23);
  std::normal_distribution<double> g;
  int tested = 0;
  for (int trial = 0; trial < 2000 && tested < 200; ++trial) {
    Matrix s(4, 2);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 2; ++j) s(i, j) = g(rng) * (i == 1 || i == 2 ? 0.3 : 1.0);
    const PlaneBasis p = PlaneBasis::from_spanning(s);
    if (plane_in_cone_margin(m, p, ConeKind::Stable) <= 0.0) continue;
    ++tested;
    Matrix stacked(4, 4);
    stacked << p.basis(), PlaneBasis::coordinate(4, {1, 2}).basis();
    CHECK(Eigen::FullPivLU<Matrix>(stacked).rank() == 4);
  }
  CHECK(tested >= 50);
}

TEST_CASE("PlaneBasis rejects non-orthonormal input and rank deficiency") {
  Matrix bad(2, 1);
  bad << 1.0, 1.0;
  CHECK_THROWS_AS(PlaneBasis{bad}, ModelError);
  Matrix dep(3, 2);
  dep << 1, 2, 1, 2, 0, 0;
  CHECK_THROWS_AS(PlaneBasis::from_spanning(dep), ModelError);
  const PlaneBasis empty = PlaneBasis::coordinate(3, {});
  CHECK(empty.dim() == 0);
}

TEST_CASE("distances to boundary strata") {
  const GeometricModel m = make_model(0, 1, 1, {0.5}, {0.5});
  CHECK(distance_to_stable_boundary(m, vec({0.375, 0.9})) == doctest::Approx(std::hypot(0.125, 0.4)));
  CHECK(distance_to_stable_boundary(m, vec({0.375, 0.2})) == doctest::Approx(0.125));
  CHECK(distance_to_box(m, vec({0.1, 1.0})) == doctest::Approx(0.5));
  CHECK(distance_to_box(m, vec({0.1, 0.1})) == 0.0);
  CHECK(signed_distance_to_boundary(m, vec({0.1, 0.3})) == doctest::Approx(0.2));
  CHECK(signed_distance_to_boundary(m, vec({0.1, 0.7})) == doctest::Approx(-0.2));
}
