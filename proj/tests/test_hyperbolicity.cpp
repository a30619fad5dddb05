#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nhim/errors.hpp"
#include "nhim/hyperbolicity.hpp"
#include "nhim/persistence.hpp"

#include <cmath>
#include <random>

using namespace nhim;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

MapDefinition planar(const char* f, const char* g) {
  return MapDefinition({"x", "y"}, {}, std::vector<std::string>{f, g}, {false, false});
}

const GeometricModel kSquare = make_model(0, 1, 1, {0.5}, {0.5});

// Sampled minimum of the pushed margin over the boundary of a cone, written
// from the definition: boundary vectors are (a, b) with |b| = gamma |a|.
double sampled_pushed_margin(const Matrix& L, const std::vector<int>& good, const std::vector<int>& bad,
                             double gamma, int samples, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  const auto m = L.rows();
  double best = 1e300;
  for (int k = 0; k < samples; ++k) {
    Vector a(static_cast<Eigen::Index>(good.size())), b(static_cast<Eigen::Index>(bad.size()));
    for (auto& x : a) x = g(rng);
    for (auto& x : b) x = g(rng);
    a.normalize();
    b.normalize();
    b *= gamma;
    Vector v = Vector::Zero(m);
    for (std::size_t i = 0; i < good.size(); ++i) v[good[i]] = a[static_cast<Eigen::Index>(i)];
    for (std::size_t i = 0; i < bad.size(); ++i) v[bad[i]] = b[static_cast<Eigen::Index>(i)];
    const Vector w = L * v;
    double gn = 0, bn = 0;
    for (int i : good) gn += w[i] * w[i];
    for (int i : bad) bn += w[i] * w[i];
    best = std::min(best, (gamma * std::sqrt(gn) - std::sqrt(bn)) / w.norm());
  }
  return best;
}

}  // namespace

TEST_CASE("pitchfork boundary margins on the 201x201 grid") {
  const BoundaryMargins b = check_boundary_conditions(kSquare, planar("x - x^3", "2*y"), {1, 201, 64});
  CHECK(std::abs(b.image_vs_stable_boundary - 0.125) < 1e-9);
  CHECK(std::abs(b.unstable_boundary_escape - 0.5) < 1e-9);
  CHECK(std::abs(std::abs(b.worst_image_point[0]) - 0.5) < 1e-12);
  CHECK(std::abs(std::abs(b.worst_escape_point[1]) - 0.5) < 1e-12);
  CHECK(b.samples == 201 * 201);
}

TEST_CASE("identity map fails with both boundary margins 0") {
  const CheckReport r = run_topological_check(kSquare, planar("x", "y"), {1, 51, 16});
  CHECK_FALSE(r.pass);
  CHECK(r.boundary.image_vs_stable_boundary == doctest::Approx(0.0));
  CHECK(r.boundary.unstable_boundary_escape == doctest::Approx(0.0));
}

TEST_CASE("cone margins of the pitchfork and the linear saddle") {
  const ConeMargins p = check_cone_invariance(kSquare, planar("x - x^3", "2*y"), {1, 201, 64});
  // Boundary ray (1,1) maps to (1 - 3x^2, 2); the minimum is at x = 0.
  CHECK(p.cone_margin_s == doctest::Approx(1.0 / std::sqrt(5.0)).epsilon(1e-12));
  CHECK(p.cone_margin_u > 0.0);
  const ConeMargins s = check_cone_invariance(kSquare, planar("x/2", "2*y"), {1, 21, 16});
  CHECK(s.cone_margin_s == doctest::Approx(1.5 / std::sqrt(4.25)).epsilon(1e-12));
  CHECK(s.cone_margin_u == doctest::Approx(1.5 / std::sqrt(4.25)).epsilon(1e-12));
}

TEST_CASE("non-example is detected") {
  const DemoSystem& d = find_demo("non-example");
  const CheckReport r = run_topological_check(d.model, d.map, d.options.check);
  CHECK_FALSE(r.pass);
  CHECK(r.cones.cone_margin_s <= 1e-12);
  CHECK(r.cones.cone_margin_u <= 1e-12);
  CHECK(r.cones.worst_s.norm() < 1e-12);
}

TEST_CASE("property: verdict is pass iff all four margins are positive") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  for (int trial = 0; trial < 12; ++trial) {
    const double a = u(rng), b = u(rng);
    const std::string f = std::to_string(a) + "*x", g = std::to_string(b) + "*y";
    const CheckReport r = run_topological_check(kSquare, planar(f.c_str(), g.c_str()), {1, 21, 16});
    const bool all = r.boundary.image_vs_stable_boundary > 0 && r.boundary.unstable_boundary_escape > 0 &&
                     r.cones.cone_margin_s > 0 && r.cones.cone_margin_u > 0;
    CHECK(r.pass == all);
    CHECK(r.pass == (a < 1.0 && b > 1.0));
  }
}

TEST_CASE("property: pushed cone margin is the minimum over the cone boundary") {
  std::mt19937_64 rng(43);
  std::normal_distribution<double> g;
  const GeometricModel models[] = {make_model(0, 1, 1, {1}, {1}), make_model(1, 1, 1, {1}, {1}, 0.8),
                                   make_model(0, 2, 1, {1, 1}, {1}), make_model(1, 1, 2, {1}, {1, 1}, 0.6)};
  for (const GeometricModel& m : models) {
    for (int trial = 0; trial < 6; ++trial) {
      Matrix L = Matrix::Identity(m.m(), m.m()) * 1.5;
      for (int i = 0; i < m.m(); ++i)
        for (int j = 0; j < m.m(); ++j) L(i, j) += 0.4 * g(rng);
      const Matrix Linv = L.inverse();
      for (ConeKind cone : {ConeKind::Stable, ConeKind::Unstable}) {
        const double exact = pushed_cone_margin(m, L, Linv, cone);
        const double sampled = sampled_pushed_margin(L, m.cone_good_indices(cone), m.cone_bad_indices(cone),
                                                     m.gamma(), 40000, rng);
        CHECK(exact <= sampled + 1e-9);
        CHECK(sampled - exact < (m.m() == 2 ? 1e-9 : 2e-2));
      }
    }
  }
}

TEST_CASE("property: refining the grid never increases a margin") {
  const DemoSystem& d = find_demo("circle-skew");
  const CheckReport coarse = run_topological_check(d.model, d.map, {16, 9, 32});
  const CheckReport fine = run_topological_check(d.model, d.map, {32, 17, 32});
  CHECK(fine.boundary.image_vs_stable_boundary <= coarse.boundary.image_vs_stable_boundary + 1e-15);
  CHECK(fine.boundary.unstable_boundary_escape <= coarse.boundary.unstable_boundary_escape + 1e-15);
  CHECK(fine.cones.cone_margin_s <= coarse.cones.cone_margin_s + 1e-12);
  CHECK(fine.cones.cone_margin_u <= coarse.cones.cone_margin_u + 1e-12);
  const BoundaryMargins p101 = check_boundary_conditions(kSquare, planar("x - x^3", "2*y"), {1, 101, 8});
  const BoundaryMargins p201 = check_boundary_conditions(kSquare, planar("x - x^3", "2*y"), {1, 201, 8});
  CHECK(p201.image_vs_stable_boundary <= p101.image_vs_stable_boundary + 1e-15);
}

TEST_CASE("property: cone margins are unchanged by permuting trivial factors") {
  const GeometricModel m = make_model(0, 2, 1, {0.5, 0.5}, {0.5});
  const MapDefinition a({"x1", "x2", "y"}, {}, std::vector<std::string>{"x1/2 + 0.1*x2", "x2/3", "2*y + 0.2*x1"},
                        {false, false, false});
  const MapDefinition b({"x1", "x2", "y"}, {}, std::vector<std::string>{"x1/3", "x2/2 + 0.1*x1", "2*y + 0.2*x2"},
                        {false, false, false});
  const ConeMargins ca = check_cone_invariance(m, a, {1, 11, 64});
  const ConeMargins cb = check_cone_invariance(m, b, {1, 11, 64});
  CHECK(std::abs(ca.cone_margin_s - cb.cone_margin_s) < 1e-12);
  CHECK(std::abs(ca.cone_margin_u - cb.cone_margin_u) < 1e-12);
}

TEST_CASE("normally contracted case uses containment in the interior") {
  const DemoSystem& d = find_demo("forced-rotation");
  const BoundaryMargins b = check_boundary_conditions(d.model, d.map, {64, 41, 8});
  CHECK(b.contained_mode);
  // |x/2 + 0.05 cos| <= 0.3 on B, so the distance to the boundary is 0.2.
  CHECK(b.unstable_boundary_escape == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(b.image_vs_stable_boundary == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("estimate_splitting on the demos") {
  const auto axes_ok = [](const SplittingSample& s, int si, int ui) {
    CHECK(grassmann_distance(s.stable, PlaneBasis::coordinate(s.stable.ambient_dim(), {si})) < 1e-12);
    CHECK(grassmann_distance(s.unstable, PlaneBasis::coordinate(s.unstable.ambient_dim(), {ui})) < 1e-12);
  };
  const DemoSystem& rot = find_demo("rotation-saddle");
  std::vector<Vector> pts;
  for (int k = 0; k < 32; ++k) pts.push_back(vec({kTwoPi * k / 32}));
  const SplittingEstimate e = estimate_splitting(rot.model, rot.map, pts);
  CHECK(e.max_invariance_residual < 1e-12);
  for (const auto& s : e.samples) axes_ok(s, 1, 2);

  const DemoSystem& pf = find_demo("pitchfork-saddle");
  const SplittingEstimate p = estimate_splitting(pf.model, pf.map, {Vector(0)}, 1);
  axes_ok(p.samples.front(), 0, 1);

  const DemoSystem& skew = find_demo("circle-skew");
  const SplittingEstimate k = estimate_splitting(skew.model, skew.map, pts);
  CHECK(k.max_invariance_residual < 1e-10);
  for (const auto& s : k.samples) {
    axes_ok(s, 1, 2);
    CHECK(grassmann_distance(s.tangent, PlaneBasis::coordinate(3, {0})) < 1e-15);
    Matrix all(3, 3);
    all << s.stable.basis(), s.unstable.basis(), s.tangent.basis();
    CHECK(Eigen::FullPivLU<Matrix>(all).rank() == 3);
  }

  const DemoSystem& forced = find_demo("forced-rotation");
  CHECK_THROWS_AS(estimate_splitting(forced.model, forced.map, pts), ModelError);
}

TEST_CASE("property: power iteration is invariant after 40 steps on hyperbolic demos") {
  std::vector<Vector> pts;
  for (int k = 0; k < 16; ++k) pts.push_back(vec({0.1 + kTwoPi * k / 16}));
  for (const char* name : {"rotation-saddle", "circle-skew"}) {
    const DemoSystem& d = find_demo(name);
    CHECK(estimate_splitting(d.model, d.map, pts, 40).max_invariance_residual < 1e-8);
  }
  // A sheared saddle whose splitting is not the coordinate axes.
  const GeometricModel m = make_model(1, 1, 1, {0.5}, {0.5});
  const MapDefinition shear({"theta", "x", "y"}, {},
                            std::vector<std::string>{"theta + 0.3", "x/2 + 0.3*y*cos(theta)", "2*y + 0.2*x"},
                            {true, false, false});
  const SplittingEstimate s = estimate_splitting(m, shear, pts, 40);
  CHECK(s.max_invariance_residual < 1e-8);
  CHECK(s.continuity > 0.0);
}

TEST_CASE("classical rates") {
  const DemoSystem& rot = find_demo("rotation-saddle");
  std::vector<Vector> pts;
  for (int k = 0; k < 16; ++k) pts.push_back(vec({kTwoPi * k / 16}));
  const SplittingEstimate e = estimate_splitting(rot.model, rot.map, pts);
  for (int r = 1; r <= 3; ++r) {
    const ClassicalRates c = check_classical_rates(rot.model, rot.map, e, r);
    CHECK(c.pass);
    CHECK(c.lambda == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(c.stable_products.size() == static_cast<std::size_t>(r));
    for (double p : c.stable_products) CHECK(p == doctest::Approx(0.5).epsilon(1e-14));
  }

  const DemoSystem& pf = find_demo("pitchfork-saddle");
  const ClassicalRates p = check_classical_rates(pf.model, pf.map, estimate_splitting(pf.model, pf.map, {Vector(0)}));
  CHECK_FALSE(p.pass);
  CHECK(p.lambda_s == doctest::Approx(1.0));
  CHECK(p.lambda_u == doctest::Approx(0.5));
  CHECK(p.stable_products.empty());

  const DemoSystem& skew = find_demo("circle-skew");
  std::vector<Vector> both{vec({0.0}), vec({kPi})};
  const ClassicalRates k = check_classical_rates(skew.model, skew.map, estimate_splitting(skew.model, skew.map, both));
  CHECK_FALSE(k.pass);
  CHECK(k.lambda >= 1.0);
  for (double v : {k.lambda_s, k.lambda_u, k.tangent_expansion, k.tangent_contraction}) CHECK(v >= 0.0);
}

TEST_CASE("property: classical implies topological on the rotation saddle") {
  const DemoSystem& rot = find_demo("rotation-saddle");
  const CheckReport r = run_topological_check(rot.model, rot.map, {32, 17, 32});
  CHECK(r.pass);
  CHECK(r.boundary.image_vs_stable_boundary == doctest::Approx(0.25));
  CHECK(r.boundary.unstable_boundary_escape == doctest::Approx(0.5));
}

TEST_CASE("restricted_norm") {
  Matrix M = Matrix::Zero(3, 3);
  M.diagonal() << 1, 0.5, 2;
  CHECK(restricted_norm(M, PlaneBasis::coordinate(3, {1})) == doctest::Approx(0.5));
  CHECK(restricted_norm(M, PlaneBasis::coordinate(3, {0, 2})) == doctest::Approx(2.0));
}
