#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nhim/errors.hpp"
#include "nhim/persistence.hpp"

#include <cmath>
#include <complex>
#include <random>

using namespace nhim;

namespace {

double forcing_gain() {
  return 1.0 / std::abs(std::exp(std::complex<double>(0.0, kTwoPi * 85.0 / 512.0)) - 0.5);
}

// Real root of x^3 = eps.
double cube_root_oracle(double eps) {
  double x = std::cbrt(eps);
  for (int i = 0; i < 5; ++i) x -= (x * x * x - eps) / (3 * x * x);
  return x;
}

void require_same_rows(const SweepRow& a, const SweepRow& b) {
  CHECK(a.eps == b.eps);
  CHECK(a.c1_size == b.c1_size);
  CHECK(a.check.pass == b.check.pass);
  CHECK(a.check.boundary.image_vs_stable_boundary == b.check.boundary.image_vs_stable_boundary);
  CHECK(a.check.boundary.unstable_boundary_escape == b.check.boundary.unstable_boundary_escape);
  CHECK(a.check.cones.cone_margin_s == b.check.cones.cone_margin_s);
  CHECK(a.check.cones.cone_margin_u == b.check.cones.cone_margin_u);
  CHECK(a.manifold_ok == b.manifold_ok);
  CHECK(a.c0 == b.c0);
  CHECK(a.c1 == b.c1);
  CHECK(a.unstable_residual == b.unstable_residual);
  CHECK(a.stable_residual == b.stable_residual);
  REQUIRE(a.manifold.has_value() == b.manifold.has_value());
  if (a.manifold) CHECK(a.manifold->fiber == b.manifold->fiber);
}

}  // namespace

TEST_CASE("registry entries and their documented behaviour") {
  const auto& r = registry();
  REQUIRE(r.size() == 5);
  const char* names[] = {"pitchfork-saddle", "circle-skew", "rotation-saddle", "forced-rotation", "non-example"};
  for (const char* n : names) CHECK(find_demo(n).name == n);
  CHECK_THROWS_AS(find_demo("pitchfork"), ConfigError);
  CHECK(&registry() == &r);
  for (const DemoSystem& d : r) {
    INFO(d.name);
    CHECK_FALSE(d.description.empty());
    CHECK(static_cast<int>(d.shift.size()) == d.map.dim());
    CHECK(d.map.dim() == d.model.m());
    const CheckReport c = run_topological_check(d.model, d.map, d.options.check);
    CHECK(c.pass == d.expect_topological);
    if (d.model.n() > 0 && d.model.s() > 0 && d.model.u() > 0) {
      std::vector<Vector> base;
      for (int k = 0; k < 32; ++k) base.push_back(Vector::Constant(1, kTwoPi * k / 32));
      const ClassicalRates cr = check_classical_rates(d.model, d.map, estimate_splitting(d.model, d.map, base));
      CHECK(cr.pass == d.expect_classical);
    }
  }
}

TEST_CASE("perturb examples") {
  const DemoSystem& p = find_demo("pitchfork-saddle");
  const PerturbationFamily shift = shift_family({1.0, 0.0});
  const PerturbedMap same = perturb(p.map, p.model, shift, 0.0);
  CHECK(same.c1_size == 0.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int k = 0; k < 200; ++k) {
    Vector z(2);
    z << u(rng), u(rng);
    CHECK((same.map.eval(z) - p.map.eval(z)).norm() == 0.0);
    const Vector g = perturb(p.map, p.model, shift, 1e-6).map.eval(z);
    CHECK(std::abs(g[0] - (z[0] - z[0] * z[0] * z[0] + 1e-6)) < 1e-15);
    CHECK(g[1] == 2 * z[1]);
  }
  CHECK(perturb(p.map, p.model, shift, 1e-6).c1_size == doctest::Approx(1e-6).epsilon(1e-9));

  const DemoSystem& c = find_demo("circle-skew");
  const PerturbationFamily a = random_trig_family(c.map, 3, 1.0, 7);
  const PerturbationFamily b = random_trig_family(c.map, 3, 1.0, 7);
  CHECK(a.formulas == b.formulas);
  CHECK(a.seed == 7);
  CHECK(random_trig_family(c.map, 3, 1.0, 8).formulas != a.formulas);
  const double eps = 1e-3;
  const PerturbedMap pa = perturb(c.map, c.model, a, eps);
  const PerturbedMap pb = perturb(c.map, c.model, b, eps);
  CHECK(pa.c1_size == pb.c1_size);
  // |p_i| <= bound and |dp_i/dz_j| <= (degree + 1) bound / (2m).
  const double m = 3.0;
  CHECK(pa.c1_size > 0.0);
  CHECK(pa.c1_size <= eps * (std::sqrt(m) + 4.0 / 2.0));
  CHECK_THROWS_AS(random_trig_family(c.map, 0, 1.0, 7), ConfigError);
  CHECK_THROWS_AS(perturb(c.map, c.model, shift, 1e-3), ConfigError);
}

TEST_CASE("c0 and c1 distance examples") {
  const GeometricModel sq = make_model(0, 1, 1, {0.5}, {0.5});
  const SectionGrid zero(sq, SectionKind::Unstable, 1, 21);
  const SectionGrid lin = SectionGrid::from_function(sq, SectionKind::Unstable, 1, 21,
                                                     [](const Vector& w) { return Vector::Constant(1, 0.1 * w[0]); });
  CHECK(c0_distance(zero, zero) == 0.0);
  CHECK(c1_distance(lin, lin, graph_tangents(lin), graph_tangents(lin)) == 0.0);
  const SectionGrid a = SectionGrid::constant(sq, SectionKind::Unstable, 1, 21, Vector::Constant(1, 0.1));
  const SectionGrid b = SectionGrid::constant(sq, SectionKind::Unstable, 1, 21, Vector::Constant(1, 0.3));
  CHECK(c0_distance(a, b) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(c1_distance(zero, lin, graph_tangents(zero), graph_tangents(lin)) ==
        doctest::Approx(0.05 + 0.1 / std::sqrt(1.01)).epsilon(1e-12));
  CHECK_THROWS_AS(c0_distance(zero, SectionGrid(sq, SectionKind::Unstable, 1, 11)), ModelError);

  const DemoSystem& f = find_demo("forced-rotation");
  PipelineOptions o = f.options;
  o.tangents = false;
  const ManifoldComputation mc = compute_manifold(f.model, f.map, o);
  REQUIRE(mc.unstable);
  const SectionGrid& s = mc.unstable->section;
  const SectionGrid z(f.model, SectionKind::Unstable, s.base_count(), s.fiber_count());
  const double amp = 0.05 * forcing_gain();
  CHECK(c0_distance(z, s) == doctest::Approx(amp).epsilon(1e-4));
  CHECK(c0_distance(ManifoldGrid::zero_section(f.model, 512), *mc.manifold) == doctest::Approx(amp).epsilon(1e-4));
  // The steepest slope of Re(A e^{i theta}) is |A|.
  CHECK(c1_distance(z, s, graph_tangents(z), graph_tangents(s)) ==
        doctest::Approx(amp + amp / std::sqrt(1 + amp * amp)).epsilon(1e-4));
}

TEST_CASE("pitchfork shift sweep follows x^3 = eps") {
  const DemoSystem& p = find_demo("pitchfork-saddle");
  const SweepReport r = run_persistence_sweep(p, shift_family({1.0, 0.0}), {0.0, 1e-6}, p.options);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].c0 == 0.0);
  CHECK(r.rows[0].c1 == 0.0);
  const SweepRow& row = r.rows[1];
  CHECK(row.check.pass);
  CHECK(row.manifold_ok);
  REQUIRE(row.manifold);
  CHECK(std::abs(row.manifold->fiber(0, 0) - 0.01) < 1e-6);
  CHECK(std::abs(row.manifold->fiber(0, 0) - cube_root_oracle(1e-6)) < 1e-6);
  CHECK(std::abs(row.c0 - 0.01) < 1e-6);
  CHECK(row.inside_box);
  CHECK(row.tangents_in_cones);
}

TEST_CASE("forced rotation sweep is linear in eps") {
  const DemoSystem& f = find_demo("forced-rotation");
  PerturbationFamily fam;
  fam.name = "formulas";
  fam.formulas = {"0", "cos(theta)"};
  const std::vector<double> eps{0.0, 0.01, 0.05};
  const SweepReport r = run_persistence_sweep(f, fam, eps, f.options);
  REQUIRE(r.rows.size() == 3);
  for (std::size_t i = 0; i < eps.size(); ++i) {
    CHECK(r.rows[i].manifold_ok);
    CHECK(std::abs(r.rows[i].c0 - eps[i] * forcing_gain()) < 1e-6);
  }
  CHECK(r.rows[1].c0 / 0.01 == doctest::Approx(r.rows[2].c0 / 0.05).epsilon(1e-9));
  CHECK(r.rows[2].c1 > r.rows[2].c0);
}

TEST_CASE("non-example sweep rows fail without transforms") {
  const DemoSystem& n = find_demo("non-example");
  const SweepReport r = run_persistence_sweep(n, shift_family(n.shift), {0.0, 1e-4, 1e-2}, n.options);
  REQUIRE(r.rows.size() == 3);
  for (const SweepRow& row : r.rows) {
    CHECK_FALSE(row.check.pass);
    CHECK(row.check.cones.cone_margin_s <= 1e-12);
    CHECK_FALSE(row.transforms_attempted);
    CHECK_FALSE(row.manifold);
    CHECK_FALSE(row.failure.empty());
  }
}

TEST_CASE("escape_time_probe examples") {
  const DemoSystem& p = find_demo("pitchfork-saddle");
  Vector a(2);
  a << 0.3, 0.2;
  const auto r = escape_time_probe(p.map, p.model, {a, Vector::Zero(2)}, 60);
  REQUIRE(r.size() == 2);
  CHECK(r[0].forward_exit == 2);
  // Backward x orbit 0.3 -> 0.33894 -> 0.40572; max(x - x^3) on B is 0.375,
  // so the third step has no preimage in B.
  CHECK(r[0].backward_exit == 3);
  CHECK(r[0].backward_inverse_failed);
  CHECK(r[1].forward_exit == -1);
  CHECK(r[1].backward_exit == -1);
  CHECK_FALSE(r[1].backward_inverse_failed);

  const DemoSystem& rot = find_demo("rotation-saddle");
  Vector z(3);
  z << 1.0, 0.1, 0.0;
  const auto e = escape_time_probe(rot.map, rot.model, {z}, 60);
  CHECK(e[0].forward_exit == -1);
  CHECK(e[0].backward_exit == 3);  // 0.2, 0.4, 0.8
}

TEST_CASE("property: eps = 0 row reproduces the unperturbed computation") {
  for (const char* name : {"pitchfork-saddle", "circle-skew"}) {
    const DemoSystem& d = find_demo(name);
    PipelineOptions o = d.options;
    if (d.model.n()) o.section_base = 32;
    const SweepReport r = run_persistence_sweep(d, shift_family(d.shift), {0.0}, o);
    const ManifoldComputation mc = compute_manifold(d.model, d.map, o);
    REQUIRE(r.rows[0].manifold);
    CHECK(r.rows[0].manifold->fiber == mc.manifold->fiber);
    CHECK(r.rows[0].c0 == 0.0);
    CHECK(r.rows[0].c1 == 0.0);
    CHECK(r.rows[0].unstable_residual == mc.unstable->report.residual);
  }
}

TEST_CASE("property: seeded sweeps are deterministic") {
  const DemoSystem& c = find_demo("circle-skew");
  PipelineOptions o = c.options;
  o.section_base = 32;
  const PerturbationFamily fam = random_trig_family(c.map, 3, 1.0, 11);
  const SweepReport a = run_persistence_sweep(c, fam, {0.0, 1e-4}, o);
  const SweepReport b = run_persistence_sweep(c, random_trig_family(c.map, 3, 1.0, 11), {0.0, 1e-4}, o);
  REQUIRE(a.rows.size() == b.rows.size());
  CHECK(a.seed == 11);
  CHECK(a.check_stability_constant == b.check_stability_constant);
  for (std::size_t i = 0; i < a.rows.size(); ++i) require_same_rows(a.rows[i], b.rows[i]);
}

TEST_CASE("property: check margins move by at most C eps") {
  const DemoSystem& p = find_demo("pitchfork-saddle");
  const std::vector<double> eps{0.0, 1e-6, 1e-5, 1e-4, 1e-3};
  const SweepReport r = run_persistence_sweep(p, shift_family({1.0, 0.0}), eps, p.options);
  const double c = r.check_stability_constant;
  CHECK(std::isfinite(c));
  CHECK(c > 0.0);
  // A shift of the first component by eps moves every margin by at most eps
  // in the sup metric, up to the cone terms which do not see a shift at all.
  CHECK(c <= 1.0 + 1e-9);
  const CheckReport& base = r.rows[0].check;
  for (const SweepRow& row : r.rows) {
    CHECK(row.check.pass);
    CHECK(std::abs(row.check.boundary.image_vs_stable_boundary - base.boundary.image_vs_stable_boundary) <=
          c * row.eps + 1e-15);
    CHECK(row.check.cones.cone_margin_s == base.cones.cone_margin_s);
  }
}

TEST_CASE("property: off-manifold points leave B backward, manifold points stay") {
  const DemoSystem& rot = find_demo("rotation-saddle");
  PipelineOptions o = rot.options;
  o.tangents = false;
  const ManifoldComputation mc = compute_manifold(rot.model, rot.map, o);
  REQUIRE(mc.unstable);
  const SectionGrid& nu = mc.unstable->section;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> th(0.0, kTwoPi), fib(-0.5, 0.5);
  std::vector<Vector> off, on;
  while (off.size() < 1000) {
    Vector z(3);
    z << th(rng), fib(rng), fib(rng);
    Vector dom(2);
    dom << z[0], z[2];
    if (std::abs(z[1] - nu.value_at(dom)[0]) > 1e-3) off.push_back(z);
  }
  while (on.size() < 1000) {
    Vector dom(2);
    dom << th(rng), fib(rng);
    Vector z(3);
    z << dom[0], nu.value_at(dom)[0], dom[1];
    on.push_back(z);
  }
  const int bound = static_cast<int>(std::ceil(std::log2(0.5 / 1e-3))) + 1;
  for (const EscapeResult& e : escape_time_probe(rot.map, rot.model, off, 60)) {
    CHECK(e.backward_exit >= 1);
    CHECK(e.backward_exit <= bound);
  }
  for (const EscapeResult& e : escape_time_probe(rot.map, rot.model, on, 60)) CHECK(e.backward_exit == -1);
}
