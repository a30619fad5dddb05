#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nhim/errors.hpp"
#include "nhim/expression.hpp"
#include "nhim/map_definition.hpp"
#include "nhim/persistence.hpp"

#include <cmath>
#include <random>
#include <string>

using namespace nhim;
using namespace nhim::dsl;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

std::string strip(const std::string& s) {
  std::string out;
  for (char c : s)
    if (c != ' ') out += c;
  return out;
}

const Declarations kDecls{{"x", "y", "theta"}, {{"alpha", 0.5}, {"beta", 0.75}}};

double eval(const std::string& text, double x, double y, double theta) {
  const double v[] = {x, y, theta};
  return parse_expression(text, kDecls).evaluate(v);
}

Matrix central_differences(const MapDefinition& map, const Vector& p, double h) {
  const int m = map.dim();
  Matrix J(m, m);
  for (int j = 0; j < m; ++j) {
    Vector a = p, b = p;
    a[j] += h;
    b[j] -= h;
    J.col(j) = periodic_residual(map, map.eval(a), map.eval(b)) / (2 * h);
  }
  return J;
}

}  // namespace

TEST_CASE("parse produces the expected trees") {
  const Expression e = parse_expression("x - x^3", kDecls);
  REQUIRE(e.root()->kind == NodeKind::Sub);
  CHECK(e.root()->lhs->kind == NodeKind::Variable);
  CHECK(e.root()->lhs->index == 0);
  REQUIRE(e.root()->rhs->kind == NodeKind::Pow);
  CHECK(e.root()->rhs->lhs->kind == NodeKind::Variable);
  CHECK(e.root()->rhs->rhs->kind == NodeKind::Number);
  CHECK(e.root()->rhs->rhs->value == 3.0);

  const Expression b = parse_expression("theta - alpha*sin(theta)", kDecls);
  CHECK(b.root()->kind == NodeKind::Sub);
  CHECK(b.root()->rhs->kind == NodeKind::Mul);
  CHECK(b.root()->rhs->lhs->kind == NodeKind::Parameter);
  CHECK(b.root()->rhs->rhs->kind == NodeKind::Call);
  CHECK(b.root()->rhs->rhs->function == Function::Sin);
}

TEST_CASE("precedence and associativity") {
  CHECK(eval("2 - 3 - 4", 0, 0, 0) == -5.0);
  CHECK(eval("8 / 4 / 2", 0, 0, 0) == 1.0);
  CHECK(eval("-2^2", 0, 0, 0) == -4.0);
  CHECK(eval("(-2)^2", 0, 0, 0) == 4.0);
  CHECK(eval("2*3^2", 0, 0, 0) == 18.0);
  CHECK(eval("1 + 2*3", 0, 0, 0) == 7.0);
  CHECK(eval("x*-y", 2, 3, 0) == -6.0);
  CHECK(eval("pi", 0, 0, 0) == doctest::Approx(kPi).epsilon(1e-16));
  CHECK(eval("x^0.5", 4, 0, 0) == doctest::Approx(2.0));
  CHECK(eval("alpha + beta", 0, 0, 0) == 1.25);
}

TEST_CASE("syntax errors carry byte offsets") {
  try {
    parse_expression("x + * y", kDecls);
    FAIL("accepted");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 4);
  }
  try {
    parse_expression("x + zeta", kDecls);
    FAIL("accepted");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("zeta") != std::string::npos);
    CHECK(e.offset() == 4);
  }
  CHECK_THROWS_AS(parse_expression("", kDecls), ParseError);
  CHECK_THROWS_AS(parse_expression("sin x", kDecls), ParseError);
  CHECK_THROWS_AS(parse_expression("(x + y", kDecls), ParseError);
  CHECK_THROWS_AS(parse_expression("x y", kDecls), ParseError);
  CHECK_THROWS_AS(parse_expression("foo(x)", kDecls), ParseError);
  CHECK_THROWS_AS(parse_expression("x^y", kDecls), ParseError);
}

TEST_CASE("property: pretty-print of parse is the identity on a corpus") {
  const char* corpus[] = {
      "x", "x - x^3", "2*y", "theta - alpha*sin(theta)", "x + y", "x - y", "x*y", "x/y",
      "x^2", "-x", "-x^2", "(-x)^2", "x - (y - theta)", "x/(y*theta)", "(x + y)*theta",
      "x*(y + theta)", "sin(x)", "cos(theta)", "tan(y)", "exp(x)", "log(y)", "sqrt(x)",
      "abs(y)", "tanh(x)", "pi*x", "2*pi", "0.5*x", "x^0.5", "x^(1/3)", "-(x + y)",
      "x*-y", "x + -y", "sin(cos(x))", "exp(-x^2)", "x/2 + 0.05*cos(theta)",
      "(1 - beta*(1 + cos(theta))/2)*x - (1 - cos(theta))/2*x^3",
      "(1 + beta*(1 - cos(theta))/2)*y + (1 + cos(theta))/2*y^3", "theta + 1", "2*(x - y)",
      "x - y - theta", "x/y/theta", "x/(y/theta)", "x^2*y^2", "(x*y)^2", "-sin(x)",
      "1e-09*x", "1.5e+10", "alpha*beta", "x + y*theta - 3", "sqrt(x^2 + y^2)"};
  int count = 0;
  for (const char* text : corpus) {
    const Expression e = parse_expression(text, kDecls);
    CHECK_MESSAGE(strip(e.to_string()) == strip(text), text);
    CHECK(structurally_equal(parse_expression(e.to_string(), kDecls), e));
    ++count;
  }
  CHECK(count == 50);
}

TEST_CASE("JetValue seeds unit gradients") {
  const Expression e = parse_expression("y", kDecls);
  Jet vars[3] = {Jet::variable(0.1, 0, 3), Jet::variable(0.2, 1, 3), Jet::variable(0.3, 2, 3)};
  const Jet r = e.evaluate(std::span<const Jet>(vars, 3));
  CHECK(r.value == 0.2);
  CHECK(r.grad[0] == 0.0);
  CHECK(r.grad[1] == 1.0);
  CHECK(r.grad[2] == 0.0);
}

TEST_CASE("map_eval examples") {
  const MapDefinition pitchfork({"x", "y"}, {}, std::vector<std::string>{"x - x^3", "2*y"}, {false, false});
  const Vector a = pitchfork.eval(vec({0.4, 0.1}));
  CHECK(a[0] == doctest::Approx(0.336).epsilon(1e-15));
  CHECK(a[1] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(pitchfork.eval(vec({0, 0})).norm() == 0.0);

  const MapDefinition rot({"theta", "x", "y"}, {}, std::vector<std::string>{"theta + 1", "x/2", "2*y"},
                          {true, false, false});
  const Vector b = rot.eval(vec({6.0, 0.2, 0.1}));
  CHECK(b[0] == doctest::Approx(7.0 - kTwoPi).epsilon(1e-14));
  CHECK(b[1] == doctest::Approx(0.1));
  CHECK(b[2] == doctest::Approx(0.2));
}

TEST_CASE("domain errors name the coordinate") {
  const MapDefinition m({"x", "y"}, {}, std::vector<std::string>{"x", "log(y)"}, {false, false});
  try {
    m.eval(vec({0.1, -0.2}));
    FAIL("no error");
  } catch (const DomainError& e) {
    CHECK(e.coordinate() == 1);
  }
  CHECK_THROWS_AS(m.jacobian(vec({0.1, 0.0})), DomainError);
  CHECK_THROWS_AS(parse_expression("x^0.5", kDecls).evaluate(std::vector<double>{-1.0, 0, 0}), DomainError);
}

TEST_CASE("map definitions are validated") {
  CHECK_THROWS_AS(MapDefinition({"x", "y"}, {}, std::vector<std::string>{"x"}, {false, false}), ConfigError);
  CHECK_THROWS_AS(MapDefinition({"x", "x"}, {}, std::vector<std::string>{"x", "x"}, {false, false}), ConfigError);
  CHECK_THROWS_AS(MapDefinition({"x", "y"}, {}, std::vector<std::string>{"x", "z"}, {false, false}), ParseError);
  try {
    MapDefinition({"x", "y"}, {}, std::vector<std::string>{"x", "y +"}, {false, false});
    FAIL("accepted");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("formula 1") != std::string::npos);
  }
}

TEST_CASE("jacobian examples") {
  const MapDefinition pitchfork({"x", "y"}, {}, std::vector<std::string>{"x - x^3", "2*y"}, {false, false});
  const Matrix J = pitchfork.jacobian(vec({0.1, 0.0}));
  CHECK(J(0, 0) == doctest::Approx(0.97).epsilon(1e-15));
  CHECK(J(1, 1) == 2.0);
  CHECK(J(0, 1) == 0.0);
  CHECK(J(1, 0) == 0.0);

  const MapDefinition linear({"a", "b"}, {}, std::vector<std::string>{"2*a - 3*b", "0.5*a + b"}, {false, false});
  Matrix L(2, 2);
  L << 2, -3, 0.5, 1;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 10; ++i) CHECK((linear.jacobian(vec({u(rng), u(rng)})) - L).norm() == 0.0);

  const DemoSystem& skew = find_demo("circle-skew");
  Matrix D = Matrix::Zero(3, 3);
  D.diagonal() << 0.5, 0.25, 1.0;
  CHECK((skew.map.jacobian(vec({0, 0, 0})) - D).norm() < 1e-15);
  CHECK((central_differences(skew.map, vec({0, 0, 0}), 1e-6) - D).norm() < 1e-8);
}

TEST_CASE("property: forward-mode derivatives match central differences on every demo") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1, 1);
  for (const DemoSystem& d : registry()) {
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
      Vector p(d.model.m());
      for (int i = 0; i < d.model.m(); ++i)
        p[i] = i < d.model.n() ? kPi * (1 + u(rng)) : d.model.radius(i) * u(rng);
      const Matrix J = d.map.jacobian(p);
      const Matrix F = central_differences(d.map, p, 1e-6);
      worst = std::max(worst, (J - F).cwiseAbs().maxCoeff() / std::max(1.0, J.cwiseAbs().maxCoeff()));
    }
    CHECK_MESSAGE(worst < 1e-6, d.name);
  }
}

TEST_CASE("property: periodic outputs stay in [0, 2pi)") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-20, 20);
  for (const DemoSystem& d : registry()) {
    if (d.model.n() == 0) continue;
    for (int k = 0; k < 500; ++k) {
      Vector p = Vector::Zero(d.model.m());
      p[0] = u(rng);
      const Vector q = d.map.eval(p);
      CHECK(q[0] >= 0.0);
      CHECK(q[0] < kTwoPi);
    }
  }
}

TEST_CASE("map_inverse_eval examples") {
  const MapDefinition saddle({"x", "y"}, {}, std::vector<std::string>{"x/2", "2*y"}, {false, false});
  const Vector a = map_inverse_eval(saddle, vec({0.25, 0.5}), vec({0, 0}));
  CHECK((a - vec({0.5, 0.25})).norm() < 1e-12);

  const MapDefinition pitchfork({"x", "y"}, {}, std::vector<std::string>{"x - x^3", "2*y"}, {false, false});
  const Vector b = map_inverse_eval(pitchfork, vec({0.336, 0.2}), vec({0.3, 0.1}));
  CHECK((b - vec({0.4, 0.1})).norm() < 1e-10);
  CHECK((pitchfork.eval(b) - vec({0.336, 0.2})).norm() <= 1e-10);

  InverseOptions in_box;
  in_box.domain = make_model(0, 1, 1, {0.5}, {0.5});
  CHECK_THROWS_AS(map_inverse_eval(pitchfork, vec({0.45, 0.0}), vec({0.3, 0.0}), in_box), NoConvergence);

  const MapDefinition fold({"x", "y"}, {}, std::vector<std::string>{"x^2", "y"}, {false, false});
  CHECK_THROWS_AS(map_inverse_eval(fold, vec({0.5, 0.0}), vec({0.0, 0.0})), SingularJacobian);
}

TEST_CASE("property: inverse consistency wherever the inverse succeeds") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  for (const DemoSystem& d : registry()) {
    int ok = 0;
    for (int k = 0; k < 200; ++k) {
      Vector q(d.model.m());
      for (int i = 0; i < d.model.m(); ++i)
        q[i] = i < d.model.n() ? kPi * (1 + u(rng)) : 0.3 * d.model.radius(i) * u(rng);
      try {
        const Vector p = map_inverse_eval(d.map, q, q);
        CHECK(periodic_residual(d.map, d.map.eval(p), q).lpNorm<Eigen::Infinity>() <= 1e-10);
        ++ok;
      } catch (const NoConvergence&) {
      } catch (const SingularJacobian&) {
      }
    }
    CHECK_MESSAGE(ok > 150, d.name);
  }
}

TEST_CASE("inverse formulas round trip") {
  for (const char* name : {"rotation-saddle", "forced-rotation"}) {
    const DemoSystem& d = find_demo(name);
    REQUIRE(d.map.has_inverse());
    CHECK(inverse_round_trip_error(d.map, d.model) < 1e-8);
  }
  const MapDefinition wrong({"x", "y"}, {}, std::vector<std::string>{"x/2", "2*y"}, {false, false},
                            std::vector<std::string>{"2*x", "y"});
  CHECK(inverse_round_trip_error(wrong, make_model(0, 1, 1, {0.5}, {0.5})) > 1e-3);
}
