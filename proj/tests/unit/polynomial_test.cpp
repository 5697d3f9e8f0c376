#include "sbc/polynomial.hpp"

#include <doctest.h>

#include <random>

using namespace sbc;

namespace {

Polynomial random_polynomial(const VariableSet& vars, int max_degree, std::mt19937& rng,
                             int terms = 6) {
  std::uniform_real_distribution<double> coeff(-2.0, 2.0);
  std::uniform_int_distribution<int> expo(0, max_degree);
  Polynomial p(vars);
  for (int t = 0; t < terms; ++t) {
    std::vector<int> e(vars.dimension());
    int total = 0;
    for (int i = 0; i < vars.dimension(); ++i) {
      e[i] = expo(rng);
      total += e[i];
    }
    if (total > max_degree) continue;
    p += Polynomial::monomial(vars, Monomial(e), coeff(rng));
  }
  return p;
}

Eigen::VectorXd random_point(int n, std::mt19937& rng, double radius = 2.0) {
  std::uniform_real_distribution<double> u(-radius, radius);
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = u(rng);
  return z;
}

}  // namespace

TEST_CASE("parse evaluates paper dynamics correctly") {
  const auto v2 = VariableSet::numbered(2);
  const auto p = parse_polynomial("x1^2 + x1*x2", v2);
  Eigen::VectorXd z(2);
  z << 1, 2;
  CHECK(p.evaluate(z) == doctest::Approx(3.0));

  const auto f2 = parse_polynomial("-x1 - x2 - x1^3", v2);
  CHECK(f2.coefficient(Monomial({1, 0})) == doctest::Approx(-1.0));
  CHECK(f2.coefficient(Monomial({0, 1})) == doctest::Approx(-1.0));
  CHECK(f2.coefficient(Monomial({3, 0})) == doctest::Approx(-1.0));
  CHECK(f2.terms().size() == 3);

  const auto v3 = VariableSet::numbered(3);
  const auto f4 = parse_polynomial("x2 - x3^2", v3);
  CHECK(f4.coefficient(Monomial({0, 1, 0})) == doctest::Approx(1.0));
  CHECK(f4.coefficient(Monomial({0, 0, 2})) == doctest::Approx(-1.0));
  CHECK(f4.terms().size() == 2);
}

TEST_CASE("parse reports errors with position") {
  const auto v2 = VariableSet::numbered(2);
  CHECK_THROWS_AS(parse_polynomial("x1 + ", v2), ParseError);
  CHECK_THROWS_AS(parse_polynomial("x9 + 1", v2), ParseError);
  CHECK_THROWS_AS(parse_polynomial("(x1 + x2", v2), ParseError);
  CHECK_THROWS_AS(parse_polynomial("x1^x2", v2), ParseError);
  try {
    parse_polynomial("x1 + y", v2);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.position() == 5);
  }
}

TEST_CASE("evaluate matches direct substitution") {
  const auto v2 = VariableSet::numbered(2);
  const auto v3 = VariableSet::numbered(3);

  const auto V1 = parse_polynomial("x1^2 + x1*x2 + x2^2", v2);
  CHECK(V1.evaluate(Eigen::Vector2d(0, 0)) == doctest::Approx(0.0));

  const auto V2 = parse_polynomial("x1^2 + x2^2 + x3^2", v3);
  CHECK(V2.evaluate(Eigen::Vector3d(2, 2, 0)) == doctest::Approx(8.0));

  const auto V3 = parse_polynomial("x1^2 + x1*x2 + x2^2 + x1^4 + x2^4", v2);
  CHECK(V3.evaluate(Eigen::Vector2d(1, 0)) == doctest::Approx(2.0));

  CHECK_THROWS_AS(V1.evaluate(Eigen::Vector3d(1, 2, 3)), std::invalid_argument);
}

TEST_CASE("differentiate basic rules") {
  const auto v2 = VariableSet::numbered(2);
  const auto p = parse_polynomial("x1^3", v2);
  CHECK(p.differentiate(0).to_string() == "3*x1^2");

  const auto c = Polynomial::constant(v2, 5.0);
  CHECK(c.differentiate(0).is_zero());
  CHECK(c.differentiate(1).is_zero());

  const auto q = parse_polynomial("x1^2*x2^2", v2);
  CHECK(q.differentiate(1).to_string() == "2*x1^2*x2");

  CHECK_THROWS_AS(p.differentiate(2), std::out_of_range);
}

TEST_CASE("lie derivative closed forms") {
  const auto v2 = VariableSet::numbered(2);
  const auto p = parse_polynomial("x1^2 + x2^2", v2);
  const std::vector<Polynomial> rot{parse_polynomial("x2", v2), parse_polynomial("-x1", v2)};
  CHECK(lie_derivative(p, rot).is_zero());

  const auto v1 = VariableSet::numbered(1);
  const auto q = parse_polynomial("x1^2", v1);
  const std::vector<Polynomial> lin{parse_polynomial("x1", v1)};
  CHECK(lie_derivative(q, lin).to_string() == "2*x1^2");
}

TEST_CASE("lie derivative of Lyapunov candidate matches finite differences") {
  const auto v3 = VariableSet::numbered(3);
  const auto V = parse_polynomial("x1^2 + x2^2 + x3^2", v3);
  const std::vector<Polynomial> f{parse_polynomial("-x1 + x2*x3^2", v3),
                                  parse_polynomial("-x2", v3), parse_polynomial("-x3", v3)};
  const auto Vdot = lie_derivative(V, f);
  const auto expected =
      parse_polynomial("2*x1*(-x1 + x2*x3^2) - 2*x2^2 - 2*x3^2", v3);
  CHECK((Vdot - expected).is_zero());

  std::mt19937 rng(7);
  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd z = random_point(3, rng);
    Eigen::VectorXd dir(3);
    for (int i = 0; i < 3; ++i) dir[i] = f[i].evaluate(z);
    const double delta = 1e-5;
    const double numeric =
        (V.evaluate(z + delta * dir) - V.evaluate(z - delta * dir)) / (2 * delta);
    CHECK(Vdot.evaluate(z) == doctest::Approx(numeric).epsilon(1e-7));
  }
}

TEST_CASE("evaluation is a ring homomorphism at random points") {
  std::mt19937 rng(21);
  const auto vars = VariableSet::numbered(3);
  for (int k = 0; k < 30; ++k) {
    const auto p = random_polynomial(vars, 4, rng);
    const auto q = random_polynomial(vars, 4, rng);
    const auto z = random_point(3, rng);
    const double ps = p.evaluate(z);
    const double qs = q.evaluate(z);
    CHECK((p + q).evaluate(z) ==
          doctest::Approx(ps + qs).epsilon(1e-10).scale(1.0 + std::abs(ps + qs)));
    CHECK((p * q).evaluate(z) ==
          doctest::Approx(ps * qs).epsilon(1e-10).scale(1.0 + std::abs(ps * qs)));
  }
}

TEST_CASE("lie derivative agrees with trajectory finite differences") {
  std::mt19937 rng(99);
  for (int sys = 0; sys < 20; ++sys) {
    const int n = 1 + static_cast<int>(rng() % 3);
    const auto vars = VariableSet::numbered(n);
    std::vector<Polynomial> f;
    for (int i = 0; i < n; ++i) f.push_back(random_polynomial(vars, 3, rng, 4));
    const auto p = random_polynomial(vars, 3, rng, 5);
    const auto lp = lie_derivative(p, f);

    // Walk a short RK4 trajectory and compare d/dt p(x(t)) along the field.
    Eigen::VectorXd x = random_point(n, rng, 0.5);
    const auto eval_f = [&](const Eigen::VectorXd& z) {
      Eigen::VectorXd d(n);
      for (int i = 0; i < n; ++i) d[i] = f[i].evaluate(z);
      return d;
    };
    const double dt = 1e-3;
    for (int step = 0; step < 5; ++step) {
      const Eigen::VectorXd k1 = eval_f(x);
      const Eigen::VectorXd k2 = eval_f(x + 0.5 * dt * k1);
      const Eigen::VectorXd k3 = eval_f(x + 0.5 * dt * k2);
      const Eigen::VectorXd k4 = eval_f(x + dt * k3);
      x += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);

      const double analytic = lp.evaluate(x);
      const double delta = 1e-5;
      const Eigen::VectorXd dir = eval_f(x);
      const double numeric =
          (p.evaluate(x + delta * dir) - p.evaluate(x - delta * dir)) / (2 * delta);
      CHECK(std::abs(analytic - numeric) <= 1e-6 * (1.0 + std::abs(analytic)));
    }
  }
}

TEST_CASE("parse of printed form is identity") {
  std::mt19937 rng(5);
  const auto vars = VariableSet::numbered(3);
  for (int k = 0; k < 50; ++k) {
    const auto p = random_polynomial(vars, 5, rng);
    const auto q = parse_polynomial(p.to_string(), vars);
    CHECK((p - q).is_zero());
    CHECK(q.to_string() == p.to_string());
  }
  CHECK(parse_polynomial("0", vars).is_zero());
}

TEST_CASE("canonical form drops rounding dust and orders terms graded-lex") {
  const auto v2 = VariableSet::numbered(2);
  const auto p = parse_polynomial("x1 + 1e-15*x2 + x1^2 - x1", v2);
  CHECK(p.terms().size() == 1);
  CHECK(p.to_string() == "x1^2");

  const auto q = parse_polynomial("x2^2 + x1*x2 + x1^2 + x2 + x1 + 1", v2);
  CHECK(q.to_string() == "1 + x1 + x2 + x1^2 + x1*x2 + x2^2");

  // degree multiplies through products
  const auto a = parse_polynomial("x1^2 + x2", v2);
  const auto b = parse_polynomial("x1*x2 + 1", v2);
  CHECK((a * b).degree() == a.degree() + b.degree());
}

TEST_CASE("vector field closed loop and evaluation") {
  const auto v2 = VariableSet::numbered(2);
  PolyVectorField field;
  field.f = {parse_polynomial("x2", v2), parse_polynomial("-x1", v2)};
  field.g = {{Polynomial::constant(v2, 0.0)}, {Polynomial::constant(v2, 1.0)}};
  field.validate();
  CHECK(field.state_dimension() == 2);
  CHECK(field.input_dimension() == 1);

  const std::vector<Polynomial> u{parse_polynomial("-x2", v2)};
  const auto cl = field.closed_loop(u);
  CHECK((cl[1] - parse_polynomial("-x1 - x2", v2)).is_zero());

  Eigen::VectorXd x(2);
  x << 1, 2;
  Eigen::VectorXd uin(1);
  uin << 3;
  const Eigen::VectorXd dx = field.evaluate(x, uin);
  CHECK(dx[0] == doctest::Approx(2));
  CHECK(dx[1] == doctest::Approx(2));
}
