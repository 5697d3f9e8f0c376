#include "sbc/smr.hpp"

#include <doctest.h>

#include <random>

using namespace sbc;

namespace {

Eigen::MatrixXd random_symmetric(int n, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      m(i, j) = u(rng);
      m(j, i) = m(i, j);
    }
  }
  return m;
}

}  // namespace

TEST_CASE("standard basis enumerates graded-lex monomials") {
  const auto v1 = VariableSet::numbered(1);
  const auto b1 = standard_basis(v1, 1);
  REQUIRE(b1.size() == 2);
  CHECK(b1.entry(0) == Monomial({0}));
  CHECK(b1.entry(1) == Monomial({1}));

  const auto v2 = VariableSet::numbered(2);
  const auto b2 = standard_basis(v2, 1);
  REQUIRE(b2.size() == 3);
  CHECK(b2.entry(0) == Monomial({0, 0}));
  CHECK(b2.entry(1) == Monomial({1, 0}));
  CHECK(b2.entry(2) == Monomial({0, 1}));

  const auto b3 = standard_basis(v2, 2);
  REQUIRE(b3.size() == 6);  // C(4,2)
  CHECK(b3.entry(3) == Monomial({2, 0}));
  CHECK(b3.entry(4) == Monomial({1, 1}));
  CHECK(b3.entry(5) == Monomial({0, 2}));

  // size = C(n + d, d)
  const auto v3 = VariableSet::numbered(3);
  CHECK(standard_basis(v3, 2).size() == 10);
  CHECK(standard_basis(v3, 4).size() == 35);
}

TEST_CASE("expand recovers polynomials from Gram matrices") {
  const auto v1 = VariableSet::numbered(1);
  const auto basis = standard_basis(v1, 1);

  const GramForm identity(basis, Eigen::MatrixXd::Identity(2, 2));
  CHECK((expand(identity) - parse_polynomial("1 + x1^2", v1)).is_zero());

  Eigen::MatrixXd ones(2, 2);
  ones << 1, 1, 1, 1;
  const GramForm square(basis, ones);
  CHECK((expand(square) - parse_polynomial("(1 + x1)^2", v1)).is_zero());
}

TEST_CASE("expand reproduces the 3-state certificate from its Gram matrix") {
  const auto v3 = VariableSet::numbered(3);
  const auto basis = standard_basis(v3, 1);  // [1, x1, x2, x3]
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(4, 4);
  q.diagonal() << 7.9999, -0.2850, -0.5652, -1.2828;
  q(1, 2) = -0.33425;
  q(2, 1) = -0.33425;
  const GramForm g(basis, q);
  const auto h = parse_polynomial(
      "7.9999 - 1.2828*x3^2 - 0.2850*x1^2 - 0.5652*x2^2 - 0.6685*x1*x2", v3);
  const auto diff = expand(g) - h;
  for (const auto& [m, c] : diff.terms()) CHECK(std::abs(c) < 1e-12);

  CHECK(trace(g) == doctest::Approx(5.8669));
}

TEST_CASE("trace basics") {
  const auto v1 = VariableSet::numbered(1);
  const auto basis = standard_basis(v1, 2);
  CHECK(GramForm(basis, Eigen::MatrixXd::Identity(3, 3)).trace() == doctest::Approx(3.0));
  CHECK(GramForm(basis, Eigen::MatrixXd::Zero(3, 3)).trace() == doctest::Approx(0.0));
}

TEST_CASE("coefficient map lists contributing pairs") {
  const auto v1 = VariableSet::numbered(1);
  const CoefficientMap map1(standard_basis(v1, 1));

  const int idx_x2 = map1.product_index(Monomial({2}));
  REQUIRE(idx_x2 >= 0);
  REQUIRE(map1.contributions(idx_x2).size() == 1);
  CHECK(map1.contributions(idx_x2)[0].i == 1);
  CHECK(map1.contributions(idx_x2)[0].j == 1);
  CHECK(map1.contributions(idx_x2)[0].weight == doctest::Approx(1.0));

  const int idx_x = map1.product_index(Monomial({1}));
  REQUIRE(map1.contributions(idx_x).size() == 1);
  CHECK(map1.contributions(idx_x)[0].i == 0);
  CHECK(map1.contributions(idx_x)[0].j == 1);
  CHECK(map1.contributions(idx_x)[0].weight == doctest::Approx(2.0));

  const auto v2 = VariableSet::numbered(2);
  const CoefficientMap map2(standard_basis(v2, 1));
  const int idx_xy = map2.product_index(Monomial({1, 1}));
  REQUIRE(map2.contributions(idx_xy).size() == 1);
  CHECK(map2.contributions(idx_xy)[0].weight == doctest::Approx(2.0));
}

TEST_CASE("coefficient map matches direct expansion on random Gram matrices") {
  std::mt19937 rng(11);
  const auto v2 = VariableSet::numbered(2);
  const auto basis = standard_basis(v2, 2);
  const CoefficientMap map(basis);
  for (int k = 0; k < 10; ++k) {
    const Eigen::MatrixXd q = random_symmetric(basis.size(), rng);
    const Eigen::VectorXd coeffs = map.apply(q);
    const Polynomial p = expand(GramForm(basis, q));
    for (std::size_t r = 0; r < map.product_monomials().size(); ++r) {
      CHECK(coeffs[static_cast<int>(r)] ==
            doctest::Approx(p.coefficient(map.product_monomials()[r])).epsilon(1e-12));
    }
  }
}

TEST_CASE("expand is linear in the Gram matrix") {
  std::mt19937 rng(3);
  const auto v2 = VariableSet::numbered(2);
  const auto basis = standard_basis(v2, 2);
  const Eigen::MatrixXd q1 = random_symmetric(basis.size(), rng);
  const Eigen::MatrixXd q2 = random_symmetric(basis.size(), rng);
  const auto sum = expand(GramForm(basis, q1 + q2));
  const auto parts = expand(GramForm(basis, q1)) + expand(GramForm(basis, q2));
  const auto diff = sum - parts;
  for (const auto& [m, c] : diff.terms()) CHECK(std::abs(c) < 1e-12);
}

TEST_CASE("Gram representation is not unique") {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const auto v1 = VariableSet::numbered(1);
  const auto basis = standard_basis(v1, 2);  // [1, x, x^2]
  const Eigen::MatrixXd q = random_symmetric(3, rng);
  for (int k = 0; k < 5; ++k) {
    const double lambda = u(rng);
    Eigen::MatrixXd shifted = q;
    shifted(0, 2) += lambda;
    shifted(2, 0) += lambda;
    shifted(1, 1) -= 2 * lambda;
    const auto diff = expand(GramForm(basis, shifted)) - expand(GramForm(basis, q));
    CHECK(diff.is_zero());
  }
}

TEST_CASE("positive semidefinite Gram implies nonnegative expansion") {
  std::mt19937 rng(29);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const auto v2 = VariableSet::numbered(2);
  const auto basis = standard_basis(v2, 2);
  for (int k = 0; k < 5; ++k) {
    const Eigen::MatrixXd r = random_symmetric(basis.size(), rng);
    const Eigen::MatrixXd psd = r * r.transpose();  // PSD by construction
    const GramForm g(basis, psd);
    CHECK(g.eigenvalues().minCoeff() >= -1e-10);
    const auto p = expand(g);
    for (int s = 0; s < 200; ++s) {
      Eigen::VectorXd z(2);
      z << u(rng), u(rng);
      CHECK(p.evaluate(z) >= -1e-9);
    }
  }
}

TEST_CASE("canonical gram reproduces the polynomial and its trace functional") {
  std::mt19937 rng(41);
  const auto v2 = VariableSet::numbered(2);
  const auto basis = standard_basis(v2, 2);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 10; ++k) {
    const Eigen::MatrixXd q = random_symmetric(basis.size(), rng);
    const Polynomial p = expand(GramForm(basis, q));
    const GramForm canon = canonical_gram(p, basis);
    const auto diff = expand(canon) - p;
    for (const auto& [m, c] : diff.terms()) CHECK(std::abs(c) < 1e-10);

    double functional = 0.0;
    for (const auto& [m, w] : canonical_trace_functional(basis)) {
      functional += w * p.coefficient(m);
    }
    CHECK(functional == doctest::Approx(canon.trace()).epsilon(1e-10));
  }

  // Terms outside the representable set are rejected.
  const auto tooth = parse_polynomial("x1^5", v2);
  CHECK_THROWS_AS(canonical_gram(tooth, basis), std::invalid_argument);
}
