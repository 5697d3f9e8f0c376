#include "sbc/smr.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace sbc {

MonomialBasis::MonomialBasis(VariableSet vars, std::vector<Monomial> entries)
    : vars_(std::move(vars)), entries_(std::move(entries)) {
  for (const auto& m : entries_) {
    if (m.dimension() != vars_.dimension()) {
      throw std::invalid_argument("basis monomial dimension mismatch");
    }
  }
}

int MonomialBasis::max_degree() const {
  int d = 0;
  for (const auto& m : entries_) d = std::max(d, m.degree());
  return d;
}

int MonomialBasis::index_of(const Monomial& m) const {
  for (int i = 0; i < size(); ++i) {
    if (entries_[i] == m) return i;
  }
  return -1;
}

namespace {

void enumerate_monomials(int n, int max_degree, std::vector<Monomial>& out) {
  std::vector<int> exps(n, 0);
  // Depth-first over exponent vectors, then sort graded-lex.
  std::function<void(int, int)> rec = [&](int index, int remaining) {
    if (index == n) {
      out.emplace_back(exps);
      return;
    }
    for (int e = 0; e <= remaining; ++e) {
      exps[index] = e;
      rec(index + 1, remaining - e);
    }
    exps[index] = 0;
  };
  rec(0, max_degree);
  std::sort(out.begin(), out.end(), [](const Monomial& a, const Monomial& b) {
    return GradedLexLess()(a, b);
  });
}

}  // namespace

MonomialBasis standard_basis(const VariableSet& vars, int max_degree) {
  if (vars.dimension() < 1) throw std::invalid_argument("basis needs at least one variable");
  if (max_degree < 0) throw std::invalid_argument("negative basis degree");
  std::vector<Monomial> entries;
  enumerate_monomials(vars.dimension(), max_degree, entries);
  return MonomialBasis(vars, std::move(entries));
}

GramForm::GramForm(MonomialBasis basis, const Eigen::MatrixXd& q) : basis_(std::move(basis)) {
  if (q.rows() != basis_.size() || q.cols() != basis_.size()) {
    throw std::invalid_argument("Gram matrix size must match basis size");
  }
  // Mirror the upper triangle so storage is exactly symmetric.
  q_ = q;
  for (int i = 0; i < q_.rows(); ++i) {
    for (int j = i + 1; j < q_.cols(); ++j) {
      const double v = 0.5 * (q(i, j) + q(j, i));
      q_(i, j) = v;
      q_(j, i) = v;
    }
  }
}

Eigen::VectorXd GramForm::eigenvalues() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q_, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

Polynomial expand(const GramForm& g) {
  const MonomialBasis& basis = g.basis();
  Polynomial p(basis.vars());
  for (int i = 0; i < basis.size(); ++i) {
    for (int j = i; j < basis.size(); ++j) {
      const double w = (i == j) ? 1.0 : 2.0;
      const double coeff = w * g.matrix()(i, j);
      if (coeff == 0.0) continue;
      p += Polynomial::monomial(basis.vars(), basis.entry(i) * basis.entry(j), coeff);
    }
  }
  return p;
}

CoefficientMap::CoefficientMap(const MonomialBasis& basis) : basis_(basis) {
  std::map<Monomial, std::vector<Entry>, GradedLexLess> by_product;
  for (int i = 0; i < basis.size(); ++i) {
    for (int j = i; j < basis.size(); ++j) {
      const Monomial prod = basis.entry(i) * basis.entry(j);
      by_product[prod].push_back(Entry{i, j, i == j ? 1.0 : 2.0});
    }
  }
  products_.reserve(by_product.size());
  rows_.reserve(by_product.size());
  for (auto& [m, entries] : by_product) {
    products_.push_back(m);
    rows_.push_back(std::move(entries));
  }
}

int CoefficientMap::product_index(const Monomial& m) const {
  const auto it = std::lower_bound(products_.begin(), products_.end(), m, GradedLexLess());
  if (it == products_.end() || !(*it == m)) return -1;
  return static_cast<int>(it - products_.begin());
}

Eigen::VectorXd CoefficientMap::apply(const Eigen::MatrixXd& q) const {
  if (q.rows() != basis_.size() || q.cols() != basis_.size()) {
    throw std::invalid_argument("Gram matrix size must match basis size");
  }
  Eigen::VectorXd coeffs(static_cast<int>(products_.size()));
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    double sum = 0.0;
    for (const Entry& e : rows_[r]) sum += e.weight * q(e.i, e.j);
    coeffs[static_cast<int>(r)] = sum;
  }
  return coeffs;
}

double trace(const GramForm& g) { return g.trace(); }

GramForm canonical_gram(const Polynomial& p, const MonomialBasis& basis) {
  if (p.vars() != basis.vars()) throw std::invalid_argument("variable set mismatch");
  const CoefficientMap map(basis);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(basis.size(), basis.size());
  for (const auto& [m, coeff] : p.terms()) {
    const int row = map.product_index(m);
    if (row < 0) {
      throw std::invalid_argument("polynomial term " + Polynomial::monomial(p.vars(), m).to_string() +
                                  " not representable over the basis");
    }
    const auto& entries = map.contributions(row);
    const double share = coeff / static_cast<double>(entries.size());
    for (const auto& e : entries) {
      const double value = share / e.weight;
      q(e.i, e.j) = value;
      q(e.j, e.i) = value;
    }
  }
  return GramForm(basis, q);
}

std::vector<std::pair<Monomial, double>> canonical_trace_functional(const MonomialBasis& basis) {
  const CoefficientMap map(basis);
  std::vector<std::pair<Monomial, double>> weights;
  const auto& products = map.product_monomials();
  for (std::size_t r = 0; r < products.size(); ++r) {
    const auto& entries = map.contributions(r);
    int diag = 0;
    for (const auto& e : entries) {
      if (e.i == e.j) ++diag;
    }
    if (diag > 0) {
      weights.emplace_back(products[r], static_cast<double>(diag) / static_cast<double>(entries.size()));
    }
  }
  return weights;
}

}  // namespace sbc
