#ifndef SBC_SMR_HPP
#define SBC_SMR_HPP

#include <vector>

#include <Eigen/Core>

#include "sbc/polynomial.hpp"

namespace sbc {

/// Ordered vector of monomials Z(x) used as a square-matrix-representation basis.
class MonomialBasis {
 public:
  MonomialBasis() = default;
  MonomialBasis(VariableSet vars, std::vector<Monomial> entries);

  int size() const { return static_cast<int>(entries_.size()); }
  const Monomial& entry(int i) const { return entries_.at(i); }
  const std::vector<Monomial>& entries() const { return entries_; }
  const VariableSet& vars() const { return vars_; }
  int max_degree() const;
  /// Index of a monomial in the basis, or -1.
  int index_of(const Monomial& m) const;

  bool operator==(const MonomialBasis& other) const {
    return vars_ == other.vars_ && entries_ == other.entries_;
  }

 private:
  VariableSet vars_;
  std::vector<Monomial> entries_;
};

/// All monomials of total degree <= d over the given variables, graded-lex.
MonomialBasis standard_basis(const VariableSet& vars, int max_degree);

/// Polynomial in square matrix representation h(x) = Z(x)^T Q Z(x);
/// Q is kept exactly symmetric (lower triangle mirrors the upper).
class GramForm {
 public:
  GramForm() = default;
  GramForm(MonomialBasis basis, const Eigen::MatrixXd& q);

  const MonomialBasis& basis() const { return basis_; }
  const Eigen::MatrixXd& matrix() const { return q_; }
  double trace() const { return q_.trace(); }
  Eigen::VectorXd eigenvalues() const;

 private:
  MonomialBasis basis_;
  Eigen::MatrixXd q_;
};

/// Expands Z^T Q Z into canonical polynomial form.
Polynomial expand(const GramForm& g);

/// Sparse linear map from the upper triangle of a Gram matrix to polynomial
/// coefficients: for each product monomial z_i * z_j, the contributing basis
/// pairs with their multiplicity (2 off the diagonal, 1 on it).
class CoefficientMap {
 public:
  struct Entry {
    int i;
    int j;          // i <= j
    double weight;  // multiplicity in the coefficient sum
  };

  explicit CoefficientMap(const MonomialBasis& basis);

  const MonomialBasis& basis() const { return basis_; }
  /// Product monomials in graded-lex order; these index the rows of the map.
  const std::vector<Monomial>& product_monomials() const { return products_; }
  const std::vector<Entry>& contributions(int product_index) const {
    return rows_.at(product_index);
  }
  int product_index(const Monomial& m) const;

  /// Applies the map: coefficients of expand(Q) in product_monomials() order.
  Eigen::VectorXd apply(const Eigen::MatrixXd& q) const;

 private:
  MonomialBasis basis_;
  std::vector<Monomial> products_;
  std::vector<std::vector<Entry>> rows_;
};

double trace(const GramForm& g);

/// Canonical Gram matrix of p over the basis: every product monomial's
/// coefficient is split equally across the unordered basis pairs producing it.
/// Throws if p has a monomial outside the basis products.
GramForm canonical_gram(const Polynomial& p, const MonomialBasis& basis);

/// Linear functional w such that trace(canonical_gram(p, basis)) =
/// sum_k w_k * coeff(p, monomial_k); returned as (monomial, weight) pairs.
std::vector<std::pair<Monomial, double>> canonical_trace_functional(const MonomialBasis& basis);

}  // namespace sbc

#endif  // SBC_SMR_HPP
