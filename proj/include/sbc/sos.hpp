#ifndef SBC_SOS_HPP
#define SBC_SOS_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sbc/polynomial.hpp"
#include "sbc/sdp.hpp"
#include "sbc/smr.hpp"

namespace sbc {

struct DecisionId {
  int value = -1;
  bool valid() const { return value >= 0; }
};

struct ScalarId {
  int value = -1;
  bool valid() const { return value >= 0; }
};

/// Expression that is affine in the declared decision objects: a known
/// polynomial plus products of one known polynomial with one decision
/// polynomial or scalar. Products of two decision objects are recorded and
/// rejected at compile time (the alternation scheme must fix one side).
class SosExpr {
 public:
  SosExpr() = default;
  explicit SosExpr(Polynomial known) : known_(std::move(known)) {}

  const Polynomial& known() const { return known_; }

  SosExpr& operator+=(const SosExpr& other);
  SosExpr& operator-=(const SosExpr& other);
  SosExpr operator-() const;

  friend SosExpr operator+(SosExpr a, const SosExpr& b) { return a += b; }
  friend SosExpr operator-(SosExpr a, const SosExpr& b) { return a -= b; }

 private:
  friend class SosProblem;
  friend SosExpr mul(DecisionId d, const Polynomial& known);
  friend SosExpr mul(const Polynomial& known, DecisionId d);
  friend SosExpr mul(ScalarId s, const Polynomial& known);
  friend SosExpr mul(DecisionId a, DecisionId b);
  friend SosExpr mul_derivative(DecisionId d, int var_index, const Polynomial& known);
  friend SosExpr term(DecisionId d);
  friend SosExpr term(ScalarId s, double coeff);

  struct DerivTerm {
    int decision;
    int var_index;
    Polynomial multiplier;
  };

  Polynomial known_;
  std::vector<std::pair<int, Polynomial>> decision_terms_;  // decision id -> multiplier
  std::vector<std::pair<int, Polynomial>> scalar_terms_;    // scalar id -> multiplier
  std::vector<DerivTerm> derivative_terms_;
  std::vector<std::pair<int, int>> bilinear_pairs_;
};

SosExpr mul(DecisionId d, const Polynomial& known);
SosExpr mul(const Polynomial& known, DecisionId d);
SosExpr mul(ScalarId s, const Polynomial& known);
/// Structurally bilinear product; recorded so compile() can report it.
SosExpr mul(DecisionId a, DecisionId b);
/// (d decision/dx_i) * known, so Lie derivatives of decision polynomials
/// stay affine in the decision coefficients.
SosExpr mul_derivative(DecisionId d, int var_index, const Polynomial& known);
SosExpr term(DecisionId d);
SosExpr term(ScalarId s, double coeff = 1.0);

class BilinearConstraintError : public std::runtime_error {
 public:
  BilinearConstraintError(const std::string& constraint, int first, int second);
  int first_decision;
  int second_decision;
};

/// Linear functional of decision coefficients, Gram traces, and scalars;
/// serves both as objective and as left-hand side of linear equalities.
class LinearFunctional {
 public:
  LinearFunctional& coefficient(DecisionId d, const Monomial& m, double weight);
  LinearFunctional& scalar(ScalarId s, double weight);
  /// trace of the decision's Gram matrix (sos or free-gram kinds only).
  LinearFunctional& gram_trace(DecisionId d, double weight);
  LinearFunctional& constant(double value);

 private:
  friend class SosProblem;
  struct CoeffTerm {
    int decision;
    Monomial monomial;
    double weight;
  };
  std::vector<CoeffTerm> coeff_terms_;
  std::vector<std::pair<int, double>> scalar_terms_;
  std::vector<std::pair<int, double>> trace_terms_;
  double constant_ = 0.0;
};

/// Builder for sum-of-squares programs; compiles to one block-diagonal SDP
/// by coefficient matching, one PSD block per SOS constraint and per
/// Gram-parameterized decision polynomial.
class SosProblem {
 public:
  explicit SosProblem(VariableSet vars);

  /// Decision polynomial constrained to be a sum of squares (PSD Gram).
  DecisionId add_sos_poly(const MonomialBasis& basis, std::string name = "");
  /// Decision polynomial with unconstrained coefficients on the support.
  DecisionId add_free_poly(std::vector<Monomial> support, std::string name = "");
  /// Decision polynomial parameterized by an unconstrained symmetric Gram
  /// matrix over the basis (for trace objectives over redundant Grams).
  DecisionId add_free_gram_poly(const MonomialBasis& basis, std::string name = "");

  ScalarId add_free_scalar(std::string name = "");
  ScalarId add_nonneg_scalar(std::string name = "");

  void add_sos_constraint(SosExpr expr, std::string name = "");
  void add_zero_constraint(SosExpr expr, std::string name = "");
  /// Entrywise-affine symmetric matrix constrained PSD; entry (i,j) equals
  /// constant(i,j) + sum of weighted decision coefficients. Used for Gram
  /// envelope bounds of coefficient-parameterized decisions.
  struct MatrixEntryTerm {
    DecisionId decision;
    Monomial monomial;
    double weight = 1.0;
  };
  void add_affine_psd_constraint(Eigen::MatrixXd constants,
                                 std::map<std::pair<int, int>, std::vector<MatrixEntryTerm>> terms,
                                 std::string name = "");
  /// functional == rhs as a single scalar equality over decision coefficients.
  void add_linear_equality(LinearFunctional functional, double rhs, std::string name = "");

  void set_objective(LinearFunctional objective) { objective_ = std::move(objective); }

  const VariableSet& vars() const { return vars_; }

  /// Coefficient-matching compilation; throws BilinearConstraintError when a
  /// constraint multiplies two decision objects, std::invalid_argument when
  /// there is nothing to constrain.
  SdpProblem compile() const;

  struct Recovery {
    std::map<int, Polynomial> polynomials;       // by DecisionId
    std::map<int, GramForm> grams;               // sos / free-gram decisions
    std::map<int, double> scalars;               // by ScalarId
    std::map<std::string, GramForm> constraint_grams;  // by constraint name
    double objective = 0.0;
  };

  /// Materializes decision values from a solved SDP; requires optimal status.
  Recovery recover(const SdpSolution& solution) const;

 private:
  enum class Kind { kSos, kFreeCoeffs, kFreeGram };

  struct Decision {
    Kind kind;
    MonomialBasis basis;            // sos / free-gram
    std::vector<Monomial> support;  // free-coeff support or product support
    std::string name;
  };

  struct Scalar {
    bool nonneg;
    std::string name;
  };

  struct Constraint {
    SosExpr expr;
    bool is_sos;  // otherwise zero
    std::string name;
  };

  struct MatrixConstraint {
    Eigen::MatrixXd constants;
    std::map<std::pair<int, int>, std::vector<MatrixEntryTerm>> terms;
    std::string name;
  };

  struct LinearConstraint {
    LinearFunctional functional;
    double rhs;
    std::string name;
  };

  // Layout of the compiled SDP, rebuilt on demand (compile is const).
  struct Layout;
  Layout build_layout() const;
  void append_functional(const Layout& layout, const LinearFunctional& f,
                         std::map<int, double>& out) const;

  VariableSet vars_;
  std::vector<Decision> decisions_;
  std::vector<Scalar> scalars_;
  std::vector<Constraint> constraints_;
  std::vector<MatrixConstraint> matrix_constraints_;
  std::vector<LinearConstraint> linear_constraints_;
  LinearFunctional objective_;
};

}  // namespace sbc

#endif  // SBC_SOS_HPP
