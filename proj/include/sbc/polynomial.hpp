#ifndef SBC_POLYNOMIAL_HPP
#define SBC_POLYNOMIAL_HPP

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace sbc {

/// Ordered set of scalar variable names; fixes the state dimension and the
/// meaning of exponent vectors for every polynomial built over it.
class VariableSet {
 public:
  VariableSet() = default;
  explicit VariableSet(std::vector<std::string> names);

  /// n variables named <stem>1 .. <stem>n.
  static VariableSet numbered(int n, const std::string& stem = "x");

  int dimension() const { return static_cast<int>(names_.size()); }
  const std::string& name(int i) const { return names_.at(i); }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<int> index_of(std::string_view name) const;

  bool operator==(const VariableSet& other) const { return names_ == other.names_; }
  bool operator!=(const VariableSet& other) const { return !(*this == other); }

 private:
  std::vector<std::string> names_;
};

/// Exponent vector over a VariableSet of the same dimension.
class Monomial {
 public:
  Monomial() = default;
  explicit Monomial(std::vector<int> exponents);

  static Monomial unit(int dimension);  // exponents all zero
  static Monomial variable(int dimension, int index, int power = 1);

  int dimension() const { return static_cast<int>(exponents_.size()); }
  int exponent(int i) const { return exponents_[i]; }
  const std::vector<int>& exponents() const { return exponents_; }
  int degree() const;

  Monomial operator*(const Monomial& other) const;
  bool operator==(const Monomial& other) const { return exponents_ == other.exponents_; }
  bool operator!=(const Monomial& other) const { return !(*this == other); }

  double evaluate(const Eigen::VectorXd& point) const;

 private:
  std::vector<int> exponents_;
};

/// Graded lexicographic order: lower total degree first; ties broken so that
/// earlier variables carry higher exponents first (x1^2 before x1*x2 before x2^2).
struct GradedLexLess {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

class Polynomial;
Polynomial operator*(const Polynomial& a, const Polynomial& b);

/// Sparse multivariate polynomial with double coefficients in canonical form:
/// graded-lex term order, no stored zero coefficients. Immutable value type.
class Polynomial {
 public:
  using TermMap = std::map<Monomial, double, GradedLexLess>;

  /// Magnitude below which coefficients are dropped during canonicalization.
  static constexpr double kCoefficientDropTolerance = 1e-14;

  Polynomial() = default;  // zero polynomial over the empty variable set
  explicit Polynomial(VariableSet vars);
  Polynomial(VariableSet vars, TermMap terms);

  static Polynomial constant(const VariableSet& vars, double value);
  static Polynomial variable(const VariableSet& vars, int index);
  static Polynomial monomial(const VariableSet& vars, const Monomial& m, double coeff = 1.0);

  const VariableSet& vars() const { return vars_; }
  int dimension() const { return vars_.dimension(); }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  /// Total degree; 0 for the zero polynomial.
  int degree() const;
  double coefficient(const Monomial& m) const;
  double constant_term() const;

  Polynomial operator-() const;
  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator-=(const Polynomial& other);
  Polynomial& operator*=(double scalar);
  Polynomial pow(int exponent) const;

  double evaluate(const Eigen::VectorXd& point) const;
  Polynomial differentiate(int var_index) const;

  /// Canonical textual form; parse(to_string()) reproduces the polynomial exactly.
  std::string to_string() const;

 private:
  void add_term(const Monomial& m, double coeff);
  void require_same_vars(const Polynomial& other) const;

  VariableSet vars_;
  TermMap terms_;

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
};

Polynomial operator+(Polynomial a, const Polynomial& b);
Polynomial operator-(Polynomial a, const Polynomial& b);
Polynomial operator*(Polynomial p, double scalar);
Polynomial operator*(double scalar, Polynomial p);

/// Thrown on malformed expression text; position is a 0-based byte offset.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t position);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Parses an arithmetic expression over the declared variables.
/// Grammar: sums of products of powers; factors are decimal literals,
/// variable names, or parenthesized subexpressions; '^' takes a
/// non-negative integer exponent. Whitespace is insignificant.
Polynomial parse_polynomial(std::string_view text, const VariableSet& vars);

/// Polynomial vector field xdot = f(x) [+ g(x) u]; g has one column per input.
struct PolyVectorField {
  std::vector<Polynomial> f;
  std::vector<std::vector<Polynomial>> g;  // n rows x m columns; empty if no input

  int state_dimension() const { return static_cast<int>(f.size()); }
  int input_dimension() const { return g.empty() ? 0 : static_cast<int>(g.front().size()); }
  const VariableSet& vars() const;
  void validate() const;

  /// f + g*u with a polynomial state feedback u (one component per input).
  std::vector<Polynomial> closed_loop(const std::vector<Polynomial>& u) const;

  Eigen::VectorXd evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const;
};

/// Gradient of p dotted with the field components.
Polynomial lie_derivative(const Polynomial& p, const std::vector<Polynomial>& field);
Polynomial lie_derivative(const Polynomial& p, const PolyVectorField& field);

/// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double value);

}  // namespace sbc

#endif  // SBC_POLYNOMIAL_HPP
