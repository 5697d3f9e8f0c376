#include "sbc/polynomial.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

namespace sbc {

VariableSet::VariableSet(std::vector<std::string> names) : names_(std::move(names)) {
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw std::invalid_argument("variable name must be non-empty");
    if (!seen.insert(n).second) throw std::invalid_argument("duplicate variable name: " + n);
  }
}

VariableSet VariableSet::numbered(int n, const std::string& stem) {
  if (n < 1) throw std::invalid_argument("variable count must be positive");
  std::vector<std::string> names;
  names.reserve(n);
  for (int i = 1; i <= n; ++i) names.push_back(stem + std::to_string(i));
  return VariableSet(std::move(names));
}

std::optional<int> VariableSet::index_of(std::string_view name) const {
  for (int i = 0; i < dimension(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

Monomial::Monomial(std::vector<int> exponents) : exponents_(std::move(exponents)) {
  for (int e : exponents_) {
    if (e < 0) throw std::invalid_argument("monomial exponents must be non-negative");
  }
}

Monomial Monomial::unit(int dimension) { return Monomial(std::vector<int>(dimension, 0)); }

Monomial Monomial::variable(int dimension, int index, int power) {
  if (index < 0 || index >= dimension) throw std::out_of_range("variable index out of range");
  std::vector<int> e(dimension, 0);
  e[index] = power;
  return Monomial(std::move(e));
}

int Monomial::degree() const { return std::accumulate(exponents_.begin(), exponents_.end(), 0); }

Monomial Monomial::operator*(const Monomial& other) const {
  if (dimension() != other.dimension()) throw std::invalid_argument("monomial dimension mismatch");
  std::vector<int> e(exponents_);
  for (int i = 0; i < dimension(); ++i) e[i] += other.exponents_[i];
  return Monomial(std::move(e));
}

double Monomial::evaluate(const Eigen::VectorXd& point) const {
  if (point.size() != dimension()) throw std::invalid_argument("point dimension mismatch");
  double value = 1.0;
  for (int i = 0; i < dimension(); ++i) {
    for (int k = 0; k < exponents_[i]; ++k) value *= point[i];
  }
  return value;
}

bool GradedLexLess::operator()(const Monomial& a, const Monomial& b) const {
  const int da = a.degree();
  const int db = b.degree();
  if (da != db) return da < db;
  // Same degree: earlier variables with higher exponents come first.
  return a.exponents() > b.exponents();
}

Polynomial::Polynomial(VariableSet vars) : vars_(std::move(vars)) {}

Polynomial::Polynomial(VariableSet vars, TermMap terms) : vars_(std::move(vars)) {
  for (const auto& [m, c] : terms) add_term(m, c);
}

Polynomial Polynomial::constant(const VariableSet& vars, double value) {
  Polynomial p(vars);
  p.add_term(Monomial::unit(vars.dimension()), value);
  return p;
}

Polynomial Polynomial::variable(const VariableSet& vars, int index) {
  Polynomial p(vars);
  p.add_term(Monomial::variable(vars.dimension(), index), 1.0);
  return p;
}

Polynomial Polynomial::monomial(const VariableSet& vars, const Monomial& m, double coeff) {
  if (m.dimension() != vars.dimension()) throw std::invalid_argument("monomial dimension mismatch");
  Polynomial p(vars);
  p.add_term(m, coeff);
  return p;
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [m, c] : terms_) d = std::max(d, m.degree());
  return d;
}

double Polynomial::coefficient(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

double Polynomial::constant_term() const { return coefficient(Monomial::unit(dimension())); }

void Polynomial::add_term(const Monomial& m, double coeff) {
  if (m.dimension() != vars_.dimension()) throw std::invalid_argument("monomial dimension mismatch");
  auto it = terms_.find(m);
  if (it == terms_.end()) {
    if (std::abs(coeff) >= kCoefficientDropTolerance) terms_.emplace(m, coeff);
    return;
  }
  it->second += coeff;
  if (std::abs(it->second) < kCoefficientDropTolerance) terms_.erase(it);
}

void Polynomial::require_same_vars(const Polynomial& other) const {
  if (vars_ != other.vars_) throw std::invalid_argument("polynomials over different variable sets");
}

Polynomial Polynomial::operator-() const {
  Polynomial r(vars_);
  for (const auto& [m, c] : terms_) r.terms_.emplace(m, -c);
  return r;
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  require_same_vars(other);
  for (const auto& [m, c] : other.terms_) add_term(m, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
  require_same_vars(other);
  for (const auto& [m, c] : other.terms_) add_term(m, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double scalar) {
  if (scalar == 0.0) {
    terms_.clear();
    return *this;
  }
  TermMap scaled;
  for (const auto& [m, c] : terms_) {
    const double v = c * scalar;
    if (std::abs(v) >= kCoefficientDropTolerance) scaled.emplace(m, v);
  }
  terms_ = std::move(scaled);
  return *this;
}

Polynomial Polynomial::pow(int exponent) const {
  if (exponent < 0) throw std::invalid_argument("negative exponent");
  Polynomial result = Polynomial::constant(vars_, 1.0);
  for (int k = 0; k < exponent; ++k) result = result * (*this);
  return result;
}

double Polynomial::evaluate(const Eigen::VectorXd& point) const {
  if (point.size() != dimension()) throw std::invalid_argument("point dimension mismatch");
  const int n = dimension();
  double sum = 0.0;
  for (const auto& [m, c] : terms_) {
    double t = c;
    for (int i = 0; i < n; ++i) {
      const double zi = point[i];
      for (int k = m.exponent(i); k > 0; --k) t *= zi;
    }
    sum += t;
  }
  return sum;
}

Polynomial Polynomial::differentiate(int var_index) const {
  if (var_index < 0 || var_index >= dimension()) throw std::out_of_range("variable index out of range");
  Polynomial r(vars_);
  for (const auto& [m, c] : terms_) {
    const int e = m.exponent(var_index);
    if (e == 0) continue;
    std::vector<int> exps = m.exponents();
    exps[var_index] = e - 1;
    r.add_term(Monomial(std::move(exps)), c * e);
  }
  return r;
}

Polynomial operator+(Polynomial a, const Polynomial& b) {
  a += b;
  return a;
}

Polynomial operator-(Polynomial a, const Polynomial& b) {
  a -= b;
  return a;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  a.require_same_vars(b);
  Polynomial r(a.vars_);
  for (const auto& [ma, ca] : a.terms_) {
    for (const auto& [mb, cb] : b.terms_) r.add_term(ma * mb, ca * cb);
  }
  return r;
}

Polynomial operator*(Polynomial p, double scalar) {
  p *= scalar;
  return p;
}

Polynomial operator*(double scalar, Polynomial p) {
  p *= scalar;
  return p;
}

std::string format_double(double value) {
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, value);
    if (std::strtod(buf, nullptr) == value) break;
  }
  return buf;
}

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream out;
  bool first = true;
  for (const auto& [m, c] : terms_) {
    double coeff = c;
    if (first) {
      if (coeff < 0) {
        out << "-";
        coeff = -coeff;
      }
      first = false;
    } else {
      out << (coeff < 0 ? " - " : " + ");
      coeff = std::abs(coeff);
    }
    const bool is_const = m.degree() == 0;
    const bool printed_coeff = is_const || coeff != 1.0;
    if (printed_coeff) out << format_double(coeff);
    bool printed_var = false;
    for (int i = 0; i < dimension(); ++i) {
      const int e = m.exponent(i);
      if (e == 0) continue;
      if (printed_var || printed_coeff) out << "*";
      out << vars_.name(i);
      if (e > 1) out << "^" << e;
      printed_var = true;
    }
  }
  return out.str();
}

ParseError::ParseError(const std::string& message, std::size_t position)
    : std::runtime_error(message + " (at position " + std::to_string(position) + ")"),
      position_(position) {}

namespace {

// Recursive-descent parser over: expr := term (('+'|'-') term)*,
// term := factor ('*' factor)*, factor := primary ('^' uint)?,
// primary := number | variable | '(' expr ')' | ('+'|'-') factor.
class Parser {
 public:
  Parser(std::string_view text, const VariableSet& vars) : text_(text), vars_(vars) {}

  Polynomial parse() {
    Polynomial p = expr();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError("unexpected trailing input", pos_);
    return p;
  }

 private:
  Polynomial expr() {
    Polynomial p = term();
    for (;;) {
      skip_ws();
      if (peek() == '+') {
        ++pos_;
        p += term();
      } else if (peek() == '-') {
        ++pos_;
        p -= term();
      } else {
        return p;
      }
    }
  }

  Polynomial term() {
    Polynomial p = factor();
    for (;;) {
      skip_ws();
      if (peek() == '*') {
        ++pos_;
        p = p * factor();
      } else {
        return p;
      }
    }
  }

  Polynomial factor() {
    Polynomial base = primary();
    skip_ws();
    if (peek() == '^') {
      ++pos_;
      skip_ws();
      const std::size_t start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (pos_ == start) throw ParseError("expected integer exponent after '^'", pos_);
      const int e = std::stoi(std::string(text_.substr(start, pos_ - start)));
      return base.pow(e);
    }
    return base;
  }

  Polynomial primary() {
    skip_ws();
    const char c = peek();
    if (c == '(') {
      const std::size_t open = pos_;
      ++pos_;
      Polynomial p = expr();
      skip_ws();
      if (peek() != ')') throw ParseError("unbalanced parenthesis", open);
      ++pos_;
      return p;
    }
    if (c == '-') {
      ++pos_;
      return -factor();
    }
    if (c == '+') {
      ++pos_;
      return factor();
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    throw ParseError(pos_ >= text_.size() ? "unexpected end of input"
                                          : std::string("unexpected character '") + c + "'",
                     pos_);
  }

  Polynomial number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
      ++pos_;
    }
    // Exponent suffix like 1e-3.
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t probe = pos_ + 1;
      if (probe < text_.size() && (text_[probe] == '+' || text_[probe] == '-')) ++probe;
      if (probe < text_.size() && std::isdigit(static_cast<unsigned char>(text_[probe]))) {
        ++probe;
        while (probe < text_.size() && std::isdigit(static_cast<unsigned char>(text_[probe]))) ++probe;
        pos_ = probe;
      }
    }
    const std::string token(text_.substr(start, pos_ - start));
    try {
      return Polynomial::constant(vars_, std::stod(token));
    } catch (const std::exception&) {
      throw ParseError("malformed numeric literal '" + token + "'", start);
    }
  }

  Polynomial identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                   text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string name(text_.substr(start, pos_ - start));
    const auto index = vars_.index_of(name);
    if (!index) throw ParseError("unknown variable '" + name + "'", start);
    return Polynomial::variable(vars_, *index);
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string_view text_;
  const VariableSet& vars_;
  std::size_t pos_ = 0;
};

}  // namespace

Polynomial parse_polynomial(std::string_view text, const VariableSet& vars) {
  Parser parser(text, vars);
  return parser.parse();
}

const VariableSet& PolyVectorField::vars() const {
  if (f.empty()) throw std::invalid_argument("empty vector field");
  return f.front().vars();
}

void PolyVectorField::validate() const {
  if (f.empty()) throw std::invalid_argument("empty vector field");
  const VariableSet& v = f.front().vars();
  if (static_cast<int>(f.size()) != v.dimension()) {
    throw std::invalid_argument("vector field component count must equal state dimension");
  }
  for (const auto& p : f) {
    if (p.vars() != v) throw std::invalid_argument("vector field components over different variables");
  }
  if (!g.empty()) {
    if (g.size() != f.size()) throw std::invalid_argument("input matrix row count mismatch");
    const std::size_t m = g.front().size();
    if (m == 0) throw std::invalid_argument("input matrix has zero columns");
    for (const auto& row : g) {
      if (row.size() != m) throw std::invalid_argument("ragged input matrix");
      for (const auto& p : row) {
        if (p.vars() != v) throw std::invalid_argument("input matrix entries over different variables");
      }
    }
  }
}

std::vector<Polynomial> PolyVectorField::closed_loop(const std::vector<Polynomial>& u) const {
  validate();
  if (u.empty()) return f;
  if (static_cast<int>(u.size()) != input_dimension()) {
    throw std::invalid_argument("controller dimension mismatch");
  }
  std::vector<Polynomial> result = f;
  for (std::size_t i = 0; i < f.size(); ++i) {
    for (std::size_t j = 0; j < u.size(); ++j) result[i] += g[i][j] * u[j];
  }
  return result;
}

Eigen::VectorXd PolyVectorField::evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  Eigen::VectorXd dx(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) dx[i] = f[i].evaluate(x);
  if (u.size() > 0) {
    if (g.empty() || u.size() != input_dimension()) {
      throw std::invalid_argument("input dimension mismatch");
    }
    for (std::size_t i = 0; i < f.size(); ++i) {
      for (int j = 0; j < u.size(); ++j) dx[i] += g[i][j].evaluate(x) * u[j];
    }
  }
  return dx;
}

Eigen::VectorXd PolyVectorField::evaluate(const Eigen::VectorXd& x) const {
  return evaluate(x, Eigen::VectorXd());
}

Polynomial lie_derivative(const Polynomial& p, const std::vector<Polynomial>& field) {
  if (static_cast<int>(field.size()) != p.dimension()) {
    throw std::invalid_argument("field dimension must equal polynomial dimension");
  }
  Polynomial result(p.vars());
  for (int i = 0; i < p.dimension(); ++i) result += p.differentiate(i) * field[i];
  return result;
}

Polynomial lie_derivative(const Polynomial& p, const PolyVectorField& field) {
  return lie_derivative(p, field.f);
}

}  // namespace sbc
