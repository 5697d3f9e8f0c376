#include "sbc/sos.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sbc {

namespace {

// Sparse affine form over the compiled SDP's variables.
struct AffineExpr {
  std::map<int, double> terms;
  double constant = 0.0;

  void add(int var, double coeff) {
    if (coeff == 0.0) return;
    terms[var] += coeff;
  }
};

using AffinePoly = std::map<Monomial, AffineExpr, GradedLexLess>;

int upper_tri_index(int k, int i, int j) { return i * k - i * (i - 1) / 2 + (j - i); }

}  // namespace

SosExpr& SosExpr::operator+=(const SosExpr& other) {
  if (known_.dimension() == 0 && known_.is_zero()) {
    known_ = other.known_;
  } else if (!(other.known_.dimension() == 0 && other.known_.is_zero())) {
    known_ += other.known_;
  }
  decision_terms_.insert(decision_terms_.end(), other.decision_terms_.begin(),
                         other.decision_terms_.end());
  scalar_terms_.insert(scalar_terms_.end(), other.scalar_terms_.begin(), other.scalar_terms_.end());
  derivative_terms_.insert(derivative_terms_.end(), other.derivative_terms_.begin(),
                           other.derivative_terms_.end());
  bilinear_pairs_.insert(bilinear_pairs_.end(), other.bilinear_pairs_.begin(),
                         other.bilinear_pairs_.end());
  return *this;
}

SosExpr& SosExpr::operator-=(const SosExpr& other) { return *this += -other; }

SosExpr SosExpr::operator-() const {
  SosExpr r(*this);
  r.known_ = -r.known_;
  for (auto& [id, p] : r.decision_terms_) p = -p;
  for (auto& [id, p] : r.scalar_terms_) p = -p;
  for (auto& t : r.derivative_terms_) t.multiplier = -t.multiplier;
  return r;
}

SosExpr mul(DecisionId d, const Polynomial& known) {
  SosExpr e;
  e.decision_terms_.emplace_back(d.value, known);
  return e;
}

SosExpr mul(const Polynomial& known, DecisionId d) { return mul(d, known); }

SosExpr mul(ScalarId s, const Polynomial& known) {
  SosExpr e;
  e.scalar_terms_.emplace_back(s.value, known);
  return e;
}

SosExpr mul(DecisionId a, DecisionId b) {
  SosExpr e;
  e.bilinear_pairs_.emplace_back(a.value, b.value);
  return e;
}

SosExpr mul_derivative(DecisionId d, int var_index, const Polynomial& known) {
  SosExpr e;
  e.derivative_terms_.push_back({d.value, var_index, known});
  return e;
}

// Dimension-0 constant polynomials act as multipliers that are materialized
// against the problem's variable set at compile time.
SosExpr term(DecisionId d) {
  SosExpr e;
  e.decision_terms_.emplace_back(d.value, Polynomial::constant(VariableSet(), 1.0));
  return e;
}

SosExpr term(ScalarId s, double coeff) {
  SosExpr e;
  e.scalar_terms_.emplace_back(s.value, Polynomial::constant(VariableSet(), coeff));
  return e;
}

BilinearConstraintError::BilinearConstraintError(const std::string& constraint, int first,
                                                 int second)
    : std::runtime_error("constraint '" + constraint + "' multiplies decision objects " +
                         std::to_string(first) + " and " + std::to_string(second)),
      first_decision(first),
      second_decision(second) {}

LinearFunctional& LinearFunctional::coefficient(DecisionId d, const Monomial& m, double weight) {
  coeff_terms_.push_back({d.value, m, weight});
  return *this;
}

LinearFunctional& LinearFunctional::scalar(ScalarId s, double weight) {
  scalar_terms_.emplace_back(s.value, weight);
  return *this;
}

LinearFunctional& LinearFunctional::gram_trace(DecisionId d, double weight) {
  trace_terms_.emplace_back(d.value, weight);
  return *this;
}

LinearFunctional& LinearFunctional::constant(double value) {
  constant_ += value;
  return *this;
}

SosProblem::SosProblem(VariableSet vars) : vars_(std::move(vars)) {}

DecisionId SosProblem::add_sos_poly(const MonomialBasis& basis, std::string name) {
  if (basis.vars() != vars_) throw std::invalid_argument("basis over foreign variable set");
  decisions_.push_back({Kind::kSos, basis, {}, std::move(name)});
  return DecisionId{static_cast<int>(decisions_.size()) - 1};
}

DecisionId SosProblem::add_free_poly(std::vector<Monomial> support, std::string name) {
  for (const auto& m : support) {
    if (m.dimension() != vars_.dimension()) throw std::invalid_argument("support dimension mismatch");
  }
  std::sort(support.begin(), support.end(), GradedLexLess());
  support.erase(std::unique(support.begin(), support.end()), support.end());
  decisions_.push_back({Kind::kFreeCoeffs, MonomialBasis(), std::move(support), std::move(name)});
  return DecisionId{static_cast<int>(decisions_.size()) - 1};
}

DecisionId SosProblem::add_free_gram_poly(const MonomialBasis& basis, std::string name) {
  if (basis.vars() != vars_) throw std::invalid_argument("basis over foreign variable set");
  decisions_.push_back({Kind::kFreeGram, basis, {}, std::move(name)});
  return DecisionId{static_cast<int>(decisions_.size()) - 1};
}

ScalarId SosProblem::add_free_scalar(std::string name) {
  scalars_.push_back({false, std::move(name)});
  return ScalarId{static_cast<int>(scalars_.size()) - 1};
}

ScalarId SosProblem::add_nonneg_scalar(std::string name) {
  scalars_.push_back({true, std::move(name)});
  return ScalarId{static_cast<int>(scalars_.size()) - 1};
}

void SosProblem::add_sos_constraint(SosExpr expr, std::string name) {
  if (name.empty()) name = "sos#" + std::to_string(constraints_.size());
  constraints_.push_back({std::move(expr), true, std::move(name)});
}

void SosProblem::add_zero_constraint(SosExpr expr, std::string name) {
  if (name.empty()) name = "zero#" + std::to_string(constraints_.size());
  constraints_.push_back({std::move(expr), false, std::move(name)});
}

void SosProblem::add_affine_psd_constraint(
    Eigen::MatrixXd constants, std::map<std::pair<int, int>, std::vector<MatrixEntryTerm>> terms,
    std::string name) {
  if (constants.rows() != constants.cols()) throw std::invalid_argument("matrix must be square");
  if (name.empty()) name = "psd#" + std::to_string(matrix_constraints_.size());
  matrix_constraints_.push_back({std::move(constants), std::move(terms), std::move(name)});
}

void SosProblem::add_linear_equality(LinearFunctional functional, double rhs, std::string name) {
  if (name.empty()) name = "lin#" + std::to_string(linear_constraints_.size());
  linear_constraints_.push_back({std::move(functional), rhs, std::move(name)});
}

struct SosProblem::Layout {
  SdpProblem sdp;
  // Decision coefficient tables: monomial -> [(sdp var, weight)].
  std::vector<std::map<Monomial, std::vector<std::pair<int, double>>, GradedLexLess>> tables;
  std::vector<int> decision_block;       // kSos only, else -1
  std::vector<int> decision_free_start;  // free kinds, else -1
  std::vector<int> scalar_var;           // sdp var index of each scalar
  std::vector<int> constraint_block;     // per sos-kind constraint, else -1
  std::vector<MonomialBasis> constraint_basis;
  std::vector<int> matrix_block;
};

SosProblem::Layout SosProblem::build_layout() const {
  Layout layout;
  SdpProblem& sdp = layout.sdp;

  // Pass 1: allot blocks and free variables.
  layout.decision_block.assign(decisions_.size(), -1);
  layout.decision_free_start.assign(decisions_.size(), -1);
  int free_cursor = 0;
  for (std::size_t d = 0; d < decisions_.size(); ++d) {
    switch (decisions_[d].kind) {
      case Kind::kSos:
        layout.decision_block[d] = static_cast<int>(sdp.block_dims.size());
        sdp.block_dims.push_back(decisions_[d].basis.size());
        break;
      case Kind::kFreeCoeffs:
        layout.decision_free_start[d] = free_cursor;
        free_cursor += static_cast<int>(decisions_[d].support.size());
        break;
      case Kind::kFreeGram: {
        const int k = decisions_[d].basis.size();
        layout.decision_free_start[d] = free_cursor;
        free_cursor += k * (k + 1) / 2;
        break;
      }
    }
  }
  layout.scalar_var.assign(scalars_.size(), -1);
  std::vector<int> scalar_block(scalars_.size(), -1);
  for (std::size_t s = 0; s < scalars_.size(); ++s) {
    if (scalars_[s].nonneg) {
      scalar_block[s] = static_cast<int>(sdp.block_dims.size());
      sdp.block_dims.push_back(1);
    } else {
      layout.scalar_var[s] = free_cursor++;  // patched to global index below
    }
  }
  layout.constraint_block.assign(constraints_.size(), -1);
  layout.constraint_basis.resize(constraints_.size());
  for (std::size_t c = 0; c < constraints_.size(); ++c) {
    if (!constraints_[c].is_sos) continue;
    // Structural degree of the expression decides the Gram basis.
    const SosExpr& e = constraints_[c].expr;
    int deg = e.known_.is_zero() ? 0 : e.known_.degree();
    const auto decision_degree = [this](int id) {
      const Decision& dec = decisions_[id];
      if (dec.kind == Kind::kFreeCoeffs) {
        int d = 0;
        for (const auto& m : dec.support) d = std::max(d, m.degree());
        return d;
      }
      return 2 * dec.basis.max_degree();
    };
    for (const auto& [id, mult] : e.decision_terms_) {
      deg = std::max(deg, (mult.is_zero() ? 0 : mult.degree()) + decision_degree(id));
    }
    for (const auto& t : e.derivative_terms_) {
      deg = std::max(deg, (t.multiplier.is_zero() ? 0 : t.multiplier.degree()) +
                              std::max(0, decision_degree(t.decision) - 1));
    }
    for (const auto& [id, mult] : e.scalar_terms_) {
      deg = std::max(deg, mult.is_zero() ? 0 : mult.degree());
    }
    const int half = (deg + 1) / 2;
    layout.constraint_basis[c] = standard_basis(vars_, half);
    layout.constraint_block[c] = static_cast<int>(sdp.block_dims.size());
    sdp.block_dims.push_back(layout.constraint_basis[c].size());
  }
  layout.matrix_block.assign(matrix_constraints_.size(), -1);
  for (std::size_t mc = 0; mc < matrix_constraints_.size(); ++mc) {
    layout.matrix_block[mc] = static_cast<int>(sdp.block_dims.size());
    sdp.block_dims.push_back(static_cast<int>(matrix_constraints_[mc].constants.rows()));
  }
  sdp.num_free = free_cursor;

  // Patch scalar free indices to global variable indices.
  for (std::size_t s = 0; s < scalars_.size(); ++s) {
    if (scalars_[s].nonneg) {
      layout.scalar_var[s] = sdp.entry_index(scalar_block[s], 0, 0);
    } else {
      layout.scalar_var[s] = sdp.free_index(layout.scalar_var[s]);
    }
  }

  // Pass 2: decision coefficient tables.
  layout.tables.resize(decisions_.size());
  for (std::size_t d = 0; d < decisions_.size(); ++d) {
    auto& table = layout.tables[d];
    const Decision& dec = decisions_[d];
    switch (dec.kind) {
      case Kind::kSos: {
        const CoefficientMap map(dec.basis);
        const auto& products = map.product_monomials();
        for (std::size_t r = 0; r < products.size(); ++r) {
          auto& entry = table[products[r]];
          for (const auto& contrib : map.contributions(static_cast<int>(r))) {
            entry.emplace_back(sdp.entry_index(layout.decision_block[d], contrib.i, contrib.j),
                               contrib.weight);
          }
        }
        break;
      }
      case Kind::kFreeCoeffs: {
        for (std::size_t i = 0; i < dec.support.size(); ++i) {
          table[dec.support[i]].emplace_back(
              sdp.free_index(layout.decision_free_start[d] + static_cast<int>(i)), 1.0);
        }
        break;
      }
      case Kind::kFreeGram: {
        const CoefficientMap map(dec.basis);
        const int k = dec.basis.size();
        const auto& products = map.product_monomials();
        for (std::size_t r = 0; r < products.size(); ++r) {
          auto& entry = table[products[r]];
          for (const auto& contrib : map.contributions(static_cast<int>(r))) {
            entry.emplace_back(sdp.free_index(layout.decision_free_start[d] +
                                              upper_tri_index(k, contrib.i, contrib.j)),
                               contrib.weight);
          }
        }
        break;
      }
    }
  }
  return layout;
}

void SosProblem::append_functional(const Layout& layout, const LinearFunctional& f,
                                   std::map<int, double>& out) const {
  const SdpProblem& sdp = layout.sdp;
  for (const auto& t : f.coeff_terms_) {
    const auto& table = layout.tables.at(t.decision);
    const auto entry = table.find(t.monomial);
    if (entry == table.end()) continue;  // coefficient is structurally zero
    for (const auto& [var, w] : entry->second) out[var] += t.weight * w;
  }
  for (const auto& [id, w] : f.scalar_terms_) out[layout.scalar_var.at(id)] += w;
  for (const auto& [id, w] : f.trace_terms_) {
    const Decision& dec = decisions_.at(id);
    if (dec.kind == Kind::kSos) {
      for (int i = 0; i < dec.basis.size(); ++i) {
        out[sdp.entry_index(layout.decision_block[id], i, i)] += w;
      }
    } else if (dec.kind == Kind::kFreeGram) {
      const int k = dec.basis.size();
      for (int i = 0; i < k; ++i) {
        out[sdp.free_index(layout.decision_free_start[id] + upper_tri_index(k, i, i))] += w;
      }
    } else {
      throw std::invalid_argument("gram_trace requires a Gram-parameterized decision");
    }
  }
}

SdpProblem SosProblem::compile() const {
  if (constraints_.empty() && matrix_constraints_.empty() && linear_constraints_.empty()) {
    throw std::invalid_argument("empty constraint set");
  }
  for (const auto& c : constraints_) {
    if (!c.expr.bilinear_pairs_.empty()) {
      throw BilinearConstraintError(c.name, c.expr.bilinear_pairs_.front().first,
                                    c.expr.bilinear_pairs_.front().second);
    }
    for (const auto& [id, mult] : c.expr.decision_terms_) {
      if (id < 0 || id >= static_cast<int>(decisions_.size())) {
        throw std::out_of_range("unknown decision handle in constraint '" + c.name + "'");
      }
    }
  }

  Layout layout = build_layout();
  SdpProblem& sdp = layout.sdp;
  const Polynomial one = Polynomial::constant(vars_, 1.0);

  for (std::size_t c = 0; c < constraints_.size(); ++c) {
    const Constraint& con = constraints_[c];
    // Expand the expression into per-monomial affine forms.
    AffinePoly poly;
    if (!con.expr.known_.is_zero()) {
      for (const auto& [m, coeff] : con.expr.known_.terms()) poly[m].constant += coeff;
    }
    for (const auto& [id, mult_raw] : con.expr.decision_terms_) {
      const Polynomial mult = mult_raw.dimension() == 0 ? one * mult_raw.constant_term() : mult_raw;
      for (const auto& [mk, ck] : mult.terms()) {
        for (const auto& [md, vars] : layout.tables[id]) {
          AffineExpr& target = poly[mk * md];
          for (const auto& [var, w] : vars) target.add(var, ck * w);
        }
      }
    }
    for (const auto& t : con.expr.derivative_terms_) {
      const Polynomial mult =
          t.multiplier.dimension() == 0 ? one * t.multiplier.constant_term() : t.multiplier;
      for (const auto& [mk, ck] : mult.terms()) {
        for (const auto& [md, vars] : layout.tables[t.decision]) {
          const int e = md.exponent(t.var_index);
          if (e == 0) continue;
          std::vector<int> exps = md.exponents();
          exps[t.var_index] -= 1;
          const Monomial shifted(std::move(exps));
          AffineExpr& target = poly[mk * shifted];
          for (const auto& [var, w] : vars) target.add(var, ck * e * w);
        }
      }
    }
    for (const auto& [id, mult_raw] : con.expr.scalar_terms_) {
      if (id < 0 || id >= static_cast<int>(scalars_.size())) {
        throw std::out_of_range("unknown scalar handle in constraint '" + con.name + "'");
      }
      const Polynomial mult = mult_raw.dimension() == 0 ? one * mult_raw.constant_term() : mult_raw;
      for (const auto& [mk, ck] : mult.terms()) poly[mk].add(layout.scalar_var[id], ck);
    }

    if (con.is_sos) {
      const int block = layout.constraint_block[c];
      const CoefficientMap map(layout.constraint_basis[c]);
      const auto& products = map.product_monomials();
      for (std::size_t r = 0; r < products.size(); ++r) {
        SdpRow row;
        for (const auto& contrib : map.contributions(static_cast<int>(r))) {
          row.terms.push_back({sdp.entry_index(block, contrib.i, contrib.j), contrib.weight});
        }
        const auto it = poly.find(products[r]);
        if (it != poly.end()) {
          for (const auto& [var, w] : it->second.terms) row.terms.push_back({var, -w});
          row.rhs = it->second.constant;
        }
        sdp.equalities.push_back(std::move(row));
      }
      // Every monomial of the expression must be coverable by the basis.
      for (const auto& [m, expr] : poly) {
        if (map.product_index(m) < 0) {
          throw std::logic_error("constraint '" + con.name +
                                 "' has a monomial outside its Gram basis products");
        }
      }
    } else {
      for (const auto& [m, expr] : poly) {
        SdpRow row;
        for (const auto& [var, w] : expr.terms) row.terms.push_back({var, w});
        row.rhs = -expr.constant;
        sdp.equalities.push_back(std::move(row));
      }
    }
  }

  for (std::size_t mc = 0; mc < matrix_constraints_.size(); ++mc) {
    const MatrixConstraint& con = matrix_constraints_[mc];
    const int block = layout.matrix_block[mc];
    const int k = static_cast<int>(con.constants.rows());
    for (int i = 0; i < k; ++i) {
      for (int j = i; j < k; ++j) {
        SdpRow row;
        row.terms.push_back({sdp.entry_index(block, i, j), 1.0});
        const auto it = con.terms.find({i, j});
        if (it != con.terms.end()) {
          for (const auto& t : it->second) {
            const auto& table = layout.tables.at(t.decision.value);
            const auto entry = table.find(t.monomial);
            if (entry == table.end()) {
              throw std::invalid_argument("matrix constraint references a coefficient outside the "
                                          "decision's support");
            }
            for (const auto& [var, w] : entry->second) row.terms.push_back({var, -t.weight * w});
          }
        }
        row.rhs = con.constants(i, j);
        sdp.equalities.push_back(std::move(row));
      }
    }
  }

  // Scalar linear equalities over decision coefficients.
  for (const auto& lc : linear_constraints_) {
    std::map<int, double> terms;
    append_functional(layout, lc.functional, terms);
    SdpRow row;
    for (const auto& [var, w] : terms) row.terms.push_back({var, w});
    row.rhs = lc.rhs - lc.functional.constant_;
    sdp.equalities.push_back(std::move(row));
  }

  // Objective: always compiled as maximization of the stated functional.
  sdp.maximize = true;
  sdp.objective_constant = objective_.constant_;
  std::map<int, double> obj;
  append_functional(layout, objective_, obj);
  for (const auto& [var, w] : obj) sdp.objective.push_back({var, w});

  sdp.validate();
  return sdp;
}

SosProblem::Recovery SosProblem::recover(const SdpSolution& solution) const {
  if (solution.status != SdpStatus::kOptimal) {
    throw std::runtime_error("solution status not usable: " + to_string(solution.status));
  }
  Layout layout = build_layout();
  const SdpProblem& sdp = layout.sdp;

  // Flatten solution values onto the global variable indexing.
  Eigen::VectorXd values(sdp.num_vars());
  {
    int cursor = 0;
    for (std::size_t b = 0; b < sdp.block_dims.size(); ++b) {
      const int k = sdp.block_dims[b];
      for (int i = 0; i < k; ++i) {
        for (int j = i; j < k; ++j) values[cursor++] = solution.blocks.at(b)(i, j);
      }
    }
    for (int f = 0; f < sdp.num_free; ++f) values[cursor++] = solution.free_values[f];
  }

  Recovery rec;
  rec.objective = solution.objective;
  for (std::size_t d = 0; d < decisions_.size(); ++d) {
    Polynomial p(vars_);
    for (const auto& [m, vars] : layout.tables[d]) {
      double coeff = 0.0;
      for (const auto& [var, w] : vars) coeff += w * values[var];
      p += Polynomial::monomial(vars_, m, coeff);
    }
    rec.polynomials.emplace(static_cast<int>(d), std::move(p));
    const Decision& dec = decisions_[d];
    if (dec.kind == Kind::kSos) {
      rec.grams.emplace(static_cast<int>(d),
                        GramForm(dec.basis, solution.blocks.at(layout.decision_block[d])));
    } else if (dec.kind == Kind::kFreeGram) {
      const int k = dec.basis.size();
      Eigen::MatrixXd q(k, k);
      for (int i = 0; i < k; ++i) {
        for (int j = i; j < k; ++j) {
          const double v =
              values[sdp.free_index(layout.decision_free_start[d] + upper_tri_index(k, i, j))];
          q(i, j) = v;
          q(j, i) = v;
        }
      }
      rec.grams.emplace(static_cast<int>(d), GramForm(dec.basis, q));
    }
  }
  for (std::size_t s = 0; s < scalars_.size(); ++s) {
    rec.scalars.emplace(static_cast<int>(s), values[layout.scalar_var[s]]);
  }
  for (std::size_t c = 0; c < constraints_.size(); ++c) {
    if (layout.constraint_block[c] < 0) continue;
    rec.constraint_grams.emplace(
        constraints_[c].name,
        GramForm(layout.constraint_basis[c], solution.blocks.at(layout.constraint_block[c])));
  }
  return rec;
}

}  // namespace sbc
