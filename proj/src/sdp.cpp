#include "sbc/sdp.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "sbc/polynomial.hpp"  // format_double

namespace sbc {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
}

int SdpProblem::num_entry_vars() const {
  int n = 0;
  for (int k : block_dims) n += k * (k + 1) / 2;
  return n;
}

int SdpProblem::entry_index(int block, int i, int j) const {
  if (block < 0 || block >= static_cast<int>(block_dims.size())) {
    throw std::out_of_range("block index out of range");
  }
  const int k = block_dims[block];
  if (i < 0 || j < i || j >= k) throw std::out_of_range("entry index out of range");
  int offset = 0;
  for (int b = 0; b < block; ++b) offset += block_dims[b] * (block_dims[b] + 1) / 2;
  return offset + i * k - i * (i - 1) / 2 + (j - i);
}

void SdpProblem::validate() const {
  for (int k : block_dims) {
    if (k < 1) throw std::invalid_argument("PSD block dimension must be positive");
  }
  if (num_free < 0) throw std::invalid_argument("negative free variable count");
  const int n = num_vars();
  auto check_terms = [n](const std::vector<SdpTerm>& terms) {
    for (const auto& t : terms) {
      if (t.var < 0 || t.var >= n) throw std::out_of_range("variable index out of range");
      if (!std::isfinite(t.coeff)) throw std::invalid_argument("non-finite coefficient");
    }
  };
  check_terms(objective);
  for (const auto& row : equalities) {
    check_terms(row.terms);
    if (!std::isfinite(row.rhs)) throw std::invalid_argument("non-finite right-hand side");
  }
}

std::string to_string(SdpStatus status) {
  switch (status) {
    case SdpStatus::kOptimal: return "optimal";
    case SdpStatus::kInfeasible: return "infeasible";
    case SdpStatus::kUnbounded: return "unbounded";
    case SdpStatus::kMaxIterations: return "max-iter";
    case SdpStatus::kNumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

namespace {

// ---------------------------------------------------------------------------
// svec packing: symmetric matrices are stored as upper-triangle vectors with
// off-diagonal entries scaled by sqrt(2), so inner products of packed vectors
// equal Frobenius inner products of the matrices.
// ---------------------------------------------------------------------------

struct BlockLayout {
  std::vector<int> dims;
  std::vector<int> offsets;  // svec offset of each block
  int total = 0;             // total svec length

  explicit BlockLayout(const std::vector<int>& block_dims) : dims(block_dims) {
    offsets.reserve(dims.size());
    for (int k : dims) {
      offsets.push_back(total);
      total += k * (k + 1) / 2;
    }
  }
};

Eigen::MatrixXd svec_to_mat(const Eigen::Ref<const Eigen::VectorXd>& v, int k) {
  Eigen::MatrixXd m(k, k);
  int idx = 0;
  for (int i = 0; i < k; ++i) {
    for (int j = i; j < k; ++j, ++idx) {
      const double value = (i == j) ? v[idx] : v[idx] / kSqrt2;
      m(i, j) = value;
      m(j, i) = value;
    }
  }
  return m;
}

void mat_to_svec(const Eigen::MatrixXd& m, Eigen::Ref<Eigen::VectorXd> v) {
  const int k = static_cast<int>(m.rows());
  int idx = 0;
  for (int i = 0; i < k; ++i) {
    for (int j = i; j < k; ++j, ++idx) {
      v[idx] = (i == j) ? m(i, i) : kSqrt2 * 0.5 * (m(i, j) + m(j, i));
    }
  }
}

// Nesterov-Todd scaling of one PSD block.
struct BlockScaling {
  Eigen::MatrixXd r;     // W u = svec(R' U R)
  Eigen::MatrixXd rinv;  // R^{-1}
  Eigen::MatrixXd t;     // R R'  (W'W u = svec(T U T))
  Eigen::VectorXd lambda;
  Eigen::MatrixXd chol_s;  // lower Cholesky factors of the current iterates
  Eigen::MatrixXd chol_z;
};

// Inner state of one homogeneous self-dual solve.
struct Work {
  // Problem data in svec coordinates: min c'u s.t. A u = b, cone part PSD.
  BlockLayout layout;
  int num_free = 0;
  int n_cone = 0;
  int n_total = 0;
  int m = 0;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  Eigen::VectorXd row_scale;
  double cone_degree = 0.0;

  // Iterates.
  Eigen::VectorXd u, z, s;
  Eigen::VectorXd y;
  double tau = 1.0, kappa = 1.0;

  std::vector<BlockScaling> scalings;
  Eigen::MatrixXd kkt;  // bordered Schur complement, factored per iteration
  Eigen::PartialPivLU<Eigen::MatrixXd> kkt_lu;

  explicit Work(const std::vector<int>& dims) : layout(dims) {}

  int nb() const { return static_cast<int>(layout.dims.size()); }

  Eigen::VectorXd cone_part(const Eigen::VectorXd& full) const { return full.head(n_cone); }

  // Applies W'W (u -> svec(T U T)) blockwise.
  Eigen::VectorXd apply_wtw(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out(n_cone);
    for (int b = 0; b < nb(); ++b) {
      const int k = layout.dims[b];
      const int off = layout.offsets[b];
      const int len = k * (k + 1) / 2;
      const Eigen::MatrixXd mv = svec_to_mat(v.segment(off, len), k);
      const Eigen::MatrixXd& t = scalings[b].t;
      mat_to_svec(t * mv * t, out.segment(off, len));
    }
    return out;
  }
};

double max_step_to_boundary(const Eigen::MatrixXd& chol_lower, const Eigen::MatrixXd& delta) {
  // Largest alpha with X + alpha*D PSD, given X = L L'.
  const Eigen::MatrixXd linv_d = chol_lower.triangularView<Eigen::Lower>().solve(delta);
  const Eigen::MatrixXd w =
      chol_lower.triangularView<Eigen::Lower>().solve(linv_d.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (w + w.transpose()),
                                                    Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin >= 0) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

// Solves the 3x3 KKT system
//   [ 0   A'  G' ] [du]   [p]
//   [ A   0   0  ] [dy] = [q]      with G = [-I 0], cone scaled by W'W,
//   [ G   0 -W'W ] [dz]   [r]
// via the bordered Schur complement over (dy, du_free).
class KktSolver {
 public:
  KktSolver(Work& w, bool identity_scaling) : w_(w), identity_(identity_scaling) {
    const int m = w.m;
    const int nf = w.num_free;
    Eigen::MatrixXd ak_scaled(m, w.n_cone);
    if (identity_) {
      ak_scaled = w.A.leftCols(w.n_cone);
    } else {
      for (int b = 0; b < w.nb(); ++b) {
        const int k = w.layout.dims[b];
        const int off = w.layout.offsets[b];
        const int len = k * (k + 1) / 2;
        const Eigen::MatrixXd& t = w.scalings[b].t;
        for (int i = 0; i < m; ++i) {
          const Eigen::MatrixXd mi = svec_to_mat(w.A.row(i).segment(off, len), k);
          Eigen::VectorXd packed(len);
          mat_to_svec(t * mi * t, packed);
          ak_scaled.row(i).segment(off, len) = packed;
        }
      }
    }
    Eigen::MatrixXd big(m + nf, m + nf);
    const Eigen::MatrixXd schur = ak_scaled * w.A.leftCols(w.n_cone).transpose();
    const double delta = 1e-12 * (1.0 + schur.cwiseAbs().maxCoeff());
    big.topLeftCorner(m, m) = -schur;
    big.topLeftCorner(m, m).diagonal().array() -= delta;
    big.topRightCorner(m, nf) = w.A.rightCols(nf);
    big.bottomLeftCorner(nf, m) = w.A.rightCols(nf).transpose();
    big.bottomRightCorner(nf, nf).setZero();
    big.bottomRightCorner(nf, nf).diagonal().array() += delta;
    w.kkt = std::move(big);
    w.kkt_lu.compute(w.kkt);
  }

  void solve(const Eigen::VectorXd& p, const Eigen::VectorXd& q, const Eigen::VectorXd& r,
             Eigen::VectorXd& du, Eigen::VectorXd& dy, Eigen::VectorXd& dz) const {
    solve_once(p, q, r, du, dy, dz);
    // One round of iterative refinement against the unreduced equations.
    Eigen::VectorXd e_p(w_.n_total), e_q(w_.m), e_r(w_.n_cone);
    residual(p, q, r, du, dy, dz, e_p, e_q, e_r);
    Eigen::VectorXd cu, cy, cz;
    solve_once(e_p, e_q, e_r, cu, cy, cz);
    du += cu;
    dy += cy;
    dz += cz;
  }

 private:
  void residual(const Eigen::VectorXd& p, const Eigen::VectorXd& q, const Eigen::VectorXd& r,
                const Eigen::VectorXd& du, const Eigen::VectorXd& dy, const Eigen::VectorXd& dz,
                Eigen::VectorXd& e_p, Eigen::VectorXd& e_q, Eigen::VectorXd& e_r) const {
    Eigen::VectorXd aty = w_.A.transpose() * dy;
    e_p = p - aty;
    e_p.head(w_.n_cone) += dz;
    e_q = q - w_.A * du;
    const Eigen::VectorXd wtwdz = identity_ ? dz : w_.apply_wtw(dz);
    e_r = r + du.head(w_.n_cone) + wtwdz;
  }

  void solve_once(const Eigen::VectorXd& p, const Eigen::VectorXd& q, const Eigen::VectorXd& r,
                  Eigen::VectorXd& du, Eigen::VectorXd& dy, Eigen::VectorXd& dz) const {
    const Eigen::VectorXd p_cone = p.head(w_.n_cone);
    const Eigen::VectorXd wp = identity_ ? p_cone : w_.apply_wtw(p_cone);
    Eigen::VectorXd rhs(w_.m + w_.num_free);
    rhs.head(w_.m) = q + w_.A.leftCols(w_.n_cone) * (r - wp);
    rhs.tail(w_.num_free) = p.tail(w_.num_free);
    const Eigen::VectorXd sol = w_.kkt_lu.solve(rhs);
    dy = sol.head(w_.m);
    dz = w_.A.leftCols(w_.n_cone).transpose() * dy - p_cone;
    const Eigen::VectorXd wtwdz = identity_ ? dz : w_.apply_wtw(dz);
    du.resize(w_.n_total);
    du.head(w_.n_cone) = -r - wtwdz;
    du.tail(w_.num_free) = sol.tail(w_.num_free);
  }

  Work& w_;
  bool identity_;
};

// lambda o V = D  =>  V_ij = 2 D_ij / (lambda_i + lambda_j)
Eigen::MatrixXd solve_sym_product(const Eigen::VectorXd& lambda, const Eigen::MatrixXd& d) {
  const int k = static_cast<int>(lambda.size());
  Eigen::MatrixXd v(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) v(i, j) = 2.0 * d(i, j) / (lambda[i] + lambda[j]);
  }
  return v;
}

bool compute_scalings(Work& w) {
  w.scalings.resize(w.nb());
  for (int b = 0; b < w.nb(); ++b) {
    const int k = w.layout.dims[b];
    const int off = w.layout.offsets[b];
    const int len = k * (k + 1) / 2;
    const Eigen::MatrixXd sm = svec_to_mat(w.s.segment(off, len), k);
    const Eigen::MatrixXd zm = svec_to_mat(w.z.segment(off, len), k);
    Eigen::LLT<Eigen::MatrixXd> ls(sm);
    Eigen::LLT<Eigen::MatrixXd> lz(zm);
    if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
    const Eigen::MatrixXd lsm = ls.matrixL();
    const Eigen::MatrixXd lzm = lz.matrixL();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(lzm.transpose() * lsm,
                                          Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::VectorXd lambda = svd.singularValues();
    if (lambda.minCoeff() <= 0) return false;
    BlockScaling sc;
    const Eigen::VectorXd inv_sqrt = lambda.array().sqrt().inverse();
    sc.r = lsm * svd.matrixV() * inv_sqrt.asDiagonal();
    sc.rinv = lambda.array().sqrt().matrix().asDiagonal() * svd.matrixV().transpose() *
              lsm.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(k, k));
    sc.t = sc.r * sc.r.transpose();
    sc.lambda = lambda;
    sc.chol_s = lsm;
    sc.chol_z = lzm;
    w.scalings[b] = std::move(sc);
  }
  return true;
}

struct Direction {
  Eigen::VectorXd du, dy, dz, ds;
  double dtau = 0.0, dkappa = 0.0;
};

}  // namespace

SdpSolution InteriorPointSolver::solve(const SdpProblem& problem, const SolverOptions& options) const {
  problem.validate();
  SdpSolution result;

  const double feastol = options.feastol * options.tolerance_scale;
  const double reltol = options.reltol * options.tolerance_scale;
  const double abstol = options.abstol * options.tolerance_scale;

  Work w(problem.block_dims);
  w.num_free = problem.num_free;
  w.n_cone = w.layout.total;
  w.n_total = w.n_cone + w.num_free;
  const int nb = w.nb();
  for (int k : problem.block_dims) w.cone_degree += k;

  // Assemble dense data in svec coordinates. Public coefficients refer to
  // matrix entries; off-diagonal svec coordinates carry sqrt(2)*X_ij.
  const int n_entry = problem.num_entry_vars();
  auto to_internal = [&](int var, double coeff) -> std::pair<int, double> {
    if (var >= n_entry) return {var, coeff};
    // Locate the block and whether the entry is diagonal.
    int b = 0;
    int local = var;
    while (local >= problem.block_dims[b] * (problem.block_dims[b] + 1) / 2) {
      local -= problem.block_dims[b] * (problem.block_dims[b] + 1) / 2;
      ++b;
    }
    const int k = problem.block_dims[b];
    int i = 0;
    int rem = local;
    while (rem >= k - i) {
      rem -= k - i;
      ++i;
    }
    const int j = i + rem;
    return {var, i == j ? coeff : coeff / kSqrt2};
  };

  // Drop rows with no variables; a contradictory constant row is immediate
  // infeasibility.
  std::vector<int> kept_rows;
  for (std::size_t r = 0; r < problem.equalities.size(); ++r) {
    double max_abs = 0.0;
    for (const auto& t : problem.equalities[r].terms) max_abs = std::max(max_abs, std::abs(t.coeff));
    if (max_abs == 0.0) {
      if (std::abs(problem.equalities[r].rhs) > 1e-9) {
        result.status = SdpStatus::kInfeasible;
        result.message = "constant equality row with nonzero right-hand side";
        return result;
      }
      continue;
    }
    kept_rows.push_back(static_cast<int>(r));
  }

  w.m = static_cast<int>(kept_rows.size());
  w.A = Eigen::MatrixXd::Zero(w.m, w.n_total);
  w.b = Eigen::VectorXd::Zero(w.m);
  w.row_scale = Eigen::VectorXd::Ones(w.m);
  for (int r = 0; r < w.m; ++r) {
    const SdpRow& row = problem.equalities[kept_rows[r]];
    double max_abs = 0.0;
    for (const auto& t : row.terms) max_abs = std::max(max_abs, std::abs(t.coeff));
    const double scale = 1.0 / max_abs;
    w.row_scale[r] = scale;
    for (const auto& t : row.terms) {
      const auto [var, coeff] = to_internal(t.var, t.coeff);
      w.A(r, var) += scale * coeff;
    }
    w.b[r] = scale * row.rhs;
  }

  w.c = Eigen::VectorXd::Zero(w.n_total);
  const double obj_sign = problem.maximize ? -1.0 : 1.0;
  for (const auto& t : problem.objective) {
    const auto [var, coeff] = to_internal(t.var, t.coeff);
    w.c[var] += obj_sign * coeff;
  }

  // Duals are reported for the equivalent minimization problem: with
  // c_min = (maximize ? -c : c), the returned y and PSD blocks S satisfy
  // c_min - A'y = S on the entry variables and c_min - A'y = 0 on free ones.
  auto finalize_point = [&](SdpStatus status) {
    result.status = status;
    result.blocks.clear();
    for (int b = 0; b < nb; ++b) {
      const int k = w.layout.dims[b];
      const int len = k * (k + 1) / 2;
      result.blocks.push_back(svec_to_mat(w.u.segment(w.layout.offsets[b], len) / w.tau, k));
    }
    result.free_values = w.u.tail(w.num_free) / w.tau;
    result.dual_y = Eigen::VectorXd::Zero(w.m);
    for (int r = 0; r < w.m; ++r) result.dual_y[r] = -w.row_scale[r] * w.y[r] / w.tau;
    result.dual_blocks.clear();
    for (int b = 0; b < nb; ++b) {
      const int k = w.layout.dims[b];
      const int len = k * (k + 1) / 2;
      result.dual_blocks.push_back(svec_to_mat(w.z.segment(w.layout.offsets[b], len) / w.tau, k));
    }
    const double pcost = w.c.dot(w.u) / w.tau;
    result.objective = obj_sign * pcost + problem.objective_constant;
  };

  // Degenerate case: no variables at all.
  if (w.n_total == 0) {
    w.u.resize(0);
    w.y = Eigen::VectorXd::Zero(w.m);
    result.status = SdpStatus::kOptimal;
    result.objective = problem.objective_constant;
    result.message = "empty problem";
    return result;
  }

  // Initial point: least-norm primal/dual from the identity-scaled KKT system.
  w.u = Eigen::VectorXd::Zero(w.n_total);
  w.y = Eigen::VectorXd::Zero(w.m);
  w.z = Eigen::VectorXd::Zero(w.n_cone);
  w.s = Eigen::VectorXd::Zero(w.n_cone);
  {
    KktSolver init_kkt(w, /*identity_scaling=*/true);
    Eigen::VectorXd du, dy, dz;
    // Primal: minimize ||s|| subject to A u = b with s = u_cone.
    init_kkt.solve(Eigen::VectorXd::Zero(w.n_total), w.b, Eigen::VectorXd::Zero(w.n_cone), du, dy,
                   dz);
    w.u = du;
    Eigen::VectorXd s0 = w.u.head(w.n_cone);
    // Dual: minimize ||z|| subject to A'y - [z;0] + c = 0.
    init_kkt.solve(-w.c, Eigen::VectorXd::Zero(w.m), Eigen::VectorXd::Zero(w.n_cone), du, dy, dz);
    w.y = dy;
    Eigen::VectorXd z0 = dz;

    auto shift_into_cone = [&](Eigen::VectorXd& v) {
      for (int b = 0; b < nb; ++b) {
        const int k = w.layout.dims[b];
        const int off = w.layout.offsets[b];
        const int len = k * (k + 1) / 2;
        const Eigen::MatrixXd m0 = svec_to_mat(v.segment(off, len), k);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m0, Eigen::EigenvaluesOnly);
        const double lmin = es.eigenvalues().minCoeff();
        const double norm = std::max(1.0, v.segment(off, len).norm());
        if (lmin < 1e-8 * norm) {
          Eigen::MatrixXd shifted = m0;
          shifted.diagonal().array() += (1.0 - lmin);
          mat_to_svec(shifted, v.segment(off, len));
        }
      }
    };
    shift_into_cone(s0);
    shift_into_cone(z0);
    w.s = s0;
    w.z = z0;
  }
  w.tau = 1.0;
  w.kappa = 1.0;

  const double resx0 = std::max(1.0, w.c.norm());
  const double resy0 = std::max(1.0, w.b.norm());
  const double resz0 = 1.0;

  const char* failure_message = nullptr;
  double last_pres = std::numeric_limits<double>::infinity();
  double last_dres = std::numeric_limits<double>::infinity();
  double last_gap = std::numeric_limits<double>::infinity();
  double last_relgap = std::numeric_limits<double>::infinity();
  std::vector<double> merit_history;
  int iter = 0;
  for (; iter <= options.max_iterations; ++iter) {
    // Residuals of the self-dual system.
    Eigen::VectorXd hresx = w.A.transpose() * w.y;  // A'y - [z;0]
    hresx.head(w.n_cone) -= w.z;
    const Eigen::VectorXd rx = hresx + w.c * w.tau;
    const Eigen::VectorXd hresy = w.A * w.u;
    const Eigen::VectorXd ry = w.b * w.tau - hresy;
    const Eigen::VectorXd hresz = w.s - w.u.head(w.n_cone);
    const Eigen::VectorXd rz = hresz;  // h = 0
    const double cx = w.c.dot(w.u);
    const double by = w.b.dot(w.y);
    const double rtau = -cx - by - w.kappa;

    const double pcost = cx / w.tau;
    const double dcost = -by / w.tau;
    const double gap = w.s.dot(w.z) / (w.tau * w.tau);
    double relgap = std::numeric_limits<double>::infinity();
    if (pcost < 0) {
      relgap = gap / -pcost;
    } else if (dcost > 0) {
      relgap = gap / dcost;
    }
    const double pres = std::max(ry.norm() / resy0, rz.norm() / resz0) / w.tau;
    const double dres = rx.norm() / resx0 / w.tau;
    // pcost - dcost = (s'z - rz'z + u'rx + y'ry)/tau^2, so infeasible iterates
    // may undershoot weak duality by at most the residual cross terms.
    const double wd_slack =
        (std::abs(rz.dot(w.z)) + std::abs(w.u.dot(rx)) + std::abs(w.y.dot(ry))) /
        (w.tau * w.tau);

    result.log.push_back(SdpIterationInfo{obj_sign * pcost, obj_sign * dcost, gap, pres, dres,
                                          w.tau, w.kappa, wd_slack});

    if (options.verbose) {
      std::fprintf(stderr, "iter %3d  pcost % .6e  dcost % .6e  gap %.2e  pres %.2e  dres %.2e\n",
                   iter, pcost, dcost, gap, pres, dres);
    }

    last_pres = pres;
    last_dres = dres;
    last_gap = gap;
    last_relgap = relgap;

    if (pres <= feastol && dres <= feastol && (gap <= abstol || relgap <= reltol)) {
      finalize_point(SdpStatus::kOptimal);
      result.iterations = iter;
      result.primal_residual = pres;
      result.dual_residual = dres;
      result.duality_gap = gap;
      return result;
    }

    // Primal infeasibility: A'y - [z;0] ~ 0 with b'y < 0 (a Farkas dual).
    if (by < 0) {
      const double pinfres = hresx.norm() / resx0 / (-by);
      if (pinfres <= feastol) {
        result.status = SdpStatus::kInfeasible;
        result.iterations = iter;
        // Farkas certificate in the original row scaling (objective-free).
        result.infeasibility_certificate = Eigen::VectorXd::Zero(w.m);
        for (int r = 0; r < w.m; ++r) {
          result.infeasibility_certificate[r] = w.row_scale[r] * w.y[r] / by;
        }
        result.message = "primal infeasibility certificate found";
        return result;
      }
    }

    // Dual infeasibility: A u ~ 0, u_cone ~ s with c'u < 0 (improving ray).
    if (cx < 0) {
      const double dinfres =
          std::max(hresy.norm() / resy0, hresz.norm() / resz0) / (-cx);
      if (dinfres <= feastol) {
        result.status = SdpStatus::kUnbounded;
        result.iterations = iter;
        const Eigen::VectorXd ray = w.u / (-cx);
        result.ray_blocks.clear();
        for (int b = 0; b < nb; ++b) {
          const int k = w.layout.dims[b];
          const int len = k * (k + 1) / 2;
          result.ray_blocks.push_back(svec_to_mat(ray.segment(w.layout.offsets[b], len), k));
        }
        result.ray_free = ray.tail(w.num_free);
        result.message = "improving ray found; objective unbounded";
        return result;
      }
    }

    if (iter == options.max_iterations) break;

    // Stall detection: no meaningful progress on any convergence measure.
    merit_history.push_back(std::max({pres, dres, std::min(gap, relgap)}));
    if (static_cast<int>(merit_history.size()) > options.stall_iterations) {
      const double before =
          merit_history[merit_history.size() - 1 - options.stall_iterations];
      if (merit_history.back() > 0.5 * before) {
        failure_message = "progress stalled";
        break;
      }
    }

    // Nesterov-Todd scalings for the current iterate.
    if (!compute_scalings(w)) {
      failure_message = "iterate left the cone interior";
      break;
    }
    const double mu = (w.s.dot(w.z) + w.tau * w.kappa) / (w.cone_degree + 1.0);
    if (!std::isfinite(mu) || mu <= 0) {
      failure_message = "non-finite complementarity measure";
      break;
    }

    KktSolver kkt(w, /*identity_scaling=*/false);

    // Solve once with the objective right-hand side (-c, b, 0).
    Eigen::VectorXd u1, y1, z1;
    kkt.solve(-w.c, w.b, Eigen::VectorXd::Zero(w.n_cone), u1, y1, z1);
    const double denom_base = w.kappa / w.tau - (w.c.dot(u1) + w.b.dot(y1));
    if (!std::isfinite(denom_base) || std::abs(denom_base) < 1e-300) {
      failure_message = "singular reduced system";
      break;
    }

    // Scaled complementarity directions shared by predictor and corrector.
    auto make_direction = [&](double sigma, const Direction* affine) -> Direction {
      Direction dir;
      const double eta = 1.0 - sigma;
      // Complementarity right-hand side per block, in scaled space.
      Eigen::VectorXd wv(w.n_cone);  // W'V packed
      for (int b = 0; b < nb; ++b) {
        const int k = w.layout.dims[b];
        const int off = w.layout.offsets[b];
        const int len = k * (k + 1) / 2;
        const BlockScaling& sc = w.scalings[b];
        Eigen::MatrixXd dmat = Eigen::MatrixXd::Zero(k, k);
        dmat.diagonal() = -sc.lambda.array().square();
        dmat.diagonal().array() += sigma * mu;
        if (affine) {
          const Eigen::MatrixXd dsa = svec_to_mat(affine->ds.segment(off, len), k);
          const Eigen::MatrixXd dza = svec_to_mat(affine->dz.segment(off, len), k);
          const Eigen::MatrixXd ds_scaled = sc.rinv * dsa * sc.rinv.transpose();
          const Eigen::MatrixXd dz_scaled = sc.r.transpose() * dza * sc.r;
          dmat -= 0.5 * (ds_scaled * dz_scaled + dz_scaled * ds_scaled);
        }
        const Eigen::MatrixXd v = solve_sym_product(sc.lambda, dmat);
        mat_to_svec(sc.r * v * sc.r.transpose(), wv.segment(off, len));
      }
      double dctau = -w.tau * w.kappa + sigma * mu;
      if (affine) dctau -= affine->dtau * affine->dkappa;

      const Eigen::VectorXd p0 = -eta * rx;
      const Eigen::VectorXd q0 = eta * ry;
      const Eigen::VectorXd r0 = -eta * rz - wv;
      Eigen::VectorXd u2, y2, z2;
      kkt.solve(p0, q0, r0, u2, y2, z2);

      const double rhs4 = dctau / w.tau - eta * rtau;
      dir.dtau = (rhs4 + w.c.dot(u2) + w.b.dot(y2)) / denom_base;
      dir.du = u2 + dir.dtau * u1;
      dir.dy = y2 + dir.dtau * y1;
      dir.dz = z2 + dir.dtau * z1;
      dir.ds = wv - w.apply_wtw(dir.dz);
      dir.dkappa = (dctau - w.kappa * dir.dtau) / w.tau;
      return dir;
    };

    auto max_step = [&](const Direction& dir) -> double {
      double alpha = std::numeric_limits<double>::infinity();
      for (int b = 0; b < nb; ++b) {
        const int k = w.layout.dims[b];
        const int off = w.layout.offsets[b];
        const int len = k * (k + 1) / 2;
        alpha = std::min(alpha, max_step_to_boundary(w.scalings[b].chol_s,
                                                     svec_to_mat(dir.ds.segment(off, len), k)));
        alpha = std::min(alpha, max_step_to_boundary(w.scalings[b].chol_z,
                                                     svec_to_mat(dir.dz.segment(off, len), k)));
      }
      if (dir.dtau < 0) alpha = std::min(alpha, -w.tau / dir.dtau);
      if (dir.dkappa < 0) alpha = std::min(alpha, -w.kappa / dir.dkappa);
      return alpha;
    };

    const Direction affine = make_direction(0.0, nullptr);
    const double alpha_aff = std::min(1.0, max_step(affine));
    const double sigma = std::pow(1.0 - alpha_aff, 3);

    const Direction combined = make_direction(sigma, &affine);
    const double step = std::min(1.0, 0.99 * max_step(combined));
    if (!std::isfinite(step) || step < 1e-13) {
      failure_message = "step size collapsed";
      break;
    }

    w.u += step * combined.du;
    w.y += step * combined.dy;
    w.z += step * combined.dz;
    w.s += step * combined.ds;
    w.tau += step * combined.dtau;
    w.kappa += step * combined.dkappa;
    if (w.tau <= 0 || w.kappa <= 0) {
      failure_message = "tau or kappa left the positive orthant";
      break;
    }
  }

  // Weakly feasible geometry floors the residuals above the strict
  // tolerances; accept the iterate at relaxed accuracy when it is this close.
  const double inexact_feas = options.inexact_feastol * options.tolerance_scale;
  const double inexact_gap = options.inexact_gaptol * options.tolerance_scale;
  if (last_pres <= inexact_feas && last_dres <= inexact_feas &&
      (last_gap <= inexact_gap || last_relgap <= inexact_gap)) {
    finalize_point(SdpStatus::kOptimal);
    result.iterations = iter;
    result.primal_residual = last_pres;
    result.dual_residual = last_dres;
    result.duality_gap = last_gap;
    result.message = "reduced-accuracy solution";
    return result;
  }

  finalize_point(failure_message ? SdpStatus::kNumericalFailure : SdpStatus::kMaxIterations);
  result.iterations = iter;
  if (!result.log.empty()) {
    result.primal_residual = result.log.back().primal_res;
    result.dual_residual = result.log.back().dual_res;
    result.duality_gap = result.log.back().gap;
  }
  result.message = failure_message ? failure_message : "iteration limit reached";
  return result;
}

SdpSolution solve_sdp(const SdpProblem& problem, const SolverOptions& options) {
  return InteriorPointSolver().solve(problem, options);
}

// ---------------------------------------------------------------------------
// Debug dump format
// ---------------------------------------------------------------------------

std::string write_sdp(const SdpProblem& problem) {
  std::ostringstream out;
  out << "sbc-sdp 1\n";
  out << "maximize " << (problem.maximize ? 1 : 0) << "\n";
  out << "constant " << format_double(problem.objective_constant) << "\n";
  out << "blocks";
  for (int k : problem.block_dims) out << " " << k;
  out << "\n";
  out << "free " << problem.num_free << "\n";
  out << "objective " << problem.objective.size() << "\n";
  for (const auto& t : problem.objective) {
    out << t.var << " " << format_double(t.coeff) << "\n";
  }
  std::size_t triplets = 0;
  for (const auto& row : problem.equalities) triplets += row.terms.size();
  out << "equalities " << problem.equalities.size() << " " << triplets << "\n";
  for (std::size_t r = 0; r < problem.equalities.size(); ++r) {
    for (const auto& t : problem.equalities[r].terms) {
      out << r << " " << t.var << " " << format_double(t.coeff) << "\n";
    }
  }
  out << "rhs\n";
  for (const auto& row : problem.equalities) out << format_double(row.rhs) << "\n";
  out << "end\n";
  return out.str();
}

SdpProblem read_sdp(std::istream& in) {
  SdpProblem problem;
  std::string token;
  int version = 0;
  in >> token >> version;
  if (token != "sbc-sdp" || version != 1) throw std::runtime_error("unrecognized SDP dump header");
  int maximize = 0;
  in >> token >> maximize;
  if (token != "maximize") throw std::runtime_error("expected 'maximize'");
  problem.maximize = maximize != 0;
  in >> token >> problem.objective_constant;
  if (token != "constant") throw std::runtime_error("expected 'constant'");
  in >> token;
  if (token != "blocks") throw std::runtime_error("expected 'blocks'");
  // Block dims run until the 'free' keyword.
  while (in >> token && token != "free") problem.block_dims.push_back(std::stoi(token));
  if (token != "free") throw std::runtime_error("expected 'free'");
  in >> problem.num_free;
  std::size_t n_obj = 0;
  in >> token >> n_obj;
  if (token != "objective") throw std::runtime_error("expected 'objective'");
  problem.objective.resize(n_obj);
  for (auto& t : problem.objective) in >> t.var >> t.coeff;
  std::size_t n_rows = 0, n_triplets = 0;
  in >> token >> n_rows >> n_triplets;
  if (token != "equalities") throw std::runtime_error("expected 'equalities'");
  problem.equalities.resize(n_rows);
  for (std::size_t t = 0; t < n_triplets; ++t) {
    std::size_t row = 0;
    SdpTerm term;
    in >> row >> term.var >> term.coeff;
    if (row >= n_rows) throw std::runtime_error("triplet row out of range");
    problem.equalities[row].terms.push_back(term);
  }
  in >> token;
  if (token != "rhs") throw std::runtime_error("expected 'rhs'");
  for (auto& row : problem.equalities) in >> row.rhs;
  in >> token;
  if (token != "end") throw std::runtime_error("expected 'end'");
  problem.validate();
  return problem;
}

SdpProblem read_sdp_string(const std::string& text) {
  std::istringstream in(text);
  return read_sdp(in);
}

}  // namespace sbc
