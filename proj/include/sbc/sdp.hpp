#ifndef SBC_SDP_HPP
#define SBC_SDP_HPP

#include <iosfwd>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace sbc {

/// One coefficient of a sparse linear expression over the decision variables.
/// Variables are indexed globally: the upper-triangle entries of each PSD
/// block (row-major within the triangle, blocks in order), then the free
/// scalars. A coefficient on an off-diagonal entry (i,j) multiplies the
/// matrix entry X_ij once (the symmetric partner is implied).
struct SdpTerm {
  int var = 0;
  double coeff = 0.0;
};

struct SdpRow {
  std::vector<SdpTerm> terms;
  double rhs = 0.0;
};

/// Block-diagonal semidefinite program in standard form:
///   optimize  sum(objective)  subject to  equalities,  X_b PSD for all blocks.
struct SdpProblem {
  std::vector<int> block_dims;
  int num_free = 0;
  std::vector<SdpRow> equalities;
  std::vector<SdpTerm> objective;
  double objective_constant = 0.0;
  bool maximize = false;

  int num_entry_vars() const;
  int num_vars() const { return num_entry_vars() + num_free; }
  /// Global index of block entry (i, j) with i <= j.
  int entry_index(int block, int i, int j) const;
  int free_index(int k) const { return num_entry_vars() + k; }
  void validate() const;
};

enum class SdpStatus {
  kOptimal,
  kInfeasible,
  kUnbounded,
  kMaxIterations,
  kNumericalFailure,
};

std::string to_string(SdpStatus status);

struct SdpIterationInfo {
  double primal_obj = 0.0;
  double dual_obj = 0.0;
  double gap = 0.0;
  double primal_res = 0.0;
  double dual_res = 0.0;
  double tau = 0.0;
  double kappa = 0.0;
  /// Exact bound on how far weak duality may be violated at an iterate that
  /// is not yet feasible: primal_obj - dual_obj >= -weak_duality_slack always
  /// (minimization sense), with the slack vanishing as the residuals do.
  double weak_duality_slack = 0.0;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::kNumericalFailure;
  std::vector<Eigen::MatrixXd> blocks;
  Eigen::VectorXd free_values;
  /// Multipliers of the equality rows for the dual of the equivalent
  /// minimization problem: with c_min the (sign-adjusted) objective,
  /// c_min - A'y equals the PSD dual_blocks on entry variables and zero
  /// on free ones.
  Eigen::VectorXd dual_y;
  std::vector<Eigen::MatrixXd> dual_blocks;
  /// Objective value in the problem's own sense, constant included.
  double objective = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double primal_residual = std::numeric_limits<double>::infinity();
  double dual_residual = std::numeric_limits<double>::infinity();
  double duality_gap = std::numeric_limits<double>::infinity();
  std::vector<SdpIterationInfo> log;

  /// Farkas certificate when infeasible: y with b'y = 1 and A'y
  /// negative semidefinite on every block, zero on free columns.
  Eigen::VectorXd infeasibility_certificate;
  /// Improving ray when unbounded: A ray = 0, ray PSD blockwise,
  /// objective strictly improving along it.
  std::vector<Eigen::MatrixXd> ray_blocks;
  Eigen::VectorXd ray_free;

  std::string message;

  bool usable() const { return status == SdpStatus::kOptimal; }
};

struct SolverOptions {
  double feastol = 1e-8;
  double reltol = 1e-8;
  double abstol = 1e-9;
  int max_iterations = 200;
  bool verbose = false;

  /// Multiplies tolerances; hook for environment overrides.
  double tolerance_scale = 1.0;

  /// Weakly feasible problems (boundary-only Gram faces) floor the primal
  /// residual near sqrt(machine eps); iterates meeting these relaxed
  /// tolerances at termination are still classified optimal.
  double inexact_feastol = 1e-6;
  double inexact_gaptol = 1e-6;
  /// Stop early when the convergence merit has not improved this long.
  int stall_iterations = 20;
};

/// Contract for pluggable conic back ends.
class SdpSolver {
 public:
  virtual ~SdpSolver() = default;
  virtual SdpSolution solve(const SdpProblem& problem, const SolverOptions& options) const = 0;
};

/// Primal-dual interior-point method with Nesterov-Todd scaling, Mehrotra
/// predictor-corrector, and a homogeneous self-dual embedding for clean
/// infeasible/unbounded classification. Dense linear algebra throughout.
class InteriorPointSolver final : public SdpSolver {
 public:
  SdpSolution solve(const SdpProblem& problem, const SolverOptions& options) const override;
};

SdpSolution solve_sdp(const SdpProblem& problem, const SolverOptions& options = {});

/// Sparse text round-trip of a problem (block sizes, equality triplets,
/// objective vector); used for cross-checking against external solvers.
std::string write_sdp(const SdpProblem& problem);
SdpProblem read_sdp(std::istream& in);
SdpProblem read_sdp_string(const std::string& text);

}  // namespace sbc

#endif  // SBC_SDP_HPP
