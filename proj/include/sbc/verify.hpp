#ifndef SBC_VERIFY_HPP
#define SBC_VERIFY_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sbc/polynomial.hpp"

namespace sbc {

/// Axis-aligned sampling domain.
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  int dimension() const { return static_cast<int>(lo.size()); }
  double volume() const;
  Eigen::VectorXd map_unit(const Eigen::VectorXd& unit) const;
  void validate() const;
};

/// Gray-code Sobol sequence with Joe-Kuo direction numbers, dimension <= 8.
class SobolSequence {
 public:
  explicit SobolSequence(int dimension);
  Eigen::VectorXd next();

 private:
  int dimension_;
  std::uint32_t count_ = 0;
  std::vector<std::array<std::uint32_t, 32>> directions_;
  std::vector<std::uint32_t> state_;
};

struct CheckResult {
  std::string name;
  long samples = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  Eigen::VectorXd worst_point;
  double threshold = 0.0;
  bool pass = false;
};

struct TrajectorySummary {
  Eigen::VectorXd initial_state;
  bool invariance_ok = false;
  bool safety_ok = true;
  bool converged = false;
  double final_norm = 0.0;
  double min_h = 0.0;
  double min_unsafe_margin = std::numeric_limits<double>::infinity();
};

struct VolumeEstimate {
  double volume = 0.0;
  double standard_error = 0.0;
  long hits = 0;
  long samples = 0;
};

struct VerificationReport {
  std::vector<CheckResult> checks;
  std::vector<TrajectorySummary> trajectories;
  std::optional<VolumeEstimate> region_volume;
  std::optional<VolumeEstimate> sublevel_volume;

  bool all_passed() const;
};

struct VerifyOptions {
  long n_samples = 100000;          // in-region inequality samples
  long n_volume_samples = 1000000;  // Monte Carlo volume samples
  int n_trajectories = 100;
  double margin_threshold = -1e-6;
  double origin_exclusion_radius = 1e-3;
  double trajectory_tolerance = 1e-4;
  double convergence_norm = 1e-2;
  double dt = 1e-2;
  double horizon = 0.0;  // 0: 20 / |least stable closed-loop eigenvalue|
  std::uint64_t seed = 20240901;
};

/// Sampling check of the certificate conditions over {h >= 0} inside the box:
/// Lyapunov decrease away from the origin, barrier derivative bound, and
/// containment in the complement of every unsafe region. The controller u
/// (when non-empty) is substituted into the dynamics symbolically.
/// Throws std::domain_error when {h >= 0} touches the box boundary.
VerificationReport check_barrier_conditions(const Polynomial& h, const PolyVectorField& field,
                                            const std::vector<Polynomial>& u, const Polynomial& V,
                                            double gamma, const std::vector<Polynomial>& unsafe,
                                            const Box& domain, const VerifyOptions& opts = {});

/// Minimum-norm control meeting the CLF row (dV/dx)(f + g u) <= 0 and the
/// CBF row (dh/dx)(f + g u) >= -gamma h at the state x, solved by active-set
/// enumeration of the two-constraint QP with the relaxation fixed to zero.
/// Throws std::runtime_error when the QP is infeasible at x.
Eigen::VectorXd qp_controller(const Eigen::VectorXd& x, const Polynomial& V, const Polynomial& h,
                              const PolyVectorField& field, double gamma);

struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> inputs;
};

using Controller = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Fixed-step RK4; the controller, when given, is evaluated at every stage
/// state. Throws std::runtime_error when the state norm passes 1e6.
Trajectory simulate(const PolyVectorField& field, const Controller& controller,
                    const Eigen::VectorXd& x0, double dt, double horizon);

/// Monte Carlo volume of {h >= 0} inside the box with binomial standard
/// error; deterministic for a fixed seed. Throws std::domain_error when the
/// region touches the box boundary.
VolumeEstimate estimate_volume(const Polynomial& h, const Box& box, long n_samples,
                               std::uint64_t seed);

/// Closed-form volume of {h >= 0} for quadratic h with negative definite
/// quadratic part; 0 when the region is empty.
double ellipsoid_volume(const Polynomial& h);

/// Jacobian of the field at the origin (closed loop when u is non-empty).
Eigen::MatrixXd linearization_at_origin(const PolyVectorField& field,
                                        const std::vector<Polynomial>& u);

/// 20 / |least-stable eigenvalue| of the linearization; throws when the
/// linearization is not Hurwitz.
double default_horizon(const PolyVectorField& field, const std::vector<Polynomial>& u);

/// Samples initial states uniformly from {h >= 0} inside the box and
/// integrates each one, recording forward invariance of {h >= 0}, safety
/// margins, and convergence to the origin.
std::vector<TrajectorySummary> run_trajectory_suite(const Polynomial& h,
                                                    const PolyVectorField& field,
                                                    const std::vector<Polynomial>& u,
                                                    const std::vector<Polynomial>& unsafe,
                                                    const Box& box, const VerifyOptions& opts);

}  // namespace sbc

#endif  // SBC_VERIFY_HPP
