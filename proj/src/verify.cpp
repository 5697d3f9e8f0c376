#include "sbc/verify.hpp"

#include <array>
#include <cmath>
#include <random>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace sbc {

double Box::volume() const {
  double v = 1.0;
  for (int i = 0; i < dimension(); ++i) v *= hi[i] - lo[i];
  return v;
}

Eigen::VectorXd Box::map_unit(const Eigen::VectorXd& unit) const {
  return lo.array() + (hi - lo).array() * unit.array();
}

void Box::validate() const {
  if (lo.size() != hi.size() || lo.size() == 0) throw std::invalid_argument("malformed box");
  for (int i = 0; i < dimension(); ++i) {
    if (!(lo[i] < hi[i])) throw std::invalid_argument("box bounds must satisfy lo < hi");
  }
}

namespace {

// Joe-Kuo direction numbers (new-joe-kuo-6) for dimensions 2..8; the first
// dimension is the van der Corput sequence.
struct JoeKuoEntry {
  int s;
  std::uint32_t a;
  std::array<std::uint32_t, 5> m;
};

constexpr JoeKuoEntry kJoeKuo[] = {
    {1, 0, {1, 0, 0, 0, 0}},   // d = 2
    {2, 1, {1, 3, 0, 0, 0}},   // d = 3
    {3, 1, {1, 3, 1, 0, 0}},   // d = 4
    {3, 2, {1, 1, 1, 0, 0}},   // d = 5
    {4, 1, {1, 1, 3, 3, 0}},   // d = 6
    {4, 4, {1, 3, 5, 13, 0}},  // d = 7
    {5, 2, {1, 1, 5, 5, 17}},  // d = 8
};

int count_trailing_ones(std::uint32_t n) {
  int c = 0;
  while (n & 1u) {
    ++c;
    n >>= 1;
  }
  return c;
}

}  // namespace

SobolSequence::SobolSequence(int dimension) : dimension_(dimension) {
  if (dimension < 1 || dimension > 8) {
    throw std::invalid_argument("Sobol sequence supports dimensions 1..8");
  }
  directions_.resize(dimension_);
  state_.assign(dimension_, 0);
  // First dimension: v_k = 2^(31-k).
  for (int k = 0; k < 32; ++k) directions_[0][k] = 1u << (31 - k);
  for (int d = 1; d < dimension_; ++d) {
    const JoeKuoEntry& e = kJoeKuo[d - 1];
    auto& v = directions_[d];
    for (int k = 0; k < e.s; ++k) v[k] = e.m[k] << (31 - k);
    for (int k = e.s; k < 32; ++k) {
      v[k] = v[k - e.s] ^ (v[k - e.s] >> e.s);
      for (int i = 1; i < e.s; ++i) {
        if ((e.a >> (e.s - 1 - i)) & 1u) v[k] ^= v[k - i];
      }
    }
  }
}

Eigen::VectorXd SobolSequence::next() {
  const int bit = count_trailing_ones(count_);
  ++count_;
  Eigen::VectorXd point(dimension_);
  for (int d = 0; d < dimension_; ++d) {
    state_[d] ^= directions_[d][bit];
    point[d] = static_cast<double>(state_[d]) * 0x1p-32;
  }
  return point;
}

bool VerificationReport::all_passed() const {
  for (const auto& c : checks) {
    if (!c.pass) return false;
  }
  for (const auto& t : trajectories) {
    if (!t.invariance_ok || !t.safety_ok || !t.converged) return false;
  }
  return true;
}

namespace {

// {h >= 0} must stay clear of the sampling box boundary; otherwise margins
// computed inside the box say nothing about the full region.
void require_region_inside(const Polynomial& h, const Box& box) {
  const int n = box.dimension();
  SobolSequence faces(std::max(1, n - 1));
  const long per_face = 512;
  for (int axis = 0; axis < n; ++axis) {
    for (int side = 0; side < 2; ++side) {
      for (long k = 0; k < per_face; ++k) {
        Eigen::VectorXd unit = n == 1 ? Eigen::VectorXd::Zero(0) : faces.next();
        Eigen::VectorXd z(n);
        int uj = 0;
        for (int j = 0; j < n; ++j) {
          if (j == axis) {
            z[j] = side == 0 ? box.lo[j] : box.hi[j];
          } else {
            z[j] = box.lo[j] + (box.hi[j] - box.lo[j]) * unit[uj++];
          }
        }
        if (h.evaluate(z) >= 0) {
          throw std::domain_error("region {h >= 0} touches the sampling box boundary");
        }
      }
    }
  }
}

}  // namespace

VerificationReport check_barrier_conditions(const Polynomial& h, const PolyVectorField& field,
                                            const std::vector<Polynomial>& u, const Polynomial& V,
                                            double gamma, const std::vector<Polynomial>& unsafe,
                                            const Box& domain, const VerifyOptions& opts) {
  domain.validate();
  field.validate();
  if (domain.dimension() != h.dimension()) throw std::invalid_argument("box dimension mismatch");
  require_region_inside(h, domain);

  const std::vector<Polynomial> closed = u.empty() ? field.f : field.closed_loop(u);
  const Polynomial vdot = lie_derivative(V, closed);
  const Polynomial hdot = lie_derivative(h, closed);

  CheckResult lyap{"lyapunov-decrease", 0, std::numeric_limits<double>::infinity(),
                   Eigen::VectorXd(), opts.margin_threshold, false};
  CheckResult barrier{"barrier-derivative", 0, std::numeric_limits<double>::infinity(),
                      Eigen::VectorXd(), opts.margin_threshold, false};
  CheckResult containment{"containment", 0, std::numeric_limits<double>::infinity(),
                          Eigen::VectorXd(), opts.margin_threshold, false};

  SobolSequence sobol(domain.dimension());
  const long max_draws = 64 * opts.n_samples;
  long in_region = 0;
  for (long draw = 0; draw < max_draws && in_region < opts.n_samples; ++draw) {
    const Eigen::VectorXd z = domain.map_unit(sobol.next());
    const double hz = h.evaluate(z);
    if (hz < 0) continue;
    ++in_region;

    if (z.norm() > opts.origin_exclusion_radius) {
      const double margin = -vdot.evaluate(z);
      ++lyap.samples;
      if (margin < lyap.worst_margin) {
        lyap.worst_margin = margin;
        lyap.worst_point = z;
      }
    }
    {
      const double margin = hdot.evaluate(z) + gamma * hz;
      ++barrier.samples;
      if (margin < barrier.worst_margin) {
        barrier.worst_margin = margin;
        barrier.worst_point = z;
      }
    }
    if (!unsafe.empty()) {
      double qmin = std::numeric_limits<double>::infinity();
      for (const auto& q : unsafe) qmin = std::min(qmin, q.evaluate(z));
      ++containment.samples;
      if (qmin < containment.worst_margin) {
        containment.worst_margin = qmin;
        containment.worst_point = z;
      }
    }
  }
  if (in_region < opts.n_samples) {
    throw std::domain_error("sampling box too large: region hit rate below 1/64");
  }

  VerificationReport report;
  lyap.pass = lyap.worst_margin >= lyap.threshold;
  barrier.pass = barrier.worst_margin >= barrier.threshold;
  report.checks.push_back(std::move(lyap));
  report.checks.push_back(std::move(barrier));
  if (!unsafe.empty()) {
    containment.pass = containment.worst_margin >= containment.threshold;
    report.checks.push_back(std::move(containment));
  }
  return report;
}

Eigen::VectorXd qp_controller(const Eigen::VectorXd& x, const Polynomial& V, const Polynomial& h,
                              const PolyVectorField& field, double gamma) {
  field.validate();
  const int m = field.input_dimension();
  if (m == 0) throw std::invalid_argument("qp_controller needs a control-affine system");
  const int n = field.state_dimension();

  Eigen::VectorXd grad_v(n), grad_h(n), fx(n);
  for (int i = 0; i < n; ++i) {
    grad_v[i] = V.differentiate(i).evaluate(x);
    grad_h[i] = h.differentiate(i).evaluate(x);
    fx[i] = field.f[i].evaluate(x);
  }
  Eigen::MatrixXd gx(n, m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) gx(i, j) = field.g[i][j].evaluate(x);
  }

  // Rows a'u <= b: CLF descent and CBF decay.
  const Eigen::VectorXd a1 = gx.transpose() * grad_v;
  const double b1 = -grad_v.dot(fx);
  const Eigen::VectorXd a2 = -gx.transpose() * grad_h;
  const double b2 = grad_h.dot(fx) + gamma * h.evaluate(x);

  constexpr double kSlack = 1e-9;
  const auto feasible = [&](const Eigen::VectorXd& cand) {
    return a1.dot(cand) <= b1 + kSlack && a2.dot(cand) <= b2 + kSlack;
  };

  std::optional<Eigen::VectorXd> best;
  const auto consider = [&](const Eigen::VectorXd& cand) {
    if (!feasible(cand)) return;
    if (!best || cand.squaredNorm() < best->squaredNorm()) best = cand;
  };

  consider(Eigen::VectorXd::Zero(m));
  if (a1.squaredNorm() > 1e-14) consider(a1 * (b1 / a1.squaredNorm()));
  if (a2.squaredNorm() > 1e-14) consider(a2 * (b2 / a2.squaredNorm()));
  {
    Eigen::MatrixXd A(2, m);
    A.row(0) = a1.transpose();
    A.row(1) = a2.transpose();
    Eigen::Vector2d b(b1, b2);
    const Eigen::Matrix2d gram = A * A.transpose();
    if (std::abs(gram.determinant()) > 1e-12 * (1.0 + gram.cwiseAbs().maxCoeff())) {
      consider(A.transpose() * gram.inverse() * b);
    }
  }

  if (!best) {
    throw std::runtime_error("CLF/CBF quadratic program infeasible at the queried state "
                             "(certificate violation)");
  }
  return *best;
}

Trajectory simulate(const PolyVectorField& field, const Controller& controller,
                    const Eigen::VectorXd& x0, double dt, double horizon) {
  field.validate();
  if (!(dt > 0) || !(horizon >= dt)) throw std::invalid_argument("need dt > 0 and horizon >= dt");
  const long steps = static_cast<long>(std::llround(horizon / dt));

  const auto eval = [&](const Eigen::VectorXd& z) {
    if (controller) return field.evaluate(z, controller(z));
    return field.evaluate(z);
  };

  Trajectory traj;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  Eigen::VectorXd x = x0;
  traj.times.push_back(0.0);
  traj.states.push_back(x);
  if (controller) traj.inputs.push_back(controller(x));
  for (long k = 1; k <= steps; ++k) {
    const Eigen::VectorXd k1 = eval(x);
    const Eigen::VectorXd k2 = eval(x + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = eval(x + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = eval(x + dt * k3);
    x += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    if (x.norm() > 1e6) throw std::runtime_error("trajectory diverged (state norm above 1e6)");
    traj.times.push_back(k * dt);
    traj.states.push_back(x);
    if (controller) traj.inputs.push_back(controller(x));
  }
  return traj;
}

VolumeEstimate estimate_volume(const Polynomial& h, const Box& box, long n_samples,
                               std::uint64_t seed) {
  box.validate();
  if (box.dimension() != h.dimension()) throw std::invalid_argument("box dimension mismatch");
  require_region_inside(h, box);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  long hits = 0;
  Eigen::VectorXd z(box.dimension());
  for (long k = 0; k < n_samples; ++k) {
    for (int i = 0; i < box.dimension(); ++i) {
      z[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * u(rng);
    }
    if (h.evaluate(z) >= 0) ++hits;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(n_samples);
  VolumeEstimate est;
  est.hits = hits;
  est.samples = n_samples;
  est.volume = p * box.volume();
  est.standard_error = box.volume() * std::sqrt(p * (1.0 - p) / static_cast<double>(n_samples));
  return est;
}

double ellipsoid_volume(const Polynomial& h) {
  const int n = h.dimension();
  if (h.degree() > 2) throw std::invalid_argument("ellipsoid volume needs a quadratic polynomial");
  double c = 0.0;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [mono, coeff] : h.terms()) {
    const int deg = mono.degree();
    if (deg == 0) {
      c = coeff;
    } else if (deg == 1) {
      for (int i = 0; i < n; ++i) {
        if (mono.exponent(i) == 1) b[i] = coeff;
      }
    } else {
      int first = -1, second = -1;
      for (int i = 0; i < n; ++i) {
        if (mono.exponent(i) == 2) {
          first = i;
          second = i;
        } else if (mono.exponent(i) == 1) {
          if (first < 0) {
            first = i;
          } else {
            second = i;
          }
        }
      }
      if (first == second) {
        a(first, first) = coeff;
      } else {
        a(first, second) = coeff / 2.0;
        a(second, first) = coeff / 2.0;
      }
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-a);
  if (es.eigenvalues().minCoeff() <= 0) {
    throw std::invalid_argument("quadratic part is not negative definite; region is unbounded "
                                "or not an ellipsoid");
  }
  const Eigen::VectorXd center = -0.5 * a.ldlt().solve(b);
  const double peak = c + b.dot(center) + center.dot(a * center);
  if (peak <= 0) return 0.0;
  const double unit_ball = std::pow(M_PI, n / 2.0) / std::tgamma(n / 2.0 + 1.0);
  return unit_ball * std::pow(peak, n / 2.0) / std::sqrt(es.eigenvalues().prod());
}

Eigen::MatrixXd linearization_at_origin(const PolyVectorField& field,
                                        const std::vector<Polynomial>& u) {
  field.validate();
  const std::vector<Polynomial> closed = u.empty() ? field.f : field.closed_loop(u);
  const int n = field.state_dimension();
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd jac(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) jac(i, j) = closed[i].differentiate(j).evaluate(origin);
  }
  return jac;
}

double default_horizon(const PolyVectorField& field, const std::vector<Polynomial>& u) {
  const Eigen::MatrixXd jac = linearization_at_origin(field, u);
  const Eigen::EigenSolver<Eigen::MatrixXd> es(jac);
  const double max_real = es.eigenvalues().real().maxCoeff();
  if (max_real >= -1e-12) {
    throw std::runtime_error("closed-loop linearization is not Hurwitz; specify a horizon");
  }
  return 20.0 / -max_real;
}

std::vector<TrajectorySummary> run_trajectory_suite(const Polynomial& h,
                                                    const PolyVectorField& field,
                                                    const std::vector<Polynomial>& u,
                                                    const std::vector<Polynomial>& unsafe,
                                                    const Box& box, const VerifyOptions& opts) {
  box.validate();
  const std::vector<Polynomial> closed = u.empty() ? field.f : field.closed_loop(u);
  PolyVectorField closed_field;
  closed_field.f = closed;
  const double horizon = opts.horizon > 0 ? opts.horizon : default_horizon(field, u);

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<TrajectorySummary> summaries;
  const int n = box.dimension();
  long guard = 0;
  while (static_cast<int>(summaries.size()) < opts.n_trajectories) {
    if (++guard > 100000L * opts.n_trajectories) {
      throw std::runtime_error("rejection sampling of {h >= 0} failed; box too large");
    }
    Eigen::VectorXd x0(n);
    for (int i = 0; i < n; ++i) x0[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * unif(rng);
    if (h.evaluate(x0) < 0) continue;

    const Trajectory traj = simulate(closed_field, nullptr, x0, opts.dt, horizon);
    TrajectorySummary s;
    s.initial_state = x0;
    s.min_h = std::numeric_limits<double>::infinity();
    for (const auto& state : traj.states) {
      s.min_h = std::min(s.min_h, h.evaluate(state));
      for (const auto& q : unsafe) {
        s.min_unsafe_margin = std::min(s.min_unsafe_margin, q.evaluate(state));
      }
    }
    s.invariance_ok = s.min_h >= -opts.trajectory_tolerance;
    s.safety_ok = unsafe.empty() || s.min_unsafe_margin >= -opts.trajectory_tolerance;
    s.final_norm = traj.states.back().norm();
    s.converged = s.final_norm < opts.convergence_norm;
    summaries.push_back(std::move(s));
  }
  return summaries;
}

}  // namespace sbc
