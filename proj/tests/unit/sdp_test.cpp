#include "sbc/sdp.hpp"

#include <doctest.h>

#include <random>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

using namespace sbc;

namespace {

// Dense parameter-sweep oracle for 2x2 single-block problems with one
// equality and positive definite objective. The minimum of a linear
// functional over {X PSD : <A,X> = b} with b != 0 is attained at an
// extreme point of the slice, which has rank one, so sweeping
// X = r^2 (cos t, sin t)(cos t, sin t)' over the feasible angles is exact.
double brute_force_2x2(const SdpProblem& p) {
  REQUIRE(p.block_dims.size() == 1);
  REQUIRE(p.block_dims[0] == 2);
  REQUIRE(p.num_free == 0);
  REQUIRE(p.equalities.size() == 1);

  double w[3] = {0, 0, 0};  // coefficients on (a, b, c) = (X00, X01, X11)
  for (const auto& t : p.equalities[0].terms) w[t.var] += t.coeff;
  const double rhs = p.equalities[0].rhs;
  double obj[3] = {0, 0, 0};
  for (const auto& t : p.objective) obj[t.var] += t.coeff;

  if (std::abs(rhs) < 1e-12) return 0.0;  // X = 0 is optimal for PD objectives

  auto value_at = [&](double theta) -> double {
    const double ct = std::cos(theta), st = std::sin(theta);
    const double g = w[0] * ct * ct + w[1] * ct * st + w[2] * st * st;
    const double r2 = rhs / g;
    if (!(r2 > 0) || !std::isfinite(r2)) return std::numeric_limits<double>::infinity();
    return r2 * (obj[0] * ct * ct + obj[1] * ct * st + obj[2] * st * st);
  };

  const int grid = 2'000'000;
  double best = std::numeric_limits<double>::infinity();
  double best_theta = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double theta = M_PI * i / grid;
    const double val = value_at(theta);
    if (val < best) {
      best = val;
      best_theta = theta;
    }
  }
  // Local refinement around the best angle.
  double half = M_PI / grid;
  for (int level = 0; level < 40; ++level) {
    for (const double theta : {best_theta - half, best_theta + half}) {
      const double val = value_at(theta);
      if (val < best) {
        best = val;
        best_theta = theta;
      }
    }
    half *= 0.5;
  }
  return best;
}

}  // namespace

TEST_CASE("minimum trace with pinned corner") {
  SdpProblem p;
  p.block_dims = {2};
  p.objective = {{p.entry_index(0, 0, 0), 1.0}, {p.entry_index(0, 1, 1), 1.0}};
  p.equalities.push_back({{{p.entry_index(0, 0, 0), 1.0}}, 1.0});

  const auto sol = solve_sdp(p);
  REQUIRE(sol.status == SdpStatus::kOptimal);
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(sol.blocks[0](0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.blocks[0](1, 1) == doctest::Approx(0.0).scale(1).epsilon(1e-6));
}

TEST_CASE("gram feasibility instance of 1 + x^2") {
  // Basis [1, x]: Q00 = 1, 2*Q01 = 0, Q11 = 1.
  SdpProblem p;
  p.block_dims = {2};
  p.equalities.push_back({{{p.entry_index(0, 0, 0), 1.0}}, 1.0});
  p.equalities.push_back({{{p.entry_index(0, 0, 1), 2.0}}, 0.0});
  p.equalities.push_back({{{p.entry_index(0, 1, 1), 1.0}}, 1.0});
  const auto sol = solve_sdp(p);
  REQUIRE(sol.status == SdpStatus::kOptimal);
  CHECK(sol.blocks[0](0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.blocks[0](0, 1) == doctest::Approx(0.0).scale(1).epsilon(1e-6));
}

TEST_CASE("infeasible diagonal sign requirement") {
  // X00 = -1 contradicts X PSD.
  SdpProblem p;
  p.block_dims = {2};
  p.equalities.push_back({{{p.entry_index(0, 0, 0), 1.0}}, -1.0});
  const auto sol = solve_sdp(p);
  REQUIRE(sol.status == SdpStatus::kInfeasible);
  // Farkas certificate: b'y = 1 and A'y negative semidefinite.
  REQUIRE(sol.infeasibility_certificate.size() == 1);
  CHECK(sol.infeasibility_certificate[0] * -1.0 == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("unbounded objective yields an improving ray") {
  // min -X00 subject to X11 = 1: X00 can grow without bound.
  SdpProblem p;
  p.block_dims = {2};
  p.objective = {{p.entry_index(0, 0, 0), -1.0}};
  p.equalities.push_back({{{p.entry_index(0, 1, 1), 1.0}}, 1.0});
  const auto sol = solve_sdp(p);
  REQUIRE(sol.status == SdpStatus::kUnbounded);
  REQUIRE(sol.ray_blocks.size() == 1);
  // Ray is PSD, annihilates the equality, and improves the objective.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sol.ray_blocks[0]);
  CHECK(es.eigenvalues().minCoeff() >= -1e-7);
  CHECK(sol.ray_blocks[0](1, 1) == doctest::Approx(0.0).scale(1).epsilon(1e-6));
  CHECK(-sol.ray_blocks[0](0, 0) == doctest::Approx(-1.0).epsilon(1e-5));
}

TEST_CASE("free variables participate in equalities and duals") {
  // min X00 + 2f  s.t.  X00 + f = 2,  f = 0.5.
  SdpProblem p;
  p.block_dims = {1};
  p.num_free = 1;
  p.objective = {{p.entry_index(0, 0, 0), 1.0}, {p.free_index(0), 2.0}};
  p.equalities.push_back({{{p.entry_index(0, 0, 0), 1.0}, {p.free_index(0), 1.0}}, 2.0});
  p.equalities.push_back({{{p.free_index(0), 1.0}}, 0.5});
  const auto sol = solve_sdp(p);
  REQUIRE(sol.status == SdpStatus::kOptimal);
  CHECK(sol.free_values[0] == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(sol.blocks[0](0, 0) == doctest::Approx(1.5).epsilon(1e-6));
  CHECK(sol.objective == doctest::Approx(2.5).epsilon(1e-7));
}

TEST_CASE("maximize sense and objective constant") {
  // max -X00 + 3 s.t. X00 >= 0 ... with X00 pinned by X00 = 2.
  SdpProblem p;
  p.block_dims = {1};
  p.maximize = true;
  p.objective_constant = 3.0;
  p.objective = {{p.entry_index(0, 0, 0), -1.0}};
  p.equalities.push_back({{{p.entry_index(0, 0, 0), 1.0}}, 2.0});
  const auto sol = solve_sdp(p);
  REQUIRE(sol.status == SdpStatus::kOptimal);
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("optimal blocks are symmetric with near-nonnegative spectra") {
  std::mt19937 rng(123);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    SdpProblem p;
    p.block_dims = {3, 2};
    p.num_free = 1;
    // Random bounded objective: C PD on each block plus positive free cost,
    // with a couple of random equality rows through a strictly feasible point.
    for (int b = 0; b < 2; ++b) {
      const int k = p.block_dims[b];
      for (int i = 0; i < k; ++i) {
        for (int j = i; j < k; ++j) {
          p.objective.push_back({p.entry_index(b, i, j), i == j ? 2.0 + u(rng) : 0.3 * u(rng)});
        }
      }
    }
    p.objective.push_back({p.free_index(0), 1.0});

    for (int r = 0; r < 3; ++r) {
      SdpRow row;
      for (int b = 0; b < 2; ++b) {
        const int k = p.block_dims[b];
        for (int i = 0; i < k; ++i) {
          for (int j = i; j < k; ++j) {
            if (std::abs(u(rng)) > 0.4) row.terms.push_back({p.entry_index(b, i, j), u(rng)});
          }
        }
      }
      row.terms.push_back({p.free_index(0), u(rng)});
      // Right-hand side through a strictly feasible point (identity blocks, f = 0.3).
      double rhs = 0.0;
      for (const auto& t : row.terms) {
        if (t.var == p.free_index(0)) {
          rhs += t.coeff * 0.3;
        } else {
          // identity: diagonal entries contribute once
          for (int b = 0, base = 0; b < 2; ++b) {
            const int k = p.block_dims[b];
            for (int i = 0; i < k; ++i) {
              if (t.var == p.entry_index(b, i, i)) rhs += t.coeff;
            }
            base += k * (k + 1) / 2;
          }
        }
      }
      row.rhs = rhs;
      p.equalities.push_back(row);
    }

    const auto sol = solve_sdp(p);
    REQUIRE(sol.status == SdpStatus::kOptimal);
    for (const auto& block : sol.blocks) {
      CHECK((block - block.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(block, Eigen::EigenvaluesOnly);
      CHECK(es.eigenvalues().minCoeff() >= -1e-8);
    }
    // Weak duality along the iteration log (minimization sense): the gap may
    // undershoot zero only by the exact infeasibility cross terms, and at the
    // solution those have shrunk below tolerance.
    for (const auto& it : sol.log) {
      CHECK(it.primal_obj - it.dual_obj >=
            -it.weak_duality_slack - 1e-9 * (1.0 + std::abs(it.primal_obj)));
    }
    const auto& last = sol.log.back();
    CHECK(last.primal_obj - last.dual_obj >= -1e-9 * (1.0 + std::abs(last.primal_obj)));
  }
}

TEST_CASE("matches dense parameter-sweep oracle on random 2x2 problems") {
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int solved = 0;
  for (int trial = 0; trial < 25; ++trial) {
    SdpProblem p;
    p.block_dims = {2};
    // PD objective keeps the optimum bounded and attained.
    Eigen::Matrix2d base;
    base << 1.5 + u(rng), 0.4 * u(rng), 0, 1.5 + u(rng);
    base(1, 0) = base(0, 1);
    p.objective = {{p.entry_index(0, 0, 0), base(0, 0)},
                   {p.entry_index(0, 0, 1), 2 * base(0, 1)},
                   {p.entry_index(0, 1, 1), base(1, 1)}};
    SdpRow row;
    double w0 = u(rng), w1 = u(rng), w2 = u(rng);
    if (std::abs(w0) < 0.3 && std::abs(w1) < 0.3 && std::abs(w2) < 0.3) w0 = 1.0;
    row.terms = {{p.entry_index(0, 0, 0), w0},
                 {p.entry_index(0, 0, 1), w1},
                 {p.entry_index(0, 1, 1), w2}};
    // Right-hand side through a random strictly positive definite matrix.
    Eigen::Matrix2d r;
    r << u(rng) + 2, u(rng), u(rng), u(rng) + 2;
    const Eigen::Matrix2d x0 = r * r.transpose() * 0.25 + 0.2 * Eigen::Matrix2d::Identity();
    row.rhs = w0 * x0(0, 0) + w1 * x0(0, 1) + w2 * x0(1, 1);
    p.equalities.push_back(row);

    const auto sol = solve_sdp(p);
    REQUIRE(sol.status == SdpStatus::kOptimal);
    const double oracle = brute_force_2x2(p);
    CHECK(std::abs(sol.objective - oracle) <= 1e-6 * (1.0 + std::abs(oracle)));
    ++solved;
  }
  CHECK(solved == 25);
}

TEST_CASE("dump format round-trips and re-solves identically") {
  SdpProblem p;
  p.block_dims = {2, 1};
  p.num_free = 2;
  p.maximize = true;
  p.objective_constant = -1.25;
  p.objective = {{p.entry_index(0, 0, 0), -1.0}, {p.free_index(1), 0.5}};
  p.equalities.push_back({{{p.entry_index(0, 0, 0), 1.0}, {p.free_index(0), -2.0}}, 1.0});
  p.equalities.push_back({{{p.entry_index(0, 0, 1), 2.0}, {p.entry_index(1, 0, 0), 1.0}}, 0.5});
  p.equalities.push_back({{{p.free_index(0), 1.0}, {p.free_index(1), 1.0}}, 0.25});

  const std::string text = write_sdp(p);
  const SdpProblem q = read_sdp_string(text);
  CHECK(q.block_dims == p.block_dims);
  CHECK(q.num_free == p.num_free);
  CHECK(q.maximize == p.maximize);
  CHECK(q.objective_constant == p.objective_constant);
  CHECK(write_sdp(q) == text);

  const auto sol_p = solve_sdp(p);
  const auto sol_q = solve_sdp(q);
  REQUIRE(sol_p.status == sol_q.status);
  if (sol_p.status == SdpStatus::kOptimal) {
    CHECK(sol_p.objective == doctest::Approx(sol_q.objective).epsilon(1e-12));
  }
}
