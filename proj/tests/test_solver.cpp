// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "fairgeo/config.hpp"
#include "fairgeo/random_instances.hpp"
#include "fairgeo/solver.hpp"

using namespace fairgeo;
using Catch::Matchers::WithinAbs;

TEST_CASE("direction selection on the built-in instance") {
  const ExperimentConfig cfg = default_config();
  const WMatrices w = compute_w_matrices(cfg.prior);
  const auto [dir, used_second] = select_direction(w);

  CHECK_FALSE(used_second);  // top singular value 3.2 is clear of 1
  CHECK_THAT(dir.norm(), WithinAbs(1.0, 1e-14));
  CHECK_THAT(dir.dot(w.sqrt_p_s), WithinAbs(0.0, 1e-14));
  CHECK_THAT(dir(0), WithinAbs(0.83141445741579434, 1e-12));
  CHECK_THAT(dir(1), WithinAbs(-0.55565276927232188, 1e-12));
  CHECK_THAT((w.w_ty * dir).norm(), WithinAbs(3.2033596479840516, 1e-12));
}

TEST_CASE("direction selection under a degenerate top singular value") {
  // Identity sensitive channel: W_ty = I, both singular values are 1, and the
  // selector must fall back to the complement of sqrt(P_S).
  ChannelMatrix ident;
  ident.m = Eigen::Matrix2d::Identity();
  ChannelMatrix p_t_given_x;
  p_t_given_x.m.resize(2, 2);
  p_t_given_x.m << 0.25, 0.4, 0.75, 0.6;
  ProbVector p_x;
  p_x.p = Eigen::Vector2d(0.25, 0.75);
  const PriorInstance prior = validate_prior(ident, p_t_given_x, p_x);
  const WMatrices w = compute_w_matrices(prior);

  const auto [dir, used_second] = select_direction(w);
  CHECK(used_second);
  CHECK_THAT(dir.norm(), WithinAbs(1.0, 1e-14));
  CHECK_THAT(dir.dot(w.sqrt_p_s), WithinAbs(0.0, 1e-14));
  CHECK_THAT((w.w_ty * dir).norm(), WithinAbs(1.0, 1e-12));

  const DesignResult d = solve(prior, 1e-3, 0.2);
  CHECK(d.used_second_singular);
  CHECK(d.exact_report.cmi_ys_given_t < 1e-14);
  CHECK(d.exact_report.max_chi_square <= 1e-6 + 1e-15);
}

TEST_CASE("scale constant K") {
  const ExperimentConfig cfg = default_config();
  const WMatrices w = compute_w_matrices(cfg.prior);
  const auto [dir, used_second] = select_direction(w);
  (void)used_second;

  CHECK(compute_k(0.005, 0.2, w.w_xy, dir) == 1.0);
  CHECK(compute_k(0.0266, 0.2, w.w_xy, dir) == 1.0);   // just below the breakpoint
  CHECK(compute_k(0.0267, 0.2, w.w_xy, dir) > 1.0);    // just above
  CHECK_THAT(compute_k(0.05, 0.2, w.w_xy, dir), WithinAbs(1.8743380175718638, 1e-12));
  CHECK_THROWS_AS(compute_k(0.01, 0.0, w.w_xy, dir), NonpositiveRate);
  CHECK_THROWS_AS(compute_k(0.01, -0.5, w.w_xy, dir), NonpositiveRate);
}

TEST_CASE("closed-form design at small epsilon") {
  const ExperimentConfig cfg = default_config();
  const DesignResult d = solve(cfg.prior, 0.005, 0.2);

  SECTION("scalar outputs") {
    CHECK(d.k_constant == 1.0);
    CHECK_THAT(d.p2_value, WithinAbs(1.2826891292915636e-4, 1e-15));
    CHECK_THAT(d.sigma_selected, WithinAbs(3.2033596479840516, 1e-12));
    CHECK(d.epsilon_within_bounds);  // 0.005 < c1 = 0.01254
    CHECK(d.mechanism_stochastic);
    CHECK(d.claimed_exact);
    CHECK(d.p_y.p(0) == 0.5);
    CHECK(d.p_y.p(1) == 0.5);
  }

  SECTION("frozen mechanism") {
    CHECK_THAT(d.mechanism(0, 0), WithinAbs(0.39733827873863758, 1e-12));
    CHECK_THAT(d.mechanism(0, 1), WithinAbs(0.53422057375378751, 1e-12));
    CHECK_THAT(d.mechanism(1, 0), WithinAbs(0.60266172126136242, 1e-12));
    CHECK_THAT(d.mechanism(1, 1), WithinAbs(0.46577942624621249, 1e-12));
  }

  SECTION("exact evaluation") {
    CHECK_THAT(d.exact_report.mi_ty, WithinAbs(1.282762e-4, 1e-9));
    CHECK(d.exact_report.cmi_ys_given_t < 1e-14);
    // the design saturates its correlation cap exactly when K = 1
    CHECK_THAT(d.exact_report.max_chi_square, WithinAbs(0.005 * 0.005, 1e-16));
    CHECK(d.exact_report.mi_xy <= 0.2);
  }

  SECTION("markov consistency") {
    const MarkovReport rep = markov_consistency_check(cfg.prior, d);
    CHECK(rep.max_residual < 1e-12);
    CHECK(rep.residual_per_y.size() == 2);
  }

  SECTION("quadratic objective agrees with the reported bound") {
    const WMatrices w = compute_w_matrices(cfg.prior);
    PerturbationSet pert{d.p_y, d.l_vectors, d.epsilon};
    const auto [objective, feasible] = evaluate_quadratic_objective(w, pert, 0.2);
    CHECK(feasible);
    CHECK_THAT(objective, WithinAbs(d.p2_value, 1e-18));
  }

  SECTION("deterministic across invocations") {
    const DesignResult d2 = solve(cfg.prior, 0.005, 0.2);
    CHECK(d.mechanism.m == d2.mechanism.m);
    CHECK(d.exact_report.mi_ty == d2.exact_report.mi_ty);
  }
}

TEST_CASE("design at epsilon = 0.01 reproduces the frozen conditionals") {
  const ExperimentConfig cfg = default_config();
  const DesignResult d = solve(cfg.prior, 0.01, 0.2);

  // outcome 0 carries +direction, outcome 1 the mirror
  CHECK_THAT(d.p_s_given_y[0].p(0), WithinAbs(0.31336977745676131, 1e-13));
  CHECK_THAT(d.p_s_given_y[0].p(1), WithinAbs(0.68663022254323869, 1e-13));
  CHECK_THAT(d.p_s_given_y[1].p(0), WithinAbs(0.30413022254323874, 1e-13));
  CHECK_THAT(d.p_s_given_y[1].p(1), WithinAbs(0.69586977745676137, 1e-13));

  CHECK_THAT(d.mechanism(0, 0), WithinAbs(0.29467655747727517, 1e-12));
  CHECK_THAT(d.mechanism(0, 1), WithinAbs(0.56844114750757491, 1e-12));

  for (const auto& family : {d.p_s_given_y, d.p_t_given_y, d.p_x_given_y})
    for (const ProbVector& cond : family) CHECK(on_simplex(cond.p));

  // the perturbed sensitive conditionals mix back to the prior marginal
  const Eigen::VectorXd mixed = 0.5 * d.p_s_given_y[0].p + 0.5 * d.p_s_given_y[1].p;
  CHECK((mixed - cfg.prior.p_s.p).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("reconstruction fails beyond the validity region") {
  const ExperimentConfig cfg = default_config();
  CHECK_NOTHROW(solve(cfg.prior, 0.024, 0.2));
  CHECK_THROWS_AS(solve(cfg.prior, 0.025, 0.2), InvalidReconstruction);
  CHECK_THROWS_AS(solve(cfg.prior, 0.05, 0.2), InvalidReconstruction);
  CHECK_THROWS_AS(solve(cfg.prior, 0.0, 0.2), ConfigError);
  CHECK_THROWS_AS(solve(cfg.prior, -0.01, 0.2), ConfigError);
}

TEST_CASE("rate-limited design: K > 1 shrinks the step and meets the budget") {
  const ExperimentConfig cfg = default_config();
  const double r = 0.002;  // tight budget pulls the breakpoint below 0.01
  const DesignResult d = solve(cfg.prior, 0.01, r);

  CHECK(d.k_constant > 1.0);
  CHECK(d.p2_value < 0.5 * 0.01 * 0.01 * d.sigma_selected * d.sigma_selected);

  const WMatrices w = compute_w_matrices(cfg.prior);
  PerturbationSet pert{d.p_y, d.l_vectors, d.epsilon};
  // with K active the approximate rate sits exactly on the budget
  CHECK_THAT(approx_mi_xy(w, pert), WithinAbs(r, 1e-15));
  CHECK(d.exact_report.max_chi_square <= 0.01 * 0.01 + 1e-15);
  CHECK(d.exact_report.cmi_ys_given_t < 1e-14);
}

TEST_CASE("simplex clamp near the boundary") {
  Eigen::Vector3d roundoff(-5e-10, 0.5, 0.5);
  const ProbVector cleaned = detail::clamp_to_simplex(roundoff, "a test vector");
  CHECK(on_simplex(cleaned.p, 1e-15));
  CHECK(cleaned.p(0) == 0.0);

  Eigen::Vector3d broken(-2e-9, 0.5, 0.5);
  CHECK_THROWS_AS(detail::clamp_to_simplex(broken, "a test vector"), InvalidReconstruction);
}

TEST_CASE("quadratic objective evaluation is report-style") {
  const ExperimentConfig cfg = default_config();
  const WMatrices w = compute_w_matrices(cfg.prior);
  std::mt19937_64 rng(31);

  SECTION("feasible random families") {
    for (int i = 0; i < 50; ++i) {
      const PerturbationSet pert = random_feasible_perturbation(cfg.prior, 2, 1e-3, rng);
      const auto [objective, feasible] = evaluate_quadratic_objective(w, pert, 10.0);
      REQUIRE(feasible);
      REQUIRE(objective >= 0.0);
      REQUIRE_THAT(objective, WithinAbs(approx_mi_ty(w, pert), 1e-18));
    }
  }

  SECTION("infeasibility is flagged, not thrown") {
    PerturbationSet pert = random_feasible_perturbation(cfg.prior, 2, 1e-3, rng);
    for (auto& l : pert.l_vectors) l *= 10.0;  // norm violation
    const auto [objective, feasible] = evaluate_quadratic_objective(w, pert, 10.0);
    (void)objective;
    CHECK_FALSE(feasible);

    PerturbationSet tight = random_feasible_perturbation(cfg.prior, 2, 0.5, rng);
    const auto [obj2, feas2] = evaluate_quadratic_objective(w, tight, 1e-12);  // rate violation
    (void)obj2;
    CHECK_FALSE(feas2);
  }
}

TEST_CASE("solved designs hold their invariants on random priors") {
  std::mt19937_64 rng(37);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Index n = 2 + (i % 3);
    const PriorInstance prior = random_prior(n, rng);
    const WMatrices w = compute_w_matrices(prior);
    const EpsilonBounds bounds = compute_epsilon_bounds(prior);
    const auto [dir, used_second] = select_direction(w);
    (void)used_second;

    const Eigen::VectorXd j0 = w.sqrt_p_s.cwiseProduct(dir);
    double margin = bounds.valid_epsilon_sup;
    auto fold = [&margin](const Eigen::VectorXd& base, const Eigen::VectorXd& delta) {
      for (Eigen::Index k = 0; k < base.size(); ++k)
        if (std::abs(delta(k)) > 1e-300)
          margin = std::min(margin, base(k) / std::abs(delta(k)));
    };
    fold(prior.p_s.p, j0);
    fold(prior.p_t.p, w.pst_inv * j0);
    fold(prior.p_x.p, w.chain_inv * j0);
    const double eps = 0.5 * margin;
    REQUIRE(eps > 0.0);

    const DesignResult d = solve(prior, eps, 0.2);
    REQUIRE(d.exact_report.cmi_ys_given_t < 1e-12);
    REQUIRE(d.exact_report.max_chi_square <= eps * eps + 1e-10);
    REQUIRE(markov_consistency_check(prior, d).max_residual < 1e-9);
    REQUIRE(d.mechanism_stochastic);
    REQUIRE_THAT(d.direction.norm(), WithinAbs(1.0, 1e-12));
  }
}
