// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fairgeo/config.hpp"
#include "fairgeo/errors.hpp"
#include "fairgeo/geometry.hpp"
#include "fairgeo/oracle.hpp"
#include "fairgeo/prob.hpp"
#include "fairgeo/random_instances.hpp"
#include "fairgeo/report.hpp"
#include "fairgeo/solver.hpp"

namespace fairgeo {

inline int exit_code_for_exception(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 1;
  if (dynamic_cast<const AcceptanceDeviation*>(&e)) return 2;
  return 3;  // numerical / unexpected
}

namespace detail {

inline std::string vec_human(const Eigen::VectorXd& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += format_human(v(i));
  }
  return s + "]";
}

inline std::string mat_human(const Eigen::MatrixXd& m) {
  std::string s = "[";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (r) s += "; ";
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) s += ", ";
      s += format_human(m(r, c));
    }
  }
  return s + "]";
}

inline void check_close(double got, double expected, double tol, const char* what) {
  if (!(std::abs(got - expected) <= tol)) {
    std::ostringstream msg;
    msg << what << ": expected " << format_human(expected) << ", got " << format_full(got)
        << " (tolerance " << format_human(tol) << ")";
    throw AcceptanceDeviation(msg.str());
  }
}

inline void check_vector_up_to_sign(const Eigen::VectorXd& got, const Eigen::VectorXd& expected,
                                    double tol, const char* what) {
  const double d_plus = (got - expected).lpNorm<Eigen::Infinity>();
  const double d_minus = (got + expected).lpNorm<Eigen::Infinity>();
  if (!(std::min(d_plus, d_minus) <= tol)) {
    std::ostringstream msg;
    msg << what << ": expected +/-" << vec_human(expected) << ", got " << vec_human(got);
    throw AcceptanceDeviation(msg.str());
  }
}

}  // namespace detail

struct ExampleReport {
  PriorInstance prior;
  WMatrices w;
  EpsilonBounds bounds;
  std::vector<SingularTriple> triples_ty;
  std::vector<SingularTriple> triples_xy;
  std::vector<double> epsilons;
  std::vector<double> k_values;
  std::vector<double> p2_values;
  std::string text;
};

// Runs the built-in instance end to end and verifies its frozen reference
// values; any deviation beyond tolerance throws AcceptanceDeviation.
inline ExampleReport run_example() {
  ExampleReport rep;
  const ExperimentConfig cfg = default_config();
  rep.prior = cfg.prior;
  rep.w = compute_w_matrices(rep.prior);
  rep.bounds = compute_epsilon_bounds(rep.prior);
  rep.triples_ty = singular_triples(rep.w.w_ty);
  rep.triples_xy = singular_triples(rep.w.w_xy);
  rep.epsilons = cfg.epsilon_values;

  // Reference values for the built-in instance, frozen at 4 significant digits.
  detail::check_close(rep.prior.p_t(0), 0.3625, 1e-4, "task marginal, first entry");
  detail::check_close(rep.prior.p_t(1), 0.6375, 1e-4, "task marginal, second entry");
  detail::check_close(rep.prior.p_s(0), 0.3088, 1e-4, "sensitive marginal, first entry");
  detail::check_close(rep.prior.p_s(1), 0.6913, 1e-4, "sensitive marginal, second entry");

  Eigen::Matrix2d w_ty_ref, w_xy_ref;
  w_ty_ref << 2.4610, -0.9206, -1.1599, 1.7355;
  w_xy_ref << -16.7931, 11.8246, 10.3371, -5.8669;
  for (Eigen::Index r = 0; r < 2; ++r)
    for (Eigen::Index c = 0; c < 2; ++c) {
      detail::check_close(rep.w.w_ty(r, c), w_ty_ref(r, c), 1e-3, "task-side whitened matrix entry");
      detail::check_close(rep.w.w_xy(r, c), w_xy_ref(r, c), 1e-3, "data-side whitened matrix entry");
    }

  detail::check_close(rep.triples_ty[0].sigma, 3.2034, 1e-3, "top singular value, task side");
  detail::check_close(rep.triples_ty[1].sigma, 1.0, 1e-3, "unit singular value, task side");
  detail::check_close(rep.triples_xy[0].sigma, 23.7087, 1e-3, "top singular value, data side");
  detail::check_close(rep.triples_xy[1].sigma, 1.0, 1e-3, "unit singular value, data side");
  detail::check_vector_up_to_sign(rep.triples_ty[0].right, Eigen::Vector2d(-0.8314, 0.5557),
                                  1e-3, "top right singular vector, task side");
  detail::check_vector_up_to_sign(rep.triples_ty[1].right, Eigen::Vector2d(0.5557, 0.8314),
                                  1e-3, "unit right singular vector, task side");

  for (double eps : rep.epsilons) {
    const detail::QuadraticDesign quad = detail::design_quadratic(rep.w, eps, cfg.rate_budget);
    rep.k_values.push_back(quad.k_constant);
    rep.p2_values.push_back(quad.p2_value);
  }
  detail::check_close(rep.k_values.front(), 1.0, 1e-12, "scale constant at the smallest epsilon");
  {
    const detail::QuadraticDesign quad =
        detail::design_quadratic(rep.w, rep.epsilons.front(), cfg.rate_budget);
    const double sigma = quad.sigma_selected;
    const double expected = 0.5 * rep.epsilons.front() * rep.epsilons.front() * sigma * sigma;
    if (!(std::abs(quad.p2_value - expected) <= 1e-6 * expected))
      throw AcceptanceDeviation("closed-form utility bound deviates from (eps^2/2) sigma^2");
  }

  std::ostringstream out;
  out << "built-in example instance (binary chain, rate budget "
      << format_human(cfg.rate_budget) << " nats)\n\n";
  out << "P_T  = " << detail::vec_human(rep.prior.p_t.p) << '\n';
  out << "P_S  = " << detail::vec_human(rep.prior.p_s.p) << '\n';
  out << "task-side whitened matrix  W_ty = " << detail::mat_human(rep.w.w_ty) << '\n';
  out << "data-side whitened matrix  W_xy = " << detail::mat_human(rep.w.w_xy) << '\n';
  out << "singular values  W_ty: " << format_human(rep.triples_ty[0].sigma) << ", "
      << format_human(rep.triples_ty[1].sigma)
      << "   W_xy: " << format_human(rep.triples_xy[0].sigma) << ", "
      << format_human(rep.triples_xy[1].sigma) << '\n';
  out << "right singular vectors W_ty: " << detail::vec_human(rep.triples_ty[0].right) << ", "
      << detail::vec_human(rep.triples_ty[1].right) << '\n';
  out << "validity thresholds  c1 = " << format_human(rep.bounds.c1)
      << ", c2 = " << format_human(rep.bounds.c2)
      << " (sup = " << format_human(rep.bounds.valid_epsilon_sup) << ")\n\n";
  out << "epsilon      K            p2_bound (nats)\n";
  for (std::size_t i = 0; i < rep.epsilons.size(); ++i) {
    out << format_human(rep.epsilons[i]) << "        " << format_human(rep.k_values[i])
        << "        " << format_human(rep.p2_values[i]) << '\n';
  }
  out << "\nreference checks: all within tolerance\n";
  rep.text = out.str();
  return rep;
}

// Exact and second-order utilities of the symmetric two-outcome design
// l_y = +/- amplitude * direction at a given epsilon.
struct SymmetricDesignEval {
  double exact_mi_ty = 0.0;
  double exact_mi_xy = 0.0;
  double approx_mi_ty = 0.0;
  double approx_mi_xy = 0.0;
};

inline SymmetricDesignEval evaluate_symmetric_design(const PriorInstance& prior,
                                                     const WMatrices& w,
                                                     const Eigen::VectorXd& direction,
                                                     double amplitude, double epsilon) {
  PerturbationSet pert;
  pert.epsilon = epsilon;
  pert.p_y.p = Eigen::Vector2d(0.5, 0.5);
  pert.l_vectors = {amplitude * direction, -amplitude * direction};

  SymmetricDesignEval ev;
  ev.approx_mi_ty = approx_mi_ty(w, pert);
  ev.approx_mi_xy = approx_mi_xy(w, pert);

  Eigen::MatrixXd p_x_given_y(prior.dim(), 2);
  for (std::size_t y = 0; y < 2; ++y) {
    const Eigen::VectorXd j = w.sqrt_p_s.cwiseProduct(pert.l_vectors[y]);
    p_x_given_y.col(static_cast<Eigen::Index>(y)) =
        detail::clamp_to_simplex(prior.p_x.p + epsilon * (w.chain_inv * j), "a data conditional").p;
  }
  auto [mech, p_a] = bayes_invert(ChannelMatrix{p_x_given_y}, pert.p_y);
  (void)p_a;
  const JointSTXY joint = build_joint(prior, mech);
  ev.exact_mi_ty = mutual_information(joint, Var::T, Var::Y);
  ev.exact_mi_xy = mutual_information(joint, Var::X, Var::Y);
  return ev;
}

inline std::vector<SweepRow> compute_sweep_rows(const ExperimentConfig& cfg) {
  const WMatrices w = compute_w_matrices(cfg.prior);
  const EpsilonBounds bounds = compute_epsilon_bounds(cfg.prior);

  // The parity-only search does not depend on epsilon: run it once.
  std::optional<double> eo_value;
  if (cfg.oracle.eo) {
    OracleQuery q;
    q.prior = cfg.prior;
    q.r = cfg.rate_budget;
    q.y_cardinality = cfg.oracle.y_cardinality;
    q.grid_points = cfg.oracle.grid_points;
    eo_value = grid_search_eo(q).best_utility;
  }

  std::vector<SweepRow> rows;
  for (double eps : cfg.epsilon_values) {
    SweepRow row;
    row.epsilon = eps;
    const detail::QuadraticDesign quad = detail::design_quadratic(w, eps, cfg.rate_budget);
    row.p2_bound = quad.p2_value;
    row.k_constant = quad.k_constant;
    row.within_validity = eps < bounds.valid_epsilon_sup;
    try {
      const DesignResult d = solve(cfg.prior, eps, cfg.rate_budget);
      row.exact_utility_of_design = d.exact_report.mi_ty;
    } catch (const InvalidReconstruction&) {
      // Design not realizable at this epsilon: the cell stays empty.
    }
    if (cfg.oracle.chi2) {
      OracleQuery q;
      q.prior = cfg.prior;
      q.epsilon = eps;
      q.r = cfg.rate_budget;
      q.y_cardinality = cfg.oracle.y_cardinality;
      q.grid_points = cfg.oracle.grid_points;
      row.oracle_chi2 = grid_search_chi2(q).best_utility;
    }
    row.oracle_eo = eo_value;
    rows.push_back(row);
  }
  return rows;
}

inline std::string render_sweep_text(const std::vector<SweepRow>& rows,
                                     const EpsilonBounds& bounds) {
  std::ostringstream out;
  out << "epsilon sweep (empty cell: value not computed at that point)\n";
  out << "validity thresholds: c1 = " << format_human(bounds.c1)
      << ", c2 = " << format_human(bounds.c2) << '\n';
  out << "\nepsilon    p2_bound     design_exact   oracle_chi2   oracle_eo     K         valid\n";
  auto cell = [](const std::optional<double>& v) {
    return v ? format_human(*v) : std::string("-");
  };
  for (const SweepRow& r : rows) {
    out << format_human(r.epsilon) << "      " << format_human(r.p2_bound) << "     "
        << cell(r.exact_utility_of_design) << "       " << cell(r.oracle_chi2) << "     "
        << cell(r.oracle_eo) << "    " << format_human(r.k_constant) << "     "
        << (r.within_validity ? "yes" : "no") << '\n';
  }
  return out.str();
}

enum class OutputFormat { csv, json, both };

inline void run_sweep(const ExperimentConfig& cfg, OutputFormat format) {
  const std::vector<SweepRow> rows = compute_sweep_rows(cfg);
  const EpsilonBounds bounds = compute_epsilon_bounds(cfg.prior);
  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  if (format == OutputFormat::csv || format == OutputFormat::both)
    write_text_file(dir / "sweep.csv", render_sweep_csv(rows));
  if (format == OutputFormat::json || format == OutputFormat::both)
    write_text_file(dir / "summary.json", sweep_summary_json(cfg, bounds, rows).dump(2) + "\n");
  write_text_file(dir / "sweep.svg", render_sweep_svg(rows));
  write_text_file(dir / "report.txt", render_sweep_text(rows, bounds));
}

inline std::string render_design_text(const DesignResult& d) {
  std::ostringstream out;
  out << "epsilon = " << format_human(d.epsilon) << ", rate budget = "
      << format_human(d.rate_budget) << " nats\n";
  out << "  direction = " << detail::vec_human(d.direction)
      << (d.used_second_singular ? "  (degenerate top singular value)" : "") << '\n';
  out << "  K = " << format_human(d.k_constant)
      << ", p2_bound = " << format_human(d.p2_value) << " nats\n";
  out << "  mechanism P(new|data) = " << detail::mat_human(d.mechanism.m) << '\n';
  for (std::size_t y = 0; y < d.p_s_given_y.size(); ++y) {
    out << "  outcome " << y << ": P_S|y = " << detail::vec_human(d.p_s_given_y[y].p)
        << ", P_T|y = " << detail::vec_human(d.p_t_given_y[y].p)
        << ", P_X|y = " << detail::vec_human(d.p_x_given_y[y].p) << '\n';
  }
  out << "  exact: I(T;Y) = " << format_human(d.exact_report.mi_ty)
      << ", I(X;Y) = " << format_human(d.exact_report.mi_xy)
      << ", I(Y;S|T) = " << format_human(d.exact_report.cmi_ys_given_t)
      << ", max chi^2 = " << format_human(d.exact_report.max_chi_square) << '\n';
  out << "  flags: within validity = " << (d.epsilon_within_bounds ? "yes" : "no")
      << ", mechanism stochastic = " << (d.mechanism_stochastic ? "yes" : "no")
      << ", quadratic optimum exact = " << (d.claimed_exact ? "yes" : "no") << '\n';
  return out.str();
}

inline std::vector<DesignResult> run_solve(const ExperimentConfig& cfg) {
  std::vector<DesignResult> results;
  for (double eps : cfg.epsilon_values)
    results.push_back(solve(cfg.prior, eps, cfg.rate_budget));
  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  std::ostringstream out;
  nlohmann::json j;
  j["config"] = config_to_json(cfg);
  j["designs"] = nlohmann::json::array();
  for (const DesignResult& d : results) {
    out << render_design_text(d) << '\n';
    nlohmann::json dj;
    dj["epsilon"] = d.epsilon;
    dj["k_constant"] = d.k_constant;
    dj["p2_bound"] = d.p2_value;
    dj["exact_mi_ty"] = d.exact_report.mi_ty;
    dj["exact_mi_xy"] = d.exact_report.mi_xy;
    dj["max_chi_square"] = d.exact_report.max_chi_square;
    dj["within_validity"] = d.epsilon_within_bounds;
    j["designs"].push_back(dj);
  }
  write_text_file(dir / "report.txt", out.str());
  write_text_file(dir / "summary.json", j.dump(2) + "\n");
  return results;
}

inline std::string render_oracle_text(double epsilon, const OracleResult& res, bool chi) {
  std::ostringstream out;
  out << (chi ? "joint-constraint search" : "parity-only search");
  if (chi) out << " at epsilon = " << format_human(epsilon);
  out << ":\n  best utility = " << format_human(res.best_utility)
      << " nats, mechanism = " << detail::mat_human(res.best_mechanism.m) << '\n'
      << "  constraints at best: rate = " << format_human(res.mi_xy_at_best)
      << ", conditional dependence = " << format_human(res.cmi_at_best)
      << ", max chi^2 = " << format_human(res.max_chi_square_at_best) << '\n'
      << "  feasible/evaluated = " << res.feasible_count << '/' << res.evaluated_count << '\n';
  return out.str();
}

inline void run_oracle(const ExperimentConfig& cfg) {
  std::ostringstream out;
  nlohmann::json j;
  j["config"] = config_to_json(cfg);
  j["results"] = nlohmann::json::array();
  if (cfg.oracle.eo) {
    OracleQuery q;
    q.prior = cfg.prior;
    q.r = cfg.rate_budget;
    q.y_cardinality = cfg.oracle.y_cardinality;
    q.grid_points = cfg.oracle.grid_points;
    const OracleResult res = grid_search_eo(q);
    out << render_oracle_text(0.0, res, false);
    j["results"].push_back({{"search", "eo"},
                            {"best_utility", res.best_utility},
                            {"feasible_count", res.feasible_count},
                            {"evaluated_count", res.evaluated_count}});
  }
  if (cfg.oracle.chi2) {
    for (double eps : cfg.epsilon_values) {
      OracleQuery q;
      q.prior = cfg.prior;
      q.epsilon = eps;
      q.r = cfg.rate_budget;
      q.y_cardinality = cfg.oracle.y_cardinality;
      q.grid_points = cfg.oracle.grid_points;
      const OracleResult res = grid_search_chi2(q);
      out << render_oracle_text(eps, res, true);
      j["results"].push_back({{"search", "chi2"},
                              {"epsilon", eps},
                              {"best_utility", res.best_utility},
                              {"feasible_count", res.feasible_count},
                              {"evaluated_count", res.evaluated_count}});
    }
  }
  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  write_text_file(dir / "report.txt", out.str());
  write_text_file(dir / "summary.json", j.dump(2) + "\n");
}

struct VerifySection {
  std::string name;
  int passed = 0;
  int total = 0;
};

struct VerifyReport {
  std::vector<VerifySection> sections;
  std::string text;

  bool all_pass() const {
    for (const VerifySection& s : sections)
      if (s.passed != s.total) return false;
    return !sections.empty();
  }
};

// Cross-module invariant suite over seeded random instances.
inline VerifyReport run_verify(const ExperimentConfig& cfg, int n_instances = 200) {
  VerifyReport rep;
  std::mt19937_64 rng(cfg.seed);

  {
    VerifySection sec{"conditional independence of random mechanisms", 0, 0};
    for (int i = 0; i < n_instances; ++i) {
      const Eigen::Index n = 2 + (i % 3);
      const PriorInstance prior = random_prior(n, rng);
      const ChannelMatrix mech = random_mechanism(2 + (i % 2), n, rng);
      const double cmi = conditional_mutual_information(build_joint(prior, mech));
      ++sec.total;
      if (cmi < 1e-12) ++sec.passed;
    }
    rep.sections.push_back(sec);
  }

  {
    VerifySection sec{"unit singular pair of the whitened matrices", 0, 0};
    for (int i = 0; i < n_instances; ++i) {
      const Eigen::Index n = 2 + (i % 3);
      const PriorInstance prior = random_prior(n, rng);
      const WMatrices w = compute_w_matrices(prior);
      const double r1 = (w.w_ty * w.sqrt_p_s - w.sqrt_p_t).norm();
      const double r2 = (w.w_xy * w.sqrt_p_s - w.sqrt_p_x).norm();
      ++sec.total;
      if (r1 < 1e-9 && r2 < 1e-9) ++sec.passed;
    }
    rep.sections.push_back(sec);
  }

  {
    VerifySection sec{"solved designs: consistency, chi^2 cap, parity", 0, 0};
    for (int i = 0; i < n_instances; ++i) {
      const Eigen::Index n = 2 + (i % 3);
      const PriorInstance prior = random_prior(n, rng);
      const WMatrices w = compute_w_matrices(prior);
      const EpsilonBounds bounds = compute_epsilon_bounds(prior);
      const auto [dir, second] = select_direction(w);
      (void)second;
      // Step size with guaranteed simplex margin for all three conditionals.
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

      const DesignResult d = solve(prior, eps, 0.2);
      const MarkovReport markov = markov_consistency_check(prior, d);
      PerturbationSet pert{d.p_y, d.l_vectors, d.epsilon};
      const auto [objective, feasible] = evaluate_quadratic_objective(w, pert, 0.2);
      ++sec.total;
      const bool ok = markov.max_residual < 1e-9 &&
                      d.exact_report.max_chi_square <= eps * eps + 1e-10 &&
                      d.exact_report.cmi_ys_given_t < 1e-12 && feasible &&
                      std::abs(objective - d.p2_value) <= 1e-15 + 1e-12 * d.p2_value;
      if (ok) ++sec.passed;
    }
    rep.sections.push_back(sec);
  }

  {
    VerifySection sec{"second-order error vanishes faster than eps^2", 0, 0};
    const ExperimentConfig base = default_config();
    const WMatrices w = compute_w_matrices(base.prior);
    const auto [dir, second] = select_direction(w);
    (void)second;
    double prev_ty = -1.0, prev_xy = -1.0;
    bool ok = true;
    for (double eps : {0.04, 0.02, 0.01, 0.005}) {
      const SymmetricDesignEval ev = evaluate_symmetric_design(base.prior, w, dir, 0.5, eps);
      const double rel_ty = std::abs(ev.exact_mi_ty - ev.approx_mi_ty) / (eps * eps);
      const double rel_xy = std::abs(ev.exact_mi_xy - ev.approx_mi_xy) / (eps * eps);
      if (prev_ty >= 0.0 && !(rel_ty < prev_ty && rel_xy < prev_xy)) ok = false;
      prev_ty = rel_ty;
      prev_xy = rel_xy;
    }
    sec.total = 1;
    sec.passed = ok ? 1 : 0;
    rep.sections.push_back(sec);
  }

  {
    VerifySection sec{"search under both constraints never beats parity-only", 0, 0};
    for (int i = 0; i < 12; ++i) {
      const PriorInstance prior = random_prior(2, rng);
      OracleQuery q;
      q.prior = prior;
      q.epsilon = 0.02;
      q.r = 0.1;
      q.grid_points = 41;
      const double chi_41 = grid_search_chi2(q).best_utility;
      const double eo_41 = grid_search_eo(q).best_utility;
      q.grid_points = 21;
      const double chi_21 = grid_search_chi2(q).best_utility;
      const double eo_21 = grid_search_eo(q).best_utility;
      ++sec.total;
      if (chi_41 <= eo_41 + 1e-12 && chi_21 <= eo_21 + 1e-12 && chi_41 >= chi_21 - 1e-12 &&
          eo_41 >= eo_21 - 1e-12)
        ++sec.passed;
    }
    rep.sections.push_back(sec);
  }

  std::ostringstream out;
  out << "invariant suite over " << n_instances << " seeded random instances (seed "
      << cfg.seed << ")\n\n";
  for (const VerifySection& s : rep.sections)
    out << (s.passed == s.total ? "pass" : "FAIL") << "  " << s.passed << '/' << s.total << "  "
        << s.name << '\n';
  out << '\n' << (rep.all_pass() ? "all sections passed\n" : "FAILURES PRESENT\n");
  rep.text = out.str();
  return rep;
}

}  // namespace fairgeo
