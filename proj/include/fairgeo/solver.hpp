// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "fairgeo/errors.hpp"
#include "fairgeo/geometry.hpp"
#include "fairgeo/prob.hpp"

namespace fairgeo {

struct ExactReport {
  double mi_ty = 0.0;
  double mi_xy = 0.0;
  double cmi_ys_given_t = 0.0;
  double max_chi_square = 0.0;
};

struct DesignResult {
  Eigen::VectorXd direction;          // unit, orthogonal to sqrt(P_S)
  bool used_second_singular = false;  // top singular value was 1 (degenerate branch)
  double sigma_selected = 0.0;        // |W_ty * direction|
  double k_constant = 1.0;
  double epsilon = 0.0;
  double rate_budget = 0.0;
  double p2_value = 0.0;  // (eps^2/2) (sigma_selected / K)^2, nats
  ProbVector p_y;         // binary uniform
  std::vector<Eigen::VectorXd> l_vectors;  // { direction/K, -direction/K }
  std::vector<ProbVector> p_s_given_y;
  std::vector<ProbVector> p_t_given_y;
  std::vector<ProbVector> p_x_given_y;
  ChannelMatrix mechanism;  // P_{Y|X}
  ExactReport exact_report;
  bool epsilon_within_bounds = false;  // eps < min(c1, c2)
  bool mechanism_stochastic = false;
  bool claimed_exact = false;  // quadratic optimum is exact for binary S
};

// Direction of maximal whitened task-information gain, constrained to the
// orthogonal complement of sqrt(P_S). When the top singular value exceeds 1
// this equals the top right singular vector of W_ty; when it equals 1
// (e.g. identity channels) the complement restriction picks the usable vector.
inline std::pair<Eigen::VectorXd, bool> select_direction(const WMatrices& w) {
  const Eigen::Index n = w.w_ty.cols();
  if (n < 2) throw NoFeasibleDirection("need at least a binary alphabet");
  Eigen::JacobiSVD<Eigen::MatrixXd> full_svd(w.w_ty);
  const double sigma_max = full_svd.singularValues()(0);
  const bool used_second = !(sigma_max > 1.0 + tol_sv);

  // Orthonormal basis of the complement of sqrt(P_S) via a Householder frame.
  Eigen::MatrixXd seed(n, 1);
  seed.col(0) = w.sqrt_p_s;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(seed);
  const Eigen::MatrixXd frame = qr.householderQ();
  const Eigen::MatrixXd basis = frame.rightCols(n - 1);

  Eigen::JacobiSVD<Eigen::MatrixXd> restricted(w.w_ty * basis,
                                               Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (restricted.info() != Eigen::Success)
    throw ConvergenceFailure("direction selection: SVD did not converge");
  Eigen::VectorXd direction = basis * restricted.matrixV().col(0);
  const double norm = direction.norm();
  if (!(norm > tol_rank)) throw NoFeasibleDirection("degenerate direction");
  direction /= norm;
  detail::canonicalize_sign(direction);
  return {direction, used_second};
}

// Smallest K >= 1 with (eps^2/2) |W_xy (L/K)|^2 <= r.
inline double compute_k(double epsilon, double r, const Eigen::MatrixXd& w_xy,
                        const Eigen::VectorXd& direction) {
  if (!(r > 0.0)) throw NonpositiveRate("rate budget must be positive");
  return std::max(1.0, epsilon * (w_xy * direction).norm() / std::sqrt(2.0 * r));
}

namespace detail {

struct QuadraticDesign {
  Eigen::VectorXd direction;
  bool used_second_singular = false;
  double sigma_selected = 0.0;
  double k_constant = 1.0;
  double p2_value = 0.0;
};

inline QuadraticDesign design_quadratic(const WMatrices& w, double epsilon, double r) {
  QuadraticDesign d;
  auto [direction, used_second] = select_direction(w);
  d.direction = std::move(direction);
  d.used_second_singular = used_second;
  d.sigma_selected = (w.w_ty * d.direction).norm();
  d.k_constant = compute_k(epsilon, r, w.w_xy, d.direction);
  const double scaled = d.sigma_selected / d.k_constant;
  d.p2_value = 0.5 * epsilon * epsilon * scaled * scaled;
  return d;
}

// Entries in [-tol_simplex, 0) are roundoff and get clamped; anything lower
// means the step size left the geometric validity region.
inline ProbVector clamp_to_simplex(const Eigen::VectorXd& v, const char* what) {
  if (v.minCoeff() < -tol_simplex)
    throw InvalidReconstruction(std::string(what) +
                                " left the simplex: epsilon too large for this prior");
  ProbVector out;
  out.p = v.cwiseMax(0.0);
  out.p /= out.p.sum();
  return out;
}

}  // namespace detail

inline DesignResult solve(const PriorInstance& prior, double epsilon, double r) {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  const WMatrices w = compute_w_matrices(prior);
  const EpsilonBounds bounds = compute_epsilon_bounds(prior);
  const detail::QuadraticDesign quad = detail::design_quadratic(w, epsilon, r);

  DesignResult res;
  res.direction = quad.direction;
  res.used_second_singular = quad.used_second_singular;
  res.sigma_selected = quad.sigma_selected;
  res.k_constant = quad.k_constant;
  res.epsilon = epsilon;
  res.rate_budget = r;
  res.p2_value = quad.p2_value;
  res.epsilon_within_bounds = epsilon < bounds.valid_epsilon_sup;
  res.claimed_exact = prior.dim() == 2;
  res.p_y.p = Eigen::Vector2d(0.5, 0.5);
  res.l_vectors = {quad.direction / quad.k_constant, -quad.direction / quad.k_constant};

  const Eigen::Index n = prior.dim();
  Eigen::MatrixXd p_x_given_y(n, 2);
  for (std::size_t y = 0; y < 2; ++y) {
    const Eigen::VectorXd j = w.sqrt_p_s.cwiseProduct(res.l_vectors[y]);
    res.p_s_given_y.push_back(
        detail::clamp_to_simplex(prior.p_s.p + epsilon * j, "a sensitive-attribute conditional"));
    res.p_t_given_y.push_back(
        detail::clamp_to_simplex(prior.p_t.p + epsilon * (w.pst_inv * j), "a task conditional"));
    res.p_x_given_y.push_back(
        detail::clamp_to_simplex(prior.p_x.p + epsilon * (w.chain_inv * j), "a data conditional"));
    p_x_given_y.col(static_cast<Eigen::Index>(y)) = res.p_x_given_y[y].p;
  }

  auto [mechanism, p_x_check] = bayes_invert(ChannelMatrix{p_x_given_y}, res.p_y);
  (void)p_x_check;  // equals prior.p_x by construction of the perturbation
  res.mechanism = std::move(mechanism);
  res.mechanism_stochastic = column_stochastic(res.mechanism.m);

  const JointSTXY joint = build_joint(prior, res.mechanism);
  res.exact_report.mi_ty = mutual_information(joint, Var::T, Var::Y);
  res.exact_report.mi_xy = mutual_information(joint, Var::X, Var::Y);
  res.exact_report.cmi_ys_given_t = conditional_mutual_information(joint);
  double max_chi = 0.0;
  for (std::size_t y = 0; y < 2; ++y)
    max_chi = std::max(max_chi, chi_square_pointwise(res.p_s_given_y[y], prior.p_s));
  res.exact_report.max_chi_square = max_chi;
  return res;
}

// Objective and feasibility of an arbitrary perturbation family under the
// quadratic program: report-style, never throws on infeasibility.
inline std::pair<double, bool> evaluate_quadratic_objective(const WMatrices& w,
                                                            const PerturbationSet& pert,
                                                            double r) {
  const double objective = detail::quadratic_form(w.w_ty, pert);
  bool feasible = on_simplex(pert.p_y.p, tol_orth);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(w.sqrt_p_s.size());
  for (Eigen::Index y = 0; y < pert.p_y.size() && feasible; ++y) {
    const Eigen::VectorXd& l = pert.l_vectors[static_cast<std::size_t>(y)];
    if (std::abs(l.dot(w.sqrt_p_s)) > tol_orth) feasible = false;
    if (l.squaredNorm() > 1.0 + tol_orth) feasible = false;
    mean += pert.p_y(y) * l;
  }
  if (mean.lpNorm<Eigen::Infinity>() > tol_orth) feasible = false;
  if (detail::quadratic_form(w.w_xy, pert) > r + tol_orth) feasible = false;
  return {objective, feasible};
}

struct MarkovReport {
  std::vector<double> residual_per_y;
  double max_residual = 0.0;
};

// |P_{S|X} P_{X|Y=y} - P_{S|Y=y}|_inf per y, with P_{S|X} = P_{S|T} P_{T|X}.
inline MarkovReport markov_consistency_check(const PriorInstance& prior,
                                             const DesignResult& result) {
  const Eigen::MatrixXd p_s_given_x = prior.p_s_given_t.m * prior.p_t_given_x.m;
  MarkovReport rep;
  for (std::size_t y = 0; y < result.p_x_given_y.size(); ++y) {
    const Eigen::VectorXd lhs = p_s_given_x * result.p_x_given_y[y].p;
    const double res = (lhs - result.p_s_given_y[y].p).lpNorm<Eigen::Infinity>();
    rep.residual_per_y.push_back(res);
    rep.max_residual = std::max(rep.max_residual, res);
  }
  return rep;
}

}  // namespace fairgeo
