// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "fairgeo/errors.hpp"
#include "fairgeo/prob.hpp"

namespace fairgeo {

inline constexpr double tol_orth = 1e-9;  // perturbation-set invariants
inline constexpr double tol_sv = 1e-9;    // singular-value branch classification

// One admissible perturbation family: P_{S|Y=y} = P_S + eps * [sqrt(P_S)] L_y.
// Invariants (checked where consumed, not on construction):
//   L_y  perpendicular to sqrt(P_S);  sum_y P_Y(y) L_y = 0;  |L_y|^2 <= 1.
struct PerturbationSet {
  ProbVector p_y;
  std::vector<Eigen::VectorXd> l_vectors;
  double epsilon = 0.0;
};

// Whitened inverse-channel maps, plus the cached pieces every consumer needs.
struct WMatrices {
  Eigen::MatrixXd w_ty;       // [sqrt(P_T)]^-1 P_{S|T}^-1 [sqrt(P_S)]
  Eigen::MatrixXd w_xy;       // [sqrt(P_X)]^-1 P_{T|X}^-1 P_{S|T}^-1 [sqrt(P_S)]
  Eigen::MatrixXd pst_inv;    // P_{S|T}^-1
  Eigen::MatrixXd chain_inv;  // P_{T|X}^-1 P_{S|T}^-1
  Eigen::VectorXd sqrt_p_s;
  Eigen::VectorXd sqrt_p_t;
  Eigen::VectorXd sqrt_p_x;
};

// Range of eps for which the quadratic picture is guaranteed applicable.
struct EpsilonBounds {
  double c1 = 0.0;
  double c2 = 0.0;
  double valid_epsilon_sup = 0.0;  // min(c1, c2)
};

struct SingularTriple {
  double sigma = 0.0;
  Eigen::VectorXd left;
  Eigen::VectorXd right;
};

inline WMatrices compute_w_matrices(const PriorInstance& prior) {
  WMatrices w;
  w.sqrt_p_s = prior.p_s.p.array().sqrt();
  w.sqrt_p_t = prior.p_t.p.array().sqrt();
  w.sqrt_p_x = prior.p_x.p.array().sqrt();
  if (min_singular_value(prior.p_s_given_t.m) <= tol_rank ||
      min_singular_value(prior.p_t_given_x.m) <= tol_rank)
    throw SingularChannel("cannot invert a numerically singular channel");
  w.pst_inv = prior.p_s_given_t.m.inverse();
  w.chain_inv = prior.p_t_given_x.m.inverse() * w.pst_inv;
  w.w_ty = w.sqrt_p_t.cwiseInverse().asDiagonal() * w.pst_inv * w.sqrt_p_s.asDiagonal();
  w.w_xy = w.sqrt_p_x.cwiseInverse().asDiagonal() * w.chain_inv * w.sqrt_p_s.asDiagonal();
  return w;
}

inline EpsilonBounds compute_epsilon_bounds(const PriorInstance& prior) {
  const Eigen::MatrixXd chain =
      prior.p_t_given_x.m.inverse() * prior.p_s_given_t.m.inverse();
  Eigen::JacobiSVD<Eigen::MatrixXd> chain_svd(chain);
  const double sigma_max_chain = chain_svd.singularValues()(0);
  const double sqrt_max_ps = std::sqrt(prior.p_s.p.maxCoeff());
  EpsilonBounds b;
  b.c1 = prior.p_x.p.minCoeff() / (sigma_max_chain * sqrt_max_ps);
  b.c2 = min_singular_value(prior.p_s_given_t.m) * prior.p_t.p.minCoeff() / sqrt_max_ps;
  b.valid_epsilon_sup = std::min(b.c1, b.c2);
  return b;
}

namespace detail {

// Largest-magnitude entry made positive; ties resolved by the first extremal index.
inline void canonicalize_sign(Eigen::VectorXd& v) {
  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  if (v(imax) < 0.0) v = -v;
}

}  // namespace detail

// Full SVD, sigma descending, right vectors sign-canonicalized.
inline std::vector<SingularTriple> singular_triples(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success)
    throw ConvergenceFailure("singular value decomposition did not converge");
  const Eigen::Index k = svd.singularValues().size();
  std::vector<SingularTriple> triples(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) {
    SingularTriple& t = triples[static_cast<std::size_t>(i)];
    t.sigma = svd.singularValues()(i);
    t.right = svd.matrixV().col(i);
    t.left = svd.matrixU().col(i);
    Eigen::Index imax = 0;
    t.right.cwiseAbs().maxCoeff(&imax);
    if (t.right(imax) < 0.0) {
      t.right = -t.right;
      t.left = -t.left;  // keep m * right == sigma * left
    }
  }
  return triples;
}

namespace detail {

inline void check_perturbation(const WMatrices& w, const PerturbationSet& pert) {
  const Eigen::Index ny = pert.p_y.size();
  if (static_cast<Eigen::Index>(pert.l_vectors.size()) != ny)
    throw DimensionMismatch("one direction vector per y outcome required");
  if (!(pert.epsilon > 0.0)) throw InvalidPerturbation("epsilon must be positive");
  if (!on_simplex(pert.p_y.p)) throw InvalidPerturbation("P_Y is off the simplex");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(w.sqrt_p_s.size());
  for (Eigen::Index y = 0; y < ny; ++y) {
    const Eigen::VectorXd& l = pert.l_vectors[static_cast<std::size_t>(y)];
    if (l.size() != w.sqrt_p_s.size())
      throw DimensionMismatch("direction vector dimension must match |S|");
    if (std::abs(l.dot(w.sqrt_p_s)) > tol_orth)
      throw InvalidPerturbation("a direction is not orthogonal to sqrt(P_S)");
    if (l.squaredNorm() > 1.0 + tol_orth)
      throw InvalidPerturbation("a direction exceeds the unit ball");
    mean += pert.p_y(y) * l;
  }
  if (mean.lpNorm<Eigen::Infinity>() > tol_orth)
    throw InvalidPerturbation("directions do not average to zero under P_Y");
}

inline double quadratic_form(const Eigen::MatrixXd& w_mat, const PerturbationSet& pert) {
  double acc = 0.0;
  for (Eigen::Index y = 0; y < pert.p_y.size(); ++y)
    acc += pert.p_y(y) * (w_mat * pert.l_vectors[static_cast<std::size_t>(y)]).squaredNorm();
  return 0.5 * pert.epsilon * pert.epsilon * acc;
}

}  // namespace detail

// Second-order approximation of I(T;Y) in nats: (eps^2/2) sum_y P_y |W_ty L_y|^2.
inline double approx_mi_ty(const WMatrices& w, const PerturbationSet& pert) {
  detail::check_perturbation(w, pert);
  return detail::quadratic_form(w.w_ty, pert);
}

// Second-order approximation of I(X;Y) in nats.
inline double approx_mi_xy(const WMatrices& w, const PerturbationSet& pert) {
  detail::check_perturbation(w, pert);
  return detail::quadratic_form(w.w_xy, pert);
}

struct PerturbationReport {
  bool orthogonal_ok = false;
  bool zero_mean_ok = false;
  bool norm_ok = false;
  bool positivity_ok = false;   // P_S + eps sqrt(P_S) L_y stays nonnegative
  double max_orth_residual = 0.0;
  double zero_mean_residual = 0.0;
  double max_norm_sq = 0.0;
  double min_reconstructed_mass = 0.0;

  bool all_ok() const { return orthogonal_ok && zero_mean_ok && norm_ok && positivity_ok; }
};

inline PerturbationReport validate_perturbation(const PerturbationSet& pert,
                                                const PriorInstance& prior) {
  const Eigen::VectorXd sqrt_p_s = prior.p_s.p.array().sqrt();
  const Eigen::Index ny = pert.p_y.size();
  if (static_cast<Eigen::Index>(pert.l_vectors.size()) != ny)
    throw DimensionMismatch("one direction vector per y outcome required");
  PerturbationReport rep;
  rep.min_reconstructed_mass = 1.0;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(sqrt_p_s.size());
  for (Eigen::Index y = 0; y < ny; ++y) {
    const Eigen::VectorXd& l = pert.l_vectors[static_cast<std::size_t>(y)];
    if (l.size() != sqrt_p_s.size())
      throw DimensionMismatch("direction vector dimension must match |S|");
    rep.max_orth_residual = std::max(rep.max_orth_residual, std::abs(l.dot(sqrt_p_s)));
    rep.max_norm_sq = std::max(rep.max_norm_sq, l.squaredNorm());
    mean += pert.p_y(y) * l;
    const Eigen::VectorXd reconstructed =
        prior.p_s.p + pert.epsilon * sqrt_p_s.cwiseProduct(l);
    rep.min_reconstructed_mass = std::min(rep.min_reconstructed_mass, reconstructed.minCoeff());
  }
  rep.zero_mean_residual = mean.lpNorm<Eigen::Infinity>();
  rep.orthogonal_ok = rep.max_orth_residual <= tol_orth;
  rep.zero_mean_ok = rep.zero_mean_residual <= tol_orth;
  rep.norm_ok = rep.max_norm_sq <= 1.0 + tol_orth;
  rep.positivity_ok = rep.min_reconstructed_mass >= -tol_simplex;
  return rep;
}

}  // namespace fairgeo
