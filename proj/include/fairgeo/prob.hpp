// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fairgeo/errors.hpp"

namespace fairgeo {

inline constexpr double tol_simplex = 1e-9;   // stochasticity
inline constexpr double tol_rank = 1e-10;     // invertibility (smallest singular value)
inline constexpr double zero_mass = 1e-12;    // "strictly positive" threshold

// Discrete distribution. Kept as a plain aggregate; validity is checked at the
// API boundaries (validate_prior etc.), so invalid vectors remain constructible
// for negative tests and report-style checks.
struct ProbVector {
  Eigen::VectorXd p;
  std::vector<std::string> labels;  // optional coordinate names

  Eigen::Index size() const { return p.size(); }
  double operator()(Eigen::Index i) const { return p(i); }
};

inline bool on_simplex(const Eigen::VectorXd& v, double tol = tol_simplex) {
  if (v.size() == 0) return false;
  if ((v.array() < 0.0).any()) return false;
  return std::abs(v.sum() - 1.0) <= tol;
}

// Conditional distribution P_{Out|In}: rows index the output alphabet,
// columns the input alphabet; every column lies on the simplex.
struct ChannelMatrix {
  Eigen::MatrixXd m;

  Eigen::Index n_out() const { return m.rows(); }
  Eigen::Index n_in() const { return m.cols(); }
  double operator()(Eigen::Index out, Eigen::Index in) const { return m(out, in); }
};

inline bool column_stochastic(const Eigen::MatrixXd& m, double tol = tol_simplex) {
  if (m.size() == 0) return false;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (!on_simplex(m.col(c), tol)) return false;
  }
  return true;
}

inline double min_singular_value(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

// The S-T-X chain: P_{S|T}, P_{T|X} (both square and invertible), P_X, and the
// induced marginals P_T, P_S. Construct through validate_prior.
struct PriorInstance {
  ChannelMatrix p_s_given_t;
  ChannelMatrix p_t_given_x;
  ProbVector p_x;
  ProbVector p_t;  // derived: p_t_given_x * p_x
  ProbVector p_s;  // derived: p_s_given_t * p_t

  Eigen::Index dim() const { return p_x.size(); }
};

inline PriorInstance validate_prior(const ChannelMatrix& p_s_given_t,
                                    const ChannelMatrix& p_t_given_x,
                                    const ProbVector& p_x) {
  const Eigen::Index n = p_x.size();
  if (p_s_given_t.n_out() != p_s_given_t.n_in() || p_t_given_x.n_out() != p_t_given_x.n_in())
    throw DimensionMismatch("channel matrices must be square");
  if (p_s_given_t.n_in() != n || p_t_given_x.n_in() != n)
    throw DimensionMismatch("channel dimensions must match the input distribution");
  if (!on_simplex(p_x.p)) throw NotStochastic("input distribution is off the simplex");
  if (!column_stochastic(p_s_given_t.m))
    throw NotStochastic("first channel has a column off the simplex");
  if (!column_stochastic(p_t_given_x.m))
    throw NotStochastic("second channel has a column off the simplex");
  if (min_singular_value(p_s_given_t.m) <= tol_rank)
    throw SingularChannel("first channel is numerically singular");
  if (min_singular_value(p_t_given_x.m) <= tol_rank)
    throw SingularChannel("second channel is numerically singular");

  PriorInstance prior;
  prior.p_s_given_t = p_s_given_t;
  prior.p_t_given_x = p_t_given_x;
  prior.p_x = p_x;
  prior.p_t.p = p_t_given_x.m * p_x.p;
  prior.p_s.p = p_s_given_t.m * prior.p_t.p;
  for (const auto* marg : {&prior.p_x.p, &prior.p_t.p, &prior.p_s.p}) {
    if ((marg->array() < zero_mass).any())
      throw ZeroMassMarginal("a marginal has (near-)zero mass; every later division needs it positive");
  }
  return prior;
}

enum class Var { S = 0, T = 1, X = 2, Y = 3 };

// Joint distribution over (S, T, X, Y), stored flat with y fastest.
struct JointSTXY {
  std::array<Eigen::Index, 4> dims{};
  std::vector<double> p;

  double& at(Eigen::Index s, Eigen::Index t, Eigen::Index x, Eigen::Index y) {
    return p[((s * dims[1] + t) * dims[2] + x) * dims[3] + y];
  }
  double at(Eigen::Index s, Eigen::Index t, Eigen::Index x, Eigen::Index y) const {
    return p[((s * dims[1] + t) * dims[2] + x) * dims[3] + y];
  }
  Eigen::Index dim(Var v) const { return dims[static_cast<std::size_t>(v)]; }
};

namespace detail {

// Fills an existing tensor; the oracle's hot loop reuses one allocation.
inline void build_joint_into(const PriorInstance& prior, const ChannelMatrix& mechanism,
                             JointSTXY& joint) {
  const Eigen::Index n = prior.dim();
  if (mechanism.n_in() != n)
    throw DimensionMismatch("mechanism must have one column per input symbol");
  const Eigen::Index ny = mechanism.n_out();
  joint.dims = {n, n, n, ny};
  joint.p.assign(static_cast<std::size_t>(n * n * n * ny), 0.0);
  for (Eigen::Index t = 0; t < n; ++t) {
    for (Eigen::Index x = 0; x < n; ++x) {
      const double tx = prior.p_t_given_x(t, x) * prior.p_x(x);
      if (tx == 0.0) continue;
      for (Eigen::Index s = 0; s < n; ++s) {
        const double stx = prior.p_s_given_t(s, t) * tx;
        for (Eigen::Index y = 0; y < ny; ++y) {
          joint.at(s, t, x, y) = stx * mechanism(y, x);
        }
      }
    }
  }
}

}  // namespace detail

inline JointSTXY build_joint(const PriorInstance& prior, const ChannelMatrix& mechanism) {
  JointSTXY joint;
  detail::build_joint_into(prior, mechanism, joint);
  return joint;
}

// I(A;B) in nats over a pair of the four coordinates; 0 log 0 = 0.
inline double mutual_information(const JointSTXY& joint, Var var_a, Var var_b) {
  if (var_a == var_b) throw DimensionMismatch("mutual information needs two distinct variables");
  const auto a = static_cast<std::size_t>(var_a);
  const auto b = static_cast<std::size_t>(var_b);
  const Eigen::Index na = joint.dims[a], nb = joint.dims[b];
  Eigen::MatrixXd pab = Eigen::MatrixXd::Zero(na, nb);
  std::array<Eigen::Index, 4> idx{};
  for (idx[0] = 0; idx[0] < joint.dims[0]; ++idx[0])
    for (idx[1] = 0; idx[1] < joint.dims[1]; ++idx[1])
      for (idx[2] = 0; idx[2] < joint.dims[2]; ++idx[2])
        for (idx[3] = 0; idx[3] < joint.dims[3]; ++idx[3])
          pab(idx[a], idx[b]) += joint.at(idx[0], idx[1], idx[2], idx[3]);
  const Eigen::VectorXd pa = pab.rowwise().sum();
  const Eigen::VectorXd pb = pab.colwise().sum();
  double mi = 0.0;
  for (Eigen::Index i = 0; i < na; ++i)
    for (Eigen::Index j = 0; j < nb; ++j)
      if (pab(i, j) > 0.0) mi += pab(i, j) * std::log(pab(i, j) / (pa(i) * pb(j)));
  return mi;
}

// I(Y;S|T) in nats.
inline double conditional_mutual_information(const JointSTXY& joint) {
  const Eigen::Index ns = joint.dims[0], nt = joint.dims[1], nx = joint.dims[2], ny = joint.dims[3];
  // Marginalize X away once.
  std::vector<double> sty(static_cast<std::size_t>(ns * nt * ny), 0.0);
  auto at_sty = [&](Eigen::Index s, Eigen::Index t, Eigen::Index y) -> double& {
    return sty[(s * nt + t) * ny + y];
  };
  for (Eigen::Index s = 0; s < ns; ++s)
    for (Eigen::Index t = 0; t < nt; ++t)
      for (Eigen::Index x = 0; x < nx; ++x)
        for (Eigen::Index y = 0; y < ny; ++y) at_sty(s, t, y) += joint.at(s, t, x, y);
  Eigen::MatrixXd pst = Eigen::MatrixXd::Zero(ns, nt);
  Eigen::MatrixXd pty = Eigen::MatrixXd::Zero(nt, ny);
  Eigen::VectorXd pt = Eigen::VectorXd::Zero(nt);
  for (Eigen::Index s = 0; s < ns; ++s)
    for (Eigen::Index t = 0; t < nt; ++t)
      for (Eigen::Index y = 0; y < ny; ++y) {
        const double v = at_sty(s, t, y);
        pst(s, t) += v;
        pty(t, y) += v;
        pt(t) += v;
      }
  double cmi = 0.0;
  for (Eigen::Index s = 0; s < ns; ++s)
    for (Eigen::Index t = 0; t < nt; ++t)
      for (Eigen::Index y = 0; y < ny; ++y) {
        const double v = at_sty(s, t, y);
        if (v > 0.0) cmi += v * std::log(v * pt(t) / (pst(s, t) * pty(t, y)));
      }
  return cmi;
}

// chi^2(p_cond; p_ref) = sum_i (p_cond_i - p_ref_i)^2 / p_ref_i.
inline double chi_square_pointwise(const ProbVector& p_cond, const ProbVector& p_ref) {
  if (p_cond.size() != p_ref.size())
    throw DimensionMismatch("chi-square needs distributions of equal dimension");
  if ((p_ref.p.array() < zero_mass).any())
    throw ZeroMassReference("chi-square reference must be strictly positive");
  const Eigen::ArrayXd d = p_cond.p.array() - p_ref.p.array();
  return (d * d / p_ref.p.array()).sum();
}

inline double kl_divergence(const ProbVector& p, const ProbVector& q) {
  if (p.size() != q.size())
    throw DimensionMismatch("KL divergence needs distributions of equal dimension");
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > 0.0) {
      if (q(i) <= 0.0)
        throw AbsoluteContinuityViolation("KL divergence: q vanishes where p has mass");
      kl += p(i) * std::log(p(i) / q(i));
    }
  }
  return kl;
}

// Given P_{A|B} and P_B, returns (P_{B|A}, P_A).
inline std::pair<ChannelMatrix, ProbVector> bayes_invert(const ChannelMatrix& channel,
                                                         const ProbVector& p_b) {
  if (channel.n_in() != p_b.size())
    throw DimensionMismatch("bayes_invert: channel columns must match the input distribution");
  ProbVector p_a;
  p_a.p = channel.m * p_b.p;
  if ((p_a.p.array() < zero_mass).any())
    throw ZeroMassOutput("bayes_invert: an output symbol has zero mass");
  ChannelMatrix reverse;
  reverse.m.resize(channel.n_in(), channel.n_out());
  for (Eigen::Index a = 0; a < channel.n_out(); ++a)
    for (Eigen::Index b = 0; b < channel.n_in(); ++b)
      reverse.m(b, a) = channel(a, b) * p_b(b) / p_a(a);
  return {reverse, p_a};
}

}  // namespace fairgeo
