// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <random>

#include "fairgeo/errors.hpp"
#include "fairgeo/geometry.hpp"
#include "fairgeo/prob.hpp"

namespace fairgeo {

// Canonical double in [0,1) from the full 64-bit stream; identical across
// standard libraries, unlike std::uniform_real_distribution.
inline double canonical_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline ProbVector random_interior_simplex(Eigen::Index n, std::mt19937_64& rng,
                                          double min_mass = 0.05) {
  ProbVector v;
  v.p.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) v.p(i) = min_mass + canonical_uniform(rng);
  v.p /= v.p.sum();
  return v;
}

// Column-stochastic, entries bounded away from zero, resampled until the
// matrix is comfortably invertible so downstream inverses stay well scaled.
inline ChannelMatrix random_stochastic_invertible(Eigen::Index n, std::mt19937_64& rng) {
  ChannelMatrix ch;
  ch.m.resize(n, n);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    for (Eigen::Index c = 0; c < n; ++c) {
      for (Eigen::Index r = 0; r < n; ++r) ch.m(r, c) = 0.1 + canonical_uniform(rng);
      ch.m.col(c) /= ch.m.col(c).sum();
    }
    if (min_singular_value(ch.m) > 0.05) return ch;
  }
  throw ConvergenceFailure("could not sample a well-conditioned stochastic matrix");
}

inline PriorInstance random_prior(Eigen::Index n, std::mt19937_64& rng) {
  const ChannelMatrix p_s_given_t = random_stochastic_invertible(n, rng);
  const ChannelMatrix p_t_given_x = random_stochastic_invertible(n, rng);
  const ProbVector p_x = random_interior_simplex(n, rng);
  return validate_prior(p_s_given_t, p_t_given_x, p_x);
}

inline ChannelMatrix random_mechanism(Eigen::Index n_y, Eigen::Index n_x,
                                      std::mt19937_64& rng) {
  ChannelMatrix ch;
  ch.m.resize(n_y, n_x);
  for (Eigen::Index c = 0; c < n_x; ++c) {
    for (Eigen::Index r = 0; r < n_y; ++r) ch.m(r, c) = 0.01 + canonical_uniform(rng);
    ch.m.col(c) /= ch.m.col(c).sum();
  }
  return ch;
}

// A perturbation family satisfying all three constraints with norms <= 0.9:
// Gaussian-free construction via projection onto the complement of sqrt(P_S)
// followed by removal of the P_Y-weighted mean.
inline PerturbationSet random_feasible_perturbation(const PriorInstance& prior,
                                                    Eigen::Index n_y, double epsilon,
                                                    std::mt19937_64& rng) {
  const Eigen::VectorXd sqrt_p_s = prior.p_s.p.array().sqrt();
  const Eigen::Index n = prior.dim();
  for (int attempt = 0; attempt < 100; ++attempt) {
    PerturbationSet pert;
    pert.epsilon = epsilon;
    pert.p_y = random_interior_simplex(n_y, rng, 0.1);
    pert.l_vectors.resize(static_cast<std::size_t>(n_y));
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    for (Eigen::Index y = 0; y < n_y; ++y) {
      Eigen::VectorXd l(n);
      for (Eigen::Index i = 0; i < n; ++i) l(i) = canonical_uniform(rng) - 0.5;
      l -= l.dot(sqrt_p_s) * sqrt_p_s;  // sqrt(P_S) is unit
      pert.l_vectors[static_cast<std::size_t>(y)] = l;
      mean += pert.p_y(y) * l;
    }
    double max_norm = 0.0;
    for (Eigen::Index y = 0; y < n_y; ++y) {
      pert.l_vectors[static_cast<std::size_t>(y)] -= mean;
      max_norm = std::max(max_norm, pert.l_vectors[static_cast<std::size_t>(y)].norm());
    }
    if (max_norm < 1e-8) continue;
    for (auto& l : pert.l_vectors) l *= 0.9 / std::max(max_norm, 0.9);
    return pert;
  }
  throw ConvergenceFailure("could not sample a non-degenerate perturbation family");
}

}  // namespace fairgeo
