// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairgeo/errors.hpp"
#include "fairgeo/prob.hpp"

namespace fairgeo {

struct OracleSettings {
  int grid_points = 201;
  int y_cardinality = 2;
  bool chi2 = true;
  bool eo = true;
};

struct ExperimentConfig {
  PriorInstance prior;
  std::vector<double> epsilon_values;
  double rate_budget = 0.0;
  OracleSettings oracle;
  std::uint64_t seed = 42;
  std::string out_dir = ".";
};

// The built-in instance: a 2x2x2 chain with both channels invertible and a
// skewed data marginal, swept over the high-privacy band at a 0.2-nat rate cap.
inline ExperimentConfig default_config() {
  ExperimentConfig cfg;
  ChannelMatrix p_s_given_t;
  p_s_given_t.m.resize(2, 2);
  p_s_given_t.m << 0.5, 0.2, 0.5, 0.8;
  ChannelMatrix p_t_given_x;
  p_t_given_x.m.resize(2, 2);
  p_t_given_x.m << 0.25, 0.4, 0.75, 0.6;
  ProbVector p_x;
  p_x.p.resize(2);
  p_x.p << 0.25, 0.75;
  cfg.prior = validate_prior(p_s_given_t, p_t_given_x, p_x);
  cfg.epsilon_values = {0.005, 0.010, 0.015, 0.020, 0.025,
                        0.030, 0.035, 0.040, 0.045, 0.050};
  cfg.rate_budget = 0.2;
  return cfg;
}

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& j, const char* field) {
  if (!j.contains(field)) throw ConfigError(std::string(field) + ": required field is missing");
  return j.at(field);
}

inline double require_number(const nlohmann::json& j, const std::string& field) {
  if (!j.is_number()) throw ConfigError(field + ": expected a number");
  return j.get<double>();
}

inline Eigen::MatrixXd parse_row_major(const nlohmann::json& j, Eigen::Index dim,
                                       const std::string& field) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != dim * dim)
    throw ConfigError(field + ": expected a flat row-major array of length dim*dim");
  Eigen::MatrixXd m(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r)
    for (Eigen::Index c = 0; c < dim; ++c)
      m(r, c) = require_number(j.at(static_cast<std::size_t>(r * dim + c)), field);
  return m;
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  ExperimentConfig cfg;

  const nlohmann::json& prior = detail::require_field(j, "prior");
  const nlohmann::json& dim_j = detail::require_field(prior, "dim");
  if (!dim_j.is_number_integer() || dim_j.get<std::int64_t>() < 2)
    throw ConfigError("prior.dim: expected an integer >= 2");
  const auto dim = static_cast<Eigen::Index>(dim_j.get<std::int64_t>());

  ChannelMatrix p_s_given_t{detail::parse_row_major(detail::require_field(prior, "p_s_given_t"),
                                                    dim, "prior.p_s_given_t")};
  ChannelMatrix p_t_given_x{detail::parse_row_major(detail::require_field(prior, "p_t_given_x"),
                                                    dim, "prior.p_t_given_x")};
  const nlohmann::json& p_x_j = detail::require_field(prior, "p_x");
  if (!p_x_j.is_array() || static_cast<Eigen::Index>(p_x_j.size()) != dim)
    throw ConfigError("prior.p_x: expected an array of length dim");
  ProbVector p_x;
  p_x.p.resize(dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    p_x.p(i) = detail::require_number(p_x_j.at(static_cast<std::size_t>(i)), "prior.p_x");
  try {
    cfg.prior = validate_prior(p_s_given_t, p_t_given_x, p_x);
  } catch (const Error& e) {
    throw ConfigError(std::string("prior: ") + e.what());
  }

  const nlohmann::json& eps_j = detail::require_field(j, "epsilon_values");
  if (!eps_j.is_array() || eps_j.empty())
    throw ConfigError("epsilon_values: expected a non-empty array");
  double prev = 0.0;
  for (const auto& e : eps_j) {
    const double v = detail::require_number(e, "epsilon_values");
    if (!(v > 0.0)) throw ConfigError("epsilon_values: entries must be strictly positive");
    if (!(v > prev))
      throw ConfigError("epsilon_values: entries must be strictly ascending");
    prev = v;
    cfg.epsilon_values.push_back(v);
  }

  cfg.rate_budget = detail::require_number(detail::require_field(j, "rate_budget"), "rate_budget");
  if (!(cfg.rate_budget > 0.0)) throw ConfigError("rate_budget: must be strictly positive");

  if (j.contains("oracle")) {
    const nlohmann::json& o = j.at("oracle");
    if (o.contains("grid_points")) {
      if (!o.at("grid_points").is_number_integer() || o.at("grid_points").get<std::int64_t>() < 2)
        throw ConfigError("oracle.grid_points: expected an integer >= 2");
      cfg.oracle.grid_points = o.at("grid_points").get<int>();
    }
    if (o.contains("y_cardinality")) {
      if (!o.at("y_cardinality").is_number_integer() ||
          o.at("y_cardinality").get<std::int64_t>() < 2)
        throw ConfigError("oracle.y_cardinality: expected an integer >= 2");
      cfg.oracle.y_cardinality = o.at("y_cardinality").get<int>();
    }
    if (o.contains("chi2")) {
      if (!o.at("chi2").is_boolean()) throw ConfigError("oracle.chi2: expected a boolean");
      cfg.oracle.chi2 = o.at("chi2").get<bool>();
    }
    if (o.contains("eo")) {
      if (!o.at("eo").is_boolean()) throw ConfigError("oracle.eo: expected a boolean");
      cfg.oracle.eo = o.at("eo").get<bool>();
    }
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
      throw ConfigError("seed: expected an unsigned integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("out_dir")) {
    if (!j.at("out_dir").is_string()) throw ConfigError("out_dir: expected a string");
    cfg.out_dir = j.at("out_dir").get<std::string>();
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not readable: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

// Effective configuration, serialized for the summary echo.
inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  const Eigen::Index dim = cfg.prior.dim();
  std::vector<double> pst, ptx, px;
  for (Eigen::Index r = 0; r < dim; ++r)
    for (Eigen::Index c = 0; c < dim; ++c) pst.push_back(cfg.prior.p_s_given_t(r, c));
  for (Eigen::Index r = 0; r < dim; ++r)
    for (Eigen::Index c = 0; c < dim; ++c) ptx.push_back(cfg.prior.p_t_given_x(r, c));
  for (Eigen::Index i = 0; i < dim; ++i) px.push_back(cfg.prior.p_x(i));
  j["prior"] = {{"dim", dim},
                {"p_s_given_t", pst},
                {"p_t_given_x", ptx},
                {"p_x", px}};
  j["epsilon_values"] = cfg.epsilon_values;
  j["rate_budget"] = cfg.rate_budget;
  j["oracle"] = {{"grid_points", cfg.oracle.grid_points},
                 {"y_cardinality", cfg.oracle.y_cardinality},
                 {"chi2", cfg.oracle.chi2},
                 {"eo", cfg.oracle.eo}};
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  return j;
}

}  // namespace fairgeo
