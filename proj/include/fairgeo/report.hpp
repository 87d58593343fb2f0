// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairgeo/config.hpp"
#include "fairgeo/errors.hpp"
#include "fairgeo/geometry.hpp"

namespace fairgeo {

// Machine formats carry full precision; human reports round to 6 digits.
inline std::string format_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_human(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct SweepRow {
  double epsilon = 0.0;
  double p2_bound = 0.0;
  std::optional<double> exact_utility_of_design;  // empty: design not realizable
  std::optional<double> oracle_chi2;              // empty: oracle disabled
  std::optional<double> oracle_eo;
  double k_constant = 1.0;
  bool within_validity = false;  // epsilon < min(c1, c2)
};

inline constexpr const char* sweep_csv_header =
    "epsilon,p2_bound,exact_utility_of_design,oracle_chi2,oracle_eo,k_constant,within_validity";

inline std::string render_sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << sweep_csv_header << '\n';
  auto cell = [](const std::optional<double>& v) { return v ? format_full(*v) : std::string(); };
  for (const SweepRow& r : rows) {
    out << format_full(r.epsilon) << ',' << format_full(r.p2_bound) << ','
        << cell(r.exact_utility_of_design) << ',' << cell(r.oracle_chi2) << ','
        << cell(r.oracle_eo) << ',' << format_full(r.k_constant) << ','
        << (r.within_validity ? 1 : 0) << '\n';
  }
  return out.str();
}

inline nlohmann::json sweep_summary_json(const ExperimentConfig& cfg, const EpsilonBounds& bounds,
                                         const std::vector<SweepRow>& rows) {
  nlohmann::json j;
  j["config"] = config_to_json(cfg);
  j["c1"] = bounds.c1;
  j["c2"] = bounds.c2;
  j["valid_epsilon_sup"] = bounds.valid_epsilon_sup;
  j["rows"] = nlohmann::json::array();
  for (const SweepRow& r : rows) {
    nlohmann::json row;
    row["epsilon"] = r.epsilon;
    row["p2_bound"] = r.p2_bound;
    if (r.exact_utility_of_design) row["exact_utility_of_design"] = *r.exact_utility_of_design;
    if (r.oracle_chi2) row["oracle_chi2"] = *r.oracle_chi2;
    if (r.oracle_eo) row["oracle_eo"] = *r.oracle_eo;
    row["k_constant"] = r.k_constant;
    row["within_validity"] = r.within_validity;
    j["rows"].push_back(row);
  }
  return j;
}

namespace detail {

struct Series {
  const char* label;
  const char* color;
  std::vector<std::pair<double, double>> points;  // (epsilon, value)
};

}  // namespace detail

// Self-contained line chart, fixed 800x500 canvas, linear axes. Utility-valued
// columns only: the scale constant and the validity flag live in CSV/JSON.
inline std::string render_sweep_svg(const std::vector<SweepRow>& rows) {
  constexpr double width = 800, height = 500;
  constexpr double ml = 80, mr = 180, mt = 20, mb = 55;
  std::vector<detail::Series> series = {
      {"p2_bound", "#1f77b4", {}},
      {"exact_utility_of_design", "#2ca02c", {}},
      {"oracle_chi2", "#d62728", {}},
      {"oracle_eo", "#9467bd", {}},
  };
  double x_min = 0, x_max = 1, y_max = 0;
  bool any = false;
  for (const SweepRow& r : rows) {
    auto add = [&](std::size_t k, const std::optional<double>& v) {
      if (v) {
        series[k].points.emplace_back(r.epsilon, *v);
        y_max = std::max(y_max, *v);
      }
    };
    series[0].points.emplace_back(r.epsilon, r.p2_bound);
    y_max = std::max(y_max, r.p2_bound);
    add(1, r.exact_utility_of_design);
    add(2, r.oracle_chi2);
    add(3, r.oracle_eo);
    x_min = any ? std::min(x_min, r.epsilon) : r.epsilon;
    x_max = any ? std::max(x_max, r.epsilon) : r.epsilon;
    any = true;
  }
  if (!any) {
    x_min = 0;
    x_max = 1;
  }
  if (x_max <= x_min) x_max = x_min + 1;
  if (y_max <= 0) y_max = 1;
  y_max *= 1.05;

  auto sx = [&](double e) { return ml + (e - x_min) / (x_max - x_min) * (width - ml - mr); };
  auto sy = [&](double v) { return height - mb - v / y_max * (height - mt - mb); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" "
         "viewBox=\"0 0 800 500\">\n";
  svg << "<rect width=\"800\" height=\"500\" fill=\"white\"/>\n";
  // axes
  svg << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
      << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << height - mb << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xe = x_min + (x_max - x_min) * i / 5.0;
    const double ye = y_max * i / 5.0;
    svg << "<line x1=\"" << sx(xe) << "\" y1=\"" << height - mb << "\" x2=\"" << sx(xe)
        << "\" y2=\"" << height - mb + 5 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << sx(xe) << "\" y=\"" << height - mb + 20
        << "\" font-size=\"12\" text-anchor=\"middle\">" << format_human(xe) << "</text>\n";
    svg << "<line x1=\"" << ml - 5 << "\" y1=\"" << sy(ye) << "\" x2=\"" << ml << "\" y2=\""
        << sy(ye) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << ml - 8 << "\" y=\"" << sy(ye) + 4
        << "\" font-size=\"12\" text-anchor=\"end\">" << format_human(ye) << "</text>\n";
  }
  svg << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 12
      << "\" font-size=\"14\" text-anchor=\"middle\">epsilon</text>\n";
  svg << "<text x=\"18\" y=\"" << (mt + height - mb) / 2
      << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << (mt + height - mb) / 2 << ")\">utility (nats)</text>\n";

  double legend_y = mt + 14;
  for (const detail::Series& s : series) {
    if (s.points.empty()) continue;
    svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [e, v] : s.points) svg << sx(e) << ',' << sy(v) << ' ';
    svg << "\"/>\n";
    for (const auto& [e, v] : s.points)
      svg << "<circle cx=\"" << sx(e) << "\" cy=\"" << sy(v) << "\" r=\"3\" fill=\"" << s.color
          << "\"/>\n";
    svg << "<line x1=\"" << width - mr + 10 << "\" y1=\"" << legend_y << "\" x2=\""
        << width - mr + 34 << "\" y2=\"" << legend_y << "\" stroke=\"" << s.color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << width - mr + 40 << "\" y=\"" << legend_y + 4
        << "\" font-size=\"12\">" << s.label << "</text>\n";
    legend_y += 20;
  }
  svg << "</svg>\n";
  return svg.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file: " + path.string());
  out << content;
  if (!out) throw ConfigError("failed writing output file: " + path.string());
}

}  // namespace fairgeo
