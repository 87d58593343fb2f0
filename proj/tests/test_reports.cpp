// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fairgeo/driver.hpp"

using namespace fairgeo;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fairgeo_tests_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

ExperimentConfig small_config() {
  ExperimentConfig cfg = default_config();
  cfg.epsilon_values = {0.01, 0.02, 0.05};
  cfg.oracle.grid_points = 21;
  return cfg;
}

}  // namespace

TEST_CASE("numeric formatting") {
  SECTION("full precision survives a parse round trip") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e-17, 0.30875, 3.2033596479840516}) {
      const std::string s = format_full(v);
      CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
  }
  SECTION("human format rounds to six significant digits") {
    CHECK(format_human(0.123456789) == "0.123457");
    CHECK(format_human(1.2826891292915636e-4) == "0.000128269");
    CHECK(format_human(1.0) == "1");
  }
}

TEST_CASE("sweep CSV rendering") {
  std::vector<SweepRow> rows(2);
  rows[0] = {0.005, 1.2826891292915636e-4, 1.282762e-4, 1.248e-4, 4.22e-3, 1.0, true};
  rows[1] = {0.05, 3.65e-3, std::nullopt, std::nullopt, std::nullopt, 1.87, false};
  const std::string csv = render_sweep_csv(rows);
  const auto lines = split(csv, '\n');

  REQUIRE(lines.size() == 4);  // header, two rows, trailing empty
  CHECK(lines[0] ==
        "epsilon,p2_bound,exact_utility_of_design,oracle_chi2,oracle_eo,k_constant,"
        "within_validity");
  CHECK(lines[3].empty());

  const auto f0 = split(lines[1], ',');
  REQUIRE(f0.size() == 7);
  CHECK(std::strtod(f0[1].c_str(), nullptr) == rows[0].p2_bound);
  CHECK(std::strtod(f0[2].c_str(), nullptr) == *rows[0].exact_utility_of_design);
  CHECK(f0[6] == "1");

  const auto f1 = split(lines[2], ',');
  REQUIRE(f1.size() == 7);
  CHECK(f1[2].empty());
  CHECK(f1[3].empty());
  CHECK(f1[4].empty());
  CHECK(f1[6] == "0");

  CHECK(render_sweep_csv(rows) == csv);  // byte-stable
}

TEST_CASE("sweep summary JSON") {
  const ExperimentConfig cfg = small_config();
  const EpsilonBounds bounds = compute_epsilon_bounds(cfg.prior);
  std::vector<SweepRow> rows(2);
  rows[0] = {0.01, 5.1e-4, 5.13e-4, 4.99e-4, 4.22e-3, 1.0, true};
  rows[1] = {0.05, 3.65e-3, std::nullopt, std::nullopt, std::nullopt, 1.87, false};
  const nlohmann::json j = sweep_summary_json(cfg, bounds, rows);

  CHECK(j.at("c1").get<double>() == bounds.c1);
  CHECK(j.at("config").at("rate_budget").get<double>() == 0.2);
  REQUIRE(j.at("rows").size() == 2);
  CHECK(j.at("rows").at(0).at("exact_utility_of_design").get<double>() == 5.13e-4);
  CHECK_FALSE(j.at("rows").at(1).contains("exact_utility_of_design"));
  CHECK_FALSE(j.at("rows").at(1).contains("oracle_chi2"));
  CHECK(j.at("rows").at(1).at("within_validity").get<bool>() == false);
}

TEST_CASE("sweep SVG rendering") {
  std::vector<SweepRow> rows(3);
  rows[0] = {0.01, 5.1e-4, 5.13e-4, 4.99e-4, 4.22e-3, 1.0, true};
  rows[1] = {0.02, 2.05e-3, 2.05e-3, 2.03e-3, 4.22e-3, 1.0, false};
  rows[2] = {0.05, 3.65e-3, std::nullopt, std::nullopt, 4.22e-3, 1.87, false};
  const std::string svg = render_sweep_svg(rows);

  CHECK_THAT(svg, ContainsSubstring("<svg"));
  CHECK_THAT(svg, ContainsSubstring("width=\"800\" height=\"500\""));
  CHECK_THAT(svg, ContainsSubstring("<polyline"));
  CHECK_THAT(svg, ContainsSubstring(">epsilon</text>"));
  CHECK_THAT(svg, ContainsSubstring("utility (nats)"));
  for (const char* label : {"p2_bound", "exact_utility_of_design", "oracle_chi2", "oracle_eo"})
    CHECK_THAT(svg, ContainsSubstring(std::string(">") + label + "</text>"));
  CHECK_THAT(svg, !ContainsSubstring("nan"));

  // points drawn: 3 + 2 + 2 + 3 circles
  std::size_t circles = 0, pos = 0;
  while ((pos = svg.find("<circle", pos)) != std::string::npos) {
    ++circles;
    pos += 7;
  }
  CHECK(circles == 10);

  CHECK_THAT(render_sweep_svg({}), ContainsSubstring("</svg>"));  // no rows: still valid
}

TEST_CASE("config parsing") {
  SECTION("round trip through the JSON echo") {
    const ExperimentConfig cfg = small_config();
    const ExperimentConfig back = parse_config(config_to_json(cfg));
    CHECK(back.prior.p_s_given_t.m == cfg.prior.p_s_given_t.m);
    CHECK(back.prior.p_t_given_x.m == cfg.prior.p_t_given_x.m);
    CHECK(back.prior.p_x.p == cfg.prior.p_x.p);
    CHECK(back.epsilon_values == cfg.epsilon_values);
    CHECK(back.rate_budget == cfg.rate_budget);
    CHECK(back.oracle.grid_points == cfg.oracle.grid_points);
    CHECK(back.seed == cfg.seed);
  }

  SECTION("errors name the offending field") {
    const nlohmann::json good = config_to_json(small_config());

    nlohmann::json j = good;
    j.erase("prior");
    CHECK_THROWS_WITH(parse_config(j), ContainsSubstring("prior"));

    j = good;
    j["prior"].erase("p_x");
    CHECK_THROWS_WITH(parse_config(j), ContainsSubstring("p_x"));

    j = good;
    j["prior"]["p_x"] = {0.5, 0.6};
    CHECK_THROWS_WITH(parse_config(j), ContainsSubstring("prior:"));

    j = good;
    j["prior"]["p_s_given_t"] = {0.5, 0.2, 0.5};
    CHECK_THROWS_WITH(parse_config(j), ContainsSubstring("p_s_given_t"));

    j = good;
    j["epsilon_values"] = {0.02, 0.01};
    CHECK_THROWS_WITH(parse_config(j), ContainsSubstring("ascending"));

    j = good;
    j["epsilon_values"] = {-0.01, 0.02};
    CHECK_THROWS_WITH(parse_config(j), ContainsSubstring("positive"));

    j = good;
    j.erase("rate_budget");
    CHECK_THROWS_WITH(parse_config(j), ContainsSubstring("rate_budget"));

    j = good;
    j["oracle"]["grid_points"] = 1;
    CHECK_THROWS_WITH(parse_config(j), ContainsSubstring("grid_points"));

    j = good;
    j["seed"] = "forty-two";
    CHECK_THROWS_WITH(parse_config(j), ContainsSubstring("seed"));

    CHECK_NOTHROW(parse_config(good));
  }

  SECTION("file loading") {
    CHECK_THROWS_AS(load_config("/nonexistent/path.json"), ConfigError);
    const fs::path dir = fresh_dir("cfg");
    write_text_file(dir / "bad.json", "{not json");
    CHECK_THROWS_WITH(load_config((dir / "bad.json").string()),
                      ContainsSubstring("not valid JSON"));
    write_text_file(dir / "good.json", config_to_json(small_config()).dump());
    CHECK(load_config((dir / "good.json").string()).rate_budget == 0.2);
  }
}

TEST_CASE("exit code mapping") {
  CHECK(exit_code_for_exception(ConfigError("bad config")) == 1);
  CHECK(exit_code_for_exception(AcceptanceDeviation("value drifted")) == 2);
  CHECK(exit_code_for_exception(NumericalError("blew up")) == 3);
  CHECK(exit_code_for_exception(InvalidReconstruction("off simplex")) == 3);
  CHECK(exit_code_for_exception(DimensionMismatch("wrong size")) == 3);
  CHECK(exit_code_for_exception(std::runtime_error("anything else")) == 3);
}

TEST_CASE("built-in example run") {
  ExampleReport rep;
  CHECK_NOTHROW(rep = run_example());
  CHECK(rep.k_values.front() == 1.0);
  CHECK(rep.k_values.back() > 1.0);
  CHECK(rep.epsilons.size() == 10);
  CHECK_THAT(rep.text, ContainsSubstring("reference checks: all within tolerance"));
  CHECK_THAT(rep.text, ContainsSubstring("P_T"));
  CHECK_THAT(rep.text, ContainsSubstring("c1 = 0.012540"));
}

TEST_CASE("sweep row assembly") {
  ExperimentConfig cfg = small_config();
  const std::vector<SweepRow> rows = compute_sweep_rows(cfg);
  REQUIRE(rows.size() == 3);

  CHECK(rows[0].within_validity);        // 0.01 < c1
  CHECK_FALSE(rows[1].within_validity);  // 0.02 > c1
  CHECK_FALSE(rows[2].within_validity);

  CHECK(rows[0].exact_utility_of_design.has_value());
  CHECK(rows[1].exact_utility_of_design.has_value());
  CHECK_FALSE(rows[2].exact_utility_of_design.has_value());  // design not realizable at 0.05

  CHECK(rows[0].k_constant == 1.0);
  CHECK_THAT(rows[2].k_constant, WithinAbs(1.8743380175718638, 1e-12));

  for (const SweepRow& r : rows) {
    REQUIRE(r.oracle_chi2.has_value());
    REQUIRE(r.oracle_eo.has_value());
    CHECK(*r.oracle_eo == *rows[0].oracle_eo);  // computed once, epsilon-free
    CHECK(*r.oracle_chi2 <= *r.oracle_eo + 1e-12);
  }
  CHECK(*rows[0].oracle_chi2 <= *rows[1].oracle_chi2 + 1e-15);  // cap grows with epsilon
  CHECK(*rows[1].oracle_chi2 <= *rows[2].oracle_chi2 + 1e-15);

  SECTION("oracles can be disabled") {
    cfg.oracle.chi2 = false;
    cfg.oracle.eo = false;
    const std::vector<SweepRow> bare = compute_sweep_rows(cfg);
    CHECK_FALSE(bare[0].oracle_chi2.has_value());
    CHECK_FALSE(bare[0].oracle_eo.has_value());
    CHECK(bare[0].p2_bound == rows[0].p2_bound);
  }
}

TEST_CASE("sweep writes the contracted files") {
  ExperimentConfig cfg = small_config();

  SECTION("both formats") {
    const fs::path dir = fresh_dir("sweep_both");
    cfg.out_dir = dir.string();
    run_sweep(cfg, OutputFormat::both);
    CHECK(fs::exists(dir / "sweep.csv"));
    CHECK(fs::exists(dir / "sweep.svg"));
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(fs::exists(dir / "report.txt"));

    const std::string csv = slurp(dir / "sweep.csv");
    CHECK(csv.rfind(sweep_csv_header, 0) == 0);
    CHECK(split(csv, '\n').size() == 5);  // header + 3 rows + trailing

    const nlohmann::json j = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(j.at("rows").size() == 3);
  }

  SECTION("csv only") {
    const fs::path dir = fresh_dir("sweep_csv");
    cfg.out_dir = dir.string();
    run_sweep(cfg, OutputFormat::csv);
    CHECK(fs::exists(dir / "sweep.csv"));
    CHECK(fs::exists(dir / "sweep.svg"));
    CHECK_FALSE(fs::exists(dir / "summary.json"));
  }

  SECTION("json only") {
    const fs::path dir = fresh_dir("sweep_json");
    cfg.out_dir = dir.string();
    run_sweep(cfg, OutputFormat::json);
    CHECK_FALSE(fs::exists(dir / "sweep.csv"));
    CHECK(fs::exists(dir / "summary.json"));
  }

  SECTION("csv output is byte-stable across runs") {
    const fs::path dir_a = fresh_dir("sweep_a");
    const fs::path dir_b = fresh_dir("sweep_b");
    cfg.out_dir = dir_a.string();
    run_sweep(cfg, OutputFormat::csv);
    cfg.out_dir = dir_b.string();
    run_sweep(cfg, OutputFormat::csv);
    CHECK(slurp(dir_a / "sweep.csv") == slurp(dir_b / "sweep.csv"));
    CHECK(slurp(dir_a / "sweep.svg") == slurp(dir_b / "sweep.svg"));
  }
}

TEST_CASE("solve driver") {
  ExperimentConfig cfg = small_config();
  cfg.epsilon_values = {0.005, 0.01};
  const fs::path dir = fresh_dir("solve");
  cfg.out_dir = dir.string();

  const std::vector<DesignResult> results = run_solve(cfg);
  REQUIRE(results.size() == 2);
  CHECK(fs::exists(dir / "report.txt"));
  CHECK(fs::exists(dir / "summary.json"));
  const nlohmann::json j = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(j.at("designs").size() == 2);
  CHECK(j.at("designs").at(0).at("epsilon").get<double>() == 0.005);

  cfg.epsilon_values = {0.03};  // beyond the reconstruction boundary
  CHECK_THROWS_AS(run_solve(cfg), InvalidReconstruction);
}

TEST_CASE("oracle driver") {
  ExperimentConfig cfg = small_config();
  cfg.epsilon_values = {0.01};
  cfg.oracle.grid_points = 11;
  const fs::path dir = fresh_dir("oracle");
  cfg.out_dir = dir.string();

  run_oracle(cfg);
  const nlohmann::json j = nlohmann::json::parse(slurp(dir / "summary.json"));
  REQUIRE(j.at("results").size() == 2);  // one parity-only + one per epsilon
  CHECK(j.at("results").at(0).at("search").get<std::string>() == "eo");
  CHECK(j.at("results").at(1).at("search").get<std::string>() == "chi2");
  CHECK_THAT(slurp(dir / "report.txt"), ContainsSubstring("best utility"));

  cfg.oracle.eo = false;
  run_oracle(cfg);
  const nlohmann::json j2 = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(j2.at("results").size() == 1);
}

TEST_CASE("verification suite passes on seeded instances") {
  ExperimentConfig cfg = default_config();
  const VerifyReport rep = run_verify(cfg, 20);
  REQUIRE(rep.sections.size() == 5);
  for (const VerifySection& s : rep.sections) {
    INFO(s.name);
    CHECK(s.passed == s.total);
  }
  CHECK(rep.all_pass());
  CHECK_THAT(rep.text, ContainsSubstring("all sections passed"));
}

TEST_CASE("symmetric design evaluation shrinks toward its approximation") {
  const ExperimentConfig cfg = default_config();
  const WMatrices w = compute_w_matrices(cfg.prior);
  const auto [dir, second] = select_direction(w);
  (void)second;
  const SymmetricDesignEval coarse = evaluate_symmetric_design(cfg.prior, w, dir, 0.5, 0.02);
  const SymmetricDesignEval fine = evaluate_symmetric_design(cfg.prior, w, dir, 0.5, 0.005);
  const double rel_coarse = std::abs(coarse.exact_mi_ty - coarse.approx_mi_ty) / (0.02 * 0.02);
  const double rel_fine = std::abs(fine.exact_mi_ty - fine.approx_mi_ty) / (0.005 * 0.005);
  CHECK(rel_fine < rel_coarse);
  CHECK(coarse.exact_mi_ty > 0.0);
  CHECK(coarse.approx_mi_ty > 0.0);
}
