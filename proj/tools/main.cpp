// SPDX-License-Identifier: Apache-2.0
//
// Command line front end: example | solve | sweep | oracle | verify.

#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fairgeo/fairgeo.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  int grid = 0;       // 0: keep the config value
  bool no_oracle = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string format = "both";
};

void add_common(CLI::App* sub, CommonOpts& opts, bool with_format) {
  sub->add_option("--config", opts.config_path, "JSON experiment config (default: built-in instance)");
  sub->add_option("--out-dir", opts.out_dir, "output directory (default: current directory)");
  sub->add_option("--grid", opts.grid, "per-parameter grid resolution for the searches")
      ->check(CLI::PositiveNumber);
  sub->add_flag("--no-oracle", opts.no_oracle, "skip the grid searches");
  sub->add_option("--seed", opts.seed, "RNG seed override")->each([&opts](const std::string&) {
    opts.seed_set = true;
  });
  if (with_format)
    sub->add_option("--format", opts.format, "table outputs to write: csv|json|both")
        ->check(CLI::IsMember({"csv", "json", "both"}));
}

fairgeo::ExperimentConfig make_config(const CommonOpts& opts) {
  fairgeo::ExperimentConfig cfg =
      opts.config_path.empty() ? fairgeo::default_config() : fairgeo::load_config(opts.config_path);
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  if (opts.grid > 0) cfg.oracle.grid_points = opts.grid;
  if (opts.no_oracle) {
    cfg.oracle.chi2 = false;
    cfg.oracle.eo = false;
  }
  if (opts.seed_set) cfg.seed = opts.seed;
  return cfg;
}

fairgeo::OutputFormat parse_format(const std::string& s) {
  if (s == "csv") return fairgeo::OutputFormat::csv;
  if (s == "json") return fairgeo::OutputFormat::json;
  return fairgeo::OutputFormat::both;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geometry of rate-limited fair representations"};
  app.require_subcommand(1);

  CommonOpts opts;
  CLI::App* cmd_example = app.add_subcommand("example", "run the built-in worked instance");
  add_common(cmd_example, opts, false);
  CLI::App* cmd_solve = app.add_subcommand("solve", "closed-form design at each epsilon");
  add_common(cmd_solve, opts, false);
  CLI::App* cmd_sweep = app.add_subcommand("sweep", "epsilon sweep with bounds and searches");
  add_common(cmd_sweep, opts, true);
  CLI::App* cmd_oracle = app.add_subcommand("oracle", "grid searches only");
  add_common(cmd_oracle, opts, false);
  CLI::App* cmd_verify = app.add_subcommand("verify", "randomized invariant suite");
  add_common(cmd_verify, opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const fairgeo::ExperimentConfig cfg = make_config(opts);
    const std::filesystem::path dir(cfg.out_dir);
    if (cmd_example->parsed()) {
      const fairgeo::ExampleReport rep = fairgeo::run_example();
      std::cout << rep.text;
      std::filesystem::create_directories(dir);
      fairgeo::write_text_file(dir / "report.txt", rep.text);
    } else if (cmd_solve->parsed()) {
      const auto results = fairgeo::run_solve(cfg);
      for (const fairgeo::DesignResult& d : results) std::cout << fairgeo::render_design_text(d) << '\n';
    } else if (cmd_sweep->parsed()) {
      fairgeo::run_sweep(cfg, parse_format(opts.format));
      std::cout << "sweep written to " << dir.string() << '\n';
    } else if (cmd_oracle->parsed()) {
      fairgeo::run_oracle(cfg);
      std::cout << "search results written to " << dir.string() << '\n';
    } else if (cmd_verify->parsed()) {
      const fairgeo::VerifyReport rep = fairgeo::run_verify(cfg);
      std::cout << rep.text;
      std::filesystem::create_directories(dir);
      fairgeo::write_text_file(dir / "report.txt", rep.text);
      if (!rep.all_pass()) return 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return fairgeo::exit_code_for_exception(e);
  }
  return 0;
}
