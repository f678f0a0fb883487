#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>

#include "dp2g/harness.hpp"
#include "dp2g/rng.hpp"

namespace {

int execute(dp2g::ExperimentConfig cfg, const std::optional<std::string>& output,
            const std::optional<uint64_t>& seed, const std::optional<double>& noise, bool plots) {
  if (output) cfg.output_dir = *output;
  if (seed) cfg.master_seed = *seed;
  if (noise) cfg.comm_sigma = *noise;
  if (plots) cfg.plots = true;

  auto records = dp2g::run_experiment(cfg);
  dp2g::emit_csv(records, cfg.output_dir);
  dp2g::save_records(records, cfg.output_dir);
  if (cfg.plots) {
    // Support figure needs the ground truth; regenerate it for the plot.
    dp2g::DatasetSpec dspec = cfg.problem;
    dspec.seed = dp2g::derive_seed(cfg.master_seed, "data", 0);
    auto [problem, truth] = dp2g::generate_dataset(dspec);
    (void)problem;
    dp2g::emit_plots(records, cfg.output_dir,
                     cfg.problem.kind == dp2g::ProblemKind::ElasticNet ? &truth : nullptr);
  }

  std::cout << dp2g::report_from_dir(cfg.output_dir);

  int failures = 0;
  for (const auto& r : records) {
    bool required = std::find(cfg.require_converged.begin(), cfg.require_converged.end(),
                              r.algorithm) != cfg.require_converged.end();
    if (required && !r.converged) {
      std::cerr << "required run did not converge: " << r.algorithm << " on " << r.topology
                << " (rep " << r.repeat << ")\n";
      ++failures;
    }
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decentralized consensus optimization benchmark harness"};
  app.require_subcommand(1);

  std::string config_path, suite_name, records_dir;
  std::optional<std::string> output;
  std::optional<uint64_t> seed;
  std::optional<double> noise;
  bool plots = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("-o,--output", output, "output directory override");
    cmd->add_option("--seed", seed, "master seed override");
    cmd->add_option("--noise", noise, "communication noise sigma override");
    cmd->add_flag("--plots", plots, "render SVG convergence figures");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "run an experiment from a config file");
  run_cmd->add_option("config", config_path, "JSON experiment configuration")->required();
  add_common(run_cmd);

  CLI::App* bench_cmd = app.add_subcommand("bench", "run a built-in suite (table1|table2|elastic_net)");
  bench_cmd->add_option("suite", suite_name, "suite name")->required();
  add_common(bench_cmd);

  CLI::App* report_cmd = app.add_subcommand("report", "summarize records in a directory");
  report_cmd->add_option("dir", records_dir, "directory with summary CSVs")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return execute(dp2g::parse_config(config_path), output, seed, noise, plots);
    if (bench_cmd->parsed()) {
      auto cfg = dp2g::builtin_suite(suite_name);
      if (!output) output = "out/" + suite_name;
      return execute(cfg, output, seed, noise, plots);
    }
    if (report_cmd->parsed()) {
      std::cout << dp2g::report_from_dir(records_dir);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
