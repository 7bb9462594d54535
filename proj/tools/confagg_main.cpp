// Command-line driver: runs experiments from a JSON config, generates
// synthetic datasets, and summarizes previously written results.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "confagg/data.hpp"
#include "confagg/experiment.hpp"

namespace {

int cmd_run(const std::string& config_path, std::uint64_t* seed, std::size_t* trials,
            std::string* out_dir) {
  confagg::ExperimentConfig cfg = confagg::ExperimentConfig::from_file(config_path);
  if (seed) cfg.seed = *seed;
  if (trials) cfg.trials = *trials;
  if (out_dir) cfg.out_dir = *out_dir;
  const confagg::RunOutcome outcome = confagg::run_experiment(cfg);
  std::cout << "trials:   " << outcome.trials_csv_path << "\n"
            << "summary:  " << outcome.summary_path << "\n"
            << "manifest: " << outcome.manifest_path << "\n";
  if (!outcome.ok) {
    std::cerr << outcome.failed_trials.size() << " trial(s) failed; see manifest\n";
    return 1;
  }
  return 0;
}

int cmd_gen_synthetic(std::size_t n, std::uint64_t seed, double noise_sd,
                      const std::string& out_path) {
  const confagg::Dataset ds = confagg::gen_synthetic(n, seed, noise_sd);
  std::ofstream out(out_path);
  if (!out) {
    std::cerr << "cannot write " << out_path << "\n";
    return 1;
  }
  for (std::size_t j = 0; j < ds.d; ++j) out << ds.column_names[j] << ',';
  out << ds.label_name << '\n';
  for (std::size_t i = 0; i < ds.n; ++i) {
    for (std::size_t j = 0; j < ds.d; ++j) out << confagg::format_metric(ds.feature(i, j)) << ',';
    out << confagg::format_metric(ds.labels[i]) << '\n';
  }
  std::cout << "wrote " << ds.n << " rows to " << out_path << "\n";
  return 0;
}

int cmd_summarize(const std::string& in_dir) {
  const nlohmann::json summary = confagg::summarize_csv(in_dir + "/trials.csv");
  std::cout << summary.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted aggregation of conformal prediction sets"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
  run->add_option("--config", config_path, "Config file")->required();
  auto* seed_opt = run->add_option("--seed", seed, "Override the config seed");
  auto* trials_opt = run->add_option("--trials", trials, "Override the trial count");
  auto* out_opt = run->add_option("--out", out_dir, "Override the output directory");

  std::size_t gen_n = 1000;
  std::uint64_t gen_seed = 1;
  double gen_noise = 0.1;
  std::string gen_out = "synthetic.csv";
  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic dataset as CSV");
  gen->add_option("--n", gen_n, "Number of rows")->required();
  gen->add_option("--seed", gen_seed, "Generator seed")->required();
  gen->add_option("--noise-sd", gen_noise, "Label noise standard deviation");
  gen->add_option("--out", gen_out, "Output CSV path")->required();

  std::string in_dir;
  auto* summarize = app.add_subcommand("summarize", "Summarize a results directory");
  summarize->add_option("--in", in_dir, "Directory containing trials.csv")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(config_path, seed_opt->count() ? &seed : nullptr,
                     trials_opt->count() ? &trials : nullptr,
                     out_opt->count() ? &out_dir : nullptr);
    if (gen->parsed()) return cmd_gen_synthetic(gen_n, gen_seed, gen_noise, gen_out);
    if (summarize->parsed()) return cmd_summarize(in_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
