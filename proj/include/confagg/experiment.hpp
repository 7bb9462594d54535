#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "confagg/data.hpp"
#include "confagg/evaluation.hpp"

namespace confagg {

struct GroupSpec {
  std::string name;
  std::string column;
  double percentile = 0.5;  // member when the column value is at or above
                            // this dataset-level quantile
};

struct DatasetSpec {
  std::string type = "synthetic";  // synthetic | csv
  double noise_sd = 0.1;           // synthetic only
  std::string path;                // csv only
  CsvSchema schema;
  bool normalize = false;  // z-score features with train-split statistics
};

struct ExperimentConfig {
  DatasetSpec dataset;
  std::vector<std::string> methods = {"split", "wa_targeted", "wa_precise"};
  std::vector<std::string> score_kinds = {"abs_residual"};
  std::vector<double> alphas = {0.1};
  double alpha_prime = 0.1;
  std::size_t trials = 200;
  std::size_t budget = 400;
  std::string split_mode = "auto";  // auto | with_merge | no_merge
  std::size_t merge_size = 0;       // 0 keeps the 10% share of the budget
  double dkw_delta = 0.05;
  double ws_delta = 0.2;
  std::size_t n_slabs = 1000;  // 0 skips worst-slice evaluation
  std::size_t test_cap = 2000;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  std::string assignment = "no_overlap";  // synthetic feature assignment
  // CSV expert groups: expert name -> feature column names (expert order is
  // the lexicographic name order).
  std::map<std::string, std::vector<std::string>> feature_groups;
  std::vector<GroupSpec> group_tags;
  std::size_t threads = 0;  // 0 = hardware concurrency

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::string& path);
};

// One emitted CSV row: a (trial, method, score kind, alpha) cell.
struct TrialRow {
  std::size_t trial = 0;
  std::string method;
  std::string score_kind;
  double alpha = 0.0;
  double marginal_cov = 0.0;
  double ws_cov = 0.0;     // NaN when worst-slice evaluation is off
  double delta_cov = 0.0;  // NaN when ws_cov is NaN
  double mean_size = 0.0;
  std::size_t unbounded_count = 0;
  double m_hat = 1.0;
  std::uint64_t seed = 0;
  std::map<std::string, GroupMetrics> groups;  // summary-only extras
};

struct TrialOutput {
  std::vector<TrialRow> rows;
  nlohmann::json manifest_entry;
};

// Runs one full trial: split, sequential MoE fit, calibration, merge-sample
// corrections, per-test-point sets for every requested method and alpha, and
// metrics. `shared` must be the pre-loaded dataset for csv configs and null
// for synthetic ones (those draw fresh data per trial).
TrialOutput run_trial(const ExperimentConfig& config, const Dataset* shared,
                      std::size_t trial_index);

struct RunOutcome {
  bool ok = true;
  std::vector<std::size_t> failed_trials;
  std::string trials_csv_path;
  std::string summary_path;
  std::string manifest_path;
};

// Runs all trials (in parallel, deterministically collected), then writes
// trials.csv, summary.json and manifest.json under config.out_dir.
RunOutcome run_experiment(const ExperimentConfig& config);

nlohmann::json summarize_rows(const std::vector<TrialRow>& rows);

// Rebuilds the summary from a previously written trials.csv.
nlohmann::json summarize_csv(const std::string& trials_csv_path);

std::string format_metric(double v);
std::vector<TrialRow> read_trials_csv(const std::string& path);
void write_trials_csv(const std::string& path, const std::vector<TrialRow>& rows);

}  // namespace confagg
