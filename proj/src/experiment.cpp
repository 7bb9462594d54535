#include "confagg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "confagg/aggregation.hpp"
#include "confagg/errors.hpp"
#include "confagg/kernels.hpp"
#include "confagg/moe.hpp"
#include "confagg/pvalue.hpp"
#include "confagg/rng.hpp"

namespace confagg {

namespace {

constexpr const char* kVersion = "0.1.0";

enum class Method { Split, WaAll, WaTargeted, WaPrecise, Ecdf, EcdfDkw };

Method method_from_string(const std::string& name) {
  if (name == "split") return Method::Split;
  if (name == "wa_all") return Method::WaAll;
  if (name == "wa_targeted") return Method::WaTargeted;
  if (name == "wa_precise") return Method::WaPrecise;
  if (name == "ecdf") return Method::Ecdf;
  if (name == "ecdf_dkw") return Method::EcdfDkw;
  throw ConfigError("unknown method \"" + name + "\"");
}

const char* to_string(Method m) {
  switch (m) {
    case Method::Split:
      return "split";
    case Method::WaAll:
      return "wa_all";
    case Method::WaTargeted:
      return "wa_targeted";
    case Method::WaPrecise:
      return "wa_precise";
    case Method::Ecdf:
      return "ecdf";
    case Method::EcdfDkw:
      return "ecdf_dkw";
  }
  return "unknown";
}

// splitmix64 finalizer; used to derive independent sub-streams per trial.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double column_quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  const double h = std::floor(static_cast<double>(values.size() + 1) * p);
  const auto idx = static_cast<std::size_t>(
      std::clamp(h - 1.0, 0.0, static_cast<double>(values.size() - 1)));
  return values[idx];
}

std::string iso_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset.type != "synthetic" && dataset.type != "csv")
    throw ConfigError("dataset.type must be synthetic or csv");
  if (dataset.type == "csv" && dataset.path.empty())
    throw ConfigError("csv dataset needs a path");
  if (dataset.type == "csv" && dataset.schema.label.empty())
    throw ConfigError("csv dataset needs a label column");
  if (methods.empty()) throw ConfigError("no methods requested");
  bool any_split = false, any_wa = false;
  for (const auto& m : methods) {
    if (method_from_string(m) == Method::Split)
      any_split = true;
    else
      any_wa = true;
  }
  if (split_mode != "auto" && split_mode != "with_merge" && split_mode != "no_merge")
    throw ConfigError("split_mode must be auto, with_merge or no_merge");
  if (split_mode == "no_merge" && any_wa)
    throw ConfigError("weighted-aggregation methods need a merge split");
  if (split_mode == "with_merge" && any_split)
    throw ConfigError("the split baseline calibrates on the no-merge split");
  if (score_kinds.empty()) throw ConfigError("no score kinds requested");
  for (const auto& s : score_kinds) score_kind_from_string(s);
  if (alphas.empty()) throw ConfigError("alpha grid is empty");
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0)) throw ConfigError("alpha values must lie in (0, 1)");
  if (!(alpha_prime > 0.0 && alpha_prime < 1.0))
    throw ConfigError("alpha_prime must lie in (0, 1)");
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (budget < 10) throw ConfigError("budget is too small to split");
  if (!(dkw_delta > 0.0 && dkw_delta < 1.0)) throw ConfigError("dkw_delta must lie in (0, 1)");
  if (!(ws_delta > 0.0 && ws_delta <= 1.0)) throw ConfigError("ws_delta must lie in (0, 1]");
  if (test_cap < 1) throw ConfigError("test_cap must be at least 1");
  if (dataset.type == "synthetic") assignment_from_string(assignment);
  for (const auto& g : group_tags)
    if (!(g.percentile > 0.0 && g.percentile < 1.0))
      throw ConfigError("group percentile must lie in (0, 1)");
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json ds{{"type", dataset.type}, {"normalize", dataset.normalize}};
  if (dataset.type == "synthetic") {
    ds["noise_sd"] = dataset.noise_sd;
  } else {
    ds["path"] = dataset.path;
    ds["label"] = dataset.schema.label;
    if (!dataset.schema.features.empty()) ds["features"] = dataset.schema.features;
    if (!dataset.schema.categorical.empty()) ds["categorical"] = dataset.schema.categorical;
  }
  nlohmann::json j{{"dataset", ds},
                   {"methods", methods},
                   {"score_kinds", score_kinds},
                   {"alphas", alphas},
                   {"alpha_prime", alpha_prime},
                   {"trials", trials},
                   {"budget", budget},
                   {"split_mode", split_mode},
                   {"merge_size", merge_size},
                   {"dkw_delta", dkw_delta},
                   {"ws_delta", ws_delta},
                   {"n_slabs", n_slabs},
                   {"test_cap", test_cap},
                   {"seed", seed},
                   {"out_dir", out_dir},
                   {"threads", threads}};
  if (dataset.type == "synthetic") j["assignment"] = assignment;
  if (!feature_groups.empty()) j["feature_groups"] = feature_groups;
  if (!group_tags.empty()) {
    nlohmann::json tags = nlohmann::json::array();
    for (const auto& g : group_tags)
      tags.push_back({{"name", g.name}, {"column", g.column}, {"percentile", g.percentile}});
    j["group_tags"] = tags;
  }
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  if (j.contains("dataset")) {
    const auto& ds = j.at("dataset");
    cfg.dataset.type = ds.value("type", cfg.dataset.type);
    cfg.dataset.noise_sd = ds.value("noise_sd", cfg.dataset.noise_sd);
    cfg.dataset.path = ds.value("path", cfg.dataset.path);
    cfg.dataset.schema.label = ds.value("label", std::string{});
    if (ds.contains("features"))
      cfg.dataset.schema.features = ds.at("features").get<std::vector<std::string>>();
    if (ds.contains("categorical"))
      cfg.dataset.schema.categorical = ds.at("categorical").get<std::vector<std::string>>();
    cfg.dataset.normalize = ds.value("normalize", cfg.dataset.normalize);
  }
  if (j.contains("methods")) cfg.methods = j.at("methods").get<std::vector<std::string>>();
  if (j.contains("score_kinds"))
    cfg.score_kinds = j.at("score_kinds").get<std::vector<std::string>>();
  if (j.contains("alphas")) cfg.alphas = j.at("alphas").get<std::vector<double>>();
  cfg.alpha_prime = j.value("alpha_prime", cfg.alpha_prime);
  cfg.trials = j.value("trials", cfg.trials);
  cfg.budget = j.value("budget", cfg.budget);
  cfg.split_mode = j.value("split_mode", cfg.split_mode);
  cfg.merge_size = j.value("merge_size", cfg.merge_size);
  cfg.dkw_delta = j.value("dkw_delta", cfg.dkw_delta);
  cfg.ws_delta = j.value("ws_delta", cfg.ws_delta);
  cfg.n_slabs = j.value("n_slabs", cfg.n_slabs);
  cfg.test_cap = j.value("test_cap", cfg.test_cap);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.assignment = j.value("assignment", cfg.assignment);
  if (j.contains("feature_groups"))
    cfg.feature_groups =
        j.at("feature_groups").get<std::map<std::string, std::vector<std::string>>>();
  if (j.contains("group_tags"))
    for (const auto& g : j.at("group_tags"))
      cfg.group_tags.push_back({g.at("name").get<std::string>(),
                                g.at("column").get<std::string>(),
                                g.value("percentile", 0.5)});
  cfg.threads = j.value("threads", cfg.threads);
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad config JSON in " + path + ": " + e.what());
  }
  return from_json(j);
}

namespace {

std::size_t resolved_merge_size(const ExperimentConfig& cfg) {
  return cfg.merge_size > 0 ? cfg.merge_size : cfg.budget / 10;
}

std::size_t split_reserve(const ExperimentConfig& cfg) {
  return std::max(cfg.budget,
                  cfg.budget / 2 + (2 * cfg.budget) / 5 + resolved_merge_size(cfg));
}

std::vector<std::vector<std::size_t>> resolve_groups(const ExperimentConfig& cfg,
                                                     const Dataset& ds) {
  std::vector<std::vector<std::size_t>> groups;
  if (cfg.dataset.type == "synthetic") {
    groups = synthetic_assignment(assignment_from_string(cfg.assignment)).groups;
  } else if (!cfg.feature_groups.empty()) {
    for (const auto& [name, cols] : cfg.feature_groups) {
      std::vector<std::size_t> idx;
      for (const auto& c : cols) idx.push_back(ds.column_index(c));
      if (idx.empty()) throw ConfigError("feature group \"" + name + "\" is empty");
      groups.push_back(std::move(idx));
    }
  } else {
    // no groups configured: one expert over every feature
    std::vector<std::size_t> all(ds.d);
    for (std::size_t j = 0; j < ds.d; ++j) all[j] = j;
    groups.push_back(std::move(all));
  }
  return groups;
}

struct CellKey {
  Method method;
  double alpha;
};

}  // namespace

TrialOutput run_trial(const ExperimentConfig& config, const Dataset* shared,
                      std::size_t trial_index) {
  const std::uint64_t trial_seed = config.seed + trial_index;
  const std::size_t merge_size = resolved_merge_size(config);
  const std::size_t reserve = split_reserve(config);

  Dataset local;
  const Dataset* raw = shared;
  if (config.dataset.type == "synthetic") {
    local = gen_synthetic(reserve + config.test_cap, mix64(trial_seed ^ 0x001), // data stream
                          config.dataset.noise_sd);
    raw = &local;
  }
  if (raw == nullptr) throw ConfigError("csv dataset was not loaded");
  if (raw->is_classification())
    throw ConfigError("classification datasets are not wired into the experiment matrix");

  const std::uint64_t split_seed = mix64(trial_seed ^ 0x002);
  const SplitPlan wm = make_split(raw->n, config.budget, SplitMode::WithMerge, merge_size,
                                  config.test_cap, split_seed);
  const SplitPlan nm = make_split(raw->n, config.budget, SplitMode::NoMerge, merge_size,
                                  config.test_cap, split_seed);

  Dataset normalized;
  const Dataset* ds = raw;
  if (config.dataset.normalize) {
    normalized = apply_standardizer(*raw, fit_standardizer(*raw, wm.train_idx));
    ds = &normalized;
  }

  const std::vector<std::vector<std::size_t>> groups = resolve_groups(config, *ds);

  std::vector<Method> methods;
  for (const auto& m : config.methods) methods.push_back(method_from_string(m));
  const bool needs_wa =
      std::any_of(methods.begin(), methods.end(), [](Method m) { return m != Method::Split; });
  const bool needs_split =
      std::any_of(methods.begin(), methods.end(), [](Method m) { return m == Method::Split; });

  const std::size_t n_test = wm.test_idx.size();
  std::vector<double> test_features;
  if (config.n_slabs > 0) {
    test_features.resize(n_test * ds->d);
    for (std::size_t t = 0; t < n_test; ++t) {
      const auto row = ds->row(wm.test_idx[t]);
      std::copy(row.begin(), row.end(), test_features.begin() + t * ds->d);
    }
  }

  // Dataset-level group thresholds; membership is evaluated on test rows.
  std::map<std::string, std::vector<std::uint8_t>> memberships;
  for (const auto& g : config.group_tags) {
    const std::size_t col = ds->column_index(g.column);
    std::vector<double> column(ds->n);
    for (std::size_t i = 0; i < ds->n; ++i) column[i] = ds->feature(i, col);
    const double threshold = column_quantile(std::move(column), g.percentile);
    std::vector<std::uint8_t> mask(n_test);
    for (std::size_t t = 0; t < n_test; ++t)
      mask[t] = ds->feature(wm.test_idx[t], col) >= threshold ? 1 : 0;
    memberships[g.name] = std::move(mask);
  }

  TrialOutput out;
  nlohmann::json corrections_log = nlohmann::json::object();

  for (const auto& kind_name : config.score_kinds) {
    const ScoreKind score_kind = score_kind_from_string(kind_name);
    const ExpertKind expert_kind =
        score_kind == ScoreKind::AbsoluteResidual ? ExpertKind::Point : ExpertKind::QuantilePair;

    const MoeModel moe = fit_moe(*ds, wm.train_idx, groups, expert_kind, config.alpha_prime);

    auto expert_ctx = [&moe, score_kind](std::size_t k) {
      return [&moe, score_kind, k](std::span<const double> x) {
        if (score_kind == ScoreKind::AbsoluteResidual)
          return ScoreContext::absolute_residual(moe.experts[k].predict(x));
        const auto [lo, hi] = moe.experts[k].predict_quantiles(x);
        return ScoreContext::cqr(lo, hi);
      };
    };
    auto blackbox_ctx = [&moe, score_kind](std::span<const double> x) {
      if (score_kind == ScoreKind::AbsoluteResidual)
        return ScoreContext::absolute_residual(moe.predict(x));
      const auto [lo, hi] = moe.predict_quantiles(x);
      return ScoreContext::cqr(lo, hi);
    };
    auto calibrate = [&ds](const CalibratedExpert::ContextFn& ctx,
                           std::span<const std::size_t> rows) {
      std::vector<double> scores;
      scores.reserve(rows.size());
      for (const std::size_t i : rows) scores.push_back(score(ctx(ds->row(i)), ds->labels[i]));
      return CalibratedExpert(ctx, std::move(scores));
    };

    std::vector<CalibratedExpert> wa_experts;
    std::optional<MergeSample> sample;
    std::optional<MergeCorrection> m_all, m_dag, m_ddag;
    std::optional<DkwBudget> dkw;
    if (needs_wa) {
      for (std::size_t k = 0; k < moe.experts.size(); ++k)
        wa_experts.push_back(calibrate(expert_ctx(k), wm.cal_idx));
      std::vector<double> p_all_values;
      p_all_values.reserve(wm.merge_idx.size());
      std::vector<double> p_point(wa_experts.size());
      for (const std::size_t i : wm.merge_idx) {
        const auto x = ds->row(i);
        const WeightVector w = moe.route(x);
        for (std::size_t k = 0; k < wa_experts.size(); ++k)
          p_point[k] = wa_experts[k].p_value(x, ds->labels[i]);
        p_all_values.push_back(weighted_p(p_point, w));
      }
      sample.emplace(std::move(p_all_values));
      m_all = m_star(*sample);
      m_dag = m_targeted(*sample, config.alpha_prime);
      m_ddag = m_precise(*sample, config.alpha_prime);
      dkw = DkwBudget::make(sample->size(), config.dkw_delta);

      nlohmann::json unscaled = nlohmann::json::object();
      for (double a : config.alphas)
        unscaled[format_metric(a)] =
            std::min(1.0, a * m_all->factor + dkw->epsilon + config.dkw_delta);
      corrections_log[kind_name] = {{"m_star", m_all->to_json()},
                                    {"m_targeted", m_dag->to_json()},
                                    {"m_precise", m_ddag->to_json()},
                                    {"dkw_epsilon", dkw->epsilon},
                                    {"unscaled_miscoverage_bound", unscaled}};
    }
    std::optional<CalibratedExpert> blackbox;
    if (needs_split) blackbox.emplace(calibrate(blackbox_ctx, nm.cal_idx));

    std::vector<CellKey> cells;
    for (const Method m : methods)
      for (const double a : config.alphas) cells.push_back({m, a});
    std::vector<std::vector<double>> covered(cells.size(), std::vector<double>(n_test));
    std::vector<std::vector<double>> sizes(cells.size(), std::vector<double>(n_test));

    std::vector<PValueProfile> profiles(wa_experts.size());
    for (std::size_t t = 0; t < n_test; ++t) {
      const auto x = ds->row(wm.test_idx[t]);
      const double y = ds->labels[wm.test_idx[t]];
      std::optional<PValueProfile> agg;
      if (needs_wa) {
        for (std::size_t k = 0; k < wa_experts.size(); ++k)
          profiles[k] = wa_experts[k].profile(x);
        agg = aggregate_profile(profiles, moe.route(x));
      }
      std::optional<PValueProfile> bb_prof;
      if (needs_split) bb_prof = blackbox->profile(x);
      for (std::size_t c = 0; c < cells.size(); ++c) {
        IntervalSet set;
        switch (cells[c].method) {
          case Method::Split:
            set = threshold_set(*bb_prof, cells[c].alpha);
            break;
          case Method::WaAll:
            set = scaled_superlevel_set(*agg, m_all->factor, cells[c].alpha);
            break;
          case Method::WaTargeted:
            set = scaled_superlevel_set(*agg, m_dag->factor, cells[c].alpha);
            break;
          case Method::WaPrecise:
            set = scaled_superlevel_set(*agg, m_ddag->factor, cells[c].alpha);
            break;
          case Method::Ecdf:
            set = ecdf_superlevel_set(*agg, *sample, cells[c].alpha, std::nullopt);
            break;
          case Method::EcdfDkw:
            set = ecdf_superlevel_set(*agg, *sample, cells[c].alpha, dkw);
            break;
        }
        covered[c][t] = set.contains(y) ? 1.0 : 0.0;
        sizes[c][t] = set.measure();
      }
    }

    const std::uint64_t ws_seed = mix64(trial_seed ^ 0x003);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      TrialRow row;
      row.trial = trial_index;
      row.method = to_string(cells[c].method);
      row.score_kind = kind_name;
      row.alpha = cells[c].alpha;
      row.seed = trial_seed;
      row.marginal_cov = marginal_coverage(covered[c]);
      if (config.n_slabs > 0 && n_test > 0) {
        const WsCoverage ws = ws_coverage(covered[c], test_features, n_test, ds->d,
                                          config.ws_delta, config.n_slabs, ws_seed);
        row.ws_cov = ws.value;
        row.delta_cov = delta_coverage(row.marginal_cov, ws.value);
      } else {
        row.ws_cov = std::numeric_limits<double>::quiet_NaN();
        row.delta_cov = std::numeric_limits<double>::quiet_NaN();
      }
      const SetSizeSummary ss = mean_set_size(sizes[c]);
      row.mean_size = ss.mean;
      row.unbounded_count = ss.unbounded_count;
      switch (cells[c].method) {
        case Method::Split:
          row.m_hat = 1.0;
          break;
        case Method::WaAll:
        case Method::Ecdf:
        case Method::EcdfDkw:
          row.m_hat = m_all->factor;
          break;
        case Method::WaTargeted:
          row.m_hat = m_dag->factor;
          break;
        case Method::WaPrecise:
          row.m_hat = m_ddag->factor;
          break;
      }
      if (!memberships.empty()) row.groups = group_coverage(covered[c], sizes[c], memberships);
      out.rows.push_back(std::move(row));
    }
  }

  out.manifest_entry = {{"trial", trial_index},
                        {"seed", trial_seed},
                        {"merge_size", merge_size},
                        {"n_test", n_test}};
  if (!corrections_log.empty()) out.manifest_entry["corrections"] = corrections_log;
  return out;
}

std::string format_metric(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_trials_csv(const std::string& path, const std::vector<TrialRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "trial,method,score_kind,alpha,marginal_cov,ws_cov,delta_cov,mean_size,"
         "unbounded_count,m_hat,seed\n";
  for (const auto& r : rows) {
    out << r.trial << ',' << r.method << ',' << r.score_kind << ',' << format_metric(r.alpha)
        << ',' << format_metric(r.marginal_cov) << ',' << format_metric(r.ws_cov) << ','
        << format_metric(r.delta_cov) << ',' << format_metric(r.mean_size) << ','
        << r.unbounded_count << ',' << format_metric(r.m_hat) << ',' << r.seed << '\n';
  }
}

std::vector<TrialRow> read_trials_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty trials file: " + path);
  std::vector<TrialRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 11) throw DataError("malformed row in " + path + ": " + line);
    TrialRow r;
    r.trial = std::stoull(fields[0]);
    r.method = fields[1];
    r.score_kind = fields[2];
    r.alpha = std::stod(fields[3]);
    r.marginal_cov = std::stod(fields[4]);
    r.ws_cov = std::stod(fields[5]);
    r.delta_cov = std::stod(fields[6]);
    r.mean_size = std::stod(fields[7]);
    r.unbounded_count = std::stoull(fields[8]);
    r.m_hat = std::stod(fields[9]);
    r.seed = std::stoull(fields[10]);
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

nlohmann::json metric_summary(const std::vector<double>& values) {
  if (values.empty()) return nullptr;
  bool any_nan = false, any_inf = false;
  for (double v : values) {
    if (std::isnan(v)) any_nan = true;
    if (std::isinf(v)) any_inf = true;
  }
  if (any_nan) return nullptr;
  if (any_inf) return {{"mean", "inf"}, {"trials", values.size()}};
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  nlohmann::json j{{"mean", mean}, {"trials", values.size()}};
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    j["std"] = sd;
    j["ci95"] = 1.96 * sd / std::sqrt(n);
  }
  return j;
}

}  // namespace

nlohmann::json summarize_rows(const std::vector<TrialRow>& rows) {
  struct Cell {
    std::vector<double> marginal, ws, delta, size, unbounded, m_hat;
    std::map<std::string, std::vector<double>> group_cov, group_size;
  };
  std::map<std::string, Cell> cells;  // keyed by method|score_kind|alpha
  std::vector<std::string> order;
  for (const auto& r : rows) {
    const std::string key = r.method + "|" + r.score_kind + "|" + format_metric(r.alpha);
    if (cells.find(key) == cells.end()) order.push_back(key);
    Cell& c = cells[key];
    c.marginal.push_back(r.marginal_cov);
    c.ws.push_back(r.ws_cov);
    c.delta.push_back(r.delta_cov);
    c.size.push_back(r.mean_size);
    c.unbounded.push_back(static_cast<double>(r.unbounded_count));
    c.m_hat.push_back(r.m_hat);
    for (const auto& [name, gm] : r.groups) {
      c.group_cov[name].push_back(gm.coverage);
      c.group_size[name].push_back(gm.mean_size);
    }
  }
  nlohmann::json out = nlohmann::json::array();
  for (const auto& key : order) {
    const Cell& c = cells.at(key);
    const auto p1 = key.find('|');
    const auto p2 = key.find('|', p1 + 1);
    nlohmann::json j{{"method", key.substr(0, p1)},
                     {"score_kind", key.substr(p1 + 1, p2 - p1 - 1)},
                     {"alpha", std::stod(key.substr(p2 + 1))},
                     {"marginal_cov", metric_summary(c.marginal)},
                     {"ws_cov", metric_summary(c.ws)},
                     {"delta_cov", metric_summary(c.delta)},
                     {"mean_size", metric_summary(c.size)},
                     {"unbounded_count", metric_summary(c.unbounded)},
                     {"m_hat", metric_summary(c.m_hat)}};
    if (!c.group_cov.empty()) {
      nlohmann::json groups = nlohmann::json::object();
      for (const auto& [name, cov] : c.group_cov)
        groups[name] = {{"coverage", metric_summary(cov)},
                        {"mean_size", metric_summary(c.group_size.at(name))}};
      j["groups"] = groups;
    }
    out.push_back(std::move(j));
  }
  return {{"cells", out}};
}

nlohmann::json summarize_csv(const std::string& trials_csv_path) {
  return summarize_rows(read_trials_csv(trials_csv_path));
}

RunOutcome run_experiment(const ExperimentConfig& config) {
  config.validate();
  const std::string started = iso_now();

  Dataset shared;
  const Dataset* shared_ptr = nullptr;
  if (config.dataset.type == "csv") {
    shared = load_csv(config.dataset.path, config.dataset.schema);
    shared_ptr = &shared;
  }

  std::filesystem::create_directories(config.out_dir);

  const std::size_t n_threads = std::max<std::size_t>(
      1, std::min<std::size_t>(config.threads > 0 ? config.threads
                                                  : std::thread::hardware_concurrency(),
                               config.trials));
  std::vector<std::optional<TrialOutput>> slots(config.trials);
  std::vector<std::string> failures(config.trials);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < config.trials; i = next.fetch_add(1)) {
      try {
        slots[i] = run_trial(config, shared_ptr, i);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  RunOutcome outcome;
  std::vector<TrialRow> rows;
  nlohmann::json per_trial = nlohmann::json::array();
  nlohmann::json failed = nlohmann::json::array();
  for (std::size_t i = 0; i < config.trials; ++i) {
    if (slots[i]) {
      rows.insert(rows.end(), slots[i]->rows.begin(), slots[i]->rows.end());
      per_trial.push_back(slots[i]->manifest_entry);
    } else {
      outcome.failed_trials.push_back(i);
      failed.push_back({{"trial", i}, {"error", failures[i]}});
    }
  }
  outcome.ok = outcome.failed_trials.empty();

  const auto out_dir = std::filesystem::path(config.out_dir);
  outcome.trials_csv_path = (out_dir / "trials.csv").string();
  outcome.summary_path = (out_dir / "summary.json").string();
  outcome.manifest_path = (out_dir / "manifest.json").string();

  write_trials_csv(outcome.trials_csv_path, rows);
  {
    std::ofstream out(outcome.summary_path);
    out << summarize_rows(rows).dump(2) << '\n';
  }
  {
    nlohmann::json manifest{{"library_version", kVersion},
                            {"kernel_backend", kernels::active().name},
                            {"config", config.to_json()},
                            {"started_at", started},
                            {"finished_at", iso_now()},
                            {"per_trial", per_trial},
                            {"failed_trials", failed}};
    if (config.dataset.type == "csv") manifest["csv_dropped_rows"] = shared.dropped_rows;
    std::ofstream out(outcome.manifest_path);
    out << manifest.dump(2) << '\n';
  }
  return outcome;
}

}  // namespace confagg
