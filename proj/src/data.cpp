#include "confagg/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "confagg/errors.hpp"
#include "confagg/rng.hpp"

namespace confagg {

std::size_t Dataset::column_index(const std::string& name) const {
  for (std::size_t j = 0; j < column_names.size(); ++j)
    if (column_names[j] == name) return j;
  throw DataError("no feature column named \"" + name + "\"");
}

Dataset gen_synthetic(std::size_t n, std::uint64_t seed, double noise_sd) {
  if (n < 1) throw DataError("synthetic dataset needs at least one row");
  Dataset ds;
  ds.n = n;
  ds.d = kSyntheticDim;
  ds.features.resize(n * kSyntheticDim);
  ds.labels.resize(n);
  ds.column_names.reserve(kSyntheticDim);
  for (std::size_t j = 0; j < kSyntheticDim; ++j)
    ds.column_names.push_back("x" + std::to_string(j));
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < kSyntheticDim; ++j) {
      const double v = rng.normal();
      ds.features[i * kSyntheticDim + j] = v;
      total += v;
    }
    ds.labels[i] = total + noise_sd * rng.normal();
  }
  return ds;
}

AssignmentMethod assignment_from_string(const std::string& name) {
  if (name == "f15_of_16") return AssignmentMethod::F15of16;
  if (name == "f12_of_16") return AssignmentMethod::F12of16;
  if (name == "share_1_of_2") return AssignmentMethod::Share1of2;
  if (name == "no_overlap") return AssignmentMethod::NoOverlap;
  throw ConfigError("unknown feature assignment \"" + name + "\"");
}

const char* to_string(AssignmentMethod m) {
  switch (m) {
    case AssignmentMethod::F15of16:
      return "f15_of_16";
    case AssignmentMethod::F12of16:
      return "f12_of_16";
    case AssignmentMethod::Share1of2:
      return "share_1_of_2";
    case AssignmentMethod::NoOverlap:
      return "no_overlap";
  }
  return "unknown";
}

FeatureAssignment synthetic_assignment(AssignmentMethod method) {
  constexpr std::size_t kExperts = 4;
  FeatureAssignment fa;
  fa.groups.resize(kExperts);
  for (std::size_t k = 0; k < kExperts; ++k) {
    switch (method) {
      case AssignmentMethod::NoOverlap:
        for (std::size_t j = 4 * k; j < 4 * k + 4; ++j) fa.groups[k].push_back(j);
        break;
      case AssignmentMethod::Share1of2:
        for (std::size_t j = 0; j < 8; ++j) fa.groups[k].push_back(j);
        fa.groups[k].push_back(8 + 2 * k);
        fa.groups[k].push_back(9 + 2 * k);
        break;
      case AssignmentMethod::F15of16:
        // expert k misses feature 4k
        for (std::size_t j = 0; j < kSyntheticDim; ++j)
          if (j != 4 * k) fa.groups[k].push_back(j);
        break;
      case AssignmentMethod::F12of16:
        // expert k misses the block [4k, 4k+4)
        for (std::size_t j = 0; j < kSyntheticDim; ++j)
          if (j / 4 != k) fa.groups[k].push_back(j);
        break;
    }
  }
  return fa;
}

namespace {

// One CSV record, unquoting per RFC 4180. Handles quoted fields containing
// commas, escaped quotes and CR-LF line ends.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

bool parse_number(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end != begin && (end[-1] == ' ' || end[-1] == '\t')) --end;
  if (begin == end) return false;
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end && std::isfinite(out);
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV file: " + path);
  const std::vector<std::string> header = split_csv_line(line);

  auto header_index = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("column \"" + name + "\" not found in " + path);
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t label_col = header_index(schema.label);
  std::vector<std::string> feature_names = schema.features;
  if (feature_names.empty()) {
    for (const auto& name : header)
      if (name != schema.label) feature_names.push_back(name);
  }
  std::vector<std::size_t> feature_cols;
  feature_cols.reserve(feature_names.size());
  for (const auto& name : feature_names) feature_cols.push_back(header_index(name));

  std::set<std::string> categorical(schema.categorical.begin(), schema.categorical.end());
  for (const auto& name : categorical) header_index(name);

  // First pass keeps raw rows and drops the ones with unusable cells.
  std::vector<std::vector<std::string>> rows;
  std::size_t dropped = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      ++dropped;
      continue;
    }
    bool usable = true;
    double tmp = 0.0;
    for (std::size_t j = 0; j < feature_names.size(); ++j) {
      const std::string& cell = fields[feature_cols[j]];
      const bool is_cat = categorical.count(feature_names[j]) > 0;
      if (cell.empty() || (!is_cat && !parse_number(cell, tmp))) {
        usable = false;
        break;
      }
    }
    if (usable && fields[label_col].empty()) usable = false;
    if (!usable) {
      ++dropped;
      continue;
    }
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw DataError("no usable rows in " + path);

  // Labels stay numeric unless any surviving one fails to parse.
  bool numeric_label = true;
  double tmp = 0.0;
  for (const auto& r : rows)
    if (!parse_number(r[label_col], tmp)) {
      numeric_label = false;
      break;
    }

  Dataset ds;
  ds.label_name = schema.label;
  ds.dropped_rows = dropped;
  if (!numeric_label) {
    std::set<std::string> classes;
    for (const auto& r : rows) classes.insert(r[label_col]);
    ds.label_classes.assign(classes.begin(), classes.end());
  }

  // Column layout: numeric features in schema order, then one-hot columns
  // (sorted category values) for each categorical feature in schema order.
  struct OneHot {
    std::size_t src_col;
    std::string name;
    std::vector<std::string> values;
  };
  std::vector<std::size_t> numeric_cols;
  std::vector<OneHot> onehots;
  for (std::size_t j = 0; j < feature_names.size(); ++j) {
    if (categorical.count(feature_names[j]) == 0) {
      numeric_cols.push_back(feature_cols[j]);
      ds.column_names.push_back(feature_names[j]);
    } else {
      std::set<std::string> values;
      for (const auto& r : rows) values.insert(r[feature_cols[j]]);
      onehots.push_back({feature_cols[j], feature_names[j], {values.begin(), values.end()}});
    }
  }
  for (const auto& oh : onehots)
    for (const auto& v : oh.values) ds.column_names.push_back(oh.name + "=" + v);

  ds.n = rows.size();
  ds.d = ds.column_names.size();
  if (ds.d == 0) throw DataError("schema selects no feature columns");
  ds.features.resize(ds.n * ds.d);
  ds.labels.resize(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) {
    double* out = ds.features.data() + i * ds.d;
    std::size_t j = 0;
    for (const std::size_t col : numeric_cols) {
      parse_number(rows[i][col], tmp);
      out[j++] = tmp;
    }
    for (const auto& oh : onehots)
      for (const auto& v : oh.values) out[j++] = rows[i][oh.src_col] == v ? 1.0 : 0.0;
    if (numeric_label) {
      parse_number(rows[i][label_col], tmp);
      ds.labels[i] = tmp;
    } else {
      const auto it =
          std::lower_bound(ds.label_classes.begin(), ds.label_classes.end(), rows[i][label_col]);
      ds.labels[i] = static_cast<double>(it - ds.label_classes.begin());
    }
  }
  return ds;
}

SplitPlan make_split(std::size_t n_total, std::size_t budget, SplitMode mode,
                     std::size_t merge_size, std::size_t test_cap, std::uint64_t seed) {
  const std::size_t n_train = budget / 2;
  const std::size_t n_cal_wm = (2 * budget) / 5;
  if (merge_size == 0) merge_size = budget / 10;
  const std::size_t reserve = std::max(budget, n_train + n_cal_wm + merge_size);
  if (n_total < reserve + 1)
    throw DataError("split needs at least " + std::to_string(reserve + 1) + " rows, got " +
                    std::to_string(n_total));

  std::vector<std::size_t> perm(n_total);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(perm);

  SplitPlan plan;
  plan.seed = seed;
  auto take = [&](std::size_t from, std::size_t count) {
    return std::vector<std::size_t>(perm.begin() + from, perm.begin() + from + count);
  };
  plan.train_idx = take(0, n_train);
  if (mode == SplitMode::WithMerge) {
    plan.cal_idx = take(n_train, n_cal_wm);
    plan.merge_idx = take(n_train + n_cal_wm, merge_size);
  } else {
    plan.cal_idx = take(n_train, budget - n_train);
  }
  const std::size_t n_test = std::min(n_total - reserve, test_cap);
  plan.test_idx = take(reserve, n_test);
  return plan;
}

Standardizer fit_standardizer(const Dataset& data, std::span<const std::size_t> rows) {
  if (rows.empty()) throw DataError("standardizer needs at least one row");
  Standardizer st;
  st.mean.assign(data.d, 0.0);
  st.sd.assign(data.d, 0.0);
  for (const std::size_t i : rows)
    for (std::size_t j = 0; j < data.d; ++j) st.mean[j] += data.feature(i, j);
  for (std::size_t j = 0; j < data.d; ++j) st.mean[j] /= static_cast<double>(rows.size());
  for (const std::size_t i : rows)
    for (std::size_t j = 0; j < data.d; ++j) {
      const double c = data.feature(i, j) - st.mean[j];
      st.sd[j] += c * c;
    }
  for (std::size_t j = 0; j < data.d; ++j) {
    st.sd[j] = std::sqrt(st.sd[j] / static_cast<double>(rows.size()));
    if (st.sd[j] == 0.0) st.sd[j] = 1.0;
  }
  return st;
}

Dataset apply_standardizer(const Dataset& data, const Standardizer& st) {
  Dataset out = data;
  for (std::size_t i = 0; i < out.n; ++i)
    for (std::size_t j = 0; j < out.d; ++j)
      out.features[i * out.d + j] = (out.features[i * out.d + j] - st.mean[j]) / st.sd[j];
  return out;
}

}  // namespace confagg
