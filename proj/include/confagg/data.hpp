#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace confagg {

struct Dataset {
  std::vector<double> features;  // row-major, n x d
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> labels;
  std::vector<std::string> column_names;
  std::string label_name = "y";
  // Nonempty for classification datasets: labels hold codes into this list.
  std::vector<std::string> label_classes;
  std::size_t dropped_rows = 0;

  std::span<const double> row(std::size_t i) const { return {features.data() + i * d, d}; }
  double feature(std::size_t i, std::size_t j) const { return features[i * d + j]; }
  bool is_classification() const { return !label_classes.empty(); }
  std::size_t column_index(const std::string& name) const;
};

// 16 i.i.d. standard normal features; label = row sum + N(0, noise_sd^2).
Dataset gen_synthetic(std::size_t n, std::uint64_t seed, double noise_sd = 0.1);

inline constexpr std::size_t kSyntheticDim = 16;

enum class AssignmentMethod { F15of16, F12of16, Share1of2, NoOverlap };

AssignmentMethod assignment_from_string(const std::string& name);
const char* to_string(AssignmentMethod m);

struct FeatureAssignment {
  std::vector<std::vector<std::size_t>> groups;  // one index list per expert
};

// The four fixed ways of assigning the 16 synthetic features to 4 experts.
FeatureAssignment synthetic_assignment(AssignmentMethod method);

struct CsvSchema {
  std::string label;
  std::vector<std::string> features;     // empty: every non-label column
  std::vector<std::string> categorical;  // columns to one-hot expand
};

// RFC-4180 CSV with a header row. Rows with missing or unparsable numeric
// cells are dropped and counted. A non-numeric label column switches the
// dataset to classification (labels become class codes).
Dataset load_csv(const std::string& path, const CsvSchema& schema);

struct SplitPlan {
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> cal_idx;
  std::vector<std::size_t> merge_idx;
  std::vector<std::size_t> test_idx;
  std::uint64_t seed = 0;
};

enum class SplitMode { WithMerge, NoMerge };

// Random disjoint subsets from one seeded permutation. The budget splits
// 50/40/10 into train/cal/merge (WithMerge) or 50/50 into train/cal
// (NoMerge); merge_size overrides the 10% share and may extend past the
// budget. Test rows always start after max(budget, train+cal+merge_size), so
// plans for the two modes built with equal arguments share train and test.
SplitPlan make_split(std::size_t n_total, std::size_t budget, SplitMode mode,
                     std::size_t merge_size, std::size_t test_cap, std::uint64_t seed);

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> sd;  // zero-variance columns keep sd = 1
};

Standardizer fit_standardizer(const Dataset& data, std::span<const std::size_t> rows);
// Returns a copy with ( feature - mean ) / sd applied to every row.
Dataset apply_standardizer(const Dataset& data, const Standardizer& st);

}  // namespace confagg
