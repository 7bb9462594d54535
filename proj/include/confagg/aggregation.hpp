#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "confagg/pvalue.hpp"

namespace confagg {

// Convex weights over the experts. Nonnegative entries summing to 1 within
// 1e-9 are renormalized exactly; anything further off is rejected so that a
// router bug cannot hide behind silent renormalization.
class WeightVector {
 public:
  explicit WeightVector(std::vector<double> w);

  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t k) const { return w_[k]; }
  std::span<const double> values() const { return w_; }
  double max_weight() const;

 private:
  std::vector<double> w_;
};

// Sum_k w_k p_k for one label; experts are combined in index order so the
// result is reproducible bit for bit.
double weighted_p(std::span<const double> p_values, const WeightVector& w);

// min{1/max_k v_k, 2}: the factor in the data-independent coverage guarantee
// 1 - factor * alpha.
double prop1_factor(const WeightVector& v);

// Weighted p-values of the merging set, each computed with that point's own
// weight vector. Holds a sorted copy for CDF queries.
class MergeSample {
 public:
  explicit MergeSample(std::vector<double> p_all_values);

  std::size_t size() const { return sorted_.size(); }
  std::span<const double> sorted_values() const { return sorted_; }
  double min_value() const { return sorted_.front(); }

 private:
  std::vector<double> sorted_;
};

// Conservative empirical CDF: (1{min <= q} + #{p_i <= q}) / (M + 1).
double conservative_ecdf(const MergeSample& sample, double q);

enum class CorrectionVariant { AllAlpha, Targeted, Precise };

const char* to_string(CorrectionVariant v);

struct MergeCorrection {
  double factor = 1.0;
  CorrectionVariant variant = CorrectionVariant::AllAlpha;
  std::size_t merge_size = 0;
  std::optional<double> alpha_prime;
  // Set when the precise variant found no CDF point at or above alpha_prime
  // and fell back to the largest sample point.
  bool fallback = false;

  nlohmann::json to_json() const;
};

// Correction valid for every significance level: max_i F_cons(p_i) / p_i.
MergeCorrection m_star(const MergeSample& sample);
// Correction valid on (0, alpha']: the maximum restricted to CDF points up to
// the first one at or above alpha'.
MergeCorrection m_targeted(const MergeSample& sample, double alpha_prime);
// Correction valid at alpha' only: the ratio at the first CDF point at or
// above alpha'.
MergeCorrection m_precise(const MergeSample& sample, double alpha_prime);

// sqrt(log(2/delta) / (2 * merge_size)), natural log.
double dkw_epsilon(std::size_t merge_size, double delta);

struct DkwBudget {
  double delta = 0.0;
  double epsilon = 0.0;

  static DkwBudget make(std::size_t merge_size, double delta);
};

// The weighted sum of expert profiles over the union of their cuts; the
// common input to every set construction below.
PValueProfile aggregate_profile(std::span<const PValueProfile> profiles, const WeightVector& w);

// Exact {y : factor * p_all(y) > alpha}. The whole line comes out naturally
// when even the smallest piece value clears the threshold.
IntervalSet scaled_superlevel_set(const PValueProfile& agg, double factor, double alpha);

IntervalSet aggregate_set(std::span<const PValueProfile> profiles, const WeightVector& w,
                          const MergeCorrection& correction, double alpha);

// ECDF transform: {y : F_cons(p_all(y)) > alpha}, with the DKW radius added
// to the CDF when a budget is given.
IntervalSet ecdf_superlevel_set(const PValueProfile& agg, const MergeSample& sample, double alpha,
                                const std::optional<DkwBudget>& dkw);

IntervalSet ecdf_transform_set(std::span<const PValueProfile> profiles, const WeightVector& w,
                               const MergeSample& sample, double alpha,
                               const std::optional<DkwBudget>& dkw);

// Finite-label variant: indices of the labels whose corrected weighted
// p-value clears alpha. p_per_expert is indexed [expert][label].
std::vector<std::size_t> finite_aggregate_set(
    const std::vector<std::vector<double>>& p_per_expert, const WeightVector& w, double factor,
    double alpha);

}  // namespace confagg
