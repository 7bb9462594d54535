#include "confagg/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "confagg/errors.hpp"

namespace confagg {

WeightVector::WeightVector(std::vector<double> w) : w_(std::move(w)) {
  if (w_.empty()) throw ConfigError("weight vector must be nonempty");
  double total = 0.0;
  for (double v : w_) {
    if (!(v >= 0.0)) throw ConfigError("weights must be nonnegative and finite");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ConfigError("weights sum to " + std::to_string(total) + ", expected 1 within 1e-9");
  for (double& v : w_) v /= total;
}

double WeightVector::max_weight() const { return *std::max_element(w_.begin(), w_.end()); }

double weighted_p(std::span<const double> p_values, const WeightVector& w) {
  if (p_values.size() != w.size())
    throw ConfigError("expected " + std::to_string(w.size()) + " p-values, got " +
                      std::to_string(p_values.size()));
  double acc = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) acc += w[k] * p_values[k];
  return acc;
}

double prop1_factor(const WeightVector& v) { return std::min(1.0 / v.max_weight(), 2.0); }

MergeSample::MergeSample(std::vector<double> p_all_values) : sorted_(std::move(p_all_values)) {
  if (sorted_.empty()) throw InvalidSampleError("merge sample must be nonempty");
  for (double p : sorted_)
    if (!(p > 0.0) || p > 1.0)
      throw InvalidSampleError("merge sample value " + std::to_string(p) + " outside (0, 1]");
  std::sort(sorted_.begin(), sorted_.end());
}

double conservative_ecdf(const MergeSample& sample, double q) {
  const auto& s = sample.sorted_values();
  const auto leq =
      static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), q) - s.begin());
  const std::size_t min_hit = sample.min_value() <= q ? 1u : 0u;
  return static_cast<double>(min_hit + leq) / static_cast<double>(s.size() + 1);
}

const char* to_string(CorrectionVariant v) {
  switch (v) {
    case CorrectionVariant::AllAlpha:
      return "all_alpha";
    case CorrectionVariant::Targeted:
      return "targeted";
    case CorrectionVariant::Precise:
      return "precise";
  }
  return "unknown";
}

nlohmann::json MergeCorrection::to_json() const {
  nlohmann::json j{{"factor", factor},
                   {"variant", to_string(variant)},
                   {"merge_size", merge_size}};
  if (alpha_prime) j["alpha_prime"] = *alpha_prime;
  if (fallback) j["fallback"] = true;
  return j;
}

namespace {

// The supremum of F_cons(q)/q over q > 0 is attained at an observed sample
// value: F_cons is a right-continuous step function jumping only there, and
// between jumps the ratio decreases in q.
struct CdfPoint {
  double p = 0.0;
  double cdf = 0.0;
};

std::vector<CdfPoint> cdf_points(const MergeSample& sample) {
  std::vector<CdfPoint> pts;
  pts.reserve(sample.size());
  for (double p : sample.sorted_values()) pts.push_back({p, conservative_ecdf(sample, p)});
  return pts;
}

}  // namespace

MergeCorrection m_star(const MergeSample& sample) {
  double factor = 0.0;
  for (const auto& pt : cdf_points(sample)) factor = std::max(factor, pt.cdf / pt.p);
  return MergeCorrection{factor, CorrectionVariant::AllAlpha, sample.size(), std::nullopt, false};
}

MergeCorrection m_targeted(const MergeSample& sample, double alpha_prime) {
  if (!(alpha_prime > 0.0 && alpha_prime < 1.0))
    throw ConfigError("alpha_prime must lie in (0, 1)");
  const auto pts = cdf_points(sample);
  double alpha_bar = std::numeric_limits<double>::infinity();
  for (const auto& pt : pts)
    if (pt.cdf >= alpha_prime) alpha_bar = std::min(alpha_bar, pt.cdf);
  double factor = 0.0;
  for (const auto& pt : pts)
    if (pt.cdf <= alpha_bar) factor = std::max(factor, pt.cdf / pt.p);
  return MergeCorrection{factor, CorrectionVariant::Targeted, sample.size(), alpha_prime, false};
}

MergeCorrection m_precise(const MergeSample& sample, double alpha_prime) {
  if (!(alpha_prime > 0.0 && alpha_prime < 1.0))
    throw ConfigError("alpha_prime must lie in (0, 1)");
  const auto pts = cdf_points(sample);
  const CdfPoint* best = nullptr;
  for (const auto& pt : pts)
    if (pt.cdf >= alpha_prime && (best == nullptr || pt.cdf < best->cdf)) best = &pt;
  bool fallback = false;
  if (best == nullptr) {
    best = &pts.back();  // largest sample point
    fallback = true;
  }
  return MergeCorrection{best->cdf / best->p, CorrectionVariant::Precise, sample.size(),
                         alpha_prime, fallback};
}

double dkw_epsilon(std::size_t merge_size, double delta) {
  if (merge_size < 1) throw ConfigError("merge_size must be at least 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(merge_size)));
}

DkwBudget DkwBudget::make(std::size_t merge_size, double delta) {
  return DkwBudget{delta, dkw_epsilon(merge_size, delta)};
}

PValueProfile aggregate_profile(std::span<const PValueProfile> profiles, const WeightVector& w) {
  if (profiles.size() != w.size())
    throw ConfigError("expected " + std::to_string(w.size()) + " profiles, got " +
                      std::to_string(profiles.size()));
  PValueProfile agg;
  for (const auto& prof : profiles)
    agg.cuts.insert(agg.cuts.end(), prof.cuts.begin(), prof.cuts.end());
  std::sort(agg.cuts.begin(), agg.cuts.end());
  agg.cuts.erase(std::unique(agg.cuts.begin(), agg.cuts.end()), agg.cuts.end());

  const std::size_t b = agg.cuts.size();
  auto combined = [&](double y) {
    double acc = 0.0;
    for (std::size_t k = 0; k < profiles.size(); ++k) acc += w[k] * profiles[k].eval(y);
    return acc;
  };
  agg.values.resize(b + 1);
  agg.at_cut_values.resize(b);
  if (b == 0) {
    agg.values[0] = combined(0.0);
    return agg;
  }
  agg.values[0] = combined(agg.cuts.front() - 1.0);
  agg.values[b] = combined(agg.cuts.back() + 1.0);
  for (std::size_t i = 1; i < b; ++i)
    agg.values[i] = combined(0.5 * (agg.cuts[i - 1] + agg.cuts[i]));
  for (std::size_t i = 0; i < b; ++i) agg.at_cut_values[i] = combined(agg.cuts[i]);
  return agg;
}

IntervalSet scaled_superlevel_set(const PValueProfile& agg, double factor, double alpha) {
  return profile_superlevel_set(agg, [factor, alpha](double p) { return factor * p > alpha; });
}

IntervalSet aggregate_set(std::span<const PValueProfile> profiles, const WeightVector& w,
                          const MergeCorrection& correction, double alpha) {
  return scaled_superlevel_set(aggregate_profile(profiles, w), correction.factor, alpha);
}

IntervalSet ecdf_superlevel_set(const PValueProfile& agg, const MergeSample& sample, double alpha,
                                const std::optional<DkwBudget>& dkw) {
  const double eps = dkw ? dkw->epsilon : 0.0;
  return profile_superlevel_set(
      agg, [&](double p) { return conservative_ecdf(sample, p) + eps > alpha; });
}

IntervalSet ecdf_transform_set(std::span<const PValueProfile> profiles, const WeightVector& w,
                               const MergeSample& sample, double alpha,
                               const std::optional<DkwBudget>& dkw) {
  return ecdf_superlevel_set(aggregate_profile(profiles, w), sample, alpha, dkw);
}

std::vector<std::size_t> finite_aggregate_set(
    const std::vector<std::vector<double>>& p_per_expert, const WeightVector& w, double factor,
    double alpha) {
  if (p_per_expert.size() != w.size()) throw ConfigError("one p-value vector per expert required");
  std::vector<std::size_t> kept;
  if (p_per_expert.empty()) return kept;
  const std::size_t n_labels = p_per_expert.front().size();
  for (const auto& v : p_per_expert)
    if (v.size() != n_labels) throw ConfigError("per-expert label p-value lengths differ");
  for (std::size_t j = 0; j < n_labels; ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) acc += w[k] * p_per_expert[k][j];
    if (factor * acc > alpha) kept.push_back(j);
  }
  return kept;
}

}  // namespace confagg
