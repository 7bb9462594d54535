#include "confagg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "confagg/kernels.hpp"
#include "confagg/rng.hpp"

namespace confagg {

double marginal_coverage(std::span<const double> covered01) {
  if (covered01.empty()) throw std::invalid_argument("coverage of an empty result set");
  return kernels::sum(covered01) / static_cast<double>(covered01.size());
}

SetSizeSummary mean_set_size(std::span<const double> set_size) {
  if (set_size.empty()) throw std::invalid_argument("set size of an empty result set");
  SetSizeSummary out;
  double total = 0.0;
  for (double s : set_size) {
    if (std::isinf(s)) ++out.unbounded_count;
    total += s;
  }
  out.mean = out.unbounded_count > 0 ? std::numeric_limits<double>::infinity()
                                     : total / static_cast<double>(set_size.size());
  return out;
}

namespace {

// The floor((n+1)u)-th smallest value, clamped to the observed range.
double empirical_quantile(const std::vector<double>& sorted, double u) {
  const double h = std::floor(static_cast<double>(sorted.size() + 1) * u);
  const auto idx = static_cast<std::size_t>(
      std::clamp(h - 1.0, 0.0, static_cast<double>(sorted.size() - 1)));
  return sorted[idx];
}

}  // namespace

WsCoverage ws_coverage(std::span<const double> covered01, std::span<const double> features,
                       std::size_t n, std::size_t d, double delta, std::size_t n_slabs,
                       std::uint64_t seed) {
  if (covered01.size() != n || features.size() != n * d)
    throw std::invalid_argument("ws_coverage: shape mismatch");
  if (!(delta > 0.0 && delta <= 1.0))
    throw std::invalid_argument("ws_coverage: delta must lie in (0, 1]");
  const double min_mass = delta * static_cast<double>(n);

  Rng rng(seed);
  std::vector<double> proj(n);
  std::vector<double> sorted(n);
  WsCoverage out;
  double worst = 2.0;
  for (std::size_t s = 0; s < n_slabs; ++s) {
    const std::vector<double> v = rng.unit_vector(d);
    for (std::size_t i = 0; i < n; ++i)
      proj[i] = kernels::dot({features.data() + i * d, d}, {v.data(), d});
    sorted.assign(proj.begin(), proj.end());
    std::sort(sorted.begin(), sorted.end());
    double a = empirical_quantile(sorted, rng.uniform());
    double b = empirical_quantile(sorted, rng.uniform());
    if (a > b) std::swap(a, b);
    const auto counts = kernels::slab_counts(proj, covered01, a, b);
    if (static_cast<double>(counts.inside) + 1e-9 < min_mass) continue;
    const double cov =
        static_cast<double>(counts.inside_covered) / static_cast<double>(counts.inside);
    worst = std::min(worst, cov);
  }
  if (worst > 1.0) {
    out.value = marginal_coverage(covered01);
    out.no_qualifying_slab = true;
  } else {
    out.value = worst;
  }
  return out;
}

double delta_coverage(double marginal, double ws) { return marginal - ws; }

std::map<std::string, GroupMetrics> group_coverage(
    std::span<const double> covered01, std::span<const double> set_size,
    const std::map<std::string, std::vector<std::uint8_t>>& memberships) {
  if (covered01.size() != set_size.size())
    throw std::invalid_argument("group_coverage: shape mismatch");
  std::map<std::string, GroupMetrics> out;
  auto fold = [&](const std::vector<std::uint8_t>* mask) {
    GroupMetrics g;
    double cov = 0.0, size = 0.0;
    for (std::size_t i = 0; i < covered01.size(); ++i) {
      if (mask != nullptr && (*mask)[i] == 0) continue;
      ++g.count;
      cov += covered01[i];
      if (std::isinf(set_size[i])) ++g.unbounded_count;
      size += set_size[i];
    }
    if (g.count > 0) {
      g.coverage = cov / static_cast<double>(g.count);
      g.mean_size = g.unbounded_count > 0 ? std::numeric_limits<double>::infinity()
                                          : size / static_cast<double>(g.count);
    }
    return g;
  };
  for (const auto& [name, mask] : memberships) {
    if (mask.size() != covered01.size())
      throw std::invalid_argument("group mask length mismatch for \"" + name + "\"");
    out[name] = fold(&mask);
  }
  out["All"] = fold(nullptr);
  return out;
}

double empirical_cdf_at(std::span<const double> values, double q) {
  if (values.empty()) throw std::invalid_argument("empirical CDF of an empty sample");
  return static_cast<double>(kernels::count_leq(values, q)) /
         static_cast<double>(values.size());
}

}  // namespace confagg
