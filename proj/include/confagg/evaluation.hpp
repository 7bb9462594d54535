#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace confagg {

// Per-test-point outcomes for one (method, score kind, alpha) cell of a
// trial. covered01 holds exact 0/1 doubles so the slab-count kernel can
// consume it directly; set_size may be +infinity.
struct TrialResult {
  std::string method;
  std::string score_kind;
  double alpha = 0.0;
  std::vector<double> covered01;
  std::vector<double> set_size;
  double m_hat = 1.0;
  std::uint64_t seed = 0;
};

double marginal_coverage(std::span<const double> covered01);

struct SetSizeSummary {
  double mean = 0.0;  // +infinity as soon as any set is unbounded
  std::size_t unbounded_count = 0;
};

SetSizeSummary mean_set_size(std::span<const double> set_size);

struct WsCoverage {
  double value = 1.0;
  // No slab reached the delta mass requirement; value fell back to marginal.
  bool no_qualifying_slab = false;
};

// Minimum conditional coverage over random slabs {x : a <= v.x <= b} holding
// at least delta * n_test points. v is uniform on the unit sphere and (a, b)
// is an ordered pair of empirical quantiles of the projections at uniform
// levels, so candidate slabs sweep the whole mass spectrum.
WsCoverage ws_coverage(std::span<const double> covered01, std::span<const double> features,
                       std::size_t n, std::size_t d, double delta, std::size_t n_slabs,
                       std::uint64_t seed);

double delta_coverage(double marginal, double ws);

struct GroupMetrics {
  double coverage = 0.0;
  double mean_size = 0.0;
  std::size_t count = 0;
  std::size_t unbounded_count = 0;
};

// Per-group means plus an "All" row equal to the marginal metrics. Groups may
// overlap; each mask flags membership per test point.
std::map<std::string, GroupMetrics> group_coverage(
    std::span<const double> covered01, std::span<const double> set_size,
    const std::map<std::string, std::vector<std::uint8_t>>& memberships);

// Fraction of values <= q; the empirical-CDF probe used by the statistical
// validity checks.
double empirical_cdf_at(std::span<const double> values, double q);

}  // namespace confagg
