#include "confagg/pvalue.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

#include "confagg/kernels.hpp"

namespace confagg {

double PValueProfile::eval(double y) const {
  const auto it = std::lower_bound(cuts.begin(), cuts.end(), y);
  const std::size_t idx = static_cast<std::size_t>(it - cuts.begin());
  if (it != cuts.end() && *it == y) return at_cut_values[idx];
  return values[idx];
}

CalibratedExpert::CalibratedExpert(ContextFn ctx_builder, std::vector<double> calib_scores)
    : ctx_builder_(std::move(ctx_builder)), calib_scores_(std::move(calib_scores)) {
  if (calib_scores_.empty()) throw std::invalid_argument("calibration set must be nonempty");
  std::sort(calib_scores_.begin(), calib_scores_.end());
}

double CalibratedExpert::p_value_from_score(double s) const {
  const std::size_t exceed = kernels::count_greater(calib_scores_, s);
  return static_cast<double>(1 + exceed) / static_cast<double>(calib_scores_.size() + 1);
}

double CalibratedExpert::p_value(std::span<const double> x, double y) const {
  return p_value_from_score(score(ctx_builder_(x), y));
}

PValueProfile CalibratedExpert::profile(std::span<const double> x) const {
  const ScoreContext ctx = ctx_builder_(x);
  PValueProfile prof;
  prof.cuts = breakpoints(ctx, calib_scores_);
  const std::size_t b = prof.cuts.size();
  prof.values.resize(b + 1);
  prof.at_cut_values.resize(b);
  auto value_at = [&](double y) { return p_value_from_score(score(ctx, y)); };
  if (b == 0) {
    prof.values[0] = value_at(0.0);
    return prof;
  }
  prof.values[0] = value_at(prof.cuts.front() - 1.0);
  prof.values[b] = value_at(prof.cuts.back() + 1.0);
  for (std::size_t i = 1; i < b; ++i)
    prof.values[i] = value_at(0.5 * (prof.cuts[i - 1] + prof.cuts[i]));
  for (std::size_t i = 0; i < b; ++i) prof.at_cut_values[i] = value_at(prof.cuts[i]);
  return prof;
}

std::vector<double> CalibratedExpert::p_values_for_labels(std::span<const double> x,
                                                          std::span<const double> labels) const {
  const ScoreContext ctx = ctx_builder_(x);
  std::vector<double> out;
  out.reserve(labels.size());
  for (double y : labels) out.push_back(p_value_from_score(score(ctx, y)));
  return out;
}

IntervalSet profile_superlevel_set(const PValueProfile& prof,
                                   const std::function<bool(double)>& keep) {
  const std::size_t b = prof.cuts.size();
  std::vector<Interval> parts;
  bool run_active = false;
  Interval cur;
  for (std::size_t i = 0; i <= b; ++i) {
    const bool piece_ok = keep(prof.values[i]);
    if (piece_ok && !run_active) {
      cur.lo = (i == 0) ? kNegInf : prof.cuts[i - 1];
      cur.lo_open = !(i > 0 && keep(prof.at_cut_values[i - 1]));
      run_active = true;
    }
    if (!run_active) continue;
    if (i == b) {
      cur.hi = kPosInf;
      cur.hi_open = true;
      parts.push_back(cur);
      run_active = false;
      break;
    }
    const bool cut_ok = keep(prof.at_cut_values[i]);
    const bool next_ok = keep(prof.values[i + 1]);
    if (cut_ok && next_ok) continue;  // run crosses the cut
    cur.hi = prof.cuts[i];
    cur.hi_open = !cut_ok;
    parts.push_back(cur);
    run_active = false;
  }
  return IntervalSet(std::move(parts));
}

IntervalSet threshold_set(const PValueProfile& prof, double tau) {
  return profile_superlevel_set(prof, [tau](double p) { return p > tau; });
}

}  // namespace confagg
