#include "confagg/scores.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "confagg/errors.hpp"

namespace confagg {

ScoreKind score_kind_from_string(const std::string& name) {
  if (name == "abs_residual") return ScoreKind::AbsoluteResidual;
  if (name == "cqr") return ScoreKind::Cqr;
  throw ConfigError("unknown score kind \"" + name + "\" (expected abs_residual or cqr)");
}

const char* to_string(ScoreKind kind) {
  return kind == ScoreKind::AbsoluteResidual ? "abs_residual" : "cqr";
}

ScoreContext ScoreContext::absolute_residual(double prediction) {
  ScoreContext ctx;
  ctx.kind = ScoreKind::AbsoluteResidual;
  ctx.point_prediction = prediction;
  return ctx;
}

ScoreContext ScoreContext::cqr(double q_lo, double q_hi) {
  if (q_lo > q_hi) std::swap(q_lo, q_hi);
  ScoreContext ctx;
  ctx.kind = ScoreKind::Cqr;
  ctx.q_lo = q_lo;
  ctx.q_hi = q_hi;
  return ctx;
}

double score(const ScoreContext& ctx, double y) {
  if (ctx.kind == ScoreKind::AbsoluteResidual) return std::abs(y - ctx.point_prediction);
  return std::max(ctx.q_lo - y, y - ctx.q_hi);
}

IntervalSet sublevel_set(const ScoreContext& ctx, double r) {
  double lo, hi;
  if (ctx.kind == ScoreKind::AbsoluteResidual) {
    lo = ctx.point_prediction - r;
    hi = ctx.point_prediction + r;
  } else {
    lo = ctx.q_lo - r;
    hi = ctx.q_hi + r;
  }
  if (!(lo < hi)) return {};
  return IntervalSet({Interval{lo, hi, true, true}});
}

std::vector<double> breakpoints(const ScoreContext& ctx, std::span<const double> calib_scores) {
  std::vector<double> cuts;
  cuts.reserve(calib_scores.size() * 2);
  for (double r : calib_scores) {
    const IntervalSet s = sublevel_set(ctx, r);
    for (const auto& iv : s.parts()) {
      cuts.push_back(iv.lo);
      cuts.push_back(iv.hi);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return cuts;
}

}  // namespace confagg
