#pragma once

#include <span>
#include <string>
#include <vector>

#include "confagg/interval_set.hpp"

namespace confagg {

enum class ScoreKind { AbsoluteResidual, Cqr };

ScoreKind score_kind_from_string(const std::string& name);
const char* to_string(ScoreKind kind);

// Predictor outputs at one fixed input: a point prediction for the absolute
// residual score, a quantile pair for the CQR score. Quantile crossing is
// repaired by swapping at construction.
struct ScoreContext {
  ScoreKind kind = ScoreKind::AbsoluteResidual;
  double point_prediction = 0.0;
  double q_lo = 0.0;
  double q_hi = 0.0;

  static ScoreContext absolute_residual(double prediction);
  static ScoreContext cqr(double q_lo, double q_hi);
};

double score(const ScoreContext& ctx, double y);

// {y : score(ctx, y) < r}, an open interval (possibly empty). The inequality
// is strict to match the p-value indicator.
IntervalSet sublevel_set(const ScoreContext& ctx, double r);

// All finite endpoints of sublevel_set(ctx, R_i) over the calibration scores,
// deduplicated and sorted ascending.
std::vector<double> breakpoints(const ScoreContext& ctx, std::span<const double> calib_scores);

}  // namespace confagg
