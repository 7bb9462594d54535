#pragma once

#include <functional>
#include <span>
#include <vector>

#include "confagg/interval_set.hpp"
#include "confagg/scores.hpp"

namespace confagg {

// The full map y -> p(x, y) for one fixed input: piecewise constant between
// strictly increasing cuts, with the value exactly at each cut stored
// separately. The strict inequality in the p-value count makes the function
// neither left- nor right-continuous in general, so a continuity convention
// cannot replace at_cut_values.
struct PValueProfile {
  std::vector<double> cuts;           // size B
  std::vector<double> values;         // size B+1, one per open piece
  std::vector<double> at_cut_values;  // size B

  double eval(double y) const;
};

// A fitted predictor reduced to what conformal evaluation needs: a score
// context per input plus the sorted calibration scores. Immutable after
// construction; evaluation is pure and thread-safe.
class CalibratedExpert {
 public:
  using ContextFn = std::function<ScoreContext(std::span<const double>)>;

  CalibratedExpert(ContextFn ctx_builder, std::vector<double> calib_scores);

  std::size_t n_cal() const { return calib_scores_.size(); }
  const std::vector<double>& calib_scores() const { return calib_scores_; }
  ScoreContext context(std::span<const double> x) const { return ctx_builder_(x); }

  // (1 + #{i : s < R_i}) / (n_cal + 1); always in (0, 1].
  double p_value_from_score(double s) const;
  double p_value(std::span<const double> x, double y) const;

  // The exact step function y -> p_value(x, y), built from the breakpoints of
  // the score's sublevel sets. Regression score kinds only.
  PValueProfile profile(std::span<const double> x) const;

  // Finite-label path: evaluates the p-value at each candidate label
  // directly, no profile construction.
  std::vector<double> p_values_for_labels(std::span<const double> x,
                                          std::span<const double> labels) const;

 private:
  ContextFn ctx_builder_;
  std::vector<double> calib_scores_;
};

// Exact {y : prof(y) > tau}, honoring the stored at-cut values for endpoint
// openness. Superlevel sets for other piecewise predicates (scaled and
// CDF-transformed thresholds) share the same assembly.
IntervalSet threshold_set(const PValueProfile& prof, double tau);

IntervalSet profile_superlevel_set(const PValueProfile& prof,
                                   const std::function<bool(double)>& keep);

}  // namespace confagg
