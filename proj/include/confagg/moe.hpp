#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "confagg/aggregation.hpp"
#include "confagg/data.hpp"

namespace confagg {

enum class ExpertKind { Point, QuantilePair };

// A linear model over a feature subset. Point experts hold one coefficient
// vector, quantile experts hold a (q_lo, q_hi) pair; the intercept is the
// last coefficient. The point prediction of a quantile expert is the midpoint
// of its pair, which is what router training and MoE point prediction use.
struct LinearExpert {
  std::vector<std::size_t> feature_indices;
  ExpertKind kind = ExpertKind::Point;
  std::vector<double> coefficients;
  std::vector<double> q_lo_coefficients;
  std::vector<double> q_hi_coefficients;

  double predict(std::span<const double> x_full) const;
  std::pair<double, double> predict_quantiles(std::span<const double> x_full) const;

  nlohmann::json to_json() const;
  static LinearExpert from_json(const nlohmann::json& j);
};

// Linear softmax gate over the full feature vector; one logit row per expert,
// intercept last.
struct Router {
  std::size_t n_experts = 0;
  std::size_t dim = 0;
  std::vector<double> coefficients;  // n_experts x (dim + 1), row-major

  std::vector<double> logits(std::span<const double> x_full) const;

  nlohmann::json to_json() const;
  static Router from_json(const nlohmann::json& j);
};

// Softmax with max-subtraction; sums to one for any finite logits.
std::vector<double> softmax(std::span<const double> logits);

struct MoeModel {
  std::vector<LinearExpert> experts;
  Router router;

  WeightVector route(std::span<const double> x_full) const;
  double predict(std::span<const double> x_full) const;
  // Weighted blend of the experts' quantile pairs (quantile experts only).
  std::pair<double, double> predict_quantiles(std::span<const double> x_full) const;

  nlohmann::json to_json() const;
  static MoeModel from_json(const nlohmann::json& j);
};

struct QuantileFitOptions {
  std::size_t max_iterations = 5000;
  double initial_step = 1e-2;
};

// Least squares with 1e-8 ridge damping on the Gram matrix for point experts;
// deterministic full-batch subgradient descent on the pinball loss at levels
// (alpha_prime/2, 1 - alpha_prime/2) for quantile experts.
LinearExpert fit_expert(const Dataset& data, std::span<const std::size_t> rows,
                        std::vector<std::size_t> feature_indices, ExpertKind kind,
                        double alpha_prime = 0.1, const QuantileFitOptions& opts = {});

// Single pinball fit, exposed for testing against brute-force minimization.
std::vector<double> fit_pinball(std::span<const double> design, std::size_t n_rows,
                                std::size_t n_cols, std::span<const double> targets, double tau,
                                const QuantileFitOptions& opts = {});

struct RouterFitOptions {
  std::size_t max_iterations = 2000;
  double initial_step = 0.1;
};

// Full-batch gradient descent from zero initialization on the MSE of the
// blended prediction; expert coefficients are frozen (sequential training).
Router fit_router(const MoeModel& moe, const Dataset& data, std::span<const std::size_t> rows,
                  const RouterFitOptions& opts = {});

MoeModel fit_moe(const Dataset& data, std::span<const std::size_t> rows,
                 const std::vector<std::vector<std::size_t>>& feature_groups, ExpertKind kind,
                 double alpha_prime = 0.1);

}  // namespace confagg
