#include "confagg/moe.hpp"

#include <algorithm>
#include <cmath>

#include "confagg/errors.hpp"
#include "confagg/kernels.hpp"

namespace confagg {

namespace {

double affine(std::span<const double> coef, std::span<const double> x_full,
              std::span<const std::size_t> idx) {
  double acc = coef[idx.size()];  // intercept
  for (std::size_t j = 0; j < idx.size(); ++j) acc += coef[j] * x_full[idx[j]];
  return acc;
}

// Gathers rows x columns(feature_indices) + trailing intercept column.
std::vector<double> gather_design(const Dataset& data, std::span<const std::size_t> rows,
                                  std::span<const std::size_t> features) {
  const std::size_t cols = features.size() + 1;
  std::vector<double> design(rows.size() * cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double* out = design.data() + r * cols;
    for (std::size_t j = 0; j < features.size(); ++j) out[j] = data.feature(rows[r], features[j]);
    out[features.size()] = 1.0;
  }
  return design;
}

// In-place Cholesky solve of A x = b for a symmetric positive definite A.
std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b, std::size_t n,
                              const std::string& what) {
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) diag -= a[j * n + k] * a[j * n + k];
    if (!(diag > 0.0) || !std::isfinite(diag))
      throw FitError(what + ": design matrix is rank-deficient beyond ridge rescue");
    const double root = std::sqrt(diag);
    a[j * n + j] = root;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) v -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = v / root;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double v = b[i];
    for (std::size_t k = 0; k < i; ++k) v -= a[i * n + k] * b[k];
    b[i] = v / a[i * n + i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double v = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) v -= a[k * n + ii] * b[k];
    b[ii] = v / a[ii * n + ii];
  }
  return b;
}

constexpr double kRidge = 1e-8;

std::vector<double> fit_ols(std::span<const double> design, std::size_t n_rows, std::size_t n_cols,
                            std::span<const double> targets, const std::string& what) {
  std::vector<double> gram(n_cols * n_cols, 0.0);
  std::vector<double> rhs(n_cols, 0.0);
  for (std::size_t r = 0; r < n_rows; ++r) {
    const double* x = design.data() + r * n_cols;
    for (std::size_t i = 0; i < n_cols; ++i) {
      kernels::axpy(x[i], {x, n_cols}, {gram.data() + i * n_cols, n_cols});
      rhs[i] += x[i] * targets[r];
    }
  }
  for (std::size_t i = 0; i < n_cols; ++i) gram[i * n_cols + i] += kRidge;
  std::vector<double> beta = solve_spd(std::move(gram), std::move(rhs), n_cols, what);
  for (double v : beta)
    if (!std::isfinite(v)) throw FitError(what + ": non-finite least-squares solution");
  return beta;
}

}  // namespace

std::vector<double> fit_pinball(std::span<const double> design, std::size_t n_rows,
                                std::size_t n_cols, std::span<const double> targets, double tau,
                                const QuantileFitOptions& opts) {
  const double inv_n = 1.0 / static_cast<double>(n_rows);
  std::vector<double> beta(n_cols, 0.0);
  std::vector<double> residual(n_rows);
  auto compute_residuals = [&](const std::vector<double>& b, std::vector<double>& u) {
    for (std::size_t r = 0; r < n_rows; ++r)
      u[r] = targets[r] - kernels::dot({design.data() + r * n_cols, n_cols}, {b.data(), n_cols});
  };
  compute_residuals(beta, residual);
  double loss = kernels::pinball_loss(residual, tau) * inv_n;

  std::vector<double> grad(n_cols);
  std::vector<double> cand(n_cols);
  std::vector<double> cand_residual(n_rows);
  double step = opts.initial_step;
  for (std::size_t iter = 0; iter < opts.max_iterations && step > 1e-16; ++iter) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t r = 0; r < n_rows; ++r) {
      const double u = residual[r];
      const double g = u > 0.0 ? tau : (u < 0.0 ? tau - 1.0 : 0.0);
      if (g != 0.0)
        kernels::axpy(-g * inv_n, {design.data() + r * n_cols, n_cols}, grad);
    }
    for (std::size_t j = 0; j < n_cols; ++j) cand[j] = beta[j] - step * grad[j];
    compute_residuals(cand, cand_residual);
    const double cand_loss = kernels::pinball_loss(cand_residual, tau) * inv_n;
    if (!std::isfinite(cand_loss)) throw FitError("pinball fit diverged");
    if (cand_loss <= loss) {
      beta.swap(cand);
      residual.swap(cand_residual);
      loss = cand_loss;
    } else {
      step *= 0.5;
    }
  }
  return beta;
}

double LinearExpert::predict(std::span<const double> x_full) const {
  if (kind == ExpertKind::Point) return affine(coefficients, x_full, feature_indices);
  const auto [lo, hi] = predict_quantiles(x_full);
  return 0.5 * (lo + hi);
}

std::pair<double, double> LinearExpert::predict_quantiles(std::span<const double> x_full) const {
  double lo = affine(q_lo_coefficients, x_full, feature_indices);
  double hi = affine(q_hi_coefficients, x_full, feature_indices);
  if (lo > hi) std::swap(lo, hi);
  return {lo, hi};
}

LinearExpert fit_expert(const Dataset& data, std::span<const std::size_t> rows,
                        std::vector<std::size_t> feature_indices, ExpertKind kind,
                        double alpha_prime, const QuantileFitOptions& opts) {
  if (feature_indices.empty()) throw FitError("expert has an empty feature group");
  for (const std::size_t j : feature_indices)
    if (j >= data.d)
      throw FitError("expert feature index " + std::to_string(j) + " out of range");
  if (rows.size() < feature_indices.size() + 1)
    throw FitError("expert needs at least " + std::to_string(feature_indices.size() + 1) +
                   " training rows, got " + std::to_string(rows.size()));

  const std::size_t cols = feature_indices.size() + 1;
  const std::vector<double> design = gather_design(data, rows, feature_indices);
  std::vector<double> targets(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) targets[r] = data.labels[rows[r]];

  LinearExpert expert;
  expert.feature_indices = std::move(feature_indices);
  expert.kind = kind;
  if (kind == ExpertKind::Point) {
    expert.coefficients = fit_ols(design, rows.size(), cols, targets, "point expert");
  } else {
    expert.q_lo_coefficients =
        fit_pinball(design, rows.size(), cols, targets, alpha_prime / 2.0, opts);
    expert.q_hi_coefficients =
        fit_pinball(design, rows.size(), cols, targets, 1.0 - alpha_prime / 2.0, opts);
  }
  return expert;
}

std::vector<double> Router::logits(std::span<const double> x_full) const {
  std::vector<double> out(n_experts);
  for (std::size_t k = 0; k < n_experts; ++k) {
    const double* row = coefficients.data() + k * (dim + 1);
    out[k] = row[dim] + kernels::dot({row, dim}, {x_full.data(), dim});
  }
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  const double peak = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (double& v : out) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : out) v /= total;
  return out;
}

WeightVector MoeModel::route(std::span<const double> x_full) const {
  return WeightVector(softmax(router.logits(x_full)));
}

double MoeModel::predict(std::span<const double> x_full) const {
  const WeightVector w = route(x_full);
  double acc = 0.0;
  for (std::size_t k = 0; k < experts.size(); ++k) acc += w[k] * experts[k].predict(x_full);
  return acc;
}

std::pair<double, double> MoeModel::predict_quantiles(std::span<const double> x_full) const {
  const WeightVector w = route(x_full);
  double lo = 0.0, hi = 0.0;
  for (std::size_t k = 0; k < experts.size(); ++k) {
    const auto [qlo, qhi] = experts[k].predict_quantiles(x_full);
    lo += w[k] * qlo;
    hi += w[k] * qhi;
  }
  return {lo, hi};
}

Router fit_router(const MoeModel& moe, const Dataset& data, std::span<const std::size_t> rows,
                  const RouterFitOptions& opts) {
  const std::size_t n_experts = moe.experts.size();
  Router router;
  router.n_experts = n_experts;
  router.dim = data.d;
  router.coefficients.assign(n_experts * (data.d + 1), 0.0);
  if (n_experts < 2 || rows.empty()) return router;

  const std::size_t n = rows.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  // Expert predictions are frozen during router training.
  std::vector<double> preds(n * n_experts);
  std::vector<double> targets(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto x = data.row(rows[r]);
    targets[r] = data.labels[rows[r]];
    for (std::size_t k = 0; k < n_experts; ++k)
      preds[r * n_experts + k] = moe.experts[k].predict(x);
  }

  const std::size_t stride = data.d + 1;
  std::vector<double> weights(n * n_experts);
  auto loss_of = [&](const std::vector<double>& phi, std::vector<double>& w_out) {
    double loss = 0.0;
    std::vector<double> logit(n_experts);
    for (std::size_t r = 0; r < n; ++r) {
      const auto x = data.row(rows[r]);
      for (std::size_t k = 0; k < n_experts; ++k) {
        const double* row = phi.data() + k * stride;
        logit[k] = row[data.d] + kernels::dot({row, data.d}, x);
      }
      const std::vector<double> w = softmax(logit);
      double yhat = 0.0;
      for (std::size_t k = 0; k < n_experts; ++k) {
        yhat += w[k] * preds[r * n_experts + k];
        w_out[r * n_experts + k] = w[k];
      }
      const double err = targets[r] - yhat;
      loss += err * err;
    }
    return loss * inv_n;
  };

  std::vector<double> phi = router.coefficients;
  double loss = loss_of(phi, weights);
  std::vector<double> grad(phi.size());
  std::vector<double> cand(phi.size());
  std::vector<double> cand_weights(n * n_experts);
  double step = opts.initial_step;
  for (std::size_t iter = 0; iter < opts.max_iterations && step > 1e-16; ++iter) {
    if (!std::isfinite(loss))
      throw FitError("router training hit a non-finite loss at iteration " +
                     std::to_string(iter));
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const auto x = data.row(rows[r]);
      double yhat = 0.0;
      for (std::size_t k = 0; k < n_experts; ++k)
        yhat += weights[r * n_experts + k] * preds[r * n_experts + k];
      const double common = 2.0 * inv_n * (yhat - targets[r]);
      for (std::size_t k = 0; k < n_experts; ++k) {
        const double coef =
            common * weights[r * n_experts + k] * (preds[r * n_experts + k] - yhat);
        if (coef != 0.0) {
          kernels::axpy(coef, x, {grad.data() + k * stride, data.d});
          grad[k * stride + data.d] += coef;
        }
      }
    }
    for (std::size_t j = 0; j < phi.size(); ++j) cand[j] = phi[j] - step * grad[j];
    const double cand_loss = loss_of(cand, cand_weights);
    if (!std::isfinite(cand_loss))
      throw FitError("router training hit a non-finite loss at iteration " +
                     std::to_string(iter));
    if (cand_loss <= loss) {
      phi.swap(cand);
      weights.swap(cand_weights);
      loss = cand_loss;
    } else {
      step *= 0.5;
    }
  }
  router.coefficients = std::move(phi);
  return router;
}

MoeModel fit_moe(const Dataset& data, std::span<const std::size_t> rows,
                 const std::vector<std::vector<std::size_t>>& feature_groups, ExpertKind kind,
                 double alpha_prime) {
  MoeModel moe;
  moe.experts.reserve(feature_groups.size());
  for (std::size_t k = 0; k < feature_groups.size(); ++k) {
    try {
      moe.experts.push_back(fit_expert(data, rows, feature_groups[k], kind, alpha_prime));
    } catch (const FitError& e) {
      throw FitError("expert " + std::to_string(k) + ": " + e.what());
    }
  }
  moe.router = fit_router(moe, data, rows);
  return moe;
}

nlohmann::json LinearExpert::to_json() const {
  nlohmann::json j{{"feature_indices", feature_indices},
                   {"kind", kind == ExpertKind::Point ? "point" : "quantile_pair"}};
  if (kind == ExpertKind::Point) {
    j["coefficients"] = coefficients;
  } else {
    j["q_lo_coefficients"] = q_lo_coefficients;
    j["q_hi_coefficients"] = q_hi_coefficients;
  }
  return j;
}

LinearExpert LinearExpert::from_json(const nlohmann::json& j) {
  LinearExpert e;
  e.feature_indices = j.at("feature_indices").get<std::vector<std::size_t>>();
  e.kind = j.at("kind").get<std::string>() == "point" ? ExpertKind::Point
                                                      : ExpertKind::QuantilePair;
  if (e.kind == ExpertKind::Point) {
    e.coefficients = j.at("coefficients").get<std::vector<double>>();
  } else {
    e.q_lo_coefficients = j.at("q_lo_coefficients").get<std::vector<double>>();
    e.q_hi_coefficients = j.at("q_hi_coefficients").get<std::vector<double>>();
  }
  return e;
}

nlohmann::json Router::to_json() const {
  return {{"n_experts", n_experts}, {"dim", dim}, {"coefficients", coefficients}};
}

Router Router::from_json(const nlohmann::json& j) {
  Router r;
  r.n_experts = j.at("n_experts").get<std::size_t>();
  r.dim = j.at("dim").get<std::size_t>();
  r.coefficients = j.at("coefficients").get<std::vector<double>>();
  return r;
}

nlohmann::json MoeModel::to_json() const {
  nlohmann::json ex = nlohmann::json::array();
  for (const auto& e : experts) ex.push_back(e.to_json());
  return {{"experts", ex}, {"router", router.to_json()}};
}

MoeModel MoeModel::from_json(const nlohmann::json& j) {
  MoeModel m;
  for (const auto& e : j.at("experts")) m.experts.push_back(LinearExpert::from_json(e));
  m.router = Router::from_json(j.at("router"));
  return m;
}

}  // namespace confagg
