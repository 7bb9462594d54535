#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "confagg/errors.hpp"
#include "confagg/kernels.hpp"
#include "confagg/moe.hpp"
#include "confagg/rng.hpp"

using namespace confagg;

namespace {

Dataset make_dataset(std::vector<std::vector<double>> rows, std::vector<double> labels) {
  Dataset ds;
  ds.n = rows.size();
  ds.d = rows.front().size();
  for (const auto& r : rows) ds.features.insert(ds.features.end(), r.begin(), r.end());
  ds.labels = std::move(labels);
  for (std::size_t j = 0; j < ds.d; ++j) ds.column_names.push_back("c" + std::to_string(j));
  return ds;
}

std::vector<std::size_t> all_rows(const Dataset& ds) {
  std::vector<std::size_t> idx(ds.n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

double pinball_loss_at(const std::vector<double>& y, double b, double tau) {
  double acc = 0.0;
  for (const double v : y) {
    const double u = v - b;
    acc += std::max(tau * u, (tau - 1.0) * u);
  }
  return acc / static_cast<double>(y.size());
}

}  // namespace

TEST_CASE("ols recovers an exact linear fit") {
  const Dataset ds = make_dataset({{1.0}, {2.0}, {3.0}}, {2.0, 4.0, 6.0});
  const LinearExpert e = fit_expert(ds, all_rows(ds), {0}, ExpertKind::Point);
  CHECK(e.coefficients[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(e.coefficients[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
  const double x[1] = {5.0};
  CHECK(e.predict({x, 1}) == doctest::Approx(10.0).epsilon(1e-5));
}

TEST_CASE("ols on a constant target") {
  const Dataset ds = make_dataset({{1.0}, {2.0}, {-1.0}, {0.5}}, {3.0, 3.0, 3.0, 3.0});
  const LinearExpert e = fit_expert(ds, all_rows(ds), {0}, ExpertKind::Point);
  CHECK(e.coefficients[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
  CHECK(e.coefficients[1] == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("ols rejects too few rows") {
  const Dataset ds = make_dataset({{1.0, 2.0}}, {1.0});
  CHECK_THROWS_AS(fit_expert(ds, all_rows(ds), {0, 1}, ExpertKind::Point), FitError);
}

TEST_CASE("ols normal-equation residual is tiny on random instances") {
  Rng rng(404);
  for (int rep = 0; rep < 5; ++rep) {
    const std::size_t n = 120, d = 6;
    Dataset ds;
    ds.n = n;
    ds.d = d;
    ds.features.resize(n * d);
    ds.labels.resize(n);
    for (auto& v : ds.features) v = rng.normal();
    double ynorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ds.labels[i] = 2.0 * ds.feature(i, 0) - ds.feature(i, 3) + 0.5 * rng.normal();
      ynorm += ds.labels[i] * ds.labels[i];
    }
    ynorm = std::sqrt(ynorm);
    std::vector<std::size_t> feats(d);
    std::iota(feats.begin(), feats.end(), std::size_t{0});
    const LinearExpert e = fit_expert(ds, all_rows(ds), feats, ExpertKind::Point);
    // X^T (X beta - y), with the intercept column included
    std::vector<double> resid(d + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double pred = e.coefficients[d];
      for (std::size_t j = 0; j < d; ++j) pred += e.coefficients[j] * ds.feature(i, j);
      const double err = pred - ds.labels[i];
      for (std::size_t j = 0; j < d; ++j) resid[j] += ds.feature(i, j) * err;
      resid[d] += err;
    }
    double norm = 0.0;
    for (const double v : resid) norm += v * v;
    CHECK(std::sqrt(norm) <= 1e-6 * (1.0 + ynorm));
  }
}

TEST_CASE("pinball fit finds the sample median with an intercept-only model") {
  // Enumeration oracle: the loss is piecewise linear in b, so the minimum
  // sits at a data value; evaluating at {1, 2, 100} picks 2.
  const std::vector<double> y{1.0, 2.0, 100.0};
  double best = y[0];
  for (const double b : y)
    if (pinball_loss_at(y, b, 0.5) < pinball_loss_at(y, best, 0.5)) best = b;
  REQUIRE(best == 2.0);

  const std::vector<double> design{1.0, 1.0, 1.0};  // intercept column only
  const std::vector<double> beta = fit_pinball(design, 3, 1, y, 0.5);
  CHECK(beta[0] == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("pinball subgradient norm at the solution, gradient checked by finite differences") {
  Rng rng(808);
  const std::size_t n = 10000, d = 2, cols = d + 1;
  std::vector<double> design(n * cols);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    design[i * cols + 0] = rng.normal();
    design[i * cols + 1] = rng.normal();
    design[i * cols + 2] = 1.0;
    y[i] = 1.5 * design[i * cols] - 0.7 * design[i * cols + 1] + 0.3 + rng.normal();
  }
  const double tau = 0.3;
  const std::vector<double> beta = fit_pinball(design, n, cols, y, tau);

  auto loss_at = [&](const std::vector<double>& b) {
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i)
      u[i] = y[i] - kernels::dot({design.data() + i * cols, cols}, {b.data(), cols});
    return kernels::pinball_loss(u, tau) / static_cast<double>(n);
  };
  auto subgrad_at = [&](const std::vector<double>& b) {
    std::vector<double> g(cols, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double u =
          y[i] - kernels::dot({design.data() + i * cols, cols}, {b.data(), cols});
      const double gi = u > 0.0 ? tau : (u < 0.0 ? tau - 1.0 : 0.0);
      for (std::size_t j = 0; j < cols; ++j)
        g[j] -= gi * design[i * cols + j] / static_cast<double>(n);
    }
    return g;
  };

  const std::vector<double> g = subgrad_at(beta);
  double gnorm = 0.0;
  for (const double v : g) gnorm += v * v;
  CHECK(std::sqrt(gnorm) <= 1e-3);

  // The analytic subgradient must agree with central finite differences at a
  // generic (differentiable) point.
  std::vector<double> off = beta;
  for (auto& v : off) v += 0.37;
  const std::vector<double> g_off = subgrad_at(off);
  const double h = 1e-6;
  for (std::size_t j = 0; j < cols; ++j) {
    std::vector<double> plus = off, minus = off;
    plus[j] += h;
    minus[j] -= h;
    const double fd = (loss_at(plus) - loss_at(minus)) / (2.0 * h);
    CHECK(fd == doctest::Approx(g_off[j]).epsilon(1e-3).scale(1.0));
  }
}

TEST_CASE("quantile expert brackets the data") {
  Rng rng(909);
  const std::size_t n = 300;
  Dataset ds;
  ds.n = n;
  ds.d = 1;
  ds.features.resize(n);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.features[i] = rng.uniform(-1.0, 1.0);
    ds.labels[i] = 2.0 * ds.features[i] + rng.normal();
  }
  const LinearExpert e = fit_expert(ds, all_rows(ds), {0}, ExpertKind::QuantilePair, 0.2);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [lo, hi] = e.predict_quantiles(ds.row(i));
    CHECK(lo <= hi);
    if (ds.labels[i] >= lo && ds.labels[i] <= hi) ++inside;
  }
  // nominal band mass is 0.8
  CHECK(static_cast<double>(inside) / n > 0.6);
  CHECK(static_cast<double>(inside) / n < 0.95);
}

TEST_CASE("softmax routing") {
  CHECK(softmax(std::vector<double>{0.0, 0.0}) == std::vector<double>{0.5, 0.5});
  const auto big = softmax(std::vector<double>{1000.0, 0.0});
  CHECK(big[0] == doctest::Approx(1.0));
  CHECK(big[1] == doctest::Approx(0.0).scale(1.0));
  const auto ln2 = softmax(std::vector<double>{std::log(2.0), 0.0});
  CHECK(ln2[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK(ln2[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("route yields valid weights on random inputs") {
  Rng rng(123);
  MoeModel moe;
  moe.experts.resize(3);
  moe.router.n_experts = 3;
  moe.router.dim = 4;
  moe.router.coefficients.resize(3 * 5);
  for (auto& c : moe.router.coefficients) c = rng.normal();
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> x(4);
    for (auto& v : x) v = 3.0 * rng.normal();
    const WeightVector w = moe.route(x);
    double total = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(w[k] >= 0.0);
      total += w[k];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("moe prediction blends experts") {
  MoeModel moe;
  LinearExpert a;
  a.feature_indices = {0};
  a.kind = ExpertKind::Point;
  a.coefficients = {0.0, 3.0};  // constant 3
  LinearExpert b = a;
  b.coefficients = {0.0, 0.0};  // constant 0
  moe.experts = {a, b};
  moe.router.n_experts = 2;
  moe.router.dim = 1;
  moe.router.coefficients.assign(4, 0.0);  // uniform weights
  const double x[1] = {0.0};
  CHECK(moe.predict({x, 1}) == doctest::Approx(1.5));
  moe.router.coefficients = {0.0, std::log(2.0), 0.0, 0.0};  // weights (2/3, 1/3)
  CHECK(moe.predict({x, 1}) == doctest::Approx(2.0));
}

TEST_CASE("router training specializes on a piecewise task") {
  Rng rng(2718);
  const std::size_t n = 400;
  std::vector<std::vector<double>> rows;
  std::vector<double> labels;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(-2.0, 2.0);
    rows.push_back({std::min(x, 0.0), std::max(x, 0.0)});
    labels.push_back(2.0 * std::min(x, 0.0) - 3.0 * std::max(x, 0.0) + 0.05 * rng.normal());
  }
  const Dataset ds = make_dataset(rows, labels);

  MoeModel moe;
  LinearExpert left;  // exact on x < 0
  left.feature_indices = {0};
  left.kind = ExpertKind::Point;
  left.coefficients = {2.0, 0.0};
  LinearExpert right;  // exact on x >= 0
  right.feature_indices = {1};
  right.kind = ExpertKind::Point;
  right.coefficients = {-3.0, 0.0};
  moe.experts = {left, right};

  const std::vector<double> before = moe.experts[0].coefficients;
  moe.router = fit_router(moe, ds, all_rows(ds));
  CHECK(moe.experts[0].coefficients == before);  // sequential training freeze

  std::size_t matched = 0;
  std::size_t held_out = 0;
  Rng eval_rng(111);
  for (int rep = 0; rep < 500; ++rep) {
    const double x = eval_rng.uniform(-2.0, 2.0);
    if (std::abs(x) < 0.05) continue;  // skip the boundary sliver
    ++held_out;
    const std::vector<double> feat{std::min(x, 0.0), std::max(x, 0.0)};
    const WeightVector w = moe.route(feat);
    const std::size_t dominant = w[0] >= w[1] ? 0u : 1u;
    const std::size_t wanted = x < 0.0 ? 0u : 1u;
    if (dominant == wanted) ++matched;
  }
  CHECK(static_cast<double>(matched) / static_cast<double>(held_out) >= 0.9);
}

TEST_CASE("zero-initialized router yields uniform weights and K=1 is a no-op") {
  const Dataset ds = make_dataset({{0.0}, {1.0}, {2.0}}, {0.0, 1.0, 2.0});
  MoeModel single;
  LinearExpert e;
  e.feature_indices = {0};
  e.kind = ExpertKind::Point;
  e.coefficients = {1.0, 0.0};
  single.experts = {e};
  single.router = fit_router(single, ds, all_rows(ds));
  const double x[1] = {1.5};
  const WeightVector w = single.route({x, 1});
  CHECK(w.size() == 1);
  CHECK(w[0] == doctest::Approx(1.0));
  CHECK(single.predict({x, 1}) == doctest::Approx(1.5));
}

TEST_CASE("router training reports divergence with the iteration index") {
  // A label large enough to overflow the squared error to infinity trips the
  // non-finite loss guard on the first iteration.
  const Dataset ds = make_dataset({{1.0}, {-1.0}, {0.5}}, {1e200, 0.0, 0.0});
  MoeModel moe;
  LinearExpert e;
  e.feature_indices = {0};
  e.kind = ExpertKind::Point;
  e.coefficients = {1.0, 0.0};
  moe.experts = {e, e};
  CHECK_THROWS_WITH_AS(static_cast<void>(fit_router(moe, ds, all_rows(ds))),
                       doctest::Contains("iteration"), FitError);
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto build = [] {
    Rng rng(31337);
    const std::size_t n = 150;
    std::vector<std::vector<double>> rows;
    std::vector<double> labels;
    for (std::size_t i = 0; i < n; ++i) {
      rows.push_back({rng.normal(), rng.normal(), rng.normal()});
      labels.push_back(rows.back()[0] - 2.0 * rows.back()[2] + 0.1 * rng.normal());
    }
    const Dataset ds = make_dataset(rows, labels);
    return fit_moe(ds, all_rows(ds), {{0, 1}, {1, 2}}, ExpertKind::Point);
  };
  const MoeModel a = build();
  const MoeModel b = build();
  CHECK(a.router.coefficients == b.router.coefficients);
  for (std::size_t k = 0; k < a.experts.size(); ++k)
    CHECK(a.experts[k].coefficients == b.experts[k].coefficients);
}

TEST_CASE("model serialization round trip") {
  MoeModel moe;
  LinearExpert e;
  e.feature_indices = {0, 2};
  e.kind = ExpertKind::QuantilePair;
  e.q_lo_coefficients = {0.5, -1.0, 0.1};
  e.q_hi_coefficients = {0.7, -0.9, 0.4};
  moe.experts = {e};
  moe.router.n_experts = 1;
  moe.router.dim = 3;
  moe.router.coefficients = {0.1, 0.2, 0.3, 0.4};
  const MoeModel back = MoeModel::from_json(moe.to_json());
  CHECK(back.experts[0].q_lo_coefficients == e.q_lo_coefficients);
  CHECK(back.experts[0].feature_indices == e.feature_indices);
  CHECK(back.router.coefficients == moe.router.coefficients);
}
