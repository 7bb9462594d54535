#include <doctest.h>

#include <cmath>
#include <vector>

#include "confagg/evaluation.hpp"
#include "confagg/rng.hpp"

using namespace confagg;

TEST_CASE("marginal coverage") {
  CHECK(marginal_coverage(std::vector<double>{1, 1, 1}) == doctest::Approx(1.0));
  std::vector<double> nine(10, 1.0);
  nine[3] = 0.0;
  CHECK(marginal_coverage(nine) == doctest::Approx(0.9));
  CHECK_THROWS(marginal_coverage(std::vector<double>{}));
}

TEST_CASE("mean set size with unbounded sets") {
  CHECK(mean_set_size(std::vector<double>{2.0, 4.0}).mean == doctest::Approx(3.0));
  const auto s =
      mean_set_size(std::vector<double>{1.0, std::numeric_limits<double>::infinity()});
  CHECK(std::isinf(s.mean));
  CHECK(s.unbounded_count == 1);
}

TEST_CASE("delta coverage is not clamped") {
  CHECK(delta_coverage(0.95, 0.85) == doctest::Approx(0.10));
  CHECK(delta_coverage(0.9, 0.93) == doctest::Approx(-0.03));
  CHECK(delta_coverage(1.0, 1.0) == 0.0);
}

TEST_CASE("worst-slice coverage on the two-cluster fixture") {
  // 50 uncovered points at x = -1, 50 covered at x = +1. In one dimension
  // the slab family is exhaustively enumerable: any slab holding >= 40% of
  // the mass either isolates a cluster or mixes both, so the worst is 0.
  const std::size_t n = 100;
  std::vector<double> features(n), covered(n);
  for (std::size_t i = 0; i < n; ++i) {
    features[i] = i < 50 ? -1.0 : 1.0;
    covered[i] = i < 50 ? 0.0 : 1.0;
  }
  double oracle = 1.0;
  for (const double v : {-1.0, 1.0})
    for (const double a : {-1.0, 1.0})
      for (const double b : {-1.0, 1.0}) {
        if (a > b) continue;
        std::size_t inside = 0, cov = 0;
        for (std::size_t i = 0; i < n; ++i) {
          const double p = v * features[i];
          if (p >= a && p <= b) {
            ++inside;
            if (covered[i] != 0.0) ++cov;
          }
        }
        if (inside >= 40) oracle = std::min(oracle, double(cov) / double(inside));
      }
  REQUIRE(oracle == 0.0);

  const WsCoverage ws = ws_coverage(covered, features, n, 1, 0.4, 1000, 77);
  CHECK_FALSE(ws.no_qualifying_slab);
  CHECK(ws.value == 0.0);
}

TEST_CASE("worst-slice equals marginal when every point is covered") {
  const std::size_t n = 60;
  std::vector<double> features(n * 2), covered(n, 1.0);
  Rng rng(5);
  for (auto& f : features) f = rng.normal();
  const WsCoverage ws = ws_coverage(covered, features, n, 2, 0.2, 500, 9);
  CHECK(ws.value == 1.0);
}

TEST_CASE("worst-slice with delta = 1 falls back to marginal") {
  const std::size_t n = 40;
  std::vector<double> features(n), covered(n, 1.0);
  Rng rng(6);
  for (std::size_t i = 0; i < n; ++i) {
    features[i] = rng.normal();
    covered[i] = i % 4 == 0 ? 0.0 : 1.0;
  }
  const WsCoverage ws = ws_coverage(covered, features, n, 1, 1.0, 200, 10);
  CHECK(ws.value == doctest::Approx(marginal_coverage(covered)));
}

TEST_CASE("worst-slice bounds and determinism") {
  Rng rng(8);
  const std::size_t n = 200, d = 3;
  std::vector<double> features(n * d), covered(n);
  for (auto& f : features) f = rng.normal();
  for (auto& c : covered) c = rng.uniform() < 0.8 ? 1.0 : 0.0;
  const WsCoverage a = ws_coverage(covered, features, n, d, 0.2, 300, 42);
  const WsCoverage b = ws_coverage(covered, features, n, d, 0.2, 300, 42);
  CHECK(a.value == b.value);
  CHECK(a.value >= 0.0);
  CHECK(a.value <= 1.0);
  CHECK(a.value <= marginal_coverage(covered) + 1e-12);
}

TEST_CASE("group coverage") {
  const std::vector<double> covered{1.0, 0.0};
  const std::vector<double> sizes{2.0, 4.0};
  std::map<std::string, std::vector<std::uint8_t>> groups{{"g1", {1, 0}}, {"g2", {0, 1}}};
  const auto out = group_coverage(covered, sizes, groups);
  CHECK(out.at("g1").coverage == doctest::Approx(1.0));
  CHECK(out.at("g2").coverage == doctest::Approx(0.0));
  CHECK(out.at("All").coverage == doctest::Approx(0.5));
  CHECK(out.at("All").mean_size == doctest::Approx(3.0));
  CHECK(out.at("All").count == 2);

  // single group equals marginal
  std::map<std::string, std::vector<std::uint8_t>> one{{"only", {1, 1}}};
  const auto single = group_coverage(covered, sizes, one);
  CHECK(single.at("only").coverage == single.at("All").coverage);
}

TEST_CASE("empirical cdf helper") {
  const std::vector<double> v{0.1, 0.2, 0.2, 0.9};
  CHECK(empirical_cdf_at(v, 0.2) == doctest::Approx(0.75));
  CHECK(empirical_cdf_at(v, 0.05) == 0.0);
  CHECK(empirical_cdf_at(v, 1.0) == 1.0);
}
