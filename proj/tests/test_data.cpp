#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "confagg/data.hpp"
#include "confagg/errors.hpp"

using namespace confagg;

namespace {

struct TempCsv {
  std::string path;
  explicit TempCsv(const std::string& content) {
    static int counter = 0;
    path = (std::filesystem::temp_directory_path() /
            ("confagg_fixture_" + std::to_string(counter++) + ".csv"))
               .string();
    std::ofstream out(path);
    out << content;
  }
  ~TempCsv() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("synthetic generator shape and noiseless labels") {
  const Dataset ds = gen_synthetic(50, 7, 0.0);
  CHECK(ds.d == 16);
  CHECK(ds.n == 50);
  for (std::size_t i = 0; i < ds.n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < 16; ++j) total += ds.feature(i, j);
    CHECK(ds.labels[i] == doctest::Approx(total).epsilon(1e-12));
  }
}

TEST_CASE("synthetic label moments at scale") {
  const Dataset ds = gen_synthetic(100000, 11);
  double mean = 0.0;
  for (const double y : ds.labels) mean += y;
  mean /= static_cast<double>(ds.n);
  CHECK(std::abs(mean) <= 0.05);
  double var = 0.0;
  for (const double y : ds.labels) var += (y - mean) * (y - mean);
  var /= static_cast<double>(ds.n - 1);
  CHECK(var == doctest::Approx(16.01).epsilon(0.5 / 16.01));
}

TEST_CASE("synthetic generation is reproducible per seed") {
  const Dataset a = gen_synthetic(100, 5);
  const Dataset b = gen_synthetic(100, 5);
  const Dataset c = gen_synthetic(100, 6);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK(a.labels != c.labels);
}

TEST_CASE("feature assignments") {
  const FeatureAssignment no = synthetic_assignment(AssignmentMethod::NoOverlap);
  REQUIRE(no.groups.size() == 4);
  CHECK(no.groups[0] == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(no.groups[3] == std::vector<std::size_t>{12, 13, 14, 15});
  std::set<std::size_t> seen;
  for (const auto& g : no.groups) seen.insert(g.begin(), g.end());
  CHECK(seen.size() == 16);  // partition

  for (const auto& g : synthetic_assignment(AssignmentMethod::Share1of2).groups)
    CHECK(g.size() == 10);
  for (const auto& g : synthetic_assignment(AssignmentMethod::F15of16).groups)
    CHECK(g.size() == 15);
  for (const auto& g : synthetic_assignment(AssignmentMethod::F12of16).groups)
    CHECK(g.size() == 12);

  // every index stays in range; omissions rotate across experts
  const FeatureAssignment f15 = synthetic_assignment(AssignmentMethod::F15of16);
  std::set<std::size_t> omitted;
  for (std::size_t k = 0; k < 4; ++k) {
    std::set<std::size_t> group(f15.groups[k].begin(), f15.groups[k].end());
    for (std::size_t j = 0; j < 16; ++j)
      if (group.count(j) == 0) omitted.insert(j);
  }
  CHECK(omitted.size() == 4);
}

TEST_CASE("csv loading basics") {
  const TempCsv csv("a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
  const Dataset ds = load_csv(csv.path, {"y", {}, {}});
  CHECK(ds.n == 3);
  CHECK(ds.d == 2);
  CHECK(ds.column_names == std::vector<std::string>{"a", "b"});
  CHECK(ds.feature(1, 1) == 5.0);
  CHECK(ds.labels[2] == 9.0);
  CHECK(ds.dropped_rows == 0);
}

TEST_CASE("csv rows with missing cells are dropped and counted") {
  const TempCsv csv("a,b,y\n1,2,3\n4,NA,6\n7,8,9\n");
  const Dataset ds = load_csv(csv.path, {"y", {}, {}});
  CHECK(ds.n == 2);
  CHECK(ds.dropped_rows == 1);
}

TEST_CASE("csv schema errors") {
  const TempCsv csv("a,b,y\n1,2,3\n");
  CHECK_THROWS_AS(load_csv(csv.path, {"missing", {}, {}}), DataError);
  CHECK_THROWS_AS(load_csv(csv.path, {"y", {"nope"}, {}}), DataError);
  const TempCsv empty("a,b,y\nx,2,3\n");
  CHECK_THROWS_AS(load_csv(empty.path, {"y", {"a"}, {}}), DataError);  // no usable rows
}

TEST_CASE("csv quoted fields and one-hot expansion") {
  const TempCsv csv("name,\"val,ue\",y\nred,1,2\nblue,3,4\nred,5,6\n");
  const Dataset ds = load_csv(csv.path, {"y", {"val,ue", "name"}, {"name"}});
  CHECK(ds.d == 3);  // val,ue + name=blue + name=red
  CHECK(ds.column_names[0] == "val,ue");
  CHECK(ds.column_names[1] == "name=blue");
  CHECK(ds.column_names[2] == "name=red");
  CHECK(ds.feature(0, 2) == 1.0);
  CHECK(ds.feature(1, 1) == 1.0);
}

TEST_CASE("categorical labels switch to classification") {
  const TempCsv csv("a,y\n1,cat\n2,dog\n3,cat\n");
  const Dataset ds = load_csv(csv.path, {"y", {}, {}});
  CHECK(ds.is_classification());
  CHECK(ds.label_classes == std::vector<std::string>{"cat", "dog"});
  CHECK(ds.labels == std::vector<double>{0.0, 1.0, 0.0});
}

TEST_CASE("split sizes") {
  const SplitPlan wm = make_split(1000, 400, SplitMode::WithMerge, 0, 2000, 1);
  CHECK(wm.train_idx.size() == 200);
  CHECK(wm.cal_idx.size() == 160);
  CHECK(wm.merge_idx.size() == 40);
  CHECK(wm.test_idx.size() == 600);

  const SplitPlan nm = make_split(1000, 400, SplitMode::NoMerge, 0, 2000, 1);
  CHECK(nm.train_idx.size() == 200);
  CHECK(nm.cal_idx.size() == 200);
  CHECK(nm.merge_idx.empty());

  // shared permutation: same train and test across modes
  CHECK(nm.train_idx == wm.train_idx);
  CHECK(nm.test_idx == wm.test_idx);
}

TEST_CASE("merge override extends past the budget") {
  const SplitPlan wm = make_split(1000, 400, SplitMode::WithMerge, 160, 2000, 3);
  CHECK(wm.merge_idx.size() == 160);
  CHECK(wm.test_idx.size() == 1000 - (200 + 160 + 160));
  const SplitPlan nm = make_split(1000, 400, SplitMode::NoMerge, 160, 2000, 3);
  CHECK(nm.test_idx == wm.test_idx);
}

TEST_CASE("split disjointness and reproducibility across seeds") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const SplitPlan p = make_split(450, 400, SplitMode::WithMerge, 0, 50, seed);
    std::set<std::size_t> seen;
    for (const auto* part : {&p.train_idx, &p.cal_idx, &p.merge_idx, &p.test_idx})
      for (const std::size_t i : *part) {
        CHECK(seen.insert(i).second);  // pairwise disjoint
        CHECK(i < 450);
      }
  }
  const SplitPlan a = make_split(500, 400, SplitMode::WithMerge, 0, 100, 9);
  const SplitPlan b = make_split(500, 400, SplitMode::WithMerge, 0, 100, 9);
  CHECK(a.train_idx == b.train_idx);
  CHECK(a.test_idx == b.test_idx);
}

TEST_CASE("split rejects insufficient rows") {
  CHECK_THROWS_AS(make_split(400, 400, SplitMode::WithMerge, 0, 100, 1), DataError);
}

TEST_CASE("standardizer centers the training rows") {
  const Dataset ds = gen_synthetic(500, 21);
  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < 200; ++i) train.push_back(i);
  const Dataset z = apply_standardizer(ds, fit_standardizer(ds, train));
  for (std::size_t j = 0; j < z.d; ++j) {
    double mean = 0.0;
    for (const std::size_t i : train) mean += z.feature(i, j);
    mean /= static_cast<double>(train.size());
    CHECK(std::abs(mean) <= 1e-9);
  }
  CHECK(z.labels == ds.labels);
}
