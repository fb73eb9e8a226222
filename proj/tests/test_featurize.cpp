#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "glassbox/featurize.hpp"
#include "glassbox/sim.hpp"

using namespace glassbox;

namespace {

// Hand-built dataset wrapper for layout tests.
sim::SubjectDataset tiny_dataset(int n, int t, int d) {
  sim::SubjectDataset ds;
  ds.config.n_subjects = n;
  ds.config.n_timepoints = t;
  ds.config.n_species = d;
  ds.config.n_communities = 1;
  ds.config.n_clusters = 1;
  ds.x.assign(static_cast<std::size_t>(n) * t * d, 0.0f);
  ds.y.assign(n, 0);
  ds.split.assign(n, sim::Split::train);
  ds.theta.assign(n, 1.0);
  ds.concepts.assign(n, 1);
  ds.cluster_id.assign(n, 0);
  return ds;
}

}  // namespace

TEST_CASE("concat_raw layout is time-major") {
  auto ds = tiny_dataset(1, 2, 2);
  // X_0 = [[1,2],[3,4]] in (t, d) order.
  ds.x = {1, 2, 3, 4};
  const auto fm = feat::concat_raw(ds);
  CHECK(fm.n_cols == 4);
  CHECK(fm.values == std::vector<double>{1, 2, 3, 4});
  CHECK(fm.feature_names[0] == "raw:t=1:d=1");
  CHECK(fm.feature_names[1] == "raw:t=1:d=2");
  CHECK(fm.feature_names[2] == "raw:t=2:d=1");
}

TEST_CASE("concat_raw has P = T*D = 7200 at defaults and round-trips") {
  sim::SimConfig cfg;
  cfg.n_subjects = 24;
  const auto g = sim::generate(cfg);
  const auto fm = feat::concat_raw(g.dataset);
  CHECK(fm.n_cols == 50 * 144);
  // Unflattening row i reproduces X_i exactly.
  for (int i = 0; i < 3; ++i) {
    const float* xi = g.dataset.sample(i);
    for (int j = 0; j < fm.n_cols; ++j) {
      CHECK(fm.at(i, j) == static_cast<double>(xi[j]));
    }
  }
}

TEST_CASE("trend feature") {
  SUBCASE("constant trajectory has zero slope") {
    std::vector<double> x(10, 3.5);
    CHECK(feat::trend_feature(x) == doctest::Approx(0.0).epsilon(1e-14));
  }
  SUBCASE("noiseless line x = 3t + 5 recovers slope 3 exactly") {
    std::vector<double> x(20);
    for (int t = 0; t < 20; ++t) x[t] = 3.0 * (t + 1) + 5.0;
    CHECK(feat::trend_feature(x) == doctest::Approx(3.0).epsilon(1e-12));
  }
  SUBCASE("alternating 0/1 of length 50 matches the normal-equations oracle") {
    std::vector<double> x(50);
    for (int t = 0; t < 50; ++t) x[t] = t % 2 == 1 ? 1.0 : 0.0;
    // Independent oracle: solve the 2x2 normal equations directly.
    const int T = 50;
    double st = 0, sx = 0, stt = 0, stx = 0;
    for (int t = 1; t <= T; ++t) {
      st += t;
      stt += static_cast<double>(t) * t;
      sx += x[t - 1];
      stx += t * x[t - 1];
    }
    const double slope = (T * stx - st * sx) / (T * stt - st * st);
    CHECK(feat::trend_feature(x) == doctest::Approx(slope).epsilon(1e-12));
  }
}

TEST_CASE("curvature feature") {
  SUBCASE("constant trajectory") {
    std::vector<double> x(10, 2.0);
    CHECK(feat::curvature_feature(x) == 0.0);
  }
  SUBCASE("linear trajectory x = c*t gives (2c)^2") {
    const double c = 1.7;
    std::vector<double> x(12);
    for (int t = 0; t < 12; ++t) x[t] = c * (t + 1);
    CHECK(feat::curvature_feature(x) == doctest::Approx(4 * c * c).epsilon(1e-12));
  }
  SUBCASE("x = (0,1,0) central difference uses x3 - x1") {
    std::vector<double> x = {0, 1, 0};
    CHECK(feat::curvature_feature(x) == 0.0);
    // The true-second-difference switch sees the spike.
    CHECK(feat::curvature_feature(x, true) == doctest::Approx(4.0));
  }
}

TEST_CASE("summarize") {
  sim::SimConfig cfg;
  cfg.n_subjects = 40;
  const auto g = sim::generate(cfg);

  SUBCASE("P = 2D = 288 at the default species count") {
    const auto fm = feat::summarize(g.dataset);
    CHECK(fm.n_cols == 288);
    CHECK(fm.feature_names[0] == "trend:d=1");
    CHECK(fm.feature_names[144] == "curv:d=1");
  }
  SUBCASE("training-split column means vanish after standardization") {
    const auto fm = feat::summarize(g.dataset);
    const auto train = g.dataset.train_indices();
    for (int j = 0; j < fm.n_cols; ++j) {
      double mean = 0.0;
      for (int i : train) mean += fm.at(i, j);
      mean /= train.size();
      CHECK(std::abs(mean) < 1e-9);
    }
  }
  SUBCASE("feature values match the oracles on a 3-timepoint toy dataset") {
    auto ds = tiny_dataset(2, 3, 2);
    // Subject 0, species 1: (0, 1, 0); species 2: line 2t.
    ds.x = {0, 2, 1, 4, 0, 6,
            1, 1, 1, 1, 1, 1};
    const auto fm = feat::summarize(ds, /*standardize=*/false);
    CHECK(fm.at(0, 0) == doctest::Approx(0.0));          // trend of 0,1,0
    CHECK(fm.at(0, 1) == doctest::Approx(2.0));          // trend of 2,4,6
    CHECK(fm.at(0, 2) == doctest::Approx(0.0));          // curv of 0,1,0
    CHECK(fm.at(0, 3) == doctest::Approx(16.0));         // (2c)^2, c=2
    CHECK(fm.at(1, 0) == doctest::Approx(0.0));
    CHECK(fm.at(1, 2) == doctest::Approx(0.0));
  }
  SUBCASE("zero-variance columns standardize to zero and are flagged") {
    auto ds = tiny_dataset(4, 3, 1);
    ds.x = {1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4};  // constant per subject
    auto fm = feat::summarize(ds, /*standardize=*/true);
    // trend and curv are zero for constant trajectories -> zero variance.
    CHECK(fm.standardization.zero_variance_columns.size() == 2);
    for (int i = 0; i < fm.n_rows; ++i) {
      CHECK(fm.at(i, 0) == 0.0);
      CHECK(fm.at(i, 1) == 0.0);
    }
  }
  SUBCASE("standardization is idempotent") {
    auto fm = feat::summarize(g.dataset, /*standardize=*/false);
    const auto train = g.dataset.train_indices();
    feat::standardize(fm, train);
    auto once = fm.values;
    feat::standardize(fm, train);
    for (std::size_t j = 0; j < once.size(); ++j) {
      CHECK(std::abs(fm.values[j] - once[j]) < 1e-9);
    }
  }
  SUBCASE("stored parameters reproduce values from raw inputs") {
    auto raw = feat::summarize(g.dataset, /*standardize=*/false);
    auto std1 = feat::summarize(g.dataset, /*standardize=*/true);
    feat::apply_standardization(raw, std1.standardization);
    for (std::size_t j = 0; j < raw.values.size(); ++j) {
      CHECK(raw.values[j] == doctest::Approx(std1.values[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("permuting subjects permutes rows identically") {
  sim::SimConfig cfg;
  cfg.n_subjects = 20;
  cfg.n_clusters = 8;
  cfg.n_disease_clusters = 4;
  auto g = sim::generate(cfg);
  const auto fm = feat::summarize(g.dataset, /*standardize=*/false);

  // Swap two subjects and re-featurize.
  auto swapped = g.dataset;
  const int a = 3, b = 11;
  const std::size_t len =
      static_cast<std::size_t>(cfg.n_timepoints) * cfg.n_species;
  for (std::size_t j = 0; j < len; ++j) {
    std::swap(swapped.x[a * len + j], swapped.x[b * len + j]);
  }
  const auto fm2 = feat::summarize(swapped, /*standardize=*/false);
  for (int j = 0; j < fm.n_cols; ++j) {
    CHECK(fm2.at(a, j) == fm.at(b, j));
    CHECK(fm2.at(b, j) == fm.at(a, j));
    CHECK(fm2.at(0, j) == fm.at(0, j));
  }
}
