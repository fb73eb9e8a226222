#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "glassbox/sim.hpp"

using namespace glassbox::sim;
using glassbox::Rng;

namespace {

SimConfig small_config() {
  SimConfig cfg;
  cfg.n_subjects = 60;
  cfg.n_timepoints = 20;
  cfg.n_species = 12;
  cfg.n_communities = 5;
  cfg.n_clusters = 6;
  cfg.n_disease_clusters = 3;
  cfg.tukey_window = 5;
  cfg.seed = 99;
  return cfg;
}

}  // namespace

TEST_CASE("config validation rejects bad parameters") {
  SimConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  SimConfig bad = cfg;
  bad.n_subjects = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.tukey_window = 8;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.tukey_window = 51;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.kind_probs = {0.5, 0.1, 0.1, 0.1};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.n_disease_clusters = 30;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("increase trajectories") {
  const int T = 50;
  SUBCASE("uniform weights give the closed form 2t/(T+1)") {
    // Oracle: cumulative sum of 1/T is t/T; the sum over t is (T+1)/2, so the
    // renormalized coordinate t equals 2t/(T+1).
    std::vector<double> f(T);
    double acc = 0.0;
    for (int t = 0; t < T; ++t) {
      acc += 1.0 / T;
      f[t] = acc;
    }
    double s = 0.0;
    for (double v : f) s += v;
    for (int t = 0; t < T; ++t) f[t] *= T / s;
    for (int t = 0; t < T; ++t) {
      CHECK(f[t] == doctest::Approx(2.0 * (t + 1) / (T + 1)).epsilon(1e-12));
    }
  }
  SUBCASE("any draw sums to T and is nondecreasing") {
    Rng rng(1);
    for (int rep = 0; rep < 50; ++rep) {
      const auto f = sample_increase(rng, T, 0.3);
      double s = 0.0;
      for (double v : f) {
        REQUIRE(v >= 0.0);
        s += v;
      }
      CHECK(std::abs(s - T) < 1e-9 * T);
      CHECK(std::is_sorted(f.begin(), f.end()));
    }
  }
}

TEST_CASE("decrease trajectories") {
  const int T = 30;
  SUBCASE("nonincreasing and sums to T") {
    Rng rng(2);
    for (int rep = 0; rep < 50; ++rep) {
      const auto f = sample_decrease(rng, T, 0.3);
      double s = 0.0;
      for (double v : f) s += v;
      CHECK(std::abs(s - T) < 1e-9 * T);
      CHECK(std::is_sorted(f.rbegin(), f.rend()));
    }
  }
  SUBCASE("shared-stream reversal equals sample_increase") {
    Rng a(77), b(77);
    auto dec = sample_decrease(a, T, 0.3);
    std::reverse(dec.begin(), dec.end());
    const auto inc = sample_increase(b, T, 0.3);
    CHECK(dec == inc);
  }
}

TEST_CASE("tukey window") {
  SUBCASE("zero taper degenerates to a boxcar") {
    const auto w = tukey_window(9, 0.0);
    for (double v : w) CHECK(v == 1.0);
  }
  SUBCASE("taper 0.9 has a single maximum and zero endpoints") {
    const auto w = tukey_window(9, 0.9);
    CHECK(w[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(w[8] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(w[4] == doctest::Approx(1.0));
    for (int i = 0; i < 4; ++i) CHECK(w[i] < w[i + 1]);
    for (int i = 4; i < 8; ++i) CHECK(w[i] > w[i + 1]);
  }
}

TEST_CASE("bloom trajectories") {
  const int T = 50, L = 9;
  SUBCASE("single boxcar bloom is T/L inside the window") {
    // Draw until a single-bloom case shows up, with taper 0.
    Rng rng(3);
    for (int rep = 0; rep < 200; ++rep) {
      std::vector<int> centers;
      const auto f = sample_bloom(rng, T, 0.5, 0.0, L, &centers);
      if (centers.size() != 1) continue;
      const int c0 = centers[0] - 1;
      for (int t = 0; t < T; ++t) {
        const bool inside = std::abs(t - c0) <= (L - 1) / 2;
        CHECK(f[t] == doctest::Approx(inside ? static_cast<double>(T) / L : 0.0)
                          .epsilon(1e-12));
      }
      return;
    }
    FAIL("no single-bloom draw in 200 attempts");
  }
  SUBCASE("taper 0.9 single bloom has one local max and support <= L") {
    Rng rng(4);
    for (int rep = 0; rep < 200; ++rep) {
      std::vector<int> centers;
      const auto f = sample_bloom(rng, T, 0.5, 0.9, L, &centers);
      if (centers.size() != 1) continue;
      int support = 0, local_max = 0;
      for (int t = 0; t < T; ++t) {
        if (f[t] > 0.0) support += 1;
        const double left = t > 0 ? f[t - 1] : -1.0;
        const double right = t + 1 < T ? f[t + 1] : -1.0;
        if (f[t] > left && f[t] > right) local_max += 1;
      }
      CHECK(support <= L);
      CHECK(local_max == 1);
      return;
    }
    FAIL("no single-bloom draw in 200 attempts");
  }
  SUBCASE("any draw sums to T and centers stay in [L, T-L]") {
    Rng rng(5);
    for (int rep = 0; rep < 100; ++rep) {
      std::vector<int> centers;
      const auto f = sample_bloom(rng, T, 2.0, 0.9, L, &centers);
      REQUIRE(!centers.empty());
      for (int c : centers) {
        CHECK(c >= L);
        CHECK(c <= T - L);
      }
      double s = 0.0;
      for (double v : f) {
        REQUIRE(v >= 0.0);
        s += v;
      }
      CHECK(std::abs(s - T) < 1e-9 * T);
    }
  }
}

TEST_CASE("dictionary sampling") {
  SUBCASE("forced noise branch keeps all columns in [0, noise_high]") {
    SimConfig cfg = small_config();
    cfg.kind_probs = {1.0, 0.0, 0.0, 0.0};
    Rng rng(6);
    const auto dict = sample_dictionary(rng, cfg);
    for (const auto& entry : dict.entries) {
      for (double v : entry) {
        CHECK(v >= 0.0);
        CHECK(v <= cfg.noise_high);
      }
    }
    for (Kind k : dict.kinds) CHECK(k == Kind::noise);
    CHECK(dict.bloom_centers.empty());
  }
  SUBCASE("noise fraction is within 3 sigma of 0.7 at K*D = 3600") {
    SimConfig cfg;
    cfg.n_subjects = 24;  // irrelevant here
    Rng rng(7);
    const auto dict = sample_dictionary(rng, cfg);
    const double n = static_cast<double>(dict.kinds.size());
    CHECK(n == 25 * 144);
    double noise = 0.0;
    for (Kind k : dict.kinds) noise += k == Kind::noise;
    const double sigma = std::sqrt(0.7 * 0.3 / n);
    CHECK(std::abs(noise / n - 0.7) <= 3.0 * sigma);
  }
  SUBCASE("non-noise columns sum to T within 1e-9 relative") {
    SimConfig cfg = small_config();
    Rng rng(8);
    const auto dict = sample_dictionary(rng, cfg);
    const int T = cfg.n_timepoints, D = cfg.n_species;
    for (int k = 0; k < cfg.n_communities; ++k) {
      for (int d = 0; d < D; ++d) {
        if (dict.kind(k, d) == Kind::noise) continue;
        double s = 0.0;
        for (int t = 0; t < T; ++t) s += dict.value(k, t, d);
        CHECK(std::abs(s - T) <= 1e-9 * T);
      }
    }
  }
  SUBCASE("fixed seed reproduces the dictionary exactly") {
    SimConfig cfg = small_config();
    Rng r1(9), r2(9);
    const auto d1 = sample_dictionary(r1, cfg);
    const auto d2 = sample_dictionary(r2, cfg);
    CHECK(d1.entries == d2.entries);
    CHECK(d1.kinds == d2.kinds);
  }
}

TEST_CASE("subject sampling") {
  SUBCASE("single community gives constant theta and x equal to the entry") {
    SimConfig cfg = small_config();
    cfg.n_communities = 1;
    cfg.n_clusters = 1;
    cfg.n_disease_clusters = 1;
    const auto g = generate(cfg);
    for (int i = 0; i < cfg.n_subjects; ++i) {
      CHECK(g.dataset.theta[i] == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(g.dataset.cluster_id[i] == 0);
      CHECK(g.dataset.y[i] == g.dataset.y[0]);
    }
    const float* x0 = g.dataset.sample(0);
    for (std::size_t j = 0; j < g.dictionary.entries[0].size(); ++j) {
      CHECK(x0[j] == doctest::Approx(g.dictionary.entries[0][j]).epsilon(1e-6));
    }
  }
  SUBCASE("mixture identity and simplex closure") {
    SimConfig cfg = small_config();
    const auto g = generate(cfg);
    const int T = cfg.n_timepoints, D = cfg.n_species, K = cfg.n_communities;
    for (int i = 0; i < cfg.n_subjects; ++i) {
      double ts = 0.0;
      for (int k = 0; k < K; ++k) ts += g.dataset.theta[i * K + k];
      CHECK(std::abs(ts - 1.0) <= 1e-9);
      const float* xi = g.dataset.sample(i);
      for (int j = 0; j < T * D; ++j) {
        double recon = 0.0;
        for (int k = 0; k < K; ++k) {
          recon += g.dataset.theta[i * K + k] * g.dictionary.entries[k][j];
        }
        REQUIRE(xi[j] >= 0.0f);
        REQUIRE(std::abs(xi[j] - recon) <= 1e-6 * std::max(1.0, recon));
      }
    }
  }
  SUBCASE("concepts equal thresholded theta exactly") {
    SimConfig cfg = small_config();
    const auto g = generate(cfg);
    for (std::size_t j = 0; j < g.dataset.concepts.size(); ++j) {
      CHECK(g.dataset.concepts[j] ==
            (g.dataset.theta[j] > cfg.concept_threshold ? 1 : 0));
    }
  }
  SUBCASE("labels factor through cluster id") {
    SimConfig cfg = small_config();
    const auto g = generate(cfg);
    std::map<int, int> label_of_cluster;
    for (int i = 0; i < cfg.n_subjects; ++i) {
      const auto [it, inserted] =
          label_of_cluster.try_emplace(g.dataset.cluster_id[i], g.dataset.y[i]);
      if (!inserted) CHECK(it->second == g.dataset.y[i]);
    }
  }
  SUBCASE("train/val split is 75/25") {
    SimConfig cfg = small_config();
    const auto g = generate(cfg);
    CHECK(static_cast<int>(g.dataset.train_indices().size()) ==
          std::lround(0.75 * cfg.n_subjects));
    CHECK(static_cast<int>(g.dataset.val_indices().size()) ==
          cfg.n_subjects - std::lround(0.75 * cfg.n_subjects));
  }
  SUBCASE("reruns are bit-identical") {
    SimConfig cfg = small_config();
    const auto a = generate(cfg);
    const auto b = generate(cfg);
    CHECK(a.dataset.x == b.dataset.x);
    CHECK(a.dataset.theta == b.dataset.theta);
    CHECK(a.dataset.y == b.dataset.y);
    CHECK(a.dataset.cluster_id == b.dataset.cluster_id);
  }
}

TEST_CASE("default config at N=500: class balance fixture") {
  SimConfig cfg;  // defaults: N=500, seed=1
  const auto g = generate(cfg);
  const double frac = g.dataset.disease_fraction();
  // Regression fixture for the default seed; the 12/12 cluster split keeps
  // the balance well inside [0.3, 0.7].
  CHECK(frac >= 0.3);
  CHECK(frac <= 0.7);
  MESSAGE("disease fraction at default seed: ", frac);
}

TEST_CASE("kmeans reseeds empty clusters and never fails") {
  // Twenty copies of the same two points force empty clusters at k=4.
  std::vector<double> rows;
  for (int i = 0; i < 20; ++i) {
    rows.push_back(i % 2 == 0 ? 0.0 : 1.0);
    rows.push_back(i % 2 == 0 ? 0.0 : 1.0);
  }
  Rng rng(11);
  const auto assign = kmeans(rng, rows, 20, 2, 4);
  CHECK(assign.size() == 20);
  // Points at the same location get the same cluster.
  for (int i = 2; i < 20; ++i) CHECK(assign[i] == assign[i - 2]);
  CHECK(assign[0] != assign[1]);
}
