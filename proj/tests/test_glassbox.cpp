#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "glassbox/decision_tree.hpp"
#include "glassbox/featurize.hpp"
#include "glassbox/rng.hpp"
#include "glassbox/sim.hpp"
#include "glassbox/sparse_logistic.hpp"
#include "oracles.hpp"

using namespace glassbox;
using namespace glassbox::model;
using glassbox::Rng;

namespace {

// Small synthetic logistic problem with a few informative features.
struct ToyProblem {
  std::vector<double> X;
  std::vector<std::uint8_t> y;
  int n = 0, p = 0;
};

ToyProblem make_toy(int n, int p, std::uint64_t seed) {
  ToyProblem t;
  t.n = n;
  t.p = p;
  Rng rng(seed);
  t.X.resize(static_cast<std::size_t>(n) * p);
  for (auto& v : t.X) v = rng.normal();
  t.y.resize(n);
  for (int i = 0; i < n; ++i) {
    double z = 1.5 * t.X[static_cast<std::size_t>(i) * p] -
               2.0 * t.X[static_cast<std::size_t>(i) * p + 1];
    t.y[i] = rng.uniform01() < oracles::sigmoid(z) ? 1 : 0;
  }
  return t;
}

feat::FeatureMatrix as_matrix(const ToyProblem& t) {
  feat::FeatureMatrix fm;
  fm.n_rows = t.n;
  fm.n_cols = t.p;
  fm.values = t.X;
  for (int j = 0; j < t.p; ++j) fm.feature_names.push_back("f" + std::to_string(j));
  return fm;
}

double smooth_grad_j(const ToyProblem& t, const SparseLogisticFit& fit, int j) {
  double g = 0.0;
  for (int i = 0; i < t.n; ++i) {
    const double* row = t.X.data() + static_cast<std::size_t>(i) * t.p;
    double z = fit.intercept;
    for (int k = 0; k < t.p; ++k) z += row[k] * fit.beta[k];
    g += row[j] * (oracles::sigmoid(z) - static_cast<double>(t.y[i]));
  }
  return g / t.n;
}

}  // namespace

TEST_CASE("lambda at or above lambda_max gives an exactly zero solution") {
  const auto t = make_toy(60, 8, 1);
  const double lmax = lambda_max(t.X.data(), t.y.data(), t.n, t.p);
  for (double lam : {lmax, 1.5 * lmax}) {
    const auto fit = fit_sparse_logistic(t.X.data(), t.y.data(), t.n, t.p, lam);
    for (double b : fit.beta) CHECK(b == 0.0);
    CHECK(fit.active_set.empty());
    CHECK(fit.converged);
  }
}

TEST_CASE("separable data at lambda zero hits the sweep cap") {
  // Two points, one feature, perfectly separable: |beta| grows until the
  // iteration cap and the convergence flag comes back false.
  std::vector<double> X = {1.0, -1.0};
  std::vector<std::uint8_t> y = {1, 0};
  const auto fit = fit_sparse_logistic(X.data(), y.data(), 2, 1, 0.0);
  CHECK_FALSE(fit.converged);
  CHECK(std::abs(fit.beta[0]) > 5.0);
}

TEST_CASE("objective matches the slow proximal-gradient oracle") {
  const auto t = make_toy(50, 5, 2);
  const double lmax = lambda_max(t.X.data(), t.y.data(), t.n, t.p);
  const double lam = 0.2 * lmax;
  const auto fit = fit_sparse_logistic(t.X.data(), t.y.data(), t.n, t.p, lam);

  std::vector<double> beta_oracle;
  double intercept_oracle = 0.0;
  oracles::l1_logistic_pgd(t.X, t.y, t.n, t.p, lam, 200000, beta_oracle,
                           intercept_oracle);
  const double obj_fit = oracles::l1_logistic_objective(t.X, t.y, t.n, t.p,
                                                        fit.beta, fit.intercept,
                                                        lam);
  const double obj_oracle = oracles::l1_logistic_objective(
      t.X, t.y, t.n, t.p, beta_oracle, intercept_oracle, lam);
  CHECK(std::abs(obj_fit - obj_oracle) <= 1e-4 * std::abs(obj_oracle));
}

TEST_CASE("kkt conditions hold at 1e-5 on a 5x50 toy problem") {
  const auto t = make_toy(50, 5, 3);
  const double lmax = lambda_max(t.X.data(), t.y.data(), t.n, t.p);
  for (double frac : {0.5, 0.1, 0.01}) {
    const double lam = frac * lmax;
    const auto fit = fit_sparse_logistic(t.X.data(), t.y.data(), t.n, t.p, lam);
    REQUIRE(fit.converged);
    for (int j = 0; j < t.p; ++j) {
      const double g = smooth_grad_j(t, fit, j);
      if (fit.beta[j] == 0.0) {
        CHECK(std::abs(g) <= lam + 1e-5);
      } else {
        CHECK(std::abs(g + lam * (fit.beta[j] > 0 ? 1.0 : -1.0)) <= 1e-5);
      }
    }
  }
}

TEST_CASE("path starts empty and objective is nonincreasing along warm starts") {
  const auto t = make_toy(80, 10, 4);
  const auto path = logistic_path(t.X.data(), t.y.data(), t.n, t.p, 30);
  int active0 = 0;
  for (double b : path.coefs[0]) active0 += b != 0.0;
  CHECK(active0 == 0);
  // Each fit evaluated at its own lambda must not beat the previous fit
  // evaluated at that same (smaller) lambda.
  for (std::size_t s = 1; s < path.coefs.size(); ++s) {
    const double lam = path.lambda_grid[s];
    const double prev = oracles::l1_logistic_objective(
        t.X, t.y, t.n, t.p, path.coefs[s - 1], path.intercepts[s - 1], lam);
    const double cur = oracles::l1_logistic_objective(
        t.X, t.y, t.n, t.p, path.coefs[s], path.intercepts[s], lam);
    CHECK(cur <= prev + 1e-9);
  }
}

TEST_CASE("cross-validation") {
  const auto t = make_toy(120, 6, 5);
  const auto fm = as_matrix(t);
  const auto fit = cv_lambda_path(fm, t.y, 4, 40);
  REQUIRE(fit.cv_curve.size() == 40);
  REQUIRE(fit.lambda_grid.size() == 40);

  SUBCASE("selected lambda is on the grid interior") {
    CHECK(fit.lambda != fit.lambda_grid.front());
    CHECK(fit.lambda != fit.lambda_grid.back());
  }
  SUBCASE("duplicated dataset selects the same lambda") {
    feat::FeatureMatrix dup;
    dup.n_rows = 2 * t.n;
    dup.n_cols = t.p;
    dup.feature_names = fm.feature_names;
    dup.values.resize(fm.values.size() * 2);
    std::vector<std::uint8_t> ydup(2 * t.n);
    for (int i = 0; i < t.n; ++i) {
      for (int j = 0; j < t.p; ++j) {
        dup.values[static_cast<std::size_t>(2 * i) * t.p + j] = fm.at(i, j);
        dup.values[static_cast<std::size_t>(2 * i + 1) * t.p + j] = fm.at(i, j);
      }
      ydup[2 * i] = ydup[2 * i + 1] = t.y[i];
    }
    const auto fit2 = cv_lambda_path(dup, ydup, 4, 40);
    CHECK(fit2.lambda == doctest::Approx(fit.lambda).epsilon(1e-12));
  }
  SUBCASE("ties break to the larger lambda") {
    int best = 0;
    for (std::size_t s = 0; s < fit.cv_curve.size(); ++s) {
      if (fit.cv_curve[s].mean_accuracy >
          fit.cv_curve[best].mean_accuracy) {
        best = static_cast<int>(s);
      }
    }
    CHECK(fit.lambda == fit.lambda_grid[best]);
  }
}

TEST_CASE("predict_proba contracts") {
  SUBCASE("all-zero coefficients give one half everywhere") {
    SparseLogisticFit fit;
    fit.beta.assign(4, 0.0);
    fit.intercept = 0.0;
    std::vector<double> X(12, 3.0);
    std::vector<double> out(3);
    fit.predict_proba(X.data(), 3, 4, out.data());
    for (double v : out) CHECK(v == doctest::Approx(0.5));
  }
  SUBCASE("increasing a positively weighted feature raises the probability") {
    SparseLogisticFit fit;
    fit.beta = {0.8, 0.0};
    std::vector<double> lo = {1.0, 0.0}, hi = {2.0, 0.0};
    CHECK(fit.predict_one(hi.data(), 2) > fit.predict_one(lo.data(), 2));
  }
  SUBCASE("dimension mismatch names expected and actual") {
    SparseLogisticFit fit;
    fit.beta.assign(4, 0.0);
    std::vector<double> x(7, 0.0);
    CHECK_THROWS_WITH_AS(fit.predict_one(x.data(), 7),
                         doctest::Contains("expected 4"),
                         std::invalid_argument);
  }
}

TEST_CASE("decision tree on one-dimensional step data") {
  // y = 1{x > 0}; the tree needs exactly one split between the straddling
  // points, and classifies everything correctly.
  std::vector<double> X;
  std::vector<std::uint8_t> y;
  for (int i = 1; i <= 10; ++i) {
    X.push_back(-static_cast<double>(i));
    y.push_back(0);
    X.push_back(static_cast<double>(i));
    y.push_back(1);
  }
  const auto fit = fit_tree(X.data(), y.data(), 20, 1);
  CHECK(fit.n_splits() == 1);
  CHECK(fit.n_leaves == 2);
  for (int i = 0; i < 20; ++i) {
    const double prob = fit.predict_one(&X[i], 1);
    CHECK((prob > 0.5 ? 1 : 0) == y[i]);
  }
}

TEST_CASE("pure labels give a root-only tree") {
  std::vector<double> X(30);
  for (int i = 0; i < 30; ++i) X[i] = i;
  std::vector<std::uint8_t> y(30, 1);
  const auto fit = fit_tree(X.data(), y.data(), 30, 1);
  CHECK(fit.n_splits() == 0);
  CHECK(fit.nodes.size() == 1);
  CHECK(fit.predict_one(&X[5], 1) == doctest::Approx(1.0));
}

TEST_CASE("constant features give a root-only majority tree") {
  std::vector<double> X(40, 2.5);
  std::vector<std::uint8_t> y(40, 0);
  for (int i = 0; i < 12; ++i) y[i] = 1;
  const auto fit = fit_tree(X.data(), y.data(), 40, 1);
  CHECK(fit.n_splits() == 0);
  CHECK(fit.predict_one(&X[0], 1) < 0.5);
}

TEST_CASE("tree predictions are piecewise constant") {
  const auto t = make_toy(100, 4, 7);
  const auto fit = fit_tree(t.X.data(), t.y.data(), t.n, t.p);
  // Collect thresholds per feature; nudge a sample without crossing any.
  std::vector<double> x(t.X.begin(), t.X.begin() + t.p);
  const double before = fit.predict_one(x.data(), t.p);
  for (int j = 0; j < t.p; ++j) {
    double nearest = 1e18;
    for (const auto& nd : fit.nodes) {
      if (!nd.is_leaf() && nd.feature == j) {
        nearest = std::min(nearest, std::abs(nd.threshold - x[j]));
      }
    }
    const double eps = nearest == 1e18 ? 1.0 : 0.49 * nearest;
    std::vector<double> moved = x;
    moved[j] += eps;
    CHECK(fit.predict_one(moved.data(), t.p) == before);
    moved[j] = x[j] - eps;
    CHECK(fit.predict_one(moved.data(), t.p) == before);
  }
}

TEST_CASE("root-only tree with a 70 percent leaf predicts 0.7") {
  DecisionTreeFit fit;
  TreeNode leaf;
  leaf.count0 = 3;
  leaf.count1 = 7;
  fit.nodes.push_back(leaf);
  fit.n_leaves = 1;
  std::vector<double> x = {0.0};
  CHECK(fit.predict_one(x.data(), 1) == doctest::Approx(0.7));
}

TEST_CASE("stability overlap bookkeeping") {
  const auto t = make_toy(160, 8, 9);
  const auto fm = as_matrix(t);
  const auto rep = stability_overlap(fm, t.y, /*split_seed=*/5, 4, 30);
  SUBCASE("overlap is symmetric and bounded by both active sets") {
    CHECK(rep.overlap <= static_cast<int>(rep.active_a.size()));
    CHECK(rep.overlap <= static_cast<int>(rep.active_b.size()));
    std::set<int> sa(rep.active_a.begin(), rep.active_a.end());
    std::set<int> sb(rep.active_b.begin(), rep.active_b.end());
    std::set<int> inter;
    for (int j : sa) {
      if (sb.count(j)) inter.insert(j);
    }
    CHECK(static_cast<int>(inter.size()) == rep.overlap);
  }
  SUBCASE("identical fits overlap on the full active set") {
    // Two cv fits of the same data must agree feature for feature.
    const auto f1 = cv_lambda_path(fm, t.y, 4, 30);
    const auto f2 = cv_lambda_path(fm, t.y, 4, 30);
    CHECK(f1.active_set == f2.active_set);
    int agree = 0;
    for (int j : f1.active_set) agree += f2.beta[j] != 0.0;
    CHECK(agree == static_cast<int>(f1.active_set.size()));
  }
  SUBCASE("reruns are deterministic") {
    const auto rep2 = stability_overlap(fm, t.y, 5, 4, 30);
    CHECK(rep2.overlap == rep.overlap);
    CHECK(rep2.active_a == rep.active_a);
  }
}

TEST_CASE("featurized simulation fixtures at N=500") {
  sim::SimConfig cfg;  // default seed
  const auto g = sim::generate(cfg);
  const auto fm = feat::summarize(g.dataset);
  const auto train_rows = g.dataset.train_indices();
  auto train = feat::take_rows(fm, train_rows);
  std::vector<std::uint8_t> ytr;
  for (int i : train_rows) ytr.push_back(g.dataset.y[i]);

  SUBCASE("cv fit keeps an active set near the reported 50 features") {
    const auto fit = cv_lambda_path(train, ytr);
    MESSAGE("active features at selected lambda: ", fit.n_active());
    CHECK(fit.n_active() >= 30);
    CHECK(fit.n_active() <= 70);
    CHECK(fit.lambda != fit.lambda_grid.front());
    CHECK(fit.lambda != fit.lambda_grid.back());
  }
  SUBCASE("pruned featurized tree stays small") {
    // Trees consume unstandardized features.
    const auto raw_fm = feat::summarize(g.dataset, /*standardize=*/false);
    auto train_raw = feat::take_rows(raw_fm, train_rows);
    const auto tree = fit_tree(train_raw, ytr);
    MESSAGE("featurized tree splits: ", tree.n_splits());
    CHECK(tree.n_splits() <= 5);
  }
}
