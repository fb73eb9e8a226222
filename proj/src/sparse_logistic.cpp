#include "glassbox/sparse_logistic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "glassbox/kernels.hpp"
#include "glassbox/rng.hpp"

namespace glassbox::model {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

// Column-major copy of X for the coordinate sweeps.
struct ColMajor {
  int n = 0, p = 0;
  std::vector<double> cols;  // cols[j * n + i]
  ColMajor(const double* X, int n_, int p_) : n(n_), p(p_) {
    cols.resize(static_cast<std::size_t>(n) * p);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) {
        cols[static_cast<std::size_t>(j) * n + i] =
            X[static_cast<std::size_t>(i) * p + j];
      }
    }
  }
  const double* col(int j) const {
    return cols.data() + static_cast<std::size_t>(j) * n;
  }
};

struct WorkState {
  std::vector<double> z;         // linear predictor per sample
  std::vector<double> residual;  // sigmoid(z) - y
  std::vector<double> curv;      // per-coordinate majorizer 0.25 * mean(x_j^2)
  double curv0 = 0.25;           // intercept majorizer

  void refresh_residual(const std::uint8_t* y, int n) {
    for (int i = 0; i < n; ++i) {
      residual[i] = sigmoid(z[i]) - static_cast<double>(y[i]);
    }
  }
};

}  // namespace

double SparseLogisticFit::predict_one(const double* x, int p) const {
  if (p != static_cast<int>(beta.size())) {
    throw std::invalid_argument(
        "sparse logistic predict: expected " + std::to_string(beta.size()) +
        " features, got " + std::to_string(p));
  }
  return sigmoid(intercept + kernels::dot_d(x, beta.data(), p));
}

void SparseLogisticFit::predict_proba(const double* X, int n, int p,
                                      double* out) const {
  for (int i = 0; i < n; ++i) {
    out[i] = predict_one(X + static_cast<std::size_t>(i) * p, p);
  }
}

double lambda_max(const double* X, const std::uint8_t* y, int n, int p) {
  double ybar = 0.0;
  for (int i = 0; i < n; ++i) ybar += y[i];
  ybar /= n;
  double best = 0.0;
  for (int j = 0; j < p; ++j) {
    double g = 0.0;
    for (int i = 0; i < n; ++i) {
      g += X[static_cast<std::size_t>(i) * p + j] * (static_cast<double>(y[i]) - ybar);
    }
    best = std::max(best, std::abs(g) / n);
  }
  return best;
}

namespace {

// One coordinate-descent solve at fixed lambda. beta/intercept updated in
// place; returns true when converged within the sweep budget.
bool cd_solve(const ColMajor& xc, const std::uint8_t* y, double lambda,
              std::vector<double>& beta, double& intercept, WorkState& ws,
              const SparseLogisticOptions& opts, int* sweeps_used) {
  const int n = xc.n, p = xc.p;
  const double invn = 1.0 / n;

  auto update_coord = [&](int j) -> double {
    const double* col = xc.col(j);
    const double grad = kernels::dot_d(col, ws.residual.data(), n) * invn;
    const double w = ws.curv[j];
    if (w <= 0.0) return 0.0;
    const double cand = w * beta[j] - grad;
    double nb = soft_threshold(cand, lambda) / w;
    // Coefficients below fp noise are exact zeros; keeps lambda >= lambda_max
    // solutions exactly empty.
    if (std::abs(nb) < 1e-12) nb = 0.0;
    const double delta = nb - beta[j];
    if (delta != 0.0) {
      beta[j] = nb;
      for (int i = 0; i < n; ++i) ws.z[i] += delta * col[i];
      ws.refresh_residual(y, n);
    }
    return std::abs(delta);
  };
  auto update_intercept = [&]() -> double {
    double grad = 0.0;
    for (int i = 0; i < n; ++i) grad += ws.residual[i];
    grad *= invn;
    const double delta = -grad / ws.curv0;
    if (delta != 0.0) {
      intercept += delta;
      for (int i = 0; i < n; ++i) ws.z[i] += delta;
      ws.refresh_residual(y, n);
    }
    return std::abs(delta);
  };

  int sweeps = 0;
  bool converged = false;
  while (sweeps < opts.max_sweeps) {
    // Full sweep over every coordinate.
    double max_delta = update_intercept();
    ++sweeps;
    for (int j = 0; j < p; ++j) max_delta = std::max(max_delta, update_coord(j));
    if (max_delta < opts.tol) {
      converged = true;
      break;
    }
    // Inner sweeps over the active set only.
    std::vector<int> active;
    for (int j = 0; j < p; ++j) {
      if (beta[j] != 0.0) active.push_back(j);
    }
    while (sweeps < opts.max_sweeps) {
      double inner_delta = update_intercept();
      ++sweeps;
      for (int j : active) inner_delta = std::max(inner_delta, update_coord(j));
      if (inner_delta < opts.tol) break;
    }
  }
  if (sweeps_used) *sweeps_used = sweeps;
  return converged;
}

}  // namespace

SparseLogisticFit fit_sparse_logistic(const double* X, const std::uint8_t* y,
                                      int n, int p, double lambda,
                                      const SparseLogisticOptions& opts,
                                      const std::vector<double>* beta0,
                                      double intercept0) {
  if (n <= 0 || p <= 0) throw std::invalid_argument("fit_sparse_logistic: empty data");
  if (lambda < 0.0) throw std::invalid_argument("fit_sparse_logistic: lambda < 0");
  ColMajor xc(X, n, p);

  SparseLogisticFit fit;
  fit.lambda = lambda;
  fit.beta.assign(p, 0.0);
  fit.intercept = intercept0;
  if (beta0) {
    if (static_cast<int>(beta0->size()) != p) {
      throw std::invalid_argument("fit_sparse_logistic: warm start size mismatch");
    }
    fit.beta = *beta0;
  }

  if (!beta0) {
    // Null-model intercept: keeps the beta = 0 solution exact at
    // lambda >= lambda_max.
    double ybar = 0.0;
    for (int i = 0; i < n; ++i) ybar += y[i];
    ybar = std::min(std::max(ybar / n, 1.0 / (n + 1.0)), n / (n + 1.0));
    fit.intercept = std::log(ybar / (1.0 - ybar));
  }

  WorkState ws;
  ws.z.assign(n, 0.0);
  ws.residual.assign(n, 0.0);
  ws.curv.assign(p, 0.0);
  for (int j = 0; j < p; ++j) {
    const double* col = xc.col(j);
    ws.curv[j] = 0.25 * kernels::dot_d(col, col, n) / n;
  }
  for (int i = 0; i < n; ++i) {
    double z = fit.intercept;
    const double* row = X + static_cast<std::size_t>(i) * p;
    for (int j = 0; j < p; ++j) {
      if (fit.beta[j] != 0.0) z += fit.beta[j] * row[j];
    }
    ws.z[i] = z;
  }
  ws.refresh_residual(y, n);

  fit.converged = cd_solve(xc, y, lambda, fit.beta, fit.intercept, ws, opts,
                           nullptr);
  for (int j = 0; j < p; ++j) {
    if (fit.beta[j] != 0.0) fit.active_set.push_back(j);
  }
  return fit;
}

SparseLogisticFit fit_sparse_logistic(const feat::FeatureMatrix& fm,
                                      const std::vector<std::uint8_t>& y,
                                      double lambda,
                                      const SparseLogisticOptions& opts) {
  if (static_cast<int>(y.size()) != fm.n_rows) {
    throw std::invalid_argument("fit_sparse_logistic: label count mismatch");
  }
  SparseLogisticFit fit = fit_sparse_logistic(fm.values.data(), y.data(),
                                              fm.n_rows, fm.n_cols, lambda, opts);
  fit.feature_names = fm.feature_names;
  return fit;
}

LogisticPath logistic_path(const double* X, const std::uint8_t* y, int n, int p,
                           int n_lambda, double grid_ratio,
                           const SparseLogisticOptions& opts) {
  if (n_lambda < 2) throw std::invalid_argument("logistic_path: need >= 2 grid points");
  const double lmax = lambda_max(X, y, n, p);
  LogisticPath path;
  path.lambda_grid.resize(n_lambda);
  for (int t = 0; t < n_lambda; ++t) {
    path.lambda_grid[t] =
        lmax * std::pow(grid_ratio, static_cast<double>(t) / (n_lambda - 1));
  }
  ColMajor xc(X, n, p);
  WorkState ws;
  ws.curv.assign(p, 0.0);
  for (int j = 0; j < p; ++j) {
    const double* col = xc.col(j);
    ws.curv[j] = 0.25 * kernels::dot_d(col, col, n) / n;
  }
  double ybar = 0.0;
  for (int i = 0; i < n; ++i) ybar += y[i];
  ybar = std::min(std::max(ybar / n, 1.0 / (n + 1.0)), n / (n + 1.0));
  double intercept = std::log(ybar / (1.0 - ybar));
  ws.z.assign(n, intercept);
  ws.residual.assign(n, 0.0);
  ws.refresh_residual(y, n);

  std::vector<double> beta(p, 0.0);
  path.coefs.reserve(n_lambda);
  for (int t = 0; t < n_lambda; ++t) {
    const bool ok =
        cd_solve(xc, y, path.lambda_grid[t], beta, intercept, ws, opts, nullptr);
    path.coefs.push_back(beta);
    path.intercepts.push_back(intercept);
    path.converged.push_back(ok);
  }
  return path;
}

namespace {

// Folds keyed by a hash of the row's content (values and label), so
// duplicated samples land in the same fold and lambda selection is invariant
// to duplicating the dataset. Throws when a fold sees a single class.
std::vector<int> content_folds(const feat::FeatureMatrix& fm,
                               const std::vector<std::uint8_t>& y, int n_folds,
                               std::uint64_t seed) {
  const int n = fm.n_rows;
  std::vector<int> fold(n, -1);
  for (int i = 0; i < n; ++i) {
    const double* row = fm.row(i);
    std::uint64_t h = 0xCBF29CE484222325ULL ^ seed;
    auto mix = [&h](const unsigned char* bytes, std::size_t len) {
      for (std::size_t b = 0; b < len; ++b) {
        h ^= bytes[b];
        h *= 0x100000001B3ULL;
      }
    };
    mix(reinterpret_cast<const unsigned char*>(row),
        static_cast<std::size_t>(fm.n_cols) * sizeof(double));
    mix(&y[i], 1);
    fold[i] = static_cast<int>(h % static_cast<std::uint64_t>(n_folds));
  }
  std::vector<std::array<int, 2>> counts(n_folds, {0, 0});
  for (int i = 0; i < n; ++i) counts[fold[i]][y[i]] += 1;
  for (int f = 0; f < n_folds; ++f) {
    if (counts[f][0] == 0 || counts[f][1] == 0) {
      throw std::runtime_error("cv_lambda_path: degenerate fold " +
                               std::to_string(f));
    }
  }
  return fold;
}

}  // namespace

SparseLogisticFit cv_lambda_path(const feat::FeatureMatrix& fm,
                                 const std::vector<std::uint8_t>& y,
                                 int n_folds, int n_lambda,
                                 std::uint64_t fold_seed,
                                 const SparseLogisticOptions& opts) {
  const int n = fm.n_rows, p = fm.n_cols;
  if (static_cast<int>(y.size()) != n) {
    throw std::invalid_argument("cv_lambda_path: label count mismatch");
  }
  if (n < n_folds) throw std::invalid_argument("cv_lambda_path: n < n_folds");

  // Shared grid anchored at the full-data lambda_max, so fold paths and the
  // final path line up.
  const double lmax = lambda_max(fm.values.data(), y.data(), n, p);
  std::vector<double> grid(n_lambda);
  for (int t = 0; t < n_lambda; ++t) {
    grid[t] = lmax * std::pow(1e-3, static_cast<double>(t) / (n_lambda - 1));
  }

  const std::vector<int> fold = content_folds(fm, y, n_folds, fold_seed);
  std::vector<std::vector<double>> fold_acc(n_folds,
                                            std::vector<double>(n_lambda, 0.0));
  for (int f = 0; f < n_folds; ++f) {
    std::vector<int> train_rows, val_rows;
    for (int i = 0; i < n; ++i) {
      (fold[i] == f ? val_rows : train_rows).push_back(i);
    }
    feat::FeatureMatrix train = feat::take_rows(fm, train_rows);
    std::vector<std::uint8_t> ytr, yva;
    for (int i : train_rows) ytr.push_back(y[i]);
    for (int i : val_rows) yva.push_back(y[i]);
    feat::FeatureMatrix val = feat::take_rows(fm, val_rows);

    ColMajor xc(train.values.data(), train.n_rows, p);
    WorkState ws;
    ws.z.assign(train.n_rows, 0.0);
    ws.residual.assign(train.n_rows, 0.0);
    ws.curv.assign(p, 0.0);
    for (int j = 0; j < p; ++j) {
      const double* col = xc.col(j);
      ws.curv[j] = 0.25 * kernels::dot_d(col, col, train.n_rows) / train.n_rows;
    }
    ws.refresh_residual(ytr.data(), train.n_rows);
    std::vector<double> beta(p, 0.0);
    double intercept = 0.0;
    for (int t = 0; t < n_lambda; ++t) {
      cd_solve(xc, ytr.data(), grid[t], beta, intercept, ws, opts, nullptr);
      int correct = 0;
      for (int i = 0; i < val.n_rows; ++i) {
        const double prob =
            sigmoid(intercept + kernels::dot_d(val.row(i), beta.data(), p));
        const int pred = prob > 0.5 ? 1 : 0;
        correct += pred == yva[i];
      }
      fold_acc[f][t] = static_cast<double>(correct) / val.n_rows;
    }
  }

  // Mean/stderr accuracy per grid point; best index, ties to larger lambda
  // (earlier in the descending grid).
  std::vector<CvPoint> curve(n_lambda);
  int best_t = 0;
  for (int t = 0; t < n_lambda; ++t) {
    double mean = 0.0;
    for (int f = 0; f < n_folds; ++f) mean += fold_acc[f][t];
    mean /= n_folds;
    double var = 0.0;
    for (int f = 0; f < n_folds; ++f) {
      const double d = fold_acc[f][t] - mean;
      var += d * d;
    }
    curve[t] = {grid[t], mean,
                n_folds > 1 ? std::sqrt(var / (n_folds - 1) / n_folds) : 0.0};
    if (curve[t].mean_accuracy > curve[best_t].mean_accuracy) best_t = t;
  }

  // Full-data path for the coefficient trace and the final fit.
  LogisticPath full = logistic_path(fm.values.data(), y.data(), n, p, n_lambda,
                                    1e-3, opts);
  SparseLogisticFit fit;
  fit.lambda = grid[best_t];
  fit.beta = full.coefs[best_t];
  fit.intercept = full.intercepts[best_t];
  fit.converged = full.converged[best_t];
  fit.lambda_grid = grid;
  fit.path_coefs = std::move(full.coefs);
  fit.path_intercepts = std::move(full.intercepts);
  fit.cv_curve = std::move(curve);
  fit.feature_names = fm.feature_names;
  for (int j = 0; j < p; ++j) {
    if (fit.beta[j] != 0.0) fit.active_set.push_back(j);
  }
  return fit;
}

StabilityReport stability_overlap(const feat::FeatureMatrix& unstandardized,
                                  const std::vector<std::uint8_t>& y,
                                  std::uint64_t split_seed, int n_folds,
                                  int n_lambda) {
  const int n = unstandardized.n_rows;
  if (n < 2 * n_folds) throw std::invalid_argument("stability_overlap: too few rows");
  Rng rng(split_seed);
  std::vector<std::size_t> perm = rng.fork("stability_split").permutation(n);
  std::vector<int> half_a, half_b;
  for (int i = 0; i < n; ++i) {
    (i < n / 2 ? half_a : half_b).push_back(static_cast<int>(perm[i]));
  }

  auto fit_half = [&](const std::vector<int>& rows) {
    feat::FeatureMatrix half = feat::take_rows(unstandardized, rows);
    std::vector<int> all(half.n_rows);
    for (int i = 0; i < half.n_rows; ++i) all[i] = i;
    feat::standardize(half, all);
    std::vector<std::uint8_t> yh;
    for (int i : rows) yh.push_back(y[i]);
    return cv_lambda_path(half, yh, n_folds, n_lambda, split_seed);
  };
  SparseLogisticFit fa = fit_half(half_a);
  SparseLogisticFit fb = fit_half(half_b);

  StabilityReport rep;
  rep.active_a = fa.active_set;
  rep.active_b = fb.active_set;
  for (int j : fa.active_set) {
    if (fb.beta[j] != 0.0) {
      rep.overlap_features.push_back(j);
      if ((fa.beta[j] > 0) == (fb.beta[j] > 0)) rep.sign_agreements += 1;
    }
  }
  rep.overlap = static_cast<int>(rep.overlap_features.size());
  return rep;
}

}  // namespace glassbox::model
