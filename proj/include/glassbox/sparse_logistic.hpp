#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glassbox/featurize.hpp"

namespace glassbox::model {

struct CvPoint {
  double lambda = 0.0;
  double mean_accuracy = 0.0;
  double stderr_accuracy = 0.0;
};

// L1-regularized logistic regression fit. Objective is mean negative
// log-likelihood plus lambda * ||beta||_1 with an unpenalized intercept.
struct SparseLogisticFit {
  std::vector<double> beta;
  double intercept = 0.0;
  double lambda = 0.0;
  bool converged = true;

  std::vector<double> lambda_grid;                // descending
  std::vector<std::vector<double>> path_coefs;    // full-data path, per lambda
  std::vector<double> path_intercepts;
  std::vector<CvPoint> cv_curve;
  std::vector<int> active_set;                    // indices with beta != 0
  std::vector<std::string> feature_names;

  double predict_one(const double* x, int p) const;
  // out[i] = P(y=1 | row i); throws when p does not match beta size.
  void predict_proba(const double* X, int n, int p, double* out) const;
  int n_active() const { return static_cast<int>(active_set.size()); }
};

struct SparseLogisticOptions {
  double tol = 1e-7;    // max coefficient change per sweep
  int max_sweeps = 10000;
};

// Mean-NLL gradient scale: the smallest lambda with an all-zero solution.
double lambda_max(const double* X, const std::uint8_t* y, int n, int p);

// Cyclic coordinate descent with active-set iteration. Warm start via
// beta0/intercept0 when provided.
SparseLogisticFit fit_sparse_logistic(
    const double* X, const std::uint8_t* y, int n, int p, double lambda,
    const SparseLogisticOptions& opts = {},
    const std::vector<double>* beta0 = nullptr, double intercept0 = 0.0);

SparseLogisticFit fit_sparse_logistic(const feat::FeatureMatrix& fm,
                                      const std::vector<std::uint8_t>& y,
                                      double lambda,
                                      const SparseLogisticOptions& opts = {});

// Warm-started path over a descending log-spaced grid from lambda_max down to
// grid_ratio * lambda_max. Returns one coefficient vector per grid point.
struct LogisticPath {
  std::vector<double> lambda_grid;
  std::vector<std::vector<double>> coefs;
  std::vector<double> intercepts;
  std::vector<bool> converged;
};
LogisticPath logistic_path(const double* X, const std::uint8_t* y, int n, int p,
                           int n_lambda, double grid_ratio = 1e-3,
                           const SparseLogisticOptions& opts = {});

// Four-fold (by default) cross-validated path; selects the lambda maximizing
// mean validation accuracy, ties to the larger lambda. Folds are keyed by a
// content hash so duplicated rows co-locate and selection is invariant to
// duplicating the dataset; a single-class fold raises "degenerate fold".
SparseLogisticFit cv_lambda_path(const feat::FeatureMatrix& fm,
                                 const std::vector<std::uint8_t>& y,
                                 int n_folds = 4, int n_lambda = 100,
                                 std::uint64_t fold_seed = 0x5eedf01d,
                                 const SparseLogisticOptions& opts = {});

// Fits cv_lambda_path on two disjoint halves (standardized independently) and
// reports active-set agreement.
struct StabilityReport {
  std::vector<int> active_a;
  std::vector<int> active_b;
  std::vector<int> overlap_features;
  int overlap = 0;
  int sign_agreements = 0;  // among overlapping features
};
StabilityReport stability_overlap(const feat::FeatureMatrix& unstandardized,
                                  const std::vector<std::uint8_t>& y,
                                  std::uint64_t split_seed, int n_folds = 4,
                                  int n_lambda = 100);

}  // namespace glassbox::model
