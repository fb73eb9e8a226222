#pragma once

#include <span>
#include <string>
#include <vector>

#include "glassbox/sim.hpp"

namespace glassbox::feat {

enum class Representation { raw, featurized };

// Per-column standardization parameters, computed on training rows only.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> stddev;  // 0 marks a zero-variance column
  std::vector<int> zero_variance_columns;
  bool empty() const { return mean.empty(); }
};

struct FeatureMatrix {
  int n_rows = 0;
  int n_cols = 0;
  std::vector<double> values;  // row-major
  std::vector<std::string> feature_names;
  Representation representation = Representation::raw;
  Standardization standardization;  // empty until standardize() is applied

  double at(int r, int c) const {
    return values[static_cast<std::size_t>(r) * n_cols + c];
  }
  double* row(int r) { return values.data() + static_cast<std::size_t>(r) * n_cols; }
  const double* row(int r) const {
    return values.data() + static_cast<std::size_t>(r) * n_cols;
  }
  int feature_index(const std::string& name) const;  // -1 when absent
};

// Row i is X_i flattened time-major: column (t-1)*D + (d-1) holds (t, d),
// 1-based names "raw:t=<t>:d=<d>". No standardization applied.
FeatureMatrix concat_raw(const sim::SubjectDataset& ds);

// OLS slope over the design t = 1..T.
double trend_feature(std::span<const double> trajectory);

// Mean squared central difference, (1/(T-2)) * sum_{t=2}^{T-1}
// (x_{t+1} - x_{t-1})^2. With true_second_diff the summand is
// (x_{t+1} - 2 x_t + x_{t-1})^2 instead.
double curvature_feature(std::span<const double> trajectory,
                         bool true_second_diff = false);

// Per-species trend and curvature, columns (trend:d=1..D, curv:d=1..D).
// When standardize is set, columns are scaled to zero mean and unit variance
// using the dataset's training rows.
FeatureMatrix summarize(const sim::SubjectDataset& ds, bool standardize = true,
                        bool true_second_diff = false);

// Compute standardization parameters from train_rows and apply them to every
// row of fm (in place). Zero-variance columns become all-zero and are flagged.
void standardize(FeatureMatrix& fm, const std::vector<int>& train_rows);

// Apply previously computed parameters to a matrix of raw (unstandardized)
// values.
void apply_standardization(FeatureMatrix& fm, const Standardization& params);

std::vector<std::uint8_t> labels_of(const sim::SubjectDataset& ds);

// Rows of fm restricted to the given subject indices.
FeatureMatrix take_rows(const FeatureMatrix& fm, const std::vector<int>& rows);

}  // namespace glassbox::feat
