#include "glassbox/featurize.hpp"

#include <cmath>
#include <stdexcept>

namespace glassbox::feat {

int FeatureMatrix::feature_index(const std::string& name) const {
  for (std::size_t j = 0; j < feature_names.size(); ++j) {
    if (feature_names[j] == name) return static_cast<int>(j);
  }
  return -1;
}

FeatureMatrix concat_raw(const sim::SubjectDataset& ds) {
  const int N = ds.n_subjects(), T = ds.n_timepoints(), D = ds.n_species();
  if (N == 0) throw std::invalid_argument("concat_raw: empty dataset");
  FeatureMatrix fm;
  fm.n_rows = N;
  fm.n_cols = T * D;
  fm.representation = Representation::raw;
  fm.values.resize(static_cast<std::size_t>(N) * T * D);
  for (std::size_t j = 0; j < fm.values.size(); ++j) {
    fm.values[j] = static_cast<double>(ds.x[j]);
  }
  fm.feature_names.reserve(fm.n_cols);
  for (int t = 1; t <= T; ++t) {
    for (int d = 1; d <= D; ++d) {
      fm.feature_names.push_back("raw:t=" + std::to_string(t) +
                                 ":d=" + std::to_string(d));
    }
  }
  return fm;
}

double trend_feature(std::span<const double> trajectory) {
  const int T = static_cast<int>(trajectory.size());
  if (T < 2) throw std::invalid_argument("trend_feature: need T >= 2");
  // OLS slope with design t = 1..T; the intercept is discarded.
  const double t_mean = (T + 1) / 2.0;
  double x_mean = 0.0;
  for (double v : trajectory) x_mean += v;
  x_mean /= T;
  double num = 0.0, den = 0.0;
  for (int t = 0; t < T; ++t) {
    const double dt = (t + 1) - t_mean;
    num += dt * (trajectory[t] - x_mean);
    den += dt * dt;
  }
  return num / den;
}

double curvature_feature(std::span<const double> trajectory,
                         bool true_second_diff) {
  const int T = static_cast<int>(trajectory.size());
  if (T < 3) throw std::invalid_argument("curvature_feature: need T >= 3");
  double acc = 0.0;
  for (int t = 1; t + 1 < T; ++t) {
    const double d = true_second_diff
                         ? trajectory[t + 1] - 2.0 * trajectory[t] + trajectory[t - 1]
                         : trajectory[t + 1] - trajectory[t - 1];
    acc += d * d;
  }
  return acc / (T - 2);
}

FeatureMatrix summarize(const sim::SubjectDataset& ds, bool do_standardize,
                        bool true_second_diff) {
  const int N = ds.n_subjects(), T = ds.n_timepoints(), D = ds.n_species();
  if (N == 0) throw std::invalid_argument("summarize: empty dataset");
  if (T < 3) throw std::invalid_argument("summarize: need T >= 3");
  FeatureMatrix fm;
  fm.n_rows = N;
  fm.n_cols = 2 * D;
  fm.representation = Representation::featurized;
  fm.values.resize(static_cast<std::size_t>(N) * fm.n_cols);
  std::vector<double> traj(T);
  for (int i = 0; i < N; ++i) {
    const float* xi = ds.sample(i);
    double* out = fm.row(i);
    for (int d = 0; d < D; ++d) {
      for (int t = 0; t < T; ++t) {
        traj[t] = xi[static_cast<std::size_t>(t) * D + d];
      }
      out[d] = trend_feature(traj);
      out[D + d] = curvature_feature(traj, true_second_diff);
    }
  }
  fm.feature_names.reserve(fm.n_cols);
  for (int d = 1; d <= D; ++d) fm.feature_names.push_back("trend:d=" + std::to_string(d));
  for (int d = 1; d <= D; ++d) fm.feature_names.push_back("curv:d=" + std::to_string(d));
  if (do_standardize) standardize(fm, ds.train_indices());
  return fm;
}

void standardize(FeatureMatrix& fm, const std::vector<int>& train_rows) {
  if (train_rows.empty()) {
    throw std::invalid_argument("standardize: no training rows");
  }
  Standardization st;
  st.mean.assign(fm.n_cols, 0.0);
  st.stddev.assign(fm.n_cols, 0.0);
  const double n = static_cast<double>(train_rows.size());
  for (int r : train_rows) {
    const double* row = fm.row(r);
    for (int j = 0; j < fm.n_cols; ++j) st.mean[j] += row[j];
  }
  for (int j = 0; j < fm.n_cols; ++j) st.mean[j] /= n;
  for (int r : train_rows) {
    const double* row = fm.row(r);
    for (int j = 0; j < fm.n_cols; ++j) {
      const double d = row[j] - st.mean[j];
      st.stddev[j] += d * d;
    }
  }
  for (int j = 0; j < fm.n_cols; ++j) {
    st.stddev[j] = std::sqrt(st.stddev[j] / n);
    if (st.stddev[j] <= 1e-12) {
      st.stddev[j] = 0.0;
      st.zero_variance_columns.push_back(j);
    }
  }
  apply_standardization(fm, st);
}

void apply_standardization(FeatureMatrix& fm, const Standardization& params) {
  if (static_cast<int>(params.mean.size()) != fm.n_cols) {
    throw std::invalid_argument("apply_standardization: column count mismatch");
  }
  for (int i = 0; i < fm.n_rows; ++i) {
    double* row = fm.row(i);
    for (int j = 0; j < fm.n_cols; ++j) {
      row[j] = params.stddev[j] > 0.0
                   ? (row[j] - params.mean[j]) / params.stddev[j]
                   : 0.0;
    }
  }
  fm.standardization = params;
}

std::vector<std::uint8_t> labels_of(const sim::SubjectDataset& ds) {
  return ds.y;
}

FeatureMatrix take_rows(const FeatureMatrix& fm, const std::vector<int>& rows) {
  FeatureMatrix out;
  out.n_rows = static_cast<int>(rows.size());
  out.n_cols = fm.n_cols;
  out.feature_names = fm.feature_names;
  out.representation = fm.representation;
  out.standardization = fm.standardization;
  out.values.resize(static_cast<std::size_t>(out.n_rows) * out.n_cols);
  for (int i = 0; i < out.n_rows; ++i) {
    const double* src = fm.row(rows[i]);
    std::copy(src, src + fm.n_cols, out.row(i));
  }
  return out;
}

}  // namespace glassbox::feat
