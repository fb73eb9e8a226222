#include "glassbox/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace glassbox::explain {

PdpProfile pdp(const ProbModel& model, const feat::FeatureMatrix& data,
               int feature, std::vector<double> grid) {
  if (feature < 0 || feature >= data.n_cols) {
    throw std::invalid_argument("pdp: feature index out of range");
  }
  if (grid.empty()) throw std::invalid_argument("pdp: empty grid");
  if (model.input_dim() != data.n_cols) {
    throw std::invalid_argument("pdp: model expects " +
                                std::to_string(model.input_dim()) +
                                " features, data has " +
                                std::to_string(data.n_cols));
  }
  if (!std::is_sorted(grid.begin(), grid.end())) {
    std::sort(grid.begin(), grid.end());
  }
  PdpProfile out;
  out.feature = feature;
  if (!data.feature_names.empty()) out.feature_name = data.feature_names[feature];
  out.grid = grid;
  out.profile.resize(grid.size());
  std::vector<double> modified = data.values;
  std::vector<double> preds(data.n_rows);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (int i = 0; i < data.n_rows; ++i) {
      modified[static_cast<std::size_t>(i) * data.n_cols + feature] = grid[g];
    }
    model.predict(modified.data(), data.n_rows, preds.data());
    double acc = 0.0;
    for (double p : preds) acc += p;
    out.profile[g] = acc / data.n_rows;
  }
  return out;
}

std::vector<double> quantile_grid(const feat::FeatureMatrix& data, int feature,
                                  int n_points) {
  if (n_points < 2) throw std::invalid_argument("quantile_grid: need >= 2 points");
  std::vector<double> col(data.n_rows);
  for (int i = 0; i < data.n_rows; ++i) col[i] = data.at(i, feature);
  std::sort(col.begin(), col.end());
  std::vector<double> grid;
  grid.reserve(n_points);
  for (int g = 0; g < n_points; ++g) {
    const double q = static_cast<double>(g) / (n_points - 1);
    const double pos = q * (data.n_rows - 1);
    const int lo = static_cast<int>(pos);
    const int hi = std::min(lo + 1, data.n_rows - 1);
    grid.push_back(col[lo] + (pos - lo) * (col[hi] - col[lo]));
  }
  // Deduplicate; the profile grid must be strictly increasing.
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

Attribution integrated_gradients(const TrajectoryModel& model, const float* x,
                                 int target, const float* baseline, int n_steps,
                                 const std::string& baseline_desc) {
  if (n_steps <= 0) throw std::invalid_argument("integrated_gradients: n_steps");
  const int T = model.n_timepoints(), D = model.n_species();
  const std::size_t len = static_cast<std::size_t>(T) * D;
  Attribution att;
  att.method = AttributionMethod::integrated_gradients;
  att.n_timepoints = T;
  att.n_species = D;
  att.n_steps = n_steps;
  att.baseline_desc = baseline_desc;
  att.values.assign(len, 0.0f);

  std::vector<float> point(len), grad(len);
  std::vector<double> mean_grad(len, 0.0);
  for (int m = 1; m <= n_steps; ++m) {
    const double alpha = (m - 0.5) / n_steps;
    for (std::size_t j = 0; j < len; ++j) {
      point[j] = static_cast<float>(baseline[j] + alpha * (x[j] - baseline[j]));
    }
    model.grad(point.data(), target, grad.data());
    for (std::size_t j = 0; j < len; ++j) mean_grad[j] += grad[j];
  }
  double total = 0.0;
  for (std::size_t j = 0; j < len; ++j) {
    const double v =
        (static_cast<double>(x[j]) - baseline[j]) * mean_grad[j] / n_steps;
    att.values[j] = static_cast<float>(v);
    total += v;
  }
  const double fx = model.prob(x, target);
  const double f0 = model.prob(baseline, target);
  att.completeness_gap = std::abs(total - (fx - f0));
  return att;
}

Attribution occlusion(const TrajectoryModel& model, const float* x, int target,
                      const float* baseline, int window,
                      const std::string& baseline_desc) {
  const int T = model.n_timepoints(), D = model.n_species();
  if (window <= 0 || window > T) {
    throw std::invalid_argument("occlusion: window must lie in [1, T]");
  }
  const std::size_t len = static_cast<std::size_t>(T) * D;
  Attribution att;
  att.method = AttributionMethod::occlusion;
  att.n_timepoints = T;
  att.n_species = D;
  att.baseline_desc = baseline_desc;
  att.values.assign(len, 0.0f);
  const double fx = model.prob(x, target);
  std::vector<float> occluded(x, x + len);
  for (int t = 0; t < T; ++t) {
    const int t_end = std::min(T, t + window);
    for (int d = 0; d < D; ++d) {
      for (int tt = t; tt < t_end; ++tt) {
        occluded[static_cast<std::size_t>(tt) * D + d] =
            baseline[static_cast<std::size_t>(tt) * D + d];
      }
      att.values[static_cast<std::size_t>(t) * D + d] =
          static_cast<float>(fx - model.prob(occluded.data(), target));
      for (int tt = t; tt < t_end; ++tt) {
        occluded[static_cast<std::size_t>(tt) * D + d] =
            x[static_cast<std::size_t>(tt) * D + d];
      }
    }
  }
  return att;
}

namespace {

SparsePcaResult sparse_pca_impl(const std::vector<double>& rows, int n, int dim,
                                int n_components, double penalty) {
  if (n < 2) throw std::invalid_argument("sparse_pca: need at least 2 rows");
  if (n_components < 1 || n_components > dim) {
    throw std::invalid_argument("sparse_pca: bad component count");
  }
  if (penalty < 0.0 || penalty >= 1.0) {
    throw std::invalid_argument("sparse_pca: penalty must lie in [0, 1)");
  }
  // Centered working copy.
  std::vector<double> z(rows);
  std::vector<double> mean(dim, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) mean[j] += z[static_cast<std::size_t>(i) * dim + j];
  }
  for (int j = 0; j < dim; ++j) mean[j] /= n;
  double total_var = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) {
      double& v = z[static_cast<std::size_t>(i) * dim + j];
      v -= mean[j];
      total_var += v * v;
    }
  }
  total_var /= n;
  if (total_var <= 1e-300) {
    throw std::invalid_argument("sparse_pca: degenerate covariance");
  }

  SparsePcaResult res;
  res.dim = dim;
  res.n_components = n_components;
  res.total_variance = total_var;
  res.loadings.assign(static_cast<std::size_t>(dim) * n_components, 0.0);
  res.scores.assign(static_cast<std::size_t>(n) * n_components, 0.0);
  res.explained_variance.assign(n_components, 0.0);

  std::vector<double> v(dim), w(dim), zv(n);
  for (int comp = 0; comp < n_components; ++comp) {
    // Deterministic start: the coordinate with the largest variance.
    int start = 0;
    double best_var = -1.0;
    for (int j = 0; j < dim; ++j) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) {
        const double x = z[static_cast<std::size_t>(i) * dim + j];
        s += x * x;
      }
      if (s > best_var) {
        best_var = s;
        start = j;
      }
    }
    std::fill(v.begin(), v.end(), 0.0);
    v[start] = 1.0;

    for (int iter = 0; iter < 1000; ++iter) {
      // w = Z^T (Z v) / n without forming the covariance.
      for (int i = 0; i < n; ++i) {
        double s = 0.0;
        const double* row = z.data() + static_cast<std::size_t>(i) * dim;
        for (int j = 0; j < dim; ++j) s += row[j] * v[j];
        zv[i] = s;
      }
      std::fill(w.begin(), w.end(), 0.0);
      for (int i = 0; i < n; ++i) {
        const double* row = z.data() + static_cast<std::size_t>(i) * dim;
        const double s = zv[i];
        for (int j = 0; j < dim; ++j) w[j] += s * row[j];
      }
      double wmax = 0.0;
      for (int j = 0; j < dim; ++j) {
        w[j] /= n;
        wmax = std::max(wmax, std::abs(w[j]));
      }
      if (wmax <= 0.0) break;
      // Soft-threshold then renormalize.
      const double thr = penalty * wmax;
      double norm = 0.0;
      for (int j = 0; j < dim; ++j) {
        if (w[j] > thr) {
          w[j] -= thr;
        } else if (w[j] < -thr) {
          w[j] += thr;
        } else {
          w[j] = 0.0;
        }
        norm += w[j] * w[j];
      }
      if (norm <= 0.0) {
        // Penalty swallowed everything except the peak coordinate.
        std::fill(w.begin(), w.end(), 0.0);
        w[start] = 1.0;
        norm = 1.0;
      }
      norm = std::sqrt(norm);
      double flip = 0.0;
      for (int j = 0; j < dim; ++j) flip += w[j] * v[j];
      const double sign = flip < 0.0 ? -1.0 : 1.0;
      double delta = 0.0;
      for (int j = 0; j < dim; ++j) {
        const double nv = sign * w[j] / norm;
        delta = std::max(delta, std::abs(nv - v[j]));
        v[j] = nv;
      }
      if (delta < 1e-6) break;
    }

    // Sign convention: make the largest-magnitude loading positive.
    int peak = 0;
    for (int j = 1; j < dim; ++j) {
      if (std::abs(v[j]) > std::abs(v[peak])) peak = j;
    }
    if (v[peak] < 0.0) {
      for (double& x : v) x = -x;
    }

    double ev = 0.0;
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      const double* row = z.data() + static_cast<std::size_t>(i) * dim;
      for (int j = 0; j < dim; ++j) s += row[j] * v[j];
      zv[i] = s;
      ev += s * s;
    }
    ev /= n;
    res.explained_variance[comp] = ev;
    for (int j = 0; j < dim; ++j) {
      res.loadings[static_cast<std::size_t>(j) * n_components + comp] = v[j];
    }
    for (int i = 0; i < n; ++i) {
      res.scores[static_cast<std::size_t>(i) * n_components + comp] = zv[i];
    }
    // Deflate by projection removal.
    for (int i = 0; i < n; ++i) {
      double* row = z.data() + static_cast<std::size_t>(i) * dim;
      const double s = zv[i];
      for (int j = 0; j < dim; ++j) row[j] -= s * v[j];
    }
  }

  // Components ordered by explained variance.
  std::vector<int> order(n_components);
  for (int c = 0; c < n_components; ++c) order[c] = c;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return res.explained_variance[a] > res.explained_variance[b];
  });
  SparsePcaResult sorted = res;
  for (int c = 0; c < n_components; ++c) {
    sorted.explained_variance[c] = res.explained_variance[order[c]];
    for (int j = 0; j < dim; ++j) {
      sorted.loadings[static_cast<std::size_t>(j) * n_components + c] =
          res.loadings[static_cast<std::size_t>(j) * n_components + order[c]];
    }
    for (int i = 0; i < n; ++i) {
      sorted.scores[static_cast<std::size_t>(i) * n_components + c] =
          res.scores[static_cast<std::size_t>(i) * n_components + order[c]];
    }
  }
  int zeros = 0;
  for (double x : sorted.loadings) zeros += x == 0.0;
  sorted.loadings_sparsity =
      static_cast<double>(zeros) / static_cast<double>(sorted.loadings.size());
  return sorted;
}

}  // namespace

SparsePcaResult sparse_pca(const std::vector<double>& rows, int n, int dim,
                           int n_components, double penalty) {
  if (static_cast<std::size_t>(n) * dim != rows.size()) {
    throw std::invalid_argument("sparse_pca: shape mismatch");
  }
  return sparse_pca_impl(rows, n, dim, n_components, penalty);
}

SparsePcaResult sparse_pca(const std::vector<float>& rows, int n, int dim,
                           int n_components, double penalty) {
  std::vector<double> d(rows.begin(), rows.end());
  return sparse_pca(d, n, dim, n_components, penalty);
}

void project(EmbeddingSet& set, int n_components, double penalty) {
  set.pca = sparse_pca(set.vectors, set.n, set.dim, n_components, penalty);
}

std::vector<InterpolationPoint> interpolation_probe(
    const std::vector<float>& vectors, int n, int dim, int id_a, int id_b,
    int n_points) {
  if (id_a < 0 || id_a >= n || id_b < 0 || id_b >= n) {
    throw std::invalid_argument("interpolation_probe: id out of range");
  }
  if (n_points < 2) throw std::invalid_argument("interpolation_probe: n_points");
  std::vector<InterpolationPoint> out;
  out.reserve(n_points);
  const float* a = vectors.data() + static_cast<std::size_t>(id_a) * dim;
  const float* b = vectors.data() + static_cast<std::size_t>(id_b) * dim;
  for (int m = 0; m < n_points; ++m) {
    InterpolationPoint pt;
    pt.alpha = static_cast<double>(m) / (n_points - 1);
    pt.interpolant.resize(dim);
    for (int j = 0; j < dim; ++j) {
      pt.interpolant[j] = (1.0 - pt.alpha) * a[j] + pt.alpha * b[j];
    }
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const float* row = vectors.data() + static_cast<std::size_t>(i) * dim;
      double d2 = 0.0;
      for (int j = 0; j < dim; ++j) {
        const double diff = pt.interpolant[j] - row[j];
        d2 += diff * diff;
      }
      if (d2 < best) {
        best = d2;
        pt.nearest_id = i;
      }
    }
    pt.distance = std::sqrt(best);
    out.push_back(std::move(pt));
  }
  return out;
}

}  // namespace glassbox::explain
