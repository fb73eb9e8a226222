#include "glassbox/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace glassbox::sim {

namespace {

void renormalize_to(std::vector<double>& v, double target_sum) {
  double s = 0.0;
  for (double x : v) s += x;
  if (s <= 0.0) throw std::logic_error("renormalize: nonpositive sum");
  const double c = target_sum / s;
  for (double& x : v) x *= c;
}

int categorical(Rng& rng, const std::array<double, 4>& probs) {
  const double u = rng.uniform01();
  double acc = 0.0;
  for (int i = 0; i < 3; ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return 3;
}

}  // namespace

void SimConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw std::invalid_argument("sim config: " + msg);
  };
  if (n_subjects <= 0) fail("n_subjects must be positive");
  if (n_timepoints <= 0) fail("n_timepoints must be positive");
  if (n_species <= 0) fail("n_species must be positive");
  if (n_communities <= 0) fail("n_communities must be positive");
  if (n_clusters <= 0) fail("n_clusters must be positive");
  if (n_disease_clusters < 0 || n_disease_clusters > n_clusters) {
    fail("n_disease_clusters must lie in [0, n_clusters]");
  }
  if (n_clusters > n_subjects) fail("n_clusters must not exceed n_subjects");
  if (!(lambda_u > 0.0)) fail("lambda_u must be positive");
  if (!(lambda_bloom > 0.0)) fail("lambda_bloom must be positive");
  if (!(lambda_theta > 0.0)) fail("lambda_theta must be positive");
  if (tukey_bandwidth < 0.0 || tukey_bandwidth > 1.0) {
    fail("tukey_bandwidth must lie in [0, 1]");
  }
  if (tukey_window % 2 == 0 || tukey_window <= 0) fail("tukey_window must be odd");
  if (n_timepoints <= tukey_window) fail("n_timepoints must exceed tukey_window");
  if (!(concept_threshold > 0.0 && concept_threshold < 1.0)) {
    fail("concept_threshold must lie in (0, 1)");
  }
  if (noise_high <= 0.0) fail("noise_high must be positive");
  double total = 0.0;
  for (double p : kind_probs) {
    if (p < 0.0) fail("kind_probs must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) fail("kind_probs must sum to 1");
}

std::vector<int> SubjectDataset::train_indices() const {
  std::vector<int> out;
  for (int i = 0; i < n_subjects(); ++i) {
    if (split[i] == Split::train) out.push_back(i);
  }
  return out;
}

std::vector<int> SubjectDataset::val_indices() const {
  std::vector<int> out;
  for (int i = 0; i < n_subjects(); ++i) {
    if (split[i] == Split::val) out.push_back(i);
  }
  return out;
}

double SubjectDataset::disease_fraction() const {
  double s = 0.0;
  for (auto v : y) s += v;
  return s / static_cast<double>(y.size());
}

std::vector<double> tukey_window(int window_size, double taper) {
  if (window_size <= 0) throw std::invalid_argument("tukey_window: size must be positive");
  std::vector<double> w(window_size, 1.0);
  if (window_size == 1 || taper <= 0.0) return w;
  const double edge = taper * (window_size - 1) / 2.0;
  for (int n = 0; n < window_size; ++n) {
    const double m = std::min<double>(n, window_size - 1 - n);
    if (m < edge) {
      w[n] = 0.5 * (1.0 + std::cos(std::numbers::pi * (m / edge - 1.0)));
    }
  }
  return w;
}

std::vector<double> sample_increase(Rng& rng, int n_timepoints, double lambda_u) {
  if (n_timepoints < 2) throw std::invalid_argument("sample_increase: need T >= 2");
  std::vector<double> u = rng.dirichlet(lambda_u, n_timepoints);
  std::vector<double> f(n_timepoints);
  double acc = 0.0;
  for (int t = 0; t < n_timepoints; ++t) {
    acc += u[t];
    f[t] = acc;
  }
  renormalize_to(f, static_cast<double>(n_timepoints));
  return f;
}

std::vector<double> sample_decrease(Rng& rng, int n_timepoints, double lambda_u) {
  std::vector<double> f = sample_increase(rng, n_timepoints, lambda_u);
  std::reverse(f.begin(), f.end());
  return f;
}

std::vector<double> sample_bloom(Rng& rng, int n_timepoints, double lambda_bloom,
                                 double taper, int window_size,
                                 std::vector<int>* centers) {
  if (window_size % 2 == 0 || window_size >= n_timepoints) {
    throw std::invalid_argument("sample_bloom: window must be odd and < T");
  }
  const int half = (window_size - 1) / 2;
  const std::vector<double> w = tukey_window(window_size, taper);
  int n_bloom = 0;
  do {
    n_bloom = rng.poisson(lambda_bloom);
  } while (n_bloom == 0);
  std::vector<double> f(n_timepoints, 0.0);
  for (int j = 0; j < n_bloom; ++j) {
    // Center is a 1-based time point uniform on [L, T - L].
    const int center = window_size + static_cast<int>(rng.uniform_int(
                                         n_timepoints - 2 * window_size + 1));
    if (centers) centers->push_back(center);
    const int c0 = center - 1;  // 0-based index
    for (int m = -half; m <= half; ++m) {
      f[c0 + m] += w[m + half];
    }
  }
  renormalize_to(f, static_cast<double>(n_timepoints));
  return f;
}

TrajectoryDictionary sample_dictionary(Rng& rng, const SimConfig& config) {
  config.validate();
  const int T = config.n_timepoints, D = config.n_species, K = config.n_communities;
  TrajectoryDictionary dict;
  dict.n_timepoints = T;
  dict.n_species = D;
  dict.entries.assign(K, std::vector<double>(static_cast<std::size_t>(T) * D, 0.0));
  dict.kinds.assign(static_cast<std::size_t>(K) * D, Kind::noise);
  for (int k = 0; k < K; ++k) {
    for (int d = 0; d < D; ++d) {
      const Kind kind = static_cast<Kind>(categorical(rng, config.kind_probs));
      dict.kinds[static_cast<std::size_t>(k) * D + d] = kind;
      std::vector<double> column;
      switch (kind) {
        case Kind::noise: {
          column.resize(T);
          for (int t = 0; t < T; ++t) {
            column[t] = rng.uniform(0.0, config.noise_high);
          }
          break;
        }
        case Kind::increase:
          column = sample_increase(rng, T, config.lambda_u);
          break;
        case Kind::decrease:
          column = sample_decrease(rng, T, config.lambda_u);
          break;
        case Kind::bloom: {
          std::vector<int> centers;
          column = sample_bloom(rng, T, config.lambda_bloom,
                                config.tukey_bandwidth, config.tukey_window,
                                &centers);
          for (int c : centers) dict.bloom_centers.push_back({k, d, c});
          break;
        }
      }
      auto& entry = dict.entries[k];
      for (int t = 0; t < T; ++t) {
        entry[static_cast<std::size_t>(t) * D + d] = column[t];
      }
    }
  }
  return dict;
}

std::vector<int> kmeans(Rng& rng, const std::vector<double>& rows, int n_rows,
                        int dim, int n_clusters, int max_iter) {
  if (n_clusters <= 0 || n_rows < n_clusters) {
    throw std::invalid_argument("kmeans: need n_rows >= n_clusters > 0");
  }
  auto row = [&](int i) { return rows.data() + static_cast<std::size_t>(i) * dim; };
  auto dist2 = [&](const double* a, const double* b) {
    double s = 0.0;
    for (int j = 0; j < dim; ++j) {
      const double d = a[j] - b[j];
      s += d * d;
    }
    return s;
  };

  // k-means++ seeding.
  std::vector<double> centroids(static_cast<std::size_t>(n_clusters) * dim);
  std::vector<double> best(n_rows, std::numeric_limits<double>::infinity());
  int first = static_cast<int>(rng.uniform_int(n_rows));
  std::copy_n(row(first), dim, centroids.begin());
  for (int c = 1; c < n_clusters; ++c) {
    const double* prev = centroids.data() + static_cast<std::size_t>(c - 1) * dim;
    double total = 0.0;
    for (int i = 0; i < n_rows; ++i) {
      best[i] = std::min(best[i], dist2(row(i), prev));
      total += best[i];
    }
    int pick;
    if (total <= 0.0) {
      pick = static_cast<int>(rng.uniform_int(n_rows));
    } else {
      const double target = rng.uniform01() * total;
      double acc = 0.0;
      pick = n_rows - 1;
      for (int i = 0; i < n_rows; ++i) {
        acc += best[i];
        if (target < acc) {
          pick = i;
          break;
        }
      }
    }
    std::copy_n(row(pick), dim, centroids.begin() + static_cast<std::size_t>(c) * dim);
  }

  std::vector<int> assign(n_rows, 0);
  std::vector<int> counts(n_clusters, 0);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (int i = 0; i < n_rows; ++i) {
      int arg = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < n_clusters; ++c) {
        const double d = dist2(row(i), centroids.data() + static_cast<std::size_t>(c) * dim);
        if (d < bd) {
          bd = d;
          arg = c;
        }
      }
      if (assign[i] != arg || iter == 0) {
        changed = changed || assign[i] != arg;
        assign[i] = arg;
      }
    }
    if (iter > 0 && !changed) break;

    std::fill(centroids.begin(), centroids.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n_rows; ++i) {
      double* c = centroids.data() + static_cast<std::size_t>(assign[i]) * dim;
      const double* r = row(i);
      for (int j = 0; j < dim; ++j) c[j] += r[j];
      counts[assign[i]] += 1;
    }
    for (int c = 0; c < n_clusters; ++c) {
      double* cc = centroids.data() + static_cast<std::size_t>(c) * dim;
      if (counts[c] > 0) {
        for (int j = 0; j < dim; ++j) cc[j] /= counts[c];
      } else {
        // Reseed an empty cluster from the point farthest from its centroid.
        int far = 0;
        double fd = -1.0;
        for (int i = 0; i < n_rows; ++i) {
          const double d = dist2(
              row(i), centroids.data() + static_cast<std::size_t>(assign[i]) * dim);
          if (d > fd) {
            fd = d;
            far = i;
          }
        }
        std::copy_n(row(far), dim, cc);
      }
    }
  }
  return assign;
}

SubjectDataset sample_subjects(Rng& rng, const TrajectoryDictionary& dict,
                               const SimConfig& config) {
  config.validate();
  const int N = config.n_subjects, T = config.n_timepoints, D = config.n_species,
            K = config.n_communities;
  if (dict.n_timepoints != T || dict.n_species != D ||
      static_cast<int>(dict.entries.size()) != K) {
    throw std::invalid_argument("sample_subjects: dictionary does not match config");
  }

  SubjectDataset ds;
  ds.config = config;
  ds.theta.resize(static_cast<std::size_t>(N) * K);
  ds.x.resize(static_cast<std::size_t>(N) * T * D);

  Rng theta_rng = rng.fork("theta");
  std::vector<double> acc(static_cast<std::size_t>(T) * D);
  for (int i = 0; i < N; ++i) {
    const std::vector<double> th = theta_rng.dirichlet(config.lambda_theta, K);
    std::copy(th.begin(), th.end(), ds.theta.begin() + static_cast<std::size_t>(i) * K);
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int k = 0; k < K; ++k) {
      const double w = th[k];
      const double* entry = dict.entries[k].data();
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += w * entry[j];
    }
    float* out = ds.x.data() + static_cast<std::size_t>(i) * T * D;
    for (std::size_t j = 0; j < acc.size(); ++j) out[j] = static_cast<float>(acc[j]);
  }

  Rng kmeans_rng = rng.fork("kmeans");
  ds.cluster_id = kmeans(kmeans_rng, ds.theta, N, K, config.n_clusters);

  Rng label_rng = rng.fork("cluster_labels");
  std::vector<std::size_t> cluster_perm = label_rng.permutation(config.n_clusters);
  std::vector<std::uint8_t> cluster_is_disease(config.n_clusters, 0);
  for (int j = 0; j < config.n_disease_clusters; ++j) {
    cluster_is_disease[cluster_perm[j]] = 1;
  }
  ds.y.resize(N);
  for (int i = 0; i < N; ++i) ds.y[i] = cluster_is_disease[ds.cluster_id[i]];

  ds.concepts.resize(static_cast<std::size_t>(N) * K);
  for (std::size_t j = 0; j < ds.concepts.size(); ++j) {
    ds.concepts[j] = ds.theta[j] > config.concept_threshold ? 1 : 0;
  }

  Rng split_rng = rng.fork("train_split");
  std::vector<std::size_t> perm = split_rng.permutation(N);
  const int n_train = static_cast<int>(std::lround(0.75 * N));
  ds.split.assign(N, Split::val);
  for (int j = 0; j < n_train; ++j) ds.split[perm[j]] = Split::train;

  return ds;
}

Generated generate(const SimConfig& config) {
  config.validate();
  Rng master(config.seed);
  Rng dict_rng = master.fork("dictionary");
  Generated g;
  g.dictionary = sample_dictionary(dict_rng, config);
  Rng subj_rng = master.fork("subjects");
  g.dataset = sample_subjects(subj_rng, g.dictionary, config);
  return g;
}

}  // namespace glassbox::sim
