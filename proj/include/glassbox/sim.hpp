#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "glassbox/rng.hpp"

namespace glassbox::sim {

enum class Kind : std::uint8_t { noise = 0, increase = 1, decrease = 2, bloom = 3 };

struct SimConfig {
  int n_subjects = 500;
  int n_timepoints = 50;   // T
  int n_species = 144;     // D
  int n_communities = 25;  // K
  double lambda_u = 0.3;
  double tukey_bandwidth = 0.9;  // r
  int tukey_window = 9;          // L, odd
  double lambda_bloom = 2.0;
  double lambda_theta = 0.5;
  int n_clusters = 24;
  int n_disease_clusters = 12;
  double concept_threshold = 0.1;
  double noise_high = 0.01;
  std::array<double, 4> kind_probs = {0.7, 0.1, 0.1, 0.1};
  std::uint64_t seed = 1;

  void validate() const;  // throws std::invalid_argument
};

struct BloomCenter {
  int community;  // k
  int species;    // d
  int time;       // 1-based center t*
};

// Latent community trajectories with ground-truth bookkeeping. Values are kept
// in f64 so the sum-to-T closure holds to 1e-9 relative.
struct TrajectoryDictionary {
  int n_timepoints = 0;
  int n_species = 0;
  // entries[k][t * D + d]
  std::vector<std::vector<double>> entries;
  // kinds[k * D + d]
  std::vector<Kind> kinds;
  std::vector<BloomCenter> bloom_centers;

  double value(int k, int t, int d) const {
    return entries[k][static_cast<std::size_t>(t) * n_species + d];
  }
  Kind kind(int k, int d) const {
    return kinds[static_cast<std::size_t>(k) * n_species + d];
  }
};

enum class Split : std::uint8_t { train = 0, val = 1 };

struct SubjectDataset {
  SimConfig config;
  // x[i * T * D + t * D + d], observed abundances
  std::vector<float> x;
  // theta[i * K + k], simplex rows
  std::vector<double> theta;
  std::vector<std::uint8_t> y;  // 0 healthy, 1 disease
  std::vector<std::uint8_t> concepts;  // concepts[i * K + k]
  std::vector<int> cluster_id;
  std::vector<Split> split;

  int n_subjects() const { return config.n_subjects; }
  int n_timepoints() const { return config.n_timepoints; }
  int n_species() const { return config.n_species; }
  int n_communities() const { return config.n_communities; }
  const float* sample(int i) const {
    return x.data() + static_cast<std::size_t>(i) * n_timepoints() * n_species();
  }
  std::vector<int> train_indices() const;
  std::vector<int> val_indices() const;
  double disease_fraction() const;
};

// Tapered-cosine window of length window_size, taper in [0, 1].
std::vector<double> tukey_window(int window_size, double taper);

// Nondecreasing, nonnegative, sums to n_timepoints.
std::vector<double> sample_increase(Rng& rng, int n_timepoints, double lambda_u);

// Time-reversal of sample_increase: nonincreasing, sums to n_timepoints.
std::vector<double> sample_decrease(Rng& rng, int n_timepoints, double lambda_u);

// Sum of Poisson-many Tukey windows (redrawn until at least one), renormalized
// to sum n_timepoints. Centers (1-based) appended to *centers when non-null.
std::vector<double> sample_bloom(Rng& rng, int n_timepoints, double lambda_bloom,
                                 double taper, int window_size,
                                 std::vector<int>* centers = nullptr);

TrajectoryDictionary sample_dictionary(Rng& rng, const SimConfig& config);

SubjectDataset sample_subjects(Rng& rng, const TrajectoryDictionary& dict,
                               const SimConfig& config);

// Full pipeline from a config: forks "dictionary" and "subjects" streams off
// the master seed.
struct Generated {
  TrajectoryDictionary dictionary;
  SubjectDataset dataset;
};
Generated generate(const SimConfig& config);

// k-means with k-means++ seeding, Euclidean metric, at most max_iter Lloyd
// rounds. Empty clusters are reseeded from the farthest point. Returns
// assignments; ties go to the lowest centroid index.
std::vector<int> kmeans(Rng& rng, const std::vector<double>& rows, int n_rows,
                        int dim, int n_clusters, int max_iter = 100);

}  // namespace glassbox::sim
