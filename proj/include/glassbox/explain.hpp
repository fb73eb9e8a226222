#pragma once

#include <string>
#include <vector>

#include "glassbox/featurize.hpp"

namespace glassbox::explain {

// Uniform predict-probability contract over feature-vector rows.
struct ProbModel {
  virtual ~ProbModel() = default;
  virtual int input_dim() const = 0;
  // out[i] = P(y = 1 | row i).
  virtual void predict(const double* X, int n, double* out) const = 0;
};

// Model over standardized trajectory inputs that also exposes input
// gradients.
struct TrajectoryModel {
  virtual ~TrajectoryModel() = default;
  virtual int n_timepoints() const = 0;
  virtual int n_species() const = 0;
  virtual double prob(const float* x, int target) const = 0;
  // out = d P(y = target) / d x, one entry per (t, d) cell.
  virtual void grad(const float* x, int target, float* out) const = 0;
};

struct PdpProfile {
  int feature = -1;
  std::string feature_name;
  std::vector<double> grid;     // strictly increasing
  std::vector<double> profile;  // average prediction per grid value
};

// Average model output as feature d sweeps the grid with all other
// coordinates held at their observed values.
PdpProfile pdp(const ProbModel& model, const feat::FeatureMatrix& data,
               int feature, std::vector<double> grid);

std::vector<double> quantile_grid(const feat::FeatureMatrix& data, int feature,
                                  int n_points);

enum class AttributionMethod { integrated_gradients, occlusion };

struct Attribution {
  int sample_id = -1;
  AttributionMethod method = AttributionMethod::integrated_gradients;
  int n_timepoints = 0;
  int n_species = 0;
  std::vector<float> values;  // (t, d) row-major, positive = raises P(target)
  std::string baseline_desc;
  int n_steps = 0;
  double completeness_gap = 0.0;
};

// Midpoint-rule integrated gradients from baseline to x.
Attribution integrated_gradients(const TrajectoryModel& model, const float* x,
                                 int target, const float* baseline,
                                 int n_steps = 64,
                                 const std::string& baseline_desc = "zero");

// Per-cell occlusion: replace a time window of one species with the baseline
// and record the prediction drop.
Attribution occlusion(const TrajectoryModel& model, const float* x, int target,
                      const float* baseline, int window = 1,
                      const std::string& baseline_desc = "zero");

struct SparsePcaResult {
  int dim = 0;
  int n_components = 0;
  std::vector<double> loadings;            // dim x n_components, unit columns
  std::vector<double> explained_variance;  // nonincreasing
  double total_variance = 0.0;
  std::vector<double> scores;  // n x n_components
  double loadings_sparsity = 0.0;  // fraction of exactly-zero loadings
};

// L1-penalized truncated power iteration with deflation. penalty in [0, 1)
// soft-thresholds each iterate at penalty * max|w|; penalty 0 recovers plain
// PCA directions.
SparsePcaResult sparse_pca(const std::vector<double>& rows, int n, int dim,
                           int n_components, double penalty);
SparsePcaResult sparse_pca(const std::vector<float>& rows, int n, int dim,
                           int n_components, double penalty);

struct EmbeddingSet {
  std::string source_layer;
  int n = 0;
  int dim = 0;
  std::vector<float> vectors;  // n x dim
  SparsePcaResult pca;         // filled by project()
};

void project(EmbeddingSet& set, int n_components = 2, double penalty = 0.0);

struct InterpolationPoint {
  double alpha = 0.0;
  std::vector<double> interpolant;
  int nearest_id = -1;
  double distance = 0.0;
};

// Equally spaced convex combinations of vectors id_a and id_b with the
// nearest dataset vector at each step.
std::vector<InterpolationPoint> interpolation_probe(
    const std::vector<float>& vectors, int n, int dim, int id_a, int id_b,
    int n_points);

}  // namespace glassbox::explain
