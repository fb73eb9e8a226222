#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "glassbox/explain.hpp"
#include "glassbox/sim.hpp"
#include "glassbox/store.hpp"
#include "glassbox/transformer.hpp"

namespace glassbox::evalbench {

struct Table1Row {
  std::string representation;  // raw | featurized | -
  std::string model;  // sparse_logistic | decision_tree | transformer | cbm | majority
  int n_subjects = 0;
  double in_sample_accuracy = 0.0;
  double out_sample_accuracy = 0.0;
  double train_seconds = 0.0;
  int n_active = -1;  // nonzero coefficients or tree splits, -1 when n/a
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string error;  // row-level failure; the run continues
};

struct EvalReport {
  std::vector<Table1Row> rows;
};

struct Table1Config {
  std::vector<int> n_list = {500};
  // Any of: sparse_logistic, decision_tree, transformer, cbm, majority.
  std::vector<std::string> models = {"majority", "sparse_logistic",
                                     "decision_tree"};
  std::vector<std::string> representations = {"raw", "featurized"};
  std::uint64_t seed = 1;
  nn::TransformerConfig transformer = nn::TransformerConfig::desk_scale();
};

// Generates a dataset per N, fits each requested (model, representation)
// pair, and records accuracy plus wall-clock fit time (fit call only).
EvalReport run_table1(const Table1Config& cfg);

std::string render_table(const EvalReport& report);
std::string report_csv(const EvalReport& report);

// ---- ablation-retraining benchmark ----------------------------------------

struct AblationConfig {
  double q = 0.1;  // fraction of (t, d) cells masked
  int n_attribution_samples = 32;
  int ig_steps = 32;
  nn::TransformerConfig transformer = nn::TransformerConfig::desk_scale();
  std::uint64_t mask_seed = 0xab1a7e;
};

struct AblationRecord {
  double q = 0.0;
  int n_masked_cells = 0;
  int n_random_cells = 0;
  double base_accuracy = 0.0;
  double guided_accuracy = 0.0;
  double random_accuracy = 0.0;
  double guided_drop = 0.0;
  double random_drop = 0.0;
  double gap = 0.0;  // guided_drop - random_drop, >= 0 when attributions work
};

// Trains a model, masks the top-q attributed cells (to the per-species train
// mean) in train and validation copies, retrains from scratch, and compares
// against a random mask of exactly the same size.
AblationRecord ablation_benchmark(const sim::SubjectDataset& ds,
                                  const AblationConfig& cfg);

// ---- ground-truth faithfulness ---------------------------------------------

struct TruthView {
  int n_timepoints = 0;
  int n_species = 0;
  int n_communities = 0;
  int bloom_window = 9;
  double concept_threshold = 0.1;
  const std::vector<double>* theta = nullptr;  // N x K
  const std::vector<sim::Kind>* kinds = nullptr;  // K x D
  const std::vector<sim::BloomCenter>* bloom_centers = nullptr;

  static TruthView from(const sim::Generated& g);
  static TruthView from(const sim::SubjectDataset& ds,
                        const store::GroundTruth& truth);
};

struct FaithfulnessReport {
  bool no_signal = false;  // empty truth cell set (all-noise dictionary)
  double mean_precision_at_k = 0.0;
  double mean_rank_correlation = 0.0;  // Spearman vs occlusion drops
  int n_samples = 0;
};

// Truth cells for one subject: every (t, d) cell of a non-noise column of a
// community with theta above the concept threshold (bloom columns contribute
// only their window cells).
std::vector<std::uint8_t> truth_cells(const TruthView& truth, int subject);

FaithfulnessReport ground_truth_faithfulness(
    const std::vector<explain::Attribution>& attributions,
    const std::vector<explain::Attribution>& occlusions,
    const std::vector<int>& subjects, const TruthView& truth);

// Spearman rank correlation with average ranks on ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace glassbox::evalbench
