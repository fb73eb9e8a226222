#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "glassbox/rng.hpp"
#include "glassbox/sim.hpp"
#include "glassbox/tensor.hpp"

namespace glassbox::nn {

struct TransformerConfig {
  int n_embd = 144;
  int n_positions = 50;
  int n_layer = 6;
  int n_head = 4;
  int n_concept = 25;
  int n_class = 2;
  bool causal_mask = true;
  int epochs = 70;
  int batch_size = 32;
  float lr = 3e-4f;
  float cbm_lambda = 1.0f;
  std::uint64_t seed = 1;

  void validate() const;
  int head_dim() const { return n_embd / n_head; }

  static TransformerConfig desk_scale() {
    TransformerConfig cfg;
    cfg.n_layer = 2;
    return cfg;
  }
};

enum class ModelMode { plain, cbm };

// Per-species standardization fitted on the training split; standardized raw
// abundances serve directly as token embeddings.
struct InputScaler {
  std::vector<double> mean;
  std::vector<double> stddev;

  void fit(const sim::SubjectDataset& ds);
  void apply(const float* x, int n_timepoints, int n_species, float* out) const;
  ad::Tensor standardize_batch(const sim::SubjectDataset& ds,
                               const std::vector<int>& subjects) const;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TransformerBlock {
  ad::Param ln1_gain, ln1_bias, ln2_gain, ln2_bias;
  ad::Param wq, wk, wv, wo;
  ad::Param bq, bk, bv, bo;
  ad::Param fc1_w, fc1_b, fc2_w, fc2_b;
};

// Pre-norm transformer encoder over trajectory tokens, with a mean-pool
// classification head (plain mode) or a flattened-state concept bottleneck
// (cbm mode).
class Transformer {
 public:
  Transformer(TransformerConfig cfg, ModelMode mode);

  const TransformerConfig& config() const { return config_; }
  ModelMode mode() const { return mode_; }

  std::vector<ad::Param*> params();
  std::vector<const ad::Param*> params() const;
  void init_weights(Rng& rng);
  void zero_grads();

  // Forward pass over a batch of standardized inputs, x is (batch *
  // n_timepoints) x n_embd. Returns class logits (batch x 1); concept logits
  // (batch x n_concept) via *concepts in cbm mode. block_states, when
  // non-null, receives a copy of each block's output.
  ad::Var build(ad::Tape& tape, ad::Var x, int batch, int n_timepoints,
                ad::Var* concepts = nullptr,
                std::vector<ad::Tensor>* block_states = nullptr) const;

  // Class logits from concept logits only (the bottleneck head g).
  ad::Var build_head_from_concepts(ad::Tape& tape, ad::Var concept_logits) const;

  InputScaler scaler;

 private:
  TransformerConfig config_;
  ModelMode mode_;

 public:
  ad::Param pos_emb;
  std::vector<TransformerBlock> blocks;
  ad::Param head_w, head_b;          // plain head
  ad::Param concept_w, concept_b;    // cbm: flattened state -> concepts
  std::vector<ad::Param> mlp_w;      // cbm head g: 3 hidden layers + output
  std::vector<ad::Param> mlp_b;
};

struct ConceptIntervention {
  // Override concept logit k to a fixed value.
  std::vector<std::pair<int, float>> overrides;
  // Zero out concept activations (multiplying by 0) to emulate removing the
  // coefficient of that concept in the head.
  std::vector<int> masked;
};

class TrainedTransformer {
 public:
  TrainedTransformer(Transformer model, std::vector<EpochLog> log);

  const Transformer& model() const { return model_; }
  Transformer& model() { return model_; }
  const std::vector<EpochLog>& log() const { return log_; }
  const TransformerConfig& config() const { return model_.config(); }
  ModelMode mode() const { return model_.mode(); }

  // P(y = 1) over standardized inputs (n rows of T x E each, flattened).
  void predict_proba(const float* x_std, int n, double* out) const;
  double predict_one(const float* x_std) const;

  // d P(y = target) / d x at a standardized input; grad_out has T*E entries.
  void grad_prob(const float* x_std, int target, float* grad_out) const;

  // Concept logits for one standardized sample (cbm mode).
  std::vector<double> concept_logits(const float* x_std) const;

  // Class logit after replacing/masking concept coordinates (cbm mode).
  double intervened_class_logit(const float* x_std,
                                const ConceptIntervention& iv) const;
  // Class logit from explicit concept logits, bypassing the backbone.
  double class_logit_from_concepts(const std::vector<float>& concepts) const;

  // Hidden states of one block for a set of standardized samples; layer -1
  // means the last block. Rows are (n * T) x E.
  ad::Tensor hidden_states(const float* x_std, int n, int layer) const;

 private:
  mutable Transformer model_;
  std::vector<EpochLog> log_;
};

struct TrainOptions {
  // Abort with a diagnostic when the loss goes non-finite.
  bool verbose = false;
};

// Joint training loop: Adam, seeded shuffles, fixed epoch count. cbm mode adds
// the coordinatewise concept loss weighted against the label loss.
TrainedTransformer train(ModelMode mode, const sim::SubjectDataset& ds,
                         const TransformerConfig& cfg,
                         const TrainOptions& opts = {});

}  // namespace glassbox::nn
