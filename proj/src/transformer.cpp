#include "glassbox/transformer.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace glassbox::nn {

using ad::Param;
using ad::Tape;
using ad::Tensor;
using ad::Var;

void TransformerConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw std::invalid_argument("transformer config: " + msg);
  };
  if (n_embd <= 0 || n_positions <= 0 || n_layer <= 0 || n_head <= 0) {
    fail("dimensions must be positive");
  }
  if (n_embd % n_head != 0) fail("n_embd must be divisible by n_head");
  if (n_class != 2) fail("only binary classification is supported");
  if (n_concept <= 0) fail("n_concept must be positive");
  if (epochs <= 0 || batch_size <= 0) fail("epochs and batch_size must be positive");
  if (!(lr >= 0.0f)) fail("lr must be nonnegative");
}

void InputScaler::fit(const sim::SubjectDataset& ds) {
  const int T = ds.n_timepoints(), D = ds.n_species();
  mean.assign(D, 0.0);
  stddev.assign(D, 0.0);
  const auto train = ds.train_indices();
  if (train.empty()) throw std::invalid_argument("input scaler: no training rows");
  const double cells = static_cast<double>(train.size()) * T;
  for (int i : train) {
    const float* xi = ds.sample(i);
    for (int t = 0; t < T; ++t) {
      for (int d = 0; d < D; ++d) mean[d] += xi[static_cast<std::size_t>(t) * D + d];
    }
  }
  for (int d = 0; d < D; ++d) mean[d] /= cells;
  for (int i : train) {
    const float* xi = ds.sample(i);
    for (int t = 0; t < T; ++t) {
      for (int d = 0; d < D; ++d) {
        const double v = xi[static_cast<std::size_t>(t) * D + d] - mean[d];
        stddev[d] += v * v;
      }
    }
  }
  for (int d = 0; d < D; ++d) {
    stddev[d] = std::sqrt(stddev[d] / cells);
    if (stddev[d] <= 1e-12) stddev[d] = 1.0;
  }
}

void InputScaler::apply(const float* x, int n_timepoints, int n_species,
                        float* out) const {
  if (static_cast<int>(mean.size()) != n_species) {
    throw std::invalid_argument("input scaler: species count mismatch");
  }
  for (int t = 0; t < n_timepoints; ++t) {
    for (int d = 0; d < n_species; ++d) {
      const std::size_t j = static_cast<std::size_t>(t) * n_species + d;
      out[j] = static_cast<float>((x[j] - mean[d]) / stddev[d]);
    }
  }
}

Tensor InputScaler::standardize_batch(const sim::SubjectDataset& ds,
                                      const std::vector<int>& subjects) const {
  const int T = ds.n_timepoints(), D = ds.n_species();
  Tensor out({static_cast<int>(subjects.size()) * T, D});
  for (std::size_t r = 0; r < subjects.size(); ++r) {
    apply(ds.sample(subjects[r]), T, D,
          out.data.data() + r * static_cast<std::size_t>(T) * D);
  }
  return out;
}

namespace {

Param make_param(const std::string& name, std::vector<int> shape) {
  return Param(name, Tensor(std::move(shape)));
}

}  // namespace

Transformer::Transformer(TransformerConfig cfg, ModelMode mode)
    : config_(cfg), mode_(mode) {
  cfg.validate();
  const int E = cfg.n_embd, H = 4 * cfg.n_embd, K = cfg.n_concept;
  pos_emb = make_param("pos_emb", {cfg.n_positions, E});
  blocks.resize(cfg.n_layer);
  for (int l = 0; l < cfg.n_layer; ++l) {
    const std::string p = "block" + std::to_string(l) + ".";
    TransformerBlock& b = blocks[l];
    b.ln1_gain = make_param(p + "ln1_gain", {1, E});
    b.ln1_bias = make_param(p + "ln1_bias", {1, E});
    b.ln2_gain = make_param(p + "ln2_gain", {1, E});
    b.ln2_bias = make_param(p + "ln2_bias", {1, E});
    b.wq = make_param(p + "wq", {E, E});
    b.wk = make_param(p + "wk", {E, E});
    b.wv = make_param(p + "wv", {E, E});
    b.wo = make_param(p + "wo", {E, E});
    b.bq = make_param(p + "bq", {1, E});
    b.bk = make_param(p + "bk", {1, E});
    b.bv = make_param(p + "bv", {1, E});
    b.bo = make_param(p + "bo", {1, E});
    b.fc1_w = make_param(p + "fc1_w", {E, H});
    b.fc1_b = make_param(p + "fc1_b", {1, H});
    b.fc2_w = make_param(p + "fc2_w", {H, E});
    b.fc2_b = make_param(p + "fc2_b", {1, E});
  }
  if (mode_ == ModelMode::plain) {
    head_w = make_param("head_w", {E, 1});
    head_b = make_param("head_b", {1, 1});
  } else {
    concept_w = make_param("concept_w", {cfg.n_positions * E, K});
    concept_b = make_param("concept_b", {1, K});
    for (int l = 0; l < 3; ++l) {
      mlp_w.push_back(make_param("g.mlp" + std::to_string(l) + "_w", {K, K}));
      mlp_b.push_back(make_param("g.mlp" + std::to_string(l) + "_b", {1, K}));
    }
    mlp_w.push_back(make_param("g.out_w", {K, 1}));
    mlp_b.push_back(make_param("g.out_b", {1, 1}));
  }
}

std::vector<Param*> Transformer::params() {
  std::vector<Param*> out = {&pos_emb};
  for (auto& b : blocks) {
    for (Param* p : {&b.ln1_gain, &b.ln1_bias, &b.ln2_gain, &b.ln2_bias, &b.wq,
                     &b.wk, &b.wv, &b.wo, &b.bq, &b.bk, &b.bv, &b.bo, &b.fc1_w,
                     &b.fc1_b, &b.fc2_w, &b.fc2_b}) {
      out.push_back(p);
    }
  }
  if (mode_ == ModelMode::plain) {
    out.push_back(&head_w);
    out.push_back(&head_b);
  } else {
    out.push_back(&concept_w);
    out.push_back(&concept_b);
    for (auto& p : mlp_w) out.push_back(&p);
    for (auto& p : mlp_b) out.push_back(&p);
  }
  return out;
}

std::vector<const Param*> Transformer::params() const {
  auto mutable_list = const_cast<Transformer*>(this)->params();
  return {mutable_list.begin(), mutable_list.end()};
}

void Transformer::init_weights(Rng& rng) {
  Rng wrng = rng.fork("weights");
  auto fill_normal = [&wrng](Param& p, double scale) {
    for (auto& v : p.value.data) {
      v = static_cast<float>(scale * wrng.normal());
    }
  };
  auto fill_const = [](Param& p, float c) {
    for (auto& v : p.value.data) v = c;
  };
  fill_normal(pos_emb, 0.02);
  for (auto& b : blocks) {
    fill_const(b.ln1_gain, 1.0f);
    fill_const(b.ln1_bias, 0.0f);
    fill_const(b.ln2_gain, 1.0f);
    fill_const(b.ln2_bias, 0.0f);
    for (Param* w : {&b.wq, &b.wk, &b.wv, &b.wo, &b.fc1_w, &b.fc2_w}) {
      fill_normal(*w, 0.02);
    }
    for (Param* bs : {&b.bq, &b.bk, &b.bv, &b.bo, &b.fc1_b, &b.fc2_b}) {
      fill_const(*bs, 0.0f);
    }
  }
  if (mode_ == ModelMode::plain) {
    fill_normal(head_w, 0.02);
    fill_const(head_b, 0.0f);
  } else {
    fill_normal(concept_w, 0.02);
    fill_const(concept_b, 0.0f);
    for (auto& w : mlp_w) fill_normal(w, 0.1);
    for (auto& bs : mlp_b) fill_const(bs, 0.0f);
  }
}

void Transformer::zero_grads() {
  for (Param* p : params()) p->zero_grad();
}

Var Transformer::build(Tape& tape, Var x, int batch, int n_timepoints,
                       Var* concepts, std::vector<Tensor>* block_states) const {
  const int T = n_timepoints, E = config_.n_embd, Dh = config_.head_dim();
  if (T > config_.n_positions) {
    throw std::invalid_argument("transformer: sequence length " +
                                std::to_string(T) + " exceeds n_positions " +
                                std::to_string(config_.n_positions));
  }
  if (tape.value(x).rows() != batch * T || tape.value(x).cols() != E) {
    throw std::invalid_argument("transformer: input shape mismatch " +
                                tape.value(x).shape_str());
  }
  auto* self = const_cast<Transformer*>(this);

  // Causal mask for one T x T score matrix: hide j > i.
  std::vector<std::uint8_t> causal(static_cast<std::size_t>(T) * T, 0);
  if (config_.causal_mask) {
    for (int i = 0; i < T; ++i) {
      for (int j = i + 1; j < T; ++j) causal[static_cast<std::size_t>(i) * T + j] = 1;
    }
  }

  Var pos_full = tape.param(self->pos_emb);
  Var pos = T == config_.n_positions ? pos_full : tape.slice_rows(pos_full, 0, T);
  Var h = tape.embedding_add(x, pos);

  const float inv_sqrt_dh = 1.0f / std::sqrt(static_cast<float>(Dh));
  for (int l = 0; l < config_.n_layer; ++l) {
    auto& b = self->blocks[l];
    Var ln1 = tape.layer_norm(h, tape.param(b.ln1_gain), tape.param(b.ln1_bias));
    Var q = tape.add_row(tape.matmul(ln1, tape.param(b.wq)), tape.param(b.bq));
    Var k = tape.add_row(tape.matmul(ln1, tape.param(b.wk)), tape.param(b.bk));
    Var v = tape.add_row(tape.matmul(ln1, tape.param(b.wv)), tape.param(b.bv));

    std::vector<Var> sample_outputs;
    sample_outputs.reserve(batch);
    for (int s = 0; s < batch; ++s) {
      Var qs = tape.slice_rows(q, s * T, (s + 1) * T);
      Var ks = tape.slice_rows(k, s * T, (s + 1) * T);
      Var vs = tape.slice_rows(v, s * T, (s + 1) * T);
      std::vector<Var> heads;
      heads.reserve(config_.n_head);
      for (int hh = 0; hh < config_.n_head; ++hh) {
        Var qh = tape.slice_cols(qs, hh * Dh, (hh + 1) * Dh);
        Var kh = tape.slice_cols(ks, hh * Dh, (hh + 1) * Dh);
        Var vh = tape.slice_cols(vs, hh * Dh, (hh + 1) * Dh);
        Var scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_sqrt_dh);
        if (config_.causal_mask) {
          scores = tape.masked_fill(scores, causal, -1e30f);
        }
        Var att = tape.softmax_rows(scores);
        heads.push_back(tape.matmul(att, vh));
      }
      sample_outputs.push_back(tape.concat_cols(heads));
    }
    Var attn = batch == 1 ? sample_outputs[0] : tape.concat_rows(sample_outputs);
    Var proj = tape.add_row(tape.matmul(attn, tape.param(b.wo)), tape.param(b.bo));
    h = tape.add(h, proj);

    Var ln2 = tape.layer_norm(h, tape.param(b.ln2_gain), tape.param(b.ln2_bias));
    Var mid = tape.relu(
        tape.add_row(tape.matmul(ln2, tape.param(b.fc1_w)), tape.param(b.fc1_b)));
    Var ff = tape.add_row(tape.matmul(mid, tape.param(b.fc2_w)), tape.param(b.fc2_b));
    h = tape.add(h, ff);
    if (block_states) block_states->push_back(tape.value(h));
  }

  if (mode_ == ModelMode::plain) {
    Var pooled = tape.mean_pool_rows(h, T);
    return tape.add_row(tape.matmul(pooled, tape.param(self->head_w)),
                        tape.param(self->head_b));
  }

  // Concept bottleneck: flatten each sample's T x E states to one row.
  if (T != config_.n_positions) {
    throw std::invalid_argument(
        "transformer: cbm head requires full-length sequences");
  }
  Var flat = tape.reshape(h, {batch, T * E});
  Var c = tape.add_row(tape.matmul(flat, tape.param(self->concept_w)),
                       tape.param(self->concept_b));
  if (concepts) *concepts = c;
  return build_head_from_concepts(tape, c);
}

Var Transformer::build_head_from_concepts(Tape& tape, Var concept_logits) const {
  if (mode_ != ModelMode::cbm) {
    throw std::logic_error("transformer: concept head requires cbm mode");
  }
  auto* self = const_cast<Transformer*>(this);
  Var h = concept_logits;
  for (int l = 0; l < 3; ++l) {
    h = tape.relu(tape.add_row(tape.matmul(h, tape.param(self->mlp_w[l])),
                               tape.param(self->mlp_b[l])));
  }
  return tape.add_row(tape.matmul(h, tape.param(self->mlp_w[3])),
                      tape.param(self->mlp_b[3]));
}

TrainedTransformer::TrainedTransformer(Transformer model,
                                       std::vector<EpochLog> log)
    : model_(std::move(model)), log_(std::move(log)) {}

void TrainedTransformer::predict_proba(const float* x_std, int n,
                                       double* out) const {
  const int T = model_.config().n_positions, E = model_.config().n_embd;
  for (int i = 0; i < n; ++i) {
    Tape tape;
    Tensor in({T, E});
    std::memcpy(in.data.data(), x_std + static_cast<std::size_t>(i) * T * E,
                in.data.size() * sizeof(float));
    Var x = tape.input(std::move(in), false);
    Var logit = model_.build(tape, x, 1, T);
    const double z = tape.value(logit).data[0];
    out[i] = 1.0 / (1.0 + std::exp(-z));
  }
}

double TrainedTransformer::predict_one(const float* x_std) const {
  double p = 0.0;
  predict_proba(x_std, 1, &p);
  return p;
}

void TrainedTransformer::grad_prob(const float* x_std, int target,
                                   float* grad_out) const {
  const int T = model_.config().n_positions, E = model_.config().n_embd;
  Tape tape;
  Tensor in({T, E});
  std::memcpy(in.data.data(), x_std, in.data.size() * sizeof(float));
  Var x = tape.input(std::move(in), true);
  Var logit = model_.build(tape, x, 1, T);
  Var prob = tape.sigmoid(logit);
  tape.backward(prob);
  const Tensor& g = tape.grad(x);
  const float sign = target == 1 ? 1.0f : -1.0f;  // P(y=0) = 1 - P(y=1)
  for (std::size_t j = 0; j < g.data.size(); ++j) grad_out[j] = sign * g.data[j];
}

std::vector<double> TrainedTransformer::concept_logits(const float* x_std) const {
  if (mode() != ModelMode::cbm) {
    throw std::logic_error("concept_logits: requires cbm mode");
  }
  const int T = model_.config().n_positions, E = model_.config().n_embd;
  Tape tape;
  Tensor in({T, E});
  std::memcpy(in.data.data(), x_std, in.data.size() * sizeof(float));
  Var x = tape.input(std::move(in), false);
  Var concepts;
  model_.build(tape, x, 1, T, &concepts);
  const Tensor& c = tape.value(concepts);
  return {c.data.begin(), c.data.end()};
}

double TrainedTransformer::class_logit_from_concepts(
    const std::vector<float>& concepts) const {
  if (mode() != ModelMode::cbm) {
    throw std::logic_error("class_logit_from_concepts: requires cbm mode");
  }
  Tape tape;
  Tensor c({1, static_cast<int>(concepts.size())});
  c.data = concepts;
  Var cv = tape.input(std::move(c), false);
  Var logit = model_.build_head_from_concepts(tape, cv);
  return tape.value(logit).data[0];
}

double TrainedTransformer::intervened_class_logit(
    const float* x_std, const ConceptIntervention& iv) const {
  std::vector<double> logits = concept_logits(x_std);
  const int K = model_.config().n_concept;
  std::vector<float> c(logits.begin(), logits.end());
  for (const auto& [k, value] : iv.overrides) {
    if (k < 0 || k >= K) {
      throw std::invalid_argument("intervention: concept index " +
                                  std::to_string(k) + " out of range");
    }
    c[k] = value;
  }
  for (int k : iv.masked) {
    if (k < 0 || k >= K) {
      throw std::invalid_argument("intervention: concept index " +
                                  std::to_string(k) + " out of range");
    }
    c[k] = 0.0f;
  }
  return class_logit_from_concepts(c);
}

ad::Tensor TrainedTransformer::hidden_states(const float* x_std, int n,
                                             int layer) const {
  const int T = model_.config().n_positions, E = model_.config().n_embd;
  const int n_layer = model_.config().n_layer;
  const int want = layer < 0 ? n_layer - 1 : layer;
  if (want >= n_layer) {
    throw std::invalid_argument("hidden_states: unknown layer " +
                                std::to_string(layer));
  }
  Tensor out({n * T, E});
  for (int i = 0; i < n; ++i) {
    Tape tape;
    Tensor in({T, E});
    std::memcpy(in.data.data(), x_std + static_cast<std::size_t>(i) * T * E,
                in.data.size() * sizeof(float));
    Var x = tape.input(std::move(in), false);
    std::vector<Tensor> states;
    model_.build(tape, x, 1, T, nullptr, &states);
    std::memcpy(out.data.data() + static_cast<std::size_t>(i) * T * E,
                states[want].data.data(), states[want].data.size() * sizeof(float));
  }
  return out;
}

namespace {

struct BatchMetrics {
  double loss_sum = 0.0;
  int correct = 0;
  int count = 0;
};

}  // namespace

TrainedTransformer train(ModelMode mode, const sim::SubjectDataset& ds,
                         const TransformerConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  const int T = ds.n_timepoints(), D = ds.n_species();
  if (D != cfg.n_embd) {
    throw std::invalid_argument("train: dataset species count " +
                                std::to_string(D) + " != n_embd " +
                                std::to_string(cfg.n_embd));
  }
  if (T != cfg.n_positions) {
    throw std::invalid_argument("train: dataset T " + std::to_string(T) +
                                " != n_positions " +
                                std::to_string(cfg.n_positions));
  }
  if (mode == ModelMode::cbm &&
      static_cast<int>(ds.config.n_communities) != cfg.n_concept) {
    throw std::invalid_argument("train: cbm needs n_concept == n_communities");
  }

  Transformer model(cfg, mode);
  Rng master(cfg.seed);
  model.init_weights(master);
  model.scaler.fit(ds);

  const auto train_idx = ds.train_indices();
  const auto val_idx = ds.val_indices();
  if (train_idx.empty() || val_idx.empty()) {
    throw std::invalid_argument("train: dataset needs a train/val split");
  }
  const Tensor train_x = model.scaler.standardize_batch(ds, train_idx);
  const Tensor val_x = model.scaler.standardize_batch(ds, val_idx);
  const int K = cfg.n_concept;

  auto batch_input = [&](const Tensor& all, const std::vector<int>& order,
                         int lo, int hi) {
    Tensor t({(hi - lo) * T, cfg.n_embd});
    for (int r = lo; r < hi; ++r) {
      std::memcpy(t.data.data() + static_cast<std::size_t>(r - lo) * T * cfg.n_embd,
                  all.data.data() + static_cast<std::size_t>(order[r]) * T * cfg.n_embd,
                  static_cast<std::size_t>(T) * cfg.n_embd * sizeof(float));
    }
    return t;
  };

  std::vector<Param*> params = model.params();
  std::vector<ad::AdamState> states(params.size());

  // Evaluate loss/accuracy over a standardized split without updating.
  auto evaluate = [&](const Tensor& xs, const std::vector<int>& subjects) {
    BatchMetrics m;
    const int n = static_cast<int>(subjects.size());
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int lo = 0; lo < n; lo += cfg.batch_size) {
      const int hi = std::min(n, lo + cfg.batch_size);
      Tape tape;
      Var x = tape.input(batch_input(xs, order, lo, hi), false);
      Var concepts;
      Var logits = model.build(tape, x, hi - lo, T,
                               mode == ModelMode::cbm ? &concepts : nullptr);
      Tensor ybatch({hi - lo, 1});
      for (int r = lo; r < hi; ++r) {
        ybatch.data[r - lo] = static_cast<float>(ds.y[subjects[r]]);
      }
      Var loss = tape.bce_with_logits(logits, ybatch);
      if (mode == ModelMode::cbm) {
        Tensor cbatch({hi - lo, K});
        for (int r = lo; r < hi; ++r) {
          for (int k = 0; k < K; ++k) {
            cbatch.data[static_cast<std::size_t>(r - lo) * K + k] = static_cast<float>(
                ds.concepts[static_cast<std::size_t>(subjects[r]) * K + k]);
          }
        }
        loss = tape.add(tape.bce_with_logits(concepts, cbatch),
                        tape.scale(loss, cfg.cbm_lambda));
      }
      m.loss_sum += static_cast<double>(tape.value(loss).data[0]) * (hi - lo);
      const Tensor& lg = tape.value(logits);
      for (int r = lo; r < hi; ++r) {
        const int pred = lg.data[r - lo] > 0.0f ? 1 : 0;
        m.correct += pred == ds.y[subjects[r]];
        m.count += 1;
      }
    }
    return m;
  };

  std::vector<EpochLog> log;
  const int n_train = static_cast<int>(train_idx.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng erng = master.fork("epoch" + std::to_string(epoch));
    std::vector<std::size_t> perm = erng.permutation(n_train);
    std::vector<int> order(perm.begin(), perm.end());

    BatchMetrics train_m;
    for (int lo = 0; lo < n_train; lo += cfg.batch_size) {
      const int hi = std::min(n_train, lo + cfg.batch_size);
      const int bs = hi - lo;
      Tape tape;
      Var x = tape.input(batch_input(train_x, order, lo, hi), false);
      Var concepts;
      Var logits = model.build(tape, x, bs, T,
                               mode == ModelMode::cbm ? &concepts : nullptr);
      std::vector<int> subjects(bs);
      for (int r = lo; r < hi; ++r) subjects[r - lo] = train_idx[order[r]];
      Tensor ybatch({bs, 1});
      for (int r = 0; r < bs; ++r) {
        ybatch.data[r] = static_cast<float>(ds.y[subjects[r]]);
      }
      Var label_loss = tape.bce_with_logits(logits, ybatch);
      Var loss = label_loss;
      if (mode == ModelMode::cbm) {
        Tensor cbatch({bs, K});
        for (int r = 0; r < bs; ++r) {
          for (int k = 0; k < K; ++k) {
            cbatch.data[static_cast<std::size_t>(r) * K + k] = static_cast<float>(
                ds.concepts[static_cast<std::size_t>(subjects[r]) * K + k]);
          }
        }
        loss = tape.add(tape.bce_with_logits(concepts, cbatch),
                        tape.scale(label_loss, cfg.cbm_lambda));
      }
      const double loss_value = tape.value(loss).data[0];
      if (!std::isfinite(loss_value)) {
        throw std::runtime_error("train: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(lo / cfg.batch_size));
      }
      train_m.loss_sum += loss_value * bs;
      const Tensor& lg = tape.value(logits);
      for (int r = 0; r < bs; ++r) {
        train_m.correct += (lg.data[r] > 0.0f ? 1 : 0) == ds.y[subjects[r]];
        train_m.count += 1;
      }

      model.zero_grads();
      tape.backward(loss);
      for (std::size_t pi = 0; pi < params.size(); ++pi) {
        ad::adam_step(params[pi]->value, params[pi]->grad, states[pi], cfg.lr);
      }
    }

    const BatchMetrics val_m = evaluate(val_x, val_idx);
    EpochLog entry;
    entry.epoch = epoch + 1;
    entry.train_loss = train_m.loss_sum / train_m.count;
    entry.train_accuracy = static_cast<double>(train_m.correct) / train_m.count;
    entry.val_loss = val_m.loss_sum / val_m.count;
    entry.val_accuracy = static_cast<double>(val_m.correct) / val_m.count;
    log.push_back(entry);
    if (opts.verbose) {
      std::fprintf(stderr,
                   "epoch %3d  train loss %.4f acc %.3f | val loss %.4f acc %.3f\n",
                   entry.epoch, entry.train_loss, entry.train_accuracy,
                   entry.val_loss, entry.val_accuracy);
    }
  }
  return TrainedTransformer(std::move(model), std::move(log));
}

}  // namespace glassbox::nn
