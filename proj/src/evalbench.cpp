#include "glassbox/evalbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "glassbox/decision_tree.hpp"
#include "glassbox/model_bridge.hpp"
#include "glassbox/rng.hpp"
#include "glassbox/sparse_logistic.hpp"

namespace glassbox::evalbench {

namespace {

double accuracy(const std::vector<double>& probs,
                const std::vector<std::uint8_t>& y) {
  int correct = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    correct += (probs[i] > 0.5 ? 1 : 0) == y[i];
  }
  return static_cast<double>(correct) / probs.size();
}

struct SplitData {
  feat::FeatureMatrix train;
  feat::FeatureMatrix val;
  std::vector<std::uint8_t> y_train;
  std::vector<std::uint8_t> y_val;
};

SplitData split_features(const feat::FeatureMatrix& fm,
                         const sim::SubjectDataset& ds) {
  SplitData out;
  const auto tr = ds.train_indices();
  const auto va = ds.val_indices();
  out.train = feat::take_rows(fm, tr);
  out.val = feat::take_rows(fm, va);
  for (int i : tr) out.y_train.push_back(ds.y[i]);
  for (int i : va) out.y_val.push_back(ds.y[i]);
  return out;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string hash_of_config(const store::json& j) {
  const std::string s = j.dump();
  return store::sha256_bytes(s.data(), s.size()).substr(0, 16);
}

}  // namespace

EvalReport run_table1(const Table1Config& cfg) {
  EvalReport report;
  for (int n : cfg.n_list) {
    sim::SimConfig sim_cfg;
    sim_cfg.n_subjects = n;
    sim_cfg.seed = cfg.seed;
    const sim::Generated g = sim::generate(sim_cfg);
    const sim::SubjectDataset& ds = g.dataset;

    // Representations are built once per dataset.
    feat::FeatureMatrix raw_std = feat::concat_raw(ds);
    feat::standardize(raw_std, ds.train_indices());
    const feat::FeatureMatrix raw_plain = feat::concat_raw(ds);
    const feat::FeatureMatrix feat_std = feat::summarize(ds, true);
    const feat::FeatureMatrix feat_plain = feat::summarize(ds, false);

    auto add_row = [&](const std::string& rep, const std::string& model,
                       auto&& body) {
      Table1Row row;
      row.representation = rep;
      row.model = model;
      row.n_subjects = n;
      row.seed = cfg.seed;
      store::json cj{{"model", model}, {"representation", rep}, {"n", n},
                     {"seed", cfg.seed}};
      row.config_hash = hash_of_config(cj);
      try {
        body(row);
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      report.rows.push_back(std::move(row));
    };

    for (const std::string& model : cfg.models) {
      if (model == "majority") {
        add_row("-", "majority", [&](Table1Row& row) {
          const auto tr = ds.train_indices();
          const auto va = ds.val_indices();
          double mean = 0.0;
          for (int i : tr) mean += ds.y[i];
          mean /= tr.size();
          const int pred = mean > 0.5 ? 1 : 0;
          int cin = 0, cout = 0;
          for (int i : tr) cin += ds.y[i] == pred;
          for (int i : va) cout += ds.y[i] == pred;
          row.in_sample_accuracy = static_cast<double>(cin) / tr.size();
          row.out_sample_accuracy = static_cast<double>(cout) / va.size();
        });
        continue;
      }
      for (const std::string& rep : cfg.representations) {
        if ((model == "transformer" || model == "cbm") && rep != "raw") {
          continue;  // sequence models consume raw trajectories only
        }
        if (model == "sparse_logistic") {
          const feat::FeatureMatrix& fm = rep == "raw" ? raw_std : feat_std;
          add_row(rep, model, [&](Table1Row& row) {
            SplitData sd = split_features(fm, ds);
            const auto t0 = Clock::now();
            const auto fit = model::cv_lambda_path(sd.train, sd.y_train);
            row.train_seconds = seconds_since(t0);
            std::vector<double> pin(sd.train.n_rows), pout(sd.val.n_rows);
            fit.predict_proba(sd.train.values.data(), sd.train.n_rows,
                              sd.train.n_cols, pin.data());
            fit.predict_proba(sd.val.values.data(), sd.val.n_rows,
                              sd.val.n_cols, pout.data());
            row.in_sample_accuracy = accuracy(pin, sd.y_train);
            row.out_sample_accuracy = accuracy(pout, sd.y_val);
            row.n_active = fit.n_active();
          });
        } else if (model == "decision_tree") {
          const feat::FeatureMatrix& fm = rep == "raw" ? raw_plain : feat_plain;
          add_row(rep, model, [&](Table1Row& row) {
            SplitData sd = split_features(fm, ds);
            const auto t0 = Clock::now();
            const auto fit = model::fit_tree(sd.train, sd.y_train);
            row.train_seconds = seconds_since(t0);
            std::vector<double> pin(sd.train.n_rows), pout(sd.val.n_rows);
            fit.predict_proba(sd.train.values.data(), sd.train.n_rows,
                              sd.train.n_cols, pin.data());
            fit.predict_proba(sd.val.values.data(), sd.val.n_rows,
                              sd.val.n_cols, pout.data());
            row.in_sample_accuracy = accuracy(pin, sd.y_train);
            row.out_sample_accuracy = accuracy(pout, sd.y_val);
            row.n_active = fit.n_splits();
          });
        } else if (model == "transformer" || model == "cbm") {
          add_row(rep, model, [&](Table1Row& row) {
            nn::TransformerConfig tc = cfg.transformer;
            tc.seed = cfg.seed;
            const auto t0 = Clock::now();
            const auto trained = nn::train(model == "cbm" ? nn::ModelMode::cbm
                                                          : nn::ModelMode::plain,
                                           ds, tc);
            row.train_seconds = seconds_since(t0);
            const auto tr = ds.train_indices();
            const auto va = ds.val_indices();
            const ad::Tensor xin = trained.model().scaler.standardize_batch(ds, tr);
            const ad::Tensor xva = trained.model().scaler.standardize_batch(ds, va);
            std::vector<double> pin(tr.size()), pout(va.size());
            trained.predict_proba(xin.data.data(), static_cast<int>(tr.size()),
                                  pin.data());
            trained.predict_proba(xva.data.data(), static_cast<int>(va.size()),
                                  pout.data());
            std::vector<std::uint8_t> ytr, yva;
            for (int i : tr) ytr.push_back(ds.y[i]);
            for (int i : va) yva.push_back(ds.y[i]);
            row.in_sample_accuracy = accuracy(pin, ytr);
            row.out_sample_accuracy = accuracy(pout, yva);
          });
        } else {
          add_row(rep, model, [&](Table1Row&) {
            throw std::invalid_argument(
                "unknown model '" + model +
                "' (available: majority, sparse_logistic, decision_tree, "
                "transformer, cbm)");
          });
        }
      }
    }
  }
  return report;
}

std::string render_table(const EvalReport& report) {
  std::ostringstream os;
  os << "Data        Model            Samples (x1000)  In-Sample  Out-of-Sample"
        "  Train (s)  Active\n";
  os << "-------------------------------------------------------------------"
        "---------------\n";
  char buf[256];
  for (const auto& r : report.rows) {
    if (!r.error.empty()) {
      std::snprintf(buf, sizeof buf, "%-11s %-16s %9.1f  ERROR: %s\n",
                    r.representation.c_str(), r.model.c_str(),
                    r.n_subjects / 1000.0, r.error.c_str());
      os << buf;
      continue;
    }
    std::snprintf(buf, sizeof buf,
                  "%-11s %-16s %15.1f  %8.1f%%  %12.1f%%  %9.2f  %6s\n",
                  r.representation.c_str(), r.model.c_str(),
                  r.n_subjects / 1000.0, 100.0 * r.in_sample_accuracy,
                  100.0 * r.out_sample_accuracy, r.train_seconds,
                  r.n_active >= 0 ? std::to_string(r.n_active).c_str() : "-");
    os << buf;
  }
  return os.str();
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "representation,model,n,in_sample_accuracy,out_sample_accuracy,"
        "train_seconds,n_active,seed,config_hash,error\n";
  char buf[320];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%d,%.9g,%.9g,%.9g,%d,%llu,%s,%s\n",
                  r.representation.c_str(), r.model.c_str(), r.n_subjects,
                  r.in_sample_accuracy, r.out_sample_accuracy, r.train_seconds,
                  r.n_active,
                  static_cast<unsigned long long>(r.seed),
                  r.config_hash.c_str(), r.error.c_str());
    os << buf;
  }
  return os.str();
}

namespace {

// Apply a cell mask (T*D bytes) to every subject, replacing masked cells by
// the per-species mean over the training split.
sim::SubjectDataset masked_copy(const sim::SubjectDataset& ds,
                                const std::vector<std::uint8_t>& mask) {
  const int T = ds.n_timepoints(), D = ds.n_species();
  std::vector<double> mean(D, 0.0);
  const auto tr = ds.train_indices();
  for (int i : tr) {
    const float* xi = ds.sample(i);
    for (int t = 0; t < T; ++t) {
      for (int d = 0; d < D; ++d) mean[d] += xi[static_cast<std::size_t>(t) * D + d];
    }
  }
  for (double& m : mean) m /= static_cast<double>(tr.size()) * T;

  sim::SubjectDataset out = ds;
  for (int i = 0; i < ds.n_subjects(); ++i) {
    float* xi = out.x.data() + static_cast<std::size_t>(i) * T * D;
    for (std::size_t c = 0; c < mask.size(); ++c) {
      if (mask[c]) xi[c] = static_cast<float>(mean[c % D]);
    }
  }
  return out;
}

double val_accuracy_of(const nn::TrainedTransformer& t,
                       const sim::SubjectDataset& ds) {
  const auto va = ds.val_indices();
  const ad::Tensor xva = t.model().scaler.standardize_batch(ds, va);
  std::vector<double> probs(va.size());
  t.predict_proba(xva.data.data(), static_cast<int>(va.size()), probs.data());
  std::vector<std::uint8_t> yva;
  for (int i : va) yva.push_back(ds.y[i]);
  return accuracy(probs, yva);
}

}  // namespace

AblationRecord ablation_benchmark(const sim::SubjectDataset& ds,
                                  const AblationConfig& cfg) {
  if (!(cfg.q > 0.0 && cfg.q < 1.0)) {
    throw std::invalid_argument("ablation: q must lie in (0, 1)");
  }
  const int T = ds.n_timepoints(), D = ds.n_species();
  const std::size_t n_cells = static_cast<std::size_t>(T) * D;

  AblationRecord rec;
  rec.q = cfg.q;

  const auto base = nn::train(nn::ModelMode::plain, ds, cfg.transformer);
  rec.base_accuracy = val_accuracy_of(base, ds);

  // Aggregate |IG| over validation samples.
  explain::TransformerModel model(base);
  std::vector<double> importance(n_cells, 0.0);
  const auto va = ds.val_indices();
  const int n_attr = std::min<int>(cfg.n_attribution_samples,
                                   static_cast<int>(va.size()));
  std::vector<float> x_std(n_cells), baseline(n_cells, 0.0f);
  for (int s = 0; s < n_attr; ++s) {
    const int subject = va[s];
    base.model().scaler.apply(ds.sample(subject), T, D, x_std.data());
    const auto att = explain::integrated_gradients(
        model, x_std.data(), /*target=*/1, baseline.data(), cfg.ig_steps);
    for (std::size_t c = 0; c < n_cells; ++c) {
      importance[c] += std::abs(att.values[c]);
    }
  }

  const int n_mask = static_cast<int>(std::lround(cfg.q * n_cells));
  rec.n_masked_cells = n_mask;
  std::vector<std::size_t> order(n_cells);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return importance[a] > importance[b];
  });
  std::vector<std::uint8_t> guided_mask(n_cells, 0);
  for (int c = 0; c < n_mask; ++c) guided_mask[order[c]] = 1;

  Rng rng(cfg.mask_seed);
  std::vector<std::size_t> perm = rng.fork("random_mask").permutation(n_cells);
  std::vector<std::uint8_t> random_mask(n_cells, 0);
  for (int c = 0; c < n_mask; ++c) random_mask[perm[c]] = 1;
  rec.n_random_cells = n_mask;

  const sim::SubjectDataset guided_ds = masked_copy(ds, guided_mask);
  const auto guided = nn::train(nn::ModelMode::plain, guided_ds, cfg.transformer);
  rec.guided_accuracy = val_accuracy_of(guided, guided_ds);

  const sim::SubjectDataset random_ds = masked_copy(ds, random_mask);
  const auto random_model =
      nn::train(nn::ModelMode::plain, random_ds, cfg.transformer);
  rec.random_accuracy = val_accuracy_of(random_model, random_ds);

  rec.guided_drop = rec.base_accuracy - rec.guided_accuracy;
  rec.random_drop = rec.base_accuracy - rec.random_accuracy;
  rec.gap = rec.guided_drop - rec.random_drop;
  return rec;
}

TruthView TruthView::from(const sim::Generated& g) {
  TruthView v;
  v.n_timepoints = g.dataset.n_timepoints();
  v.n_species = g.dataset.n_species();
  v.n_communities = g.dataset.n_communities();
  v.bloom_window = g.dataset.config.tukey_window;
  v.concept_threshold = g.dataset.config.concept_threshold;
  v.theta = &g.dataset.theta;
  v.kinds = &g.dictionary.kinds;
  v.bloom_centers = &g.dictionary.bloom_centers;
  return v;
}

TruthView TruthView::from(const sim::SubjectDataset& ds,
                          const store::GroundTruth& truth) {
  TruthView v;
  v.n_timepoints = ds.n_timepoints();
  v.n_species = ds.n_species();
  v.n_communities = ds.n_communities();
  v.bloom_window = ds.config.tukey_window;
  v.concept_threshold = ds.config.concept_threshold;
  v.theta = &truth.theta;
  v.kinds = &truth.kinds;
  v.bloom_centers = &truth.bloom_centers;
  return v;
}

std::vector<std::uint8_t> truth_cells(const TruthView& truth, int subject) {
  const int T = truth.n_timepoints, D = truth.n_species, K = truth.n_communities;
  std::vector<std::uint8_t> cells(static_cast<std::size_t>(T) * D, 0);
  const int half = (truth.bloom_window - 1) / 2;
  for (int k = 0; k < K; ++k) {
    if ((*truth.theta)[static_cast<std::size_t>(subject) * K + k] <=
        truth.concept_threshold) {
      continue;
    }
    for (int d = 0; d < D; ++d) {
      const sim::Kind kind = (*truth.kinds)[static_cast<std::size_t>(k) * D + d];
      if (kind == sim::Kind::noise) continue;
      if (kind == sim::Kind::bloom) continue;  // bloom cells added below
      for (int t = 0; t < T; ++t) {
        cells[static_cast<std::size_t>(t) * D + d] = 1;
      }
    }
  }
  for (const auto& bc : *truth.bloom_centers) {
    if ((*truth.theta)[static_cast<std::size_t>(subject) * K + bc.community] <=
        truth.concept_threshold) {
      continue;
    }
    const int c0 = bc.time - 1;
    for (int m = -half; m <= half; ++m) {
      const int t = c0 + m;
      if (t >= 0 && t < T) {
        cells[static_cast<std::size_t>(t) * D + bc.species] = 1;
      }
    }
  }
  return cells;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw std::invalid_argument("spearman: need two equal-length vectors");
  }
  auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = (static_cast<double>(i) + j) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= ra.size();
  mb /= rb.size();
  double num = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - ma, db = rb[i] - mb;
    num += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va <= 0 || vb <= 0) return 0.0;
  return num / std::sqrt(va * vb);
}

FaithfulnessReport ground_truth_faithfulness(
    const std::vector<explain::Attribution>& attributions,
    const std::vector<explain::Attribution>& occlusions,
    const std::vector<int>& subjects, const TruthView& truth) {
  if (!truth.theta || !truth.kinds || !truth.bloom_centers) {
    throw std::invalid_argument("faithfulness: missing ground truth");
  }
  if (attributions.size() != subjects.size() ||
      occlusions.size() != subjects.size()) {
    throw std::invalid_argument("faithfulness: sample count mismatch");
  }
  FaithfulnessReport rep;
  double prec_sum = 0.0, rho_sum = 0.0;
  int scored = 0;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    const auto cells = truth_cells(truth, subjects[s]);
    const std::size_t n_cells = cells.size();
    std::size_t n_truth = 0;
    for (auto c : cells) n_truth += c;
    const auto& att = attributions[s];
    if (att.values.size() != n_cells) {
      throw std::invalid_argument("faithfulness: attribution shape mismatch");
    }
    if (n_truth == 0) continue;

    std::vector<std::size_t> order(n_cells);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) {
                       return std::abs(att.values[x]) > std::abs(att.values[y]);
                     });
    std::size_t hits = 0;
    for (std::size_t r = 0; r < n_truth; ++r) hits += cells[order[r]];
    prec_sum += static_cast<double>(hits) / n_truth;

    std::vector<double> av(att.values.begin(), att.values.end());
    std::vector<double> ov(occlusions[s].values.begin(),
                           occlusions[s].values.end());
    rho_sum += spearman(av, ov);
    scored += 1;
  }
  if (scored == 0) {
    rep.no_signal = true;
    return rep;
  }
  rep.n_samples = scored;
  rep.mean_precision_at_k = prec_sum / scored;
  rep.mean_rank_correlation = rho_sum / scored;
  return rep;
}

}  // namespace glassbox::evalbench
