#pragma once

// Adapters binding the fitted models to the explain-side contracts.

#include "glassbox/decision_tree.hpp"
#include "glassbox/explain.hpp"
#include "glassbox/sparse_logistic.hpp"
#include "glassbox/transformer.hpp"

namespace glassbox::explain {

class SparseLogisticModel : public ProbModel {
 public:
  explicit SparseLogisticModel(const model::SparseLogisticFit& fit) : fit_(fit) {}
  int input_dim() const override { return static_cast<int>(fit_.beta.size()); }
  void predict(const double* X, int n, double* out) const override {
    fit_.predict_proba(X, n, input_dim(), out);
  }

 private:
  const model::SparseLogisticFit& fit_;
};

class DecisionTreeModel : public ProbModel {
 public:
  DecisionTreeModel(const model::DecisionTreeFit& fit, int input_dim)
      : fit_(fit), input_dim_(input_dim) {}
  int input_dim() const override { return input_dim_; }
  void predict(const double* X, int n, double* out) const override {
    fit_.predict_proba(X, n, input_dim_, out);
  }

 private:
  const model::DecisionTreeFit& fit_;
  int input_dim_;
};

class TransformerModel : public TrajectoryModel {
 public:
  explicit TransformerModel(const nn::TrainedTransformer& t) : t_(t) {}
  int n_timepoints() const override { return t_.config().n_positions; }
  int n_species() const override { return t_.config().n_embd; }
  double prob(const float* x, int target) const override {
    const double p1 = t_.predict_one(x);
    return target == 1 ? p1 : 1.0 - p1;
  }
  void grad(const float* x, int target, float* out) const override {
    t_.grad_prob(x, target, out);
  }

 private:
  const nn::TrainedTransformer& t_;
};

}  // namespace glassbox::explain
