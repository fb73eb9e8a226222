#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glassbox/featurize.hpp"

namespace glassbox::model {

struct TreeNode {
  int feature = -1;        // -1 marks a leaf
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  int count0 = 0;  // training class counts at this node
  int count1 = 0;

  bool is_leaf() const { return feature < 0; }
  double prob1() const {
    const int total = count0 + count1;
    return total > 0 ? static_cast<double>(count1) / total : 0.5;
  }
};

struct DecisionTreeFit {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int n_leaves = 0;
  double pruning_alpha = 0.0;
  std::vector<std::string> feature_names;

  double predict_one(const double* x, int p) const;
  void predict_proba(const double* X, int n, int p, double* out) const;
  int n_splits() const;
  int depth() const;
};

struct TreeOptions {
  int min_leaf = 5;
  double holdout_fraction = 0.25;
  bool use_gini = false;  // misclassification gain by default
  std::uint64_t seed = 0x7ee5eed;
};

// Greedy CART-style growth (ties to the smallest feature, then the smallest
// threshold) followed by weakest-link cost-complexity pruning with the alpha
// maximizing holdout accuracy (ties to fewer leaves).
DecisionTreeFit fit_tree(const double* X, const std::uint8_t* y, int n, int p,
                         const TreeOptions& opts = {});

DecisionTreeFit fit_tree(const feat::FeatureMatrix& fm,
                         const std::vector<std::uint8_t>& y,
                         const TreeOptions& opts = {});

}  // namespace glassbox::model
