#include "glassbox/decision_tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "glassbox/rng.hpp"

namespace glassbox::model {

namespace {

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = -1.0;
};

double impurity_counts(int c0, int c1, bool use_gini) {
  const int total = c0 + c1;
  if (total == 0) return 0.0;
  if (use_gini) {
    const double p = static_cast<double>(c1) / total;
    return 2.0 * p * (1.0 - p) * total;
  }
  return static_cast<double>(std::min(c0, c1));
}

// Best split at a node; gain is measured in impurity reduction (counts).
SplitChoice best_split(const double* X, const std::uint8_t* y, int p,
                       const std::vector<int>& idx, int min_leaf,
                       bool use_gini) {
  const int n = static_cast<int>(idx.size());
  int c0 = 0, c1 = 0;
  for (int i : idx) (y[i] ? c1 : c0) += 1;
  const double parent = impurity_counts(c0, c1, use_gini);

  SplitChoice best;
  std::vector<std::pair<double, int>> order(n);
  for (int d = 0; d < p; ++d) {
    for (int r = 0; r < n; ++r) {
      const int i = idx[r];
      order[r] = {X[static_cast<std::size_t>(i) * p + d], i};
    }
    std::sort(order.begin(), order.end());
    int l0 = 0, l1 = 0;
    for (int r = 0; r + 1 < n; ++r) {
      (y[order[r].second] ? l1 : l0) += 1;
      if (order[r].first == order[r + 1].first) continue;
      const int left = r + 1, right = n - left;
      if (left < min_leaf || right < min_leaf) continue;
      const double child = impurity_counts(l0, l1, use_gini) +
                           impurity_counts(c0 - l0, c1 - l1, use_gini);
      const double gain = parent - child;
      const double threshold = 0.5 * (order[r].first + order[r + 1].first);
      if (!best.found || gain > best.gain ||
          (gain == best.gain &&
           (d < best.feature ||
            (d == best.feature && threshold < best.threshold)))) {
        best.found = true;
        best.feature = d;
        best.threshold = threshold;
        best.gain = gain;
      }
    }
  }
  return best;
}

int grow(std::vector<TreeNode>& nodes, const double* X, const std::uint8_t* y,
         int p, std::vector<int> idx, const TreeOptions& opts) {
  TreeNode node;
  for (int i : idx) (y[i] ? node.count1 : node.count0) += 1;
  const int id = static_cast<int>(nodes.size());
  nodes.push_back(node);
  const bool pure = node.count0 == 0 || node.count1 == 0;
  if (pure || static_cast<int>(idx.size()) < 2 * opts.min_leaf) return id;

  const SplitChoice split =
      best_split(X, y, p, idx, opts.min_leaf, opts.use_gini);
  if (!split.found) return id;

  std::vector<int> left_idx, right_idx;
  for (int i : idx) {
    if (X[static_cast<std::size_t>(i) * p + split.feature] <= split.threshold) {
      left_idx.push_back(i);
    } else {
      right_idx.push_back(i);
    }
  }
  idx.clear();
  idx.shrink_to_fit();
  const int left = grow(nodes, X, y, p, std::move(left_idx), opts);
  const int right = grow(nodes, X, y, p, std::move(right_idx), opts);
  nodes[id].feature = split.feature;
  nodes[id].threshold = split.threshold;
  nodes[id].left = left;
  nodes[id].right = right;
  return id;
}

// A subtree is encoded as the set of node ids collapsed into leaves.
struct PruneInfo {
  std::vector<int> subtree_leaves;  // leaf count below each node
  std::vector<double> subtree_error;  // training misclassification below
  std::vector<double> node_error;     // misclassification if collapsed
};

PruneInfo analyze(const std::vector<TreeNode>& nodes,
                  const std::vector<std::uint8_t>& collapsed) {
  PruneInfo info;
  const int n = static_cast<int>(nodes.size());
  info.subtree_leaves.assign(n, 0);
  info.subtree_error.assign(n, 0.0);
  info.node_error.assign(n, 0.0);
  // nodes are stored preorder (children after parents), so a reverse sweep
  // visits children first.
  for (int id = n - 1; id >= 0; --id) {
    const TreeNode& nd = nodes[id];
    info.node_error[id] = std::min(nd.count0, nd.count1);
    if (nd.is_leaf() || collapsed[id]) {
      info.subtree_leaves[id] = 1;
      info.subtree_error[id] = info.node_error[id];
    } else {
      info.subtree_leaves[id] =
          info.subtree_leaves[nd.left] + info.subtree_leaves[nd.right];
      info.subtree_error[id] =
          info.subtree_error[nd.left] + info.subtree_error[nd.right];
    }
  }
  return info;
}

double predict_with(const std::vector<TreeNode>& nodes,
                    const std::vector<std::uint8_t>& collapsed, const double* x) {
  int id = 0;
  while (!nodes[id].is_leaf() && !collapsed[id]) {
    id = x[nodes[id].feature] <= nodes[id].threshold ? nodes[id].left
                                                     : nodes[id].right;
  }
  return nodes[id].prob1();
}

}  // namespace

double DecisionTreeFit::predict_one(const double* x, int p) const {
  if (!feature_names.empty() && p != static_cast<int>(feature_names.size())) {
    throw std::invalid_argument("tree predict: expected " +
                                std::to_string(feature_names.size()) +
                                " features, got " + std::to_string(p));
  }
  int id = 0;
  while (!nodes[id].is_leaf()) {
    id = x[nodes[id].feature] <= nodes[id].threshold ? nodes[id].left
                                                     : nodes[id].right;
  }
  return nodes[id].prob1();
}

void DecisionTreeFit::predict_proba(const double* X, int n, int p,
                                    double* out) const {
  for (int i = 0; i < n; ++i) {
    out[i] = predict_one(X + static_cast<std::size_t>(i) * p, p);
  }
}

int DecisionTreeFit::n_splits() const {
  int c = 0;
  for (const auto& nd : nodes) c += !nd.is_leaf();
  return c;
}

int DecisionTreeFit::depth() const {
  std::vector<int> depths(nodes.size(), 0);
  int best = 0;
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    best = std::max(best, depths[id]);
    if (!nodes[id].is_leaf()) {
      depths[nodes[id].left] = depths[id] + 1;
      depths[nodes[id].right] = depths[id] + 1;
    }
  }
  return best;
}

DecisionTreeFit fit_tree(const double* X, const std::uint8_t* y, int n, int p,
                         const TreeOptions& opts) {
  if (n < 10) throw std::invalid_argument("fit_tree: need at least 10 samples");
  // Carve the pruning holdout before growing.
  Rng rng(opts.seed);
  std::vector<std::size_t> perm = rng.fork("tree_holdout").permutation(n);
  const int n_hold = std::max(1, static_cast<int>(std::lround(opts.holdout_fraction * n)));
  std::vector<int> grow_idx, hold_idx;
  for (int r = 0; r < n; ++r) {
    (r < n_hold ? hold_idx : grow_idx).push_back(static_cast<int>(perm[r]));
  }

  DecisionTreeFit fit;
  grow(fit.nodes, X, y, p, grow_idx, opts);

  // Weakest-link pruning: walk the alpha sequence, scoring each nested
  // subtree on the holdout.
  std::vector<std::uint8_t> collapsed(fit.nodes.size(), 0);
  auto holdout_correct = [&](const std::vector<std::uint8_t>& col) {
    int correct = 0;
    for (int i : hold_idx) {
      const double prob = predict_with(fit.nodes, col, X + static_cast<std::size_t>(i) * p);
      correct += (prob > 0.5 ? 1 : 0) == y[i];
    }
    return correct;
  };

  int best_correct = holdout_correct(collapsed);
  PruneInfo info = analyze(fit.nodes, collapsed);
  int best_leaves = info.subtree_leaves[0];
  std::vector<std::uint8_t> best_collapsed = collapsed;
  double best_alpha = 0.0;

  while (true) {
    info = analyze(fit.nodes, collapsed);
    if (info.subtree_leaves[0] <= 1) break;
    // Weakest link: the internal node with the smallest per-leaf error gain.
    double alpha = std::numeric_limits<double>::infinity();
    int weakest = -1;
    for (std::size_t id = 0; id < fit.nodes.size(); ++id) {
      if (fit.nodes[id].is_leaf() || collapsed[id]) continue;
      if (info.subtree_leaves[id] <= 1) continue;
      const double g = (info.node_error[id] - info.subtree_error[id]) /
                       (info.subtree_leaves[id] - 1);
      if (g < alpha || (g == alpha && weakest >= 0 &&
                        static_cast<int>(id) > weakest)) {
        alpha = g;
        weakest = static_cast<int>(id);
      }
    }
    if (weakest < 0) break;
    collapsed[weakest] = 1;
    // Collapsing a node removes every decision below it.
    const int correct = holdout_correct(collapsed);
    const PruneInfo after = analyze(fit.nodes, collapsed);
    const int leaves = after.subtree_leaves[0];
    if (correct > best_correct ||
        (correct == best_correct && leaves < best_leaves)) {
      best_correct = correct;
      best_leaves = leaves;
      best_collapsed = collapsed;
      best_alpha = alpha;
    }
  }

  // Materialize the chosen subtree, rebuilt in preorder.
  std::vector<int> remap(fit.nodes.size(), -1);
  std::vector<TreeNode> out;
  std::vector<int> work = {0};
  while (!work.empty()) {
    const int old_id = work.back();
    work.pop_back();
    TreeNode nd = fit.nodes[old_id];
    if (best_collapsed[old_id]) {
      nd.feature = -1;
      nd.left = nd.right = -1;
    }
    const int new_id = static_cast<int>(out.size());
    remap[old_id] = new_id;
    out.push_back(nd);
    if (!nd.is_leaf()) {
      work.push_back(nd.right);
      work.push_back(nd.left);
    }
  }
  for (auto& nd : out) {
    if (!nd.is_leaf()) {
      nd.left = remap[nd.left];
      nd.right = remap[nd.right];
    }
  }
  fit.nodes = std::move(out);
  fit.pruning_alpha = best_alpha;
  fit.n_leaves = 0;
  for (const auto& nd : fit.nodes) fit.n_leaves += nd.is_leaf();
  return fit;
}

DecisionTreeFit fit_tree(const feat::FeatureMatrix& fm,
                         const std::vector<std::uint8_t>& y,
                         const TreeOptions& opts) {
  if (static_cast<int>(y.size()) != fm.n_rows) {
    throw std::invalid_argument("fit_tree: label count mismatch");
  }
  DecisionTreeFit fit =
      fit_tree(fm.values.data(), y.data(), fm.n_rows, fm.n_cols, opts);
  fit.feature_names = fm.feature_names;
  return fit;
}

}  // namespace glassbox::model
