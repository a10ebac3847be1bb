#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "deepboost/adaboost.hpp"  // FeatureMatrix, BoostError, split_midpoint
#include "deepboost/common.hpp"
#include "deepboost/neural.hpp"  // sigmoid

// Histogram-based gradient-boosted trees on a second-order logistic
// objective. One engine serves two growth policies: level-wise expands every
// frontier node per depth, leaf-wise always splits the highest-gain leaf.

namespace deepboost::boosting {

enum class Growth : std::uint8_t { Level = 0, Leaf = 1 };

struct GbdtParams {
  int trees = 100;
  double learning_rate = 0.1;
  int max_depth = 6;    // level growth only
  int max_leaves = 31;  // leaf growth only
  double lambda = 1.0;
  double gamma = 0.0;
  double min_child_weight = 1.0;
  Growth growth = Growth::Level;
  int max_bins = 255;
};

struct GradHess {
  double g = 0.0;
  double h = 0.0;
};

// p = sigmoid(f); g = p - y, h = p(1-p) for y in {0,1}.
inline GradHess logistic_grad_hess(double raw_score, int label01) {
  const double p = nn::sigmoid(raw_score);
  return {p - static_cast<double>(label01), p * (1.0 - p)};
}

// -------------------------------------------------------------------------
// Quantile binning
// -------------------------------------------------------------------------

// Per-feature strictly increasing cut points (at most k-1). Bin b holds the
// values v with cuts[b-1] < v <= cuts[b]; a split at cut index j sends
// v <= cuts[j] to the left child.
struct HistogramBinning {
  std::vector<std::vector<double>> cuts;

  std::size_t features() const { return cuts.size(); }
  int bin_count(std::size_t f) const { return static_cast<int>(cuts[f].size()) + 1; }
  int bin_of(std::size_t f, double v) const {
    const auto& c = cuts[f];
    return static_cast<int>(std::lower_bound(c.begin(), c.end(), v) - c.begin());
  }
};

// Equal-frequency cut points over the training values. Features with fewer
// than k distinct values keep one bin per distinct value, which makes the
// histogram search identical to an exhaustive pre-sorted one.
inline HistogramBinning build_binning(const FeatureMatrix& x, int k = 255) {
  if (x.rows == 0 || x.cols == 0)
    throw BoostError(BoostError::Kind::EmptyMatrix, "build_binning: empty feature matrix");
  if (k < 2) throw Error("build_binning: k must be >= 2");
  HistogramBinning binning;
  binning.cuts.resize(x.cols);
  std::vector<double> column(x.rows);
  for (std::size_t f = 0; f < x.cols; ++f) {
    for (std::size_t r = 0; r < x.rows; ++r) column[r] = x.at(r, f);
    std::sort(column.begin(), column.end());
    std::size_t distinct = 1;
    for (std::size_t r = 1; r < column.size(); ++r)
      if (column[r] != column[r - 1]) ++distinct;

    auto& cuts = binning.cuts[f];
    if (distinct <= static_cast<std::size_t>(k)) {
      for (std::size_t r = 1; r < column.size(); ++r)
        if (column[r] != column[r - 1]) cuts.push_back(split_midpoint(column[r - 1], column[r]));
    } else {
      const double n = static_cast<double>(column.size());
      for (int i = 1; i < k; ++i) {
        const auto r = static_cast<std::size_t>(n * i / k);
        if (r == 0 || r >= column.size()) continue;
        if (column[r] == column[r - 1]) continue;
        const double cut = split_midpoint(column[r - 1], column[r]);
        if (cuts.empty() || cut > cuts.back()) cuts.push_back(cut);
      }
    }
  }
  return binning;
}

// -------------------------------------------------------------------------
// Split search
// -------------------------------------------------------------------------

struct BinSplit {
  int bin = -1;  // left child takes bins [0, bin]
  double gain = 0.0;
};

// Regularized second-order gain over the cuts of one feature histogram:
//   gain = 0.5*(GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda)) - gamma.
// Both children must carry at least min_child_weight hessian. Returns the
// highest strictly-positive gain, ties keeping the lowest cut, or nullopt.
inline std::optional<BinSplit> best_split(const std::vector<double>& grad_hist,
                                          const std::vector<double>& hess_hist, double lambda,
                                          double gamma, double min_child_weight) {
  if (grad_hist.size() != hess_hist.size() || grad_hist.empty())
    throw Error("best_split: malformed histogram");
  double total_g = 0.0, total_h = 0.0;
  for (std::size_t b = 0; b < grad_hist.size(); ++b) {
    total_g += grad_hist[b];
    total_h += hess_hist[b];
  }
  const double parent = total_g * total_g / (total_h + lambda);
  BinSplit best;
  bool found = false;
  double left_g = 0.0, left_h = 0.0;
  for (std::size_t b = 0; b + 1 < grad_hist.size(); ++b) {
    left_g += grad_hist[b];
    left_h += hess_hist[b];
    const double right_g = total_g - left_g;
    const double right_h = total_h - left_h;
    if (left_h < min_child_weight || right_h < min_child_weight) continue;
    const double gain = 0.5 * (left_g * left_g / (left_h + lambda) +
                               right_g * right_g / (right_h + lambda) - parent) -
                        gamma;
    if (!found || gain > best.gain) {
      best.bin = static_cast<int>(b);
      best.gain = gain;
      found = true;
    }
  }
  if (!found || best.gain <= 0.0) return std::nullopt;
  return best;
}

// -------------------------------------------------------------------------
// Trees
// -------------------------------------------------------------------------

// Internal nodes carry (feature, cut bin, value-space threshold); leaves
// carry the response. feature < 0 marks a leaf.
struct TreeNode {
  int feature = -1;
  int cut_bin = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double leaf_value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict_raw(const double* x) const {
    int i = 0;
    while (!nodes[i].is_leaf()) i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left
                                                                              : nodes[i].right;
    return nodes[i].leaf_value;
  }
};

struct GbdtModel {
  GbdtParams params;
  double base_score = 0.0;
  HistogramBinning binning;
  std::vector<Tree> trees;
};

using GbdtObserver = std::function<void(int round, double train_logloss)>;

namespace detail {

struct NodeSplit {
  bool found = false;
  int feature = -1;
  int bin = -1;
  double gain = 0.0;
};

struct BuildNode {
  std::vector<std::uint32_t> samples;
  double sum_g = 0.0, sum_h = 0.0;
  int depth = 0;
  int tree_node = -1;
  NodeSplit split;
};

// Histogram scan over every feature; ties in gain keep the lowest feature
// index, then the lowest bin (handled inside best_split).
inline NodeSplit find_best_split(const BuildNode& node, const std::vector<std::uint16_t>& binned,
                                 std::size_t n_features, const HistogramBinning& binning,
                                 const std::vector<GradHess>& gh, const GbdtParams& p) {
  NodeSplit best;
  std::vector<double> grad_hist, hess_hist;
  for (std::size_t f = 0; f < n_features; ++f) {
    const int bins = binning.bin_count(f);
    grad_hist.assign(static_cast<std::size_t>(bins), 0.0);
    hess_hist.assign(static_cast<std::size_t>(bins), 0.0);
    for (std::uint32_t i : node.samples) {
      const std::uint16_t b = binned[static_cast<std::size_t>(i) * n_features + f];
      grad_hist[b] += gh[i].g;
      hess_hist[b] += gh[i].h;
    }
    const auto split = best_split(grad_hist, hess_hist, p.lambda, p.gamma, p.min_child_weight);
    if (split && (!best.found || split->gain > best.gain)) {
      best.found = true;
      best.feature = static_cast<int>(f);
      best.bin = split->bin;
      best.gain = split->gain;
    }
  }
  return best;
}

inline void make_leaf(Tree& tree, BuildNode& node, double lambda) {
  tree.nodes[static_cast<std::size_t>(node.tree_node)].leaf_value =
      -node.sum_g / (node.sum_h + lambda);
}

// Applies the chosen split: fills in the parent node, partitions samples
// stably and returns the two children (split fields unset).
inline std::pair<BuildNode, BuildNode> apply_split(Tree& tree, BuildNode& node,
                                                   const std::vector<std::uint16_t>& binned,
                                                   std::size_t n_features,
                                                   const HistogramBinning& binning,
                                                   const std::vector<GradHess>& gh) {
  const int left_index = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  tree.nodes.emplace_back();
  TreeNode& tn = tree.nodes[static_cast<std::size_t>(node.tree_node)];
  tn.feature = node.split.feature;
  tn.cut_bin = node.split.bin;
  tn.threshold = binning.cuts[static_cast<std::size_t>(node.split.feature)]
                             [static_cast<std::size_t>(node.split.bin)];
  tn.left = left_index;
  tn.right = left_index + 1;

  BuildNode left, right;
  left.depth = right.depth = node.depth + 1;
  left.tree_node = tn.left;
  right.tree_node = tn.right;
  for (std::uint32_t i : node.samples) {
    const std::uint16_t b =
        binned[static_cast<std::size_t>(i) * n_features + static_cast<std::size_t>(tn.feature)];
    BuildNode& child = b <= node.split.bin ? left : right;
    child.samples.push_back(i);
    child.sum_g += gh[i].g;
    child.sum_h += gh[i].h;
  }
  node.samples.clear();
  node.samples.shrink_to_fit();
  return {std::move(left), std::move(right)};
}

inline Tree build_tree(const std::vector<std::uint16_t>& binned, std::size_t n_samples,
                       std::size_t n_features, const HistogramBinning& binning,
                       const std::vector<GradHess>& gh, const GbdtParams& p) {
  Tree tree;
  tree.nodes.emplace_back();
  BuildNode root;
  root.samples.resize(n_samples);
  std::iota(root.samples.begin(), root.samples.end(), 0u);
  for (std::uint32_t i : root.samples) {
    root.sum_g += gh[i].g;
    root.sum_h += gh[i].h;
  }
  root.tree_node = 0;

  if (p.growth == Growth::Level) {
    std::vector<BuildNode> frontier;
    frontier.push_back(std::move(root));
    while (!frontier.empty()) {
      std::vector<BuildNode> next;
      for (BuildNode& node : frontier) {
        if (node.depth >= p.max_depth) {
          make_leaf(tree, node, p.lambda);
          continue;
        }
        node.split = find_best_split(node, binned, n_features, binning, gh, p);
        if (!node.split.found) {
          make_leaf(tree, node, p.lambda);
          continue;
        }
        auto [left, right] = apply_split(tree, node, binned, n_features, binning, gh);
        next.push_back(std::move(left));
        next.push_back(std::move(right));
      }
      frontier = std::move(next);
    }
  } else {
    // leaf-wise: keep every open leaf's best split; always expand the
    // highest gain (ties to the earliest-created leaf).
    std::vector<BuildNode> open;
    root.split = find_best_split(root, binned, n_features, binning, gh, p);
    open.push_back(std::move(root));
    int leaves = 1;
    while (leaves < p.max_leaves) {
      int pick = -1;
      for (std::size_t i = 0; i < open.size(); ++i)
        if (open[i].split.found && (pick < 0 || open[i].split.gain > open[static_cast<std::size_t>(pick)].split.gain))
          pick = static_cast<int>(i);
      if (pick < 0) break;
      BuildNode node = std::move(open[static_cast<std::size_t>(pick)]);
      open.erase(open.begin() + pick);
      auto [left, right] = apply_split(tree, node, binned, n_features, binning, gh);
      left.split = find_best_split(left, binned, n_features, binning, gh, p);
      right.split = find_best_split(right, binned, n_features, binning, gh, p);
      open.push_back(std::move(left));
      open.push_back(std::move(right));
      ++leaves;
    }
    for (BuildNode& node : open) make_leaf(tree, node, p.lambda);
  }
  return tree;
}

}  // namespace detail

// Boosted training on {0,1} labels. base_score is the log-odds of the
// positive prevalence; each round fits one tree to the current (g, h) pairs
// through the shared quantile histograms and advances every score by
// learning_rate * leaf value.
inline GbdtModel gbdt_train(const FeatureMatrix& x, const std::vector<int>& y01,
                            const GbdtParams& params, const GbdtObserver& observer = {}) {
  if (x.rows == 0 || x.cols == 0)
    throw BoostError(BoostError::Kind::EmptyMatrix, "gbdt_train: empty feature matrix");
  if (y01.size() != x.rows) throw Error("gbdt_train: label count mismatch");
  std::size_t positives = 0;
  for (int v : y01) positives += v ? 1 : 0;
  if (positives == 0 || positives == x.rows)
    throw BoostError(BoostError::Kind::SingleClassInput,
                     "gbdt_train: both classes required in the training set");

  GbdtModel model;
  model.params = params;
  model.binning = build_binning(x, params.max_bins);
  const double prevalence = static_cast<double>(positives) / static_cast<double>(x.rows);
  model.base_score = std::log(prevalence / (1.0 - prevalence));

  // bin the training matrix once
  std::vector<std::uint16_t> binned(x.rows * x.cols);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t f = 0; f < x.cols; ++f)
      binned[r * x.cols + f] = static_cast<std::uint16_t>(model.binning.bin_of(f, x.at(r, f)));

  std::vector<double> scores(x.rows, model.base_score);
  std::vector<GradHess> gh(x.rows);
  for (int round = 0; round < params.trees; ++round) {
    for (std::size_t i = 0; i < x.rows; ++i) gh[i] = logistic_grad_hess(scores[i], y01[i]);
    Tree tree = detail::build_tree(binned, x.rows, x.cols, model.binning, gh, params);
    for (std::size_t i = 0; i < x.rows; ++i) {
      // walk by bins so training-time routing matches the stored thresholds
      int n = 0;
      while (!tree.nodes[static_cast<std::size_t>(n)].is_leaf()) {
        const TreeNode& tn = tree.nodes[static_cast<std::size_t>(n)];
        const std::uint16_t b =
            binned[i * x.cols + static_cast<std::size_t>(tn.feature)];
        n = b <= tn.cut_bin ? tn.left : tn.right;
      }
      scores[i] += params.learning_rate * tree.nodes[static_cast<std::size_t>(n)].leaf_value;
      if (!std::isfinite(scores[i]))
        throw BoostError(BoostError::Kind::NonFiniteScore,
                         "gbdt_train: non-finite score at round " + std::to_string(round + 1));
    }
    model.trees.push_back(std::move(tree));
    if (observer) {
      double logloss = 0.0;
      for (std::size_t i = 0; i < x.rows; ++i) {
        const double p = std::clamp(nn::sigmoid(scores[i]), 1e-12, 1.0 - 1e-12);
        logloss -= y01[i] ? std::log(p) : std::log(1.0 - p);
      }
      observer(round + 1, logloss / static_cast<double>(x.rows));
    }
  }
  return model;
}

struct GbdtPrediction {
  double probability = 0.5;
  int label = 0;  // 1 when probability >= 0.5
};

inline GbdtPrediction gbdt_predict(const GbdtModel& model, const double* x) {
  double raw = model.base_score;
  for (const Tree& tree : model.trees) raw += model.params.learning_rate * tree.predict_raw(x);
  GbdtPrediction p;
  p.probability = nn::sigmoid(raw);
  p.label = p.probability >= 0.5 ? 1 : 0;
  return p;
}

}  // namespace deepboost::boosting
