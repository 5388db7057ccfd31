#pragma once

// Gradient-boosted shallow regression trees over histogram-binned features.
// Two objectives: binary logistic (row classifiers) and multiclass softmax
// (learned consensus models). Training is exact-order deterministic: no row
// or feature subsampling, fixed iteration order, ties resolved to the first
// candidate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "sundew/domain.hpp"

namespace sundew::gbt {

struct TrainOptions {
  int rounds = 50;
  int max_depth = 3;
  double learning_rate = 0.1;
  double lambda = 1.0;             // L2 penalty on leaf weights
  double min_child_hessian = 1.0;  // minimum hessian mass per child
  int max_bins = 64;
  std::uint64_t seed = 0;  // reserved for sampling variants; training is exact

  void validate() const {
    if (rounds <= 0) throw std::invalid_argument("rounds must be positive");
    if (max_depth <= 0) throw std::invalid_argument("max_depth must be positive");
    if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be positive");
    if (max_bins < 2 || max_bins > 256) throw std::invalid_argument("max_bins must be in [2,256]");
  }
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf weight, learning rate already applied
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const {
    int i = 0;
    while (nodes[i].feature >= 0)
      i = x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold
              ? nodes[i].left
              : nodes[i].right;
    return nodes[i].value;
  }
};

inline nlohmann::json tree_to_json(const Tree& t) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const TreeNode& n : t.nodes)
    nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
  return nodes;
}

inline Tree tree_from_json(const nlohmann::json& j) {
  Tree t;
  for (const auto& n : j) {
    TreeNode node;
    node.feature = n.at(0).get<int>();
    node.threshold = n.at(1).get<double>();
    node.left = n.at(2).get<int>();
    node.right = n.at(3).get<int>();
    node.value = n.at(4).get<double>();
    t.nodes.push_back(node);
  }
  if (t.nodes.empty()) throw std::invalid_argument("tree without nodes");
  return t;
}

namespace detail {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Per-feature quantile bin edges. Bin b holds x <= edge[b]; the last bin is
// open-ended, so a split on "bin <= b" is exactly "x <= edge[b]".
class Binner {
 public:
  static Binner build(const Matrix& x, int max_bins) {
    Binner binner;
    binner.edges_.resize(x.cols);
    std::vector<double> column(x.rows);
    for (std::size_t f = 0; f < x.cols; ++f) {
      for (std::size_t r = 0; r < x.rows; ++r) column[r] = x.at(r, f);
      std::sort(column.begin(), column.end());
      std::vector<double>& edges = binner.edges_[f];
      for (int b = 1; b < max_bins; ++b) {
        std::size_t idx = (x.rows * static_cast<std::size_t>(b)) / static_cast<std::size_t>(max_bins);
        if (idx >= x.rows) break;
        double candidate = column[idx];
        if (edges.empty() || candidate > edges.back()) edges.push_back(candidate);
      }
      // Drop the top edge when it equals the column maximum; an empty last
      // bin would otherwise make the final split vacuous.
      while (!edges.empty() && edges.back() >= column.back()) edges.pop_back();
    }
    return binner;
  }

  int num_bins(std::size_t f) const { return static_cast<int>(edges_[f].size()) + 1; }

  std::uint8_t bin_of(std::size_t f, double v) const {
    const std::vector<double>& e = edges_[f];
    return static_cast<std::uint8_t>(
        std::lower_bound(e.begin(), e.end(), v) - e.begin());
  }

  double edge(std::size_t f, int b) const { return edges_[f][static_cast<std::size_t>(b)]; }

 private:
  std::vector<std::vector<double>> edges_;
};

struct BinnedMatrix {
  std::size_t rows = 0;
  std::vector<std::vector<std::uint8_t>> columns;  // [feature][row]

  static BinnedMatrix build(const Matrix& x, const Binner& binner) {
    BinnedMatrix b;
    b.rows = x.rows;
    b.columns.resize(x.cols);
    for (std::size_t f = 0; f < x.cols; ++f) {
      b.columns[f].resize(x.rows);
      for (std::size_t r = 0; r < x.rows; ++r)
        b.columns[f][r] = binner.bin_of(f, x.at(r, f));
    }
    return b;
  }
};

// Greedy histogram tree for a single gradient/hessian target. Also applies
// each leaf's value to `margins` for the rows that reached it, and folds
// split gains into `gain_by_feature`.
class TreeBuilder {
 public:
  TreeBuilder(const BinnedMatrix& data, const Binner& binner,
              const TrainOptions& opt, std::span<const double> gradients,
              std::span<const double> hessians)
      : data_(data), binner_(binner), opt_(opt), gradients_(gradients), hessians_(hessians) {}

  Tree build(std::vector<double>& margins, std::vector<double>& gain_by_feature) {
    Tree tree;
    std::vector<std::uint32_t> rows(data_.rows);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<std::uint32_t>(i);
    double g = 0.0, h = 0.0;
    for (std::uint32_t r : rows) {
      g += gradients_[r];
      h += hessians_[r];
    }
    grow(tree, std::move(rows), g, h, 0, margins, gain_by_feature);
    return tree;
  }

 private:
  struct Split {
    double gain = 0.0;
    std::size_t feature = 0;
    int bin = -1;
    double left_g = 0.0, left_h = 0.0;
  };

  int grow(Tree& tree, std::vector<std::uint32_t> rows, double g, double h,
           int depth, std::vector<double>& margins,
           std::vector<double>& gain_by_feature) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    Split split;
    if (depth < opt_.max_depth && rows.size() >= 2) split = find_split(rows, g, h);

    if (split.bin < 0) {
      const double value = -g / (h + opt_.lambda) * opt_.learning_rate;
      tree.nodes[index].value = value;
      for (std::uint32_t r : rows) margins[r] += value;
      return index;
    }

    gain_by_feature[split.feature] += split.gain;
    const std::vector<std::uint8_t>& column = data_.columns[split.feature];
    std::vector<std::uint32_t> left, right;
    left.reserve(rows.size());
    right.reserve(rows.size());
    for (std::uint32_t r : rows)
      (column[r] <= split.bin ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    tree.nodes[index].feature = static_cast<int>(split.feature);
    tree.nodes[index].threshold = binner_.edge(split.feature, split.bin);
    const int left_index = grow(tree, std::move(left), split.left_g, split.left_h,
                                depth + 1, margins, gain_by_feature);
    const int right_index = grow(tree, std::move(right), g - split.left_g,
                                 h - split.left_h, depth + 1, margins, gain_by_feature);
    tree.nodes[index].left = left_index;
    tree.nodes[index].right = right_index;
    return index;
  }

  Split find_split(const std::vector<std::uint32_t>& rows, double g, double h) const {
    Split best;
    const double parent_score = g * g / (h + opt_.lambda);
    std::vector<double> hist_g, hist_h;
    for (std::size_t f = 0; f < data_.columns.size(); ++f) {
      const int bins = binner_.num_bins(f);
      if (bins < 2) continue;
      hist_g.assign(static_cast<std::size_t>(bins), 0.0);
      hist_h.assign(static_cast<std::size_t>(bins), 0.0);
      const std::vector<std::uint8_t>& column = data_.columns[f];
      for (std::uint32_t r : rows) {
        hist_g[column[r]] += gradients_[r];
        hist_h[column[r]] += hessians_[r];
      }
      double gl = 0.0, hl = 0.0;
      for (int b = 0; b + 1 < bins; ++b) {
        gl += hist_g[static_cast<std::size_t>(b)];
        hl += hist_h[static_cast<std::size_t>(b)];
        const double gr = g - gl, hr = h - hl;
        if (hl < opt_.min_child_hessian || hr < opt_.min_child_hessian) continue;
        const double gain =
            gl * gl / (hl + opt_.lambda) + gr * gr / (hr + opt_.lambda) - parent_score;
        if (gain > best.gain + 1e-12) {
          best.gain = gain;
          best.feature = f;
          best.bin = b;
          best.left_g = gl;
          best.left_h = hl;
        }
      }
    }
    return best;
  }

  const BinnedMatrix& data_;
  const Binner& binner_;
  const TrainOptions& opt_;
  std::span<const double> gradients_;
  std::span<const double> hessians_;
};

}  // namespace detail

class BinaryGbt {
 public:
  static BinaryGbt train(const Matrix& x, const std::vector<int>& y, TrainOptions opt = {}) {
    opt.validate();
    if (x.rows == 0 || x.cols == 0) throw std::invalid_argument("empty training matrix");
    if (y.size() != x.rows) throw std::invalid_argument("label count mismatch");
    for (int v : y)
      if (v != 0 && v != 1) throw std::invalid_argument("binary labels must be 0/1");

    BinaryGbt model;
    model.num_features_ = x.cols;
    model.gain_importance_.assign(x.cols, 0.0);

    double mean = 0.0;
    for (int v : y) mean += v;
    mean = std::clamp(mean / static_cast<double>(y.size()), 1e-6, 1.0 - 1e-6);
    model.base_score_ = std::log(mean / (1.0 - mean));

    const detail::Binner binner = detail::Binner::build(x, opt.max_bins);
    const detail::BinnedMatrix binned = detail::BinnedMatrix::build(x, binner);

    std::vector<double> margins(x.rows, model.base_score_);
    std::vector<double> gradients(x.rows), hessians(x.rows);
    for (int round = 0; round < opt.rounds; ++round) {
      for (std::size_t i = 0; i < x.rows; ++i) {
        const double p = detail::sigmoid(margins[i]);
        gradients[i] = p - static_cast<double>(y[i]);
        hessians[i] = std::max(p * (1.0 - p), 1e-12);
      }
      detail::TreeBuilder builder(binned, binner, opt, gradients, hessians);
      model.trees_.push_back(builder.build(margins, model.gain_importance_));
    }
    return model;
  }

  double predict_margin(std::span<const double> x) const {
    check_width(x.size());
    double m = base_score_;
    for (const Tree& t : trees_) m += t.predict(x);
    return m;
  }

  double predict_probability(std::span<const double> x) const {
    return detail::sigmoid(predict_margin(x));
  }

  std::size_t num_features() const { return num_features_; }
  const std::vector<Tree>& trees() const { return trees_; }
  const std::vector<double>& gain_importance() const { return gain_importance_; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["objective"] = "binary_logistic";
    j["num_features"] = num_features_;
    j["base_score"] = base_score_;
    nlohmann::json trees = nlohmann::json::array();
    for (const Tree& t : trees_) trees.push_back(tree_to_json(t));
    j["trees"] = std::move(trees);
    return j;
  }

  static BinaryGbt from_json(const nlohmann::json& j) {
    if (j.at("objective") != "binary_logistic")
      throw std::invalid_argument("not a binary_logistic model");
    BinaryGbt model;
    model.num_features_ = j.at("num_features").get<std::size_t>();
    model.base_score_ = j.at("base_score").get<double>();
    for (const auto& t : j.at("trees")) model.trees_.push_back(tree_from_json(t));
    model.gain_importance_.assign(model.num_features_, 0.0);
    return model;
  }

 private:
  void check_width(std::size_t width) const {
    if (width != num_features_)
      throw std::invalid_argument("feature width does not match trained model");
  }

  std::size_t num_features_ = 0;
  double base_score_ = 0.0;
  std::vector<Tree> trees_;
  std::vector<double> gain_importance_;
};

// One-vs-rest softmax boosting: each round fits one tree per class to the
// softmax gradients. predict_probabilities returns a proper simplex.
class MulticlassGbt {
 public:
  static MulticlassGbt train(const Matrix& x, const std::vector<int>& y,
                             int num_classes, TrainOptions opt = {}) {
    opt.validate();
    if (x.rows == 0 || x.cols == 0) throw std::invalid_argument("empty training matrix");
    if (y.size() != x.rows) throw std::invalid_argument("label count mismatch");
    if (num_classes < 2) throw std::invalid_argument("need at least two classes");
    for (int v : y)
      if (v < 0 || v >= num_classes) throw std::invalid_argument("label out of range");

    MulticlassGbt model;
    model.num_features_ = x.cols;
    model.num_classes_ = num_classes;

    const detail::Binner binner = detail::Binner::build(x, opt.max_bins);
    const detail::BinnedMatrix binned = detail::BinnedMatrix::build(x, binner);

    const std::size_t n = x.rows;
    const std::size_t kc = static_cast<std::size_t>(num_classes);
    std::vector<std::vector<double>> margins(kc, std::vector<double>(n, 0.0));
    std::vector<double> probs(n * kc);
    std::vector<double> gradients(n), hessians(n);
    std::vector<double> gains(x.cols, 0.0);

    for (int round = 0; round < opt.rounds; ++round) {
      for (std::size_t i = 0; i < n; ++i) {
        double max_margin = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < kc; ++c) max_margin = std::max(max_margin, margins[c][i]);
        double total = 0.0;
        for (std::size_t c = 0; c < kc; ++c) {
          probs[i * kc + c] = std::exp(margins[c][i] - max_margin);
          total += probs[i * kc + c];
        }
        for (std::size_t c = 0; c < kc; ++c) probs[i * kc + c] /= total;
      }
      for (std::size_t c = 0; c < kc; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
          const double p = probs[i * kc + c];
          gradients[i] = p - (static_cast<std::size_t>(y[i]) == c ? 1.0 : 0.0);
          hessians[i] = std::max(p * (1.0 - p), 1e-12);
        }
        detail::TreeBuilder builder(binned, binner, opt, gradients, hessians);
        model.trees_.push_back(builder.build(margins[c], gains));
      }
    }
    return model;
  }

  std::vector<double> predict_probabilities(std::span<const double> x) const {
    if (x.size() != num_features_)
      throw std::invalid_argument("feature width does not match trained model");
    const std::size_t kc = static_cast<std::size_t>(num_classes_);
    std::vector<double> margins(kc, 0.0);
    for (std::size_t t = 0; t < trees_.size(); ++t)
      margins[t % kc] += trees_[t].predict(x);
    double max_margin = -std::numeric_limits<double>::infinity();
    for (double m : margins) max_margin = std::max(max_margin, m);
    double total = 0.0;
    for (std::size_t c = 0; c < kc; ++c) {
      margins[c] = std::exp(margins[c] - max_margin);
      total += margins[c];
    }
    for (double& m : margins) m /= total;
    return margins;
  }

  int num_classes() const { return num_classes_; }
  std::size_t num_features() const { return num_features_; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["objective"] = "multiclass_softmax";
    j["num_features"] = num_features_;
    j["num_classes"] = num_classes_;
    nlohmann::json trees = nlohmann::json::array();
    for (const Tree& t : trees_) trees.push_back(tree_to_json(t));
    j["trees"] = std::move(trees);
    return j;
  }

  static MulticlassGbt from_json(const nlohmann::json& j) {
    if (j.at("objective") != "multiclass_softmax")
      throw std::invalid_argument("not a multiclass_softmax model");
    MulticlassGbt model;
    model.num_features_ = j.at("num_features").get<std::size_t>();
    model.num_classes_ = j.at("num_classes").get<int>();
    for (const auto& t : j.at("trees")) model.trees_.push_back(tree_from_json(t));
    if (model.trees_.size() % static_cast<std::size_t>(model.num_classes_) != 0)
      throw std::invalid_argument("tree count not a multiple of class count");
    return model;
  }

 private:
  std::size_t num_features_ = 0;
  int num_classes_ = 0;
  std::vector<Tree> trees_;
};

}  // namespace sundew::gbt
