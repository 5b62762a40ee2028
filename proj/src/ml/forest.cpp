#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tacslip/ml/train.hpp"
#include "tacslip/rng.hpp"

namespace tacslip::ml {

namespace {

// Grows one CART tree on (a resample of) the standardized matrix. Split
// quality maximizes sum over sides of (count0^2 + count1^2) / side size,
// which orders candidate splits identically to minimizing weighted Gini
// impurity; ties keep the first candidate in scan order.
class TreeBuilder {
 public:
  TreeBuilder(const std::vector<double>& x, const std::vector<int>& y, std::size_t dim,
              const ForestOptions& opts, Rng& rng)
      : x_(x), y_(y), dim_(dim), opts_(opts), rng_(rng) {}

  Tree grow(std::vector<std::size_t> rows) {
    Tree tree;
    build(std::move(rows), tree.nodes);
    return tree;
  }

 private:
  int leaf(std::vector<TreeNode>& nodes, std::size_t count1, std::size_t n) {
    TreeNode node;
    node.label = 2 * count1 > n ? 1 : 0;  // tie goes to class 0
    nodes.push_back(node);
    return static_cast<int>(nodes.size() - 1);
  }

  std::vector<std::size_t> candidate_features() {
    if (opts_.subset == FeatureSubset::All) {
      std::vector<std::size_t> all(dim_);
      for (std::size_t j = 0; j < dim_; ++j) all[j] = j;
      return all;
    }
    std::size_t want = static_cast<std::size_t>(std::sqrt(static_cast<double>(dim_)));
    want = std::clamp<std::size_t>(want, 1, dim_);
    // partial Fisher-Yates draw without replacement
    std::vector<std::size_t> pool(dim_);
    for (std::size_t j = 0; j < dim_; ++j) pool[j] = j;
    for (std::size_t j = 0; j < want; ++j)
      std::swap(pool[j], pool[j + rng_.below(dim_ - j)]);
    pool.resize(want);
    return pool;
  }

  int build(std::vector<std::size_t> rows, std::vector<TreeNode>& nodes) {
    const std::size_t n = rows.size();
    std::size_t count1 = 0;
    for (std::size_t r : rows) count1 += y_[r] == 1 ? 1 : 0;
    if (count1 == 0 || count1 == n || n < static_cast<std::size_t>(opts_.min_samples_split))
      return leaf(nodes, count1, n);

    double best_score = -1.0;
    std::size_t best_feature = dim_;
    double best_threshold = 0.0;

    std::vector<std::pair<double, int>> ordered(n);  // (value, label)
    for (std::size_t feature : candidate_features()) {
      for (std::size_t i = 0; i < n; ++i)
        ordered[i] = {x_[rows[i] * dim_ + feature], y_[rows[i]]};
      std::sort(ordered.begin(), ordered.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });

      std::size_t left1 = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left1 += ordered[i].second == 1 ? 1 : 0;
        if (!(ordered[i].first < ordered[i + 1].first)) continue;  // need distinct values
        const double nl = static_cast<double>(i + 1);
        const double nr = static_cast<double>(n - i - 1);
        const double l1 = static_cast<double>(left1);
        const double l0 = nl - l1;
        const double r1 = static_cast<double>(count1 - left1);
        const double r0 = nr - r1;
        const double score = (l0 * l0 + l1 * l1) / nl + (r0 * r0 + r1 * r1) / nr;
        if (score > best_score) {
          best_score = score;
          best_feature = feature;
          double mid = 0.5 * (ordered[i].first + ordered[i + 1].first);
          if (!(mid < ordered[i + 1].first)) mid = ordered[i].first;
          best_threshold = mid;
        }
      }
    }

    if (best_feature >= dim_) return leaf(nodes, count1, n);  // no usable split

    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    for (std::size_t r : rows) {
      if (x_[r * dim_ + best_feature] <= best_threshold) {
        left_rows.push_back(r);
      } else {
        right_rows.push_back(r);
      }
    }
    rows.clear();
    rows.shrink_to_fit();

    TreeNode node;
    node.feature = static_cast<int>(best_feature);
    node.threshold = best_threshold;
    nodes.push_back(node);
    const int index = static_cast<int>(nodes.size() - 1);
    nodes[index].left = build(std::move(left_rows), nodes);
    nodes[index].right = build(std::move(right_rows), nodes);
    return index;
  }

  const std::vector<double>& x_;
  const std::vector<int>& y_;
  std::size_t dim_;
  const ForestOptions& opts_;
  Rng& rng_;
};

}  // namespace

TrainedModel fit_random_forest(const LabeledDataset& data, const ForestOptions& opts) {
  data.require_two_classes();
  if (opts.trees < 1) throw std::runtime_error("forest: need at least one tree");
  if (opts.min_samples_split < 2) throw std::runtime_error("forest: min_samples_split below 2");

  TrainedModel model;
  model.kind = ModelKind::Forest;
  model.feature_names = data.feature_names;
  model.standardizer = Standardizer::fit(data);
  const std::vector<double> z = model.standardizer.transform_matrix(data);
  const std::size_t n = data.size();

  ForestParams params;
  params.trees.reserve(opts.trees);
  for (int t = 0; t < opts.trees; ++t) {
    Rng rng(mix_seed(opts.seed, static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> rows(n);
    if (opts.bootstrap) {
      for (std::size_t i = 0; i < n; ++i) rows[i] = rng.below(n);
    } else {
      for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    }
    TreeBuilder builder(z, data.labels, data.dim, opts, rng);
    params.trees.push_back(builder.grow(std::move(rows)));
  }
  model.params = std::move(params);
  model.hyperparams = {{"trees", static_cast<double>(opts.trees)},
                       {"min_samples_split", static_cast<double>(opts.min_samples_split)},
                       {"bootstrap", opts.bootstrap ? 1.0 : 0.0},
                       {"seed", static_cast<double>(opts.seed)}};
  return model;
}

}  // namespace tacslip::ml
