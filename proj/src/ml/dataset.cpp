#include "tacslip/ml/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "tacslip/rng.hpp"

namespace tacslip::ml {

void LabeledDataset::add_row(std::span<const double> features, int label) {
  if (labels.empty() && dim == 0) dim = features.size();
  if (dim == 0) throw std::runtime_error("dataset: empty feature vector");
  if (features.size() != dim) throw std::runtime_error("dataset: row dimension mismatch");
  x.insert(x.end(), features.begin(), features.end());
  labels.push_back(label);
}

void LabeledDataset::require_two_classes() const {
  bool has0 = false;
  bool has1 = false;
  for (int l : labels) {
    if (l == 0) {
      has0 = true;
    } else if (l == 1) {
      has1 = true;
    } else {
      throw std::runtime_error("dataset: label outside {0,1}");
    }
  }
  if (!has0 || !has1) throw std::runtime_error("dataset: need rows of both classes");
}

const std::vector<std::string>& feature_names(FeatureSet set) {
  static const std::vector<std::string> velocity = {"vx", "vy"};
  static const std::vector<std::string> all = {"vx", "vy", "entropy", "entropy_rate"};
  return set == FeatureSet::VelocityOnly ? velocity : all;
}

LabeledDataset to_dataset(std::span<const features::FeatureVector> rows, FeatureSet set) {
  LabeledDataset out;
  out.feature_names = feature_names(set);
  out.dim = out.feature_names.size();
  out.x.reserve(rows.size() * out.dim);
  out.labels.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.label != features::kLabelStable && r.label != features::kLabelSlip)
      throw std::runtime_error("dataset: unlabeled feature row");
    out.x.push_back(r.vx);
    out.x.push_back(r.vy);
    if (set == FeatureSet::All) {
      out.x.push_back(r.entropy);
      out.x.push_back(r.entropy_rate);
    }
    out.labels.push_back(r.label);
  }
  return out;
}

Standardizer Standardizer::fit(const LabeledDataset& data) {
  if (data.size() == 0 || data.dim == 0) throw std::runtime_error("standardizer: empty dataset");
  Standardizer s;
  s.mean.assign(data.dim, 0.0);
  s.stddev.assign(data.dim, 0.0);
  const double n = static_cast<double>(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto row = data.row(i);
    for (std::size_t j = 0; j < data.dim; ++j) s.mean[j] += row[j];
  }
  for (double& m : s.mean) m /= n;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto row = data.row(i);
    for (std::size_t j = 0; j < data.dim; ++j) {
      const double d = row[j] - s.mean[j];
      s.stddev[j] += d * d;
    }
  }
  for (double& v : s.stddev) {
    v = std::sqrt(v / n);
    if (!(v > 0.0) || !std::isfinite(v)) v = 1.0;
  }
  return s;
}

void Standardizer::transform(std::span<const double> in, std::span<double> out) const {
  if (in.size() != dim() || out.size() != dim())
    throw std::runtime_error("standardizer: dimension mismatch");
  for (std::size_t j = 0; j < in.size(); ++j) out[j] = (in[j] - mean[j]) / stddev[j];
}

std::vector<double> Standardizer::transform(std::span<const double> in) const {
  std::vector<double> out(in.size());
  transform(in, out);
  return out;
}

std::vector<double> Standardizer::inverse(std::span<const double> in) const {
  if (in.size() != dim()) throw std::runtime_error("standardizer: dimension mismatch");
  std::vector<double> out(in.size());
  for (std::size_t j = 0; j < in.size(); ++j) out[j] = in[j] * stddev[j] + mean[j];
  return out;
}

std::vector<double> Standardizer::transform_matrix(const LabeledDataset& data) const {
  if (data.dim != dim()) throw std::runtime_error("standardizer: dimension mismatch");
  std::vector<double> out(data.x.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    transform(data.row(i), std::span<double>(out.data() + i * data.dim, data.dim));
  return out;
}

LabeledDataset select_rows(const LabeledDataset& data, std::span<const std::size_t> rows) {
  LabeledDataset out;
  out.dim = data.dim;
  out.feature_names = data.feature_names;
  out.x.reserve(rows.size() * data.dim);
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= data.size()) throw std::runtime_error("dataset: row index out of range");
    auto row = data.row(r);
    out.x.insert(out.x.end(), row.begin(), row.end());
    out.labels.push_back(data.labels[r]);
  }
  return out;
}

namespace {

void shuffle_indices(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

TrainTestSplit stratified_split(const LabeledDataset& data, double test_fraction,
                                std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::runtime_error("split: test fraction must be in (0,1)");
  if (data.size() < 2) throw std::runtime_error("split: need at least two rows");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data.labels[i]].push_back(i);

  std::vector<std::size_t> test_rows;
  for (auto& [label, rows] : by_class) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(label)));
    shuffle_indices(rows, rng);
    std::size_t n_test = 0;
    if (rows.size() >= 2) {
      n_test = static_cast<std::size_t>(std::floor(test_fraction * rows.size() + 0.5));
      n_test = std::clamp<std::size_t>(n_test, 1, rows.size() - 1);
    }
    test_rows.insert(test_rows.end(), rows.begin(), rows.begin() + n_test);
  }
  std::sort(test_rows.begin(), test_rows.end());

  std::vector<std::size_t> train_rows;
  train_rows.reserve(data.size() - test_rows.size());
  std::size_t next_test = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (next_test < test_rows.size() && test_rows[next_test] == i) {
      ++next_test;
    } else {
      train_rows.push_back(i);
    }
  }

  TrainTestSplit split;
  split.train = select_rows(data, train_rows);
  split.test = select_rows(data, test_rows);
  split.train_rows = std::move(train_rows);
  split.test_rows = std::move(test_rows);
  return split;
}

std::vector<int> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) throw std::runtime_error("folds: need k >= 2");
  if (labels.empty()) throw std::runtime_error("folds: empty labels");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  std::vector<int> fold(labels.size(), 0);
  for (auto& [label, rows] : by_class) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(label)));
    shuffle_indices(rows, rng);
    for (std::size_t i = 0; i < rows.size(); ++i) fold[rows[i]] = static_cast<int>(i % k);
  }
  return fold;
}

}  // namespace tacslip::ml
