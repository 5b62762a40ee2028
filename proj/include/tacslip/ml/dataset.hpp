#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tacslip/features.hpp"

namespace tacslip::ml {

// Row-major feature matrix with binary labels.
struct LabeledDataset {
  std::size_t dim = 0;
  std::vector<double> x;  // size = dim * labels.size()
  std::vector<int> labels;
  std::vector<std::string> feature_names;  // size = dim

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * dim, dim}; }

  void add_row(std::span<const double> features, int label);
  // throws unless labels are in {0,1} with at least one row of each class
  void require_two_classes() const;
};

enum class FeatureSet { VelocityOnly, All };

const std::vector<std::string>& feature_names(FeatureSet set);

// Assembles the classifier input from pipeline rows; unlabeled rows are
// rejected.
LabeledDataset to_dataset(std::span<const features::FeatureVector> rows, FeatureSet set);

// Per-feature z-score statistics fitted on training data.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;  // degenerate features get stddev 1

  static Standardizer fit(const LabeledDataset& data);
  std::size_t dim() const { return mean.size(); }
  void transform(std::span<const double> in, std::span<double> out) const;
  std::vector<double> transform(std::span<const double> in) const;
  std::vector<double> inverse(std::span<const double> in) const;
  // whole dataset, row-major
  std::vector<double> transform_matrix(const LabeledDataset& data) const;
};

struct TrainTestSplit {
  LabeledDataset train;
  LabeledDataset test;
  std::vector<std::size_t> train_rows;  // original row indices
  std::vector<std::size_t> test_rows;
};

// Class-stratified split; row order within each part follows the original
// dataset. Deterministic in (data, fraction, seed).
TrainTestSplit stratified_split(const LabeledDataset& data, double test_fraction,
                                std::uint64_t seed);

// fold id in [0, k) per row, class-stratified, deterministic in seed.
std::vector<int> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed);

LabeledDataset select_rows(const LabeledDataset& data, std::span<const std::size_t> rows);

}  // namespace tacslip::ml
