#pragma once

#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tacslip/ml/dataset.hpp"

namespace tacslip::ml {

enum class ModelKind { Logistic, SvmRbf, Knn, Forest };

std::string model_kind_name(ModelKind kind);           // "lr", "svm", "knn", "rf"
ModelKind model_kind_from_name(const std::string& s);  // throws on unknown

struct LogisticParams {
  std::vector<double> weights;  // one per feature, standardized space
  double bias = 0.0;
};

struct SvmRbfParams {
  double gamma = 0.0;
  double bias = 0.0;
  std::vector<double> coeffs;   // alpha_i * y_i per support vector
  std::vector<double> support;  // row-major, coeffs.size() x dim, standardized
  std::size_t dim = 0;
};

struct KnnParams {
  int k = 1;
  std::vector<double> points;  // row-major, labels.size() x dim, standardized
  std::vector<int> labels;
  std::size_t dim = 0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x[feature] <= threshold descends left
  int left = -1;
  int right = -1;
  int label = 0;  // leaf prediction
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int predict(std::span<const double> x) const;
};

struct ForestParams {
  std::vector<Tree> trees;
};

struct Prediction {
  int label = 0;
  double score = 0.0;  // class-1 probability (LR), signed margin (SVM), vote fraction (KNN, RF)
};

struct TrainedModel {
  ModelKind kind = ModelKind::Logistic;
  std::vector<std::string> feature_names;
  std::map<std::string, double> hyperparams;
  Standardizer standardizer;
  std::variant<LogisticParams, SvmRbfParams, KnnParams, ForestParams> params;

  std::size_t dim() const { return standardizer.dim(); }
  // throws on dimension mismatch or an empty-feature model
  Prediction predict(std::span<const double> raw) const;
  std::vector<Prediction> predict(const LabeledDataset& data) const;
  std::vector<int> predict_labels(const LabeledDataset& data) const;
  // per-tree votes for one input; throws unless kind == Forest
  std::vector<int> tree_votes(std::span<const double> raw) const;
};

// Versioned JSON with lossless numeric round-trip.
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

}  // namespace tacslip::ml
