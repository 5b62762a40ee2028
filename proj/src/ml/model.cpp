#include "tacslip/ml/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace tacslip::ml {

using Json = nlohmann::ordered_json;

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Logistic: return "lr";
    case ModelKind::SvmRbf: return "svm";
    case ModelKind::Knn: return "knn";
    case ModelKind::Forest: return "rf";
  }
  throw std::runtime_error("model: unknown kind");
}

ModelKind model_kind_from_name(const std::string& s) {
  if (s == "lr") return ModelKind::Logistic;
  if (s == "svm") return ModelKind::SvmRbf;
  if (s == "knn") return ModelKind::Knn;
  if (s == "rf") return ModelKind::Forest;
  throw std::runtime_error("model: unknown kind '" + s + "'");
}

int Tree::predict(std::span<const double> x) const {
  if (nodes.empty()) throw std::runtime_error("tree: no nodes");
  int i = 0;
  while (nodes[i].feature >= 0) {
    const TreeNode& n = nodes[i];
    if (static_cast<std::size_t>(n.feature) >= x.size())
      throw std::runtime_error("tree: feature index out of range");
    i = x[n.feature] <= n.threshold ? n.left : n.right;
    if (i < 0 || static_cast<std::size_t>(i) >= nodes.size())
      throw std::runtime_error("tree: bad child index");
  }
  return nodes[i].label;
}

namespace {

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  double d2 = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

Prediction predict_logistic(const LogisticParams& p, std::span<const double> z) {
  double acc = p.bias;
  for (std::size_t j = 0; j < z.size(); ++j) acc += p.weights[j] * z[j];
  Prediction out;
  out.score = 1.0 / (1.0 + std::exp(-acc));
  out.label = out.score >= 0.5 ? 1 : 0;
  return out;
}

Prediction predict_svm(const SvmRbfParams& p, std::span<const double> z) {
  double margin = p.bias;
  for (std::size_t i = 0; i < p.coeffs.size(); ++i) {
    std::span<const double> sv{p.support.data() + i * p.dim, p.dim};
    margin += p.coeffs[i] * rbf_kernel(sv, z, p.gamma);
  }
  Prediction out;
  out.score = margin;
  out.label = margin >= 0.0 ? 1 : 0;
  return out;
}

Prediction predict_knn(const KnnParams& p, std::span<const double> z) {
  const std::size_t n = p.labels.size();
  if (n == 0) throw std::runtime_error("knn: empty model");
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(p.k), n);

  // (squared distance, row index); ties resolve to the lowest row index
  std::vector<std::pair<double, std::size_t>> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < p.dim; ++j) {
      const double d = p.points[i * p.dim + j] - z[j];
      d2 += d * d;
    }
    order[i] = {d2, i};
  }
  std::partial_sort(order.begin(), order.begin() + k, order.end());

  std::size_t votes1 = 0;
  for (std::size_t i = 0; i < k; ++i) votes1 += p.labels[order[i].second] == 1 ? 1 : 0;
  Prediction out;
  out.score = static_cast<double>(votes1) / static_cast<double>(k);
  out.label = 2 * votes1 > k ? 1 : 0;  // vote tie picks the lower class
  return out;
}

}  // namespace

Prediction TrainedModel::predict(std::span<const double> raw) const {
  if (dim() == 0) throw std::runtime_error("model: empty feature set");
  if (raw.size() != dim()) throw std::runtime_error("model: input dimension mismatch");
  const std::vector<double> z = standardizer.transform(raw);

  switch (kind) {
    case ModelKind::Logistic:
      return predict_logistic(std::get<LogisticParams>(params), z);
    case ModelKind::SvmRbf:
      return predict_svm(std::get<SvmRbfParams>(params), z);
    case ModelKind::Knn:
      return predict_knn(std::get<KnnParams>(params), z);
    case ModelKind::Forest: {
      const auto& forest = std::get<ForestParams>(params);
      if (forest.trees.empty()) throw std::runtime_error("forest: no trees");
      std::size_t votes1 = 0;
      for (const Tree& t : forest.trees) votes1 += t.predict(z) == 1 ? 1 : 0;
      Prediction out;
      out.score = static_cast<double>(votes1) / static_cast<double>(forest.trees.size());
      out.label = 2 * votes1 > forest.trees.size() ? 1 : 0;
      return out;
    }
  }
  throw std::runtime_error("model: unknown kind");
}

std::vector<Prediction> TrainedModel::predict(const LabeledDataset& data) const {
  std::vector<Prediction> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back(predict(data.row(i)));
  return out;
}

std::vector<int> TrainedModel::predict_labels(const LabeledDataset& data) const {
  std::vector<int> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back(predict(data.row(i)).label);
  return out;
}

std::vector<int> TrainedModel::tree_votes(std::span<const double> raw) const {
  if (kind != ModelKind::Forest) throw std::runtime_error("model: tree votes need a forest");
  if (raw.size() != dim()) throw std::runtime_error("model: input dimension mismatch");
  const std::vector<double> z = standardizer.transform(raw);
  const auto& forest = std::get<ForestParams>(params);
  std::vector<int> votes;
  votes.reserve(forest.trees.size());
  for (const Tree& t : forest.trees) votes.push_back(t.predict(z));
  return votes;
}

namespace {

constexpr int kModelFileVersion = 1;

Json params_to_json(const TrainedModel& model) {
  Json j;
  switch (model.kind) {
    case ModelKind::Logistic: {
      const auto& p = std::get<LogisticParams>(model.params);
      j["weights"] = p.weights;
      j["bias"] = p.bias;
      break;
    }
    case ModelKind::SvmRbf: {
      const auto& p = std::get<SvmRbfParams>(model.params);
      j["gamma"] = p.gamma;
      j["bias"] = p.bias;
      j["coeffs"] = p.coeffs;
      j["support"] = p.support;
      j["dim"] = p.dim;
      break;
    }
    case ModelKind::Knn: {
      const auto& p = std::get<KnnParams>(model.params);
      j["k"] = p.k;
      j["points"] = p.points;
      j["labels"] = p.labels;
      j["dim"] = p.dim;
      break;
    }
    case ModelKind::Forest: {
      const auto& p = std::get<ForestParams>(model.params);
      Json trees = Json::array();
      for (const Tree& t : p.trees) {
        Json node;
        std::vector<int> feature, left, right, label;
        std::vector<double> threshold;
        for (const TreeNode& n : t.nodes) {
          feature.push_back(n.feature);
          threshold.push_back(n.threshold);
          left.push_back(n.left);
          right.push_back(n.right);
          label.push_back(n.label);
        }
        node["feature"] = feature;
        node["threshold"] = threshold;
        node["left"] = left;
        node["right"] = right;
        node["label"] = label;
        trees.push_back(std::move(node));
      }
      j["trees"] = std::move(trees);
      break;
    }
  }
  return j;
}

void params_from_json(const Json& j, TrainedModel& model) {
  switch (model.kind) {
    case ModelKind::Logistic: {
      LogisticParams p;
      p.weights = j.at("weights").get<std::vector<double>>();
      p.bias = j.at("bias").get<double>();
      model.params = std::move(p);
      break;
    }
    case ModelKind::SvmRbf: {
      SvmRbfParams p;
      p.gamma = j.at("gamma").get<double>();
      p.bias = j.at("bias").get<double>();
      p.coeffs = j.at("coeffs").get<std::vector<double>>();
      p.support = j.at("support").get<std::vector<double>>();
      p.dim = j.at("dim").get<std::size_t>();
      if (p.dim == 0 || p.support.size() != p.coeffs.size() * p.dim)
        throw std::runtime_error("model file: inconsistent support vectors");
      model.params = std::move(p);
      break;
    }
    case ModelKind::Knn: {
      KnnParams p;
      p.k = j.at("k").get<int>();
      p.points = j.at("points").get<std::vector<double>>();
      p.labels = j.at("labels").get<std::vector<int>>();
      p.dim = j.at("dim").get<std::size_t>();
      if (p.k < 1 || p.dim == 0 || p.points.size() != p.labels.size() * p.dim)
        throw std::runtime_error("model file: inconsistent stored points");
      model.params = std::move(p);
      break;
    }
    case ModelKind::Forest: {
      ForestParams p;
      for (const Json& jt : j.at("trees")) {
        Tree t;
        const auto feature = jt.at("feature").get<std::vector<int>>();
        const auto threshold = jt.at("threshold").get<std::vector<double>>();
        const auto left = jt.at("left").get<std::vector<int>>();
        const auto right = jt.at("right").get<std::vector<int>>();
        const auto label = jt.at("label").get<std::vector<int>>();
        const std::size_t n = feature.size();
        if (threshold.size() != n || left.size() != n || right.size() != n || label.size() != n)
          throw std::runtime_error("model file: inconsistent tree arrays");
        t.nodes.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          t.nodes[i] = {feature[i], threshold[i], left[i], right[i], label[i]};
        }
        p.trees.push_back(std::move(t));
      }
      model.params = std::move(p);
      break;
    }
  }
}

}  // namespace

void save_model(const TrainedModel& model, const std::string& path) {
  Json j;
  j["version"] = kModelFileVersion;
  j["kind"] = model_kind_name(model.kind);
  j["feature_names"] = model.feature_names;
  j["hyperparams"] = model.hyperparams;
  j["standardizer"] = {{"mean", model.standardizer.mean}, {"stddev", model.standardizer.stddev}};
  j["parameters"] = params_to_json(model);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing model file: " + path);
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read model file: " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const std::exception& e) {
    throw std::runtime_error("model file " + path + ": " + e.what());
  }

  if (j.at("version").get<int>() != kModelFileVersion)
    throw std::runtime_error("model file: unsupported version");

  TrainedModel model;
  model.kind = model_kind_from_name(j.at("kind").get<std::string>());
  model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  model.hyperparams = j.at("hyperparams").get<std::map<std::string, double>>();
  model.standardizer.mean = j.at("standardizer").at("mean").get<std::vector<double>>();
  model.standardizer.stddev = j.at("standardizer").at("stddev").get<std::vector<double>>();
  if (model.standardizer.mean.size() != model.standardizer.stddev.size())
    throw std::runtime_error("model file: inconsistent standardizer");
  params_from_json(j.at("parameters"), model);
  return model;
}

}  // namespace tacslip::ml
