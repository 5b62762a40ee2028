#include <stdexcept>

#include "tacslip/ml/train.hpp"

namespace tacslip::ml {

TrainedModel fit_knn(const LabeledDataset& data, const KnnOptions& opts) {
  data.require_two_classes();
  if (opts.k < 1) throw std::runtime_error("knn: k must be positive");
  if (static_cast<std::size_t>(opts.k) > data.size())
    throw std::runtime_error("knn: k exceeds training size");

  TrainedModel model;
  model.kind = ModelKind::Knn;
  model.feature_names = data.feature_names;
  model.standardizer = Standardizer::fit(data);

  KnnParams params;
  params.k = opts.k;
  params.dim = data.dim;
  params.points = model.standardizer.transform_matrix(data);
  params.labels = data.labels;
  model.params = std::move(params);
  model.hyperparams = {{"k", static_cast<double>(opts.k)}};
  return model;
}

}  // namespace tacslip::ml
