#include <cmath>
#include <stdexcept>

#include "tacslip/ml/metrics.hpp"
#include "tacslip/ml/train.hpp"
#include "tacslip/rng.hpp"

namespace tacslip::ml {

TrainedModel fit_model(ModelKind kind, const LabeledDataset& data,
                       const std::map<std::string, double>& hyperparams, std::uint64_t seed) {
  auto value = [&hyperparams](const char* key, double fallback) {
    auto it = hyperparams.find(key);
    return it == hyperparams.end() ? fallback : it->second;
  };
  switch (kind) {
    case ModelKind::Logistic: {
      LrOptions opts;
      opts.c = value("c", opts.c);
      return fit_logistic(data, opts);
    }
    case ModelKind::SvmRbf: {
      SvmOptions opts;
      opts.c = value("c", opts.c);
      opts.gamma = value("gamma", opts.gamma);
      opts.seed = seed;
      return fit_svm_rbf(data, opts);
    }
    case ModelKind::Knn: {
      KnnOptions opts;
      opts.k = static_cast<int>(std::lround(value("k", opts.k)));
      return fit_knn(data, opts);
    }
    case ModelKind::Forest: {
      ForestOptions opts;
      opts.trees = static_cast<int>(std::lround(value("trees", opts.trees)));
      opts.seed = seed;
      return fit_random_forest(data, opts);
    }
  }
  throw std::runtime_error("fit: unknown model kind");
}

Grid default_grid(ModelKind kind) {
  switch (kind) {
    case ModelKind::Logistic: return {{"c", {0.01, 0.1, 1.0, 10.0}}};
    case ModelKind::SvmRbf: return {{"c", {0.1, 1.0, 10.0}}, {"gamma", {0.05, 0.25, 1.0}}};
    case ModelKind::Knn: return {{"k", {1.0, 3.0, 5.0, 7.0}}};
    case ModelKind::Forest: return {{"trees", {25.0, 50.0, 100.0, 200.0}}};
  }
  throw std::runtime_error("grid: unknown model kind");
}

GridSearchResult grid_search(ModelKind kind, const Grid& grid, const LabeledDataset& data,
                             int folds, std::uint64_t seed) {
  if (folds < 2) throw std::runtime_error("grid: need at least 2 folds");
  if (grid.empty()) throw std::runtime_error("grid: empty grid");
  for (const auto& [name, values] : grid) {
    if (values.empty()) throw std::runtime_error("grid: axis '" + name + "' has no values");
  }

  const std::vector<int> fold_of = stratified_folds(data.labels, folds, mix_seed(seed, 0));

  GridSearchResult result;
  result.best_accuracy = -1.0;

  std::vector<std::size_t> cursor(grid.size(), 0);
  std::size_t cell_index = 0;
  while (true) {
    GridCell cell;
    for (std::size_t a = 0; a < grid.size(); ++a)
      cell.params[grid[a].first] = grid[a].second[cursor[a]];

    double accuracy_sum = 0.0;
    int scored_folds = 0;
    for (int f = 0; f < folds; ++f) {
      std::vector<std::size_t> train_rows;
      std::vector<std::size_t> eval_rows;
      for (std::size_t i = 0; i < data.size(); ++i) {
        (fold_of[i] == f ? eval_rows : train_rows).push_back(i);
      }
      try {
        if (eval_rows.empty()) throw std::runtime_error("empty fold");
        const LabeledDataset train = select_rows(data, train_rows);
        const LabeledDataset eval = select_rows(data, eval_rows);
        const TrainedModel model =
            fit_model(kind, train, cell.params, mix_seed(mix_seed(seed, cell_index + 1), f));
        const Metrics m = compute_metrics(model.predict_labels(eval), eval.labels);
        accuracy_sum += m.accuracy;
        ++scored_folds;
      } catch (const std::exception& e) {
        cell.note = std::string("fold ") + std::to_string(f) + ": " + e.what();
        break;
      }
    }
    cell.cv_accuracy = cell.note.empty() && scored_folds == folds
                           ? accuracy_sum / static_cast<double>(folds)
                           : 0.0;

    if (cell.cv_accuracy > result.best_accuracy) {
      result.best_accuracy = cell.cv_accuracy;
      result.best = cell.params;
    }
    result.table.push_back(std::move(cell));
    ++cell_index;

    // advance the odometer, first axis slowest
    std::size_t a = grid.size();
    while (a > 0) {
      --a;
      if (++cursor[a] < grid[a].second.size()) break;
      cursor[a] = 0;
      if (a == 0) return result;
    }
  }
}

}  // namespace tacslip::ml
