#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tacslip/ml/dataset.hpp"
#include "tacslip/ml/model.hpp"

namespace tacslip::ml {

// ---- logistic regression ----

struct LrOptions {
  double c = 0.1;  // inverse penalty strength; loss adds |w|^2 / (2 c N)
  double tol = 1e-8;
  int max_iters = 10000;
};

struct LrFitReport {
  std::vector<double> loss;  // accepted-step trace, starting at theta = 0
  int iterations = 0;
  bool converged = false;
};

// theta layout for the helpers below: [w_0 .. w_{d-1}, bias].
double lr_loss(std::span<const double> x, std::span<const int> y, std::size_t dim,
               std::span<const double> theta, double c);
void lr_gradient(std::span<const double> x, std::span<const int> y, std::size_t dim,
                 std::span<const double> theta, double c, std::span<double> grad);

TrainedModel fit_logistic(const LabeledDataset& data, const LrOptions& opts = {},
                          LrFitReport* report = nullptr);

// ---- SVM with RBF kernel ----

struct SvmOptions {
  double c = 1.0;
  double gamma = 0.0;  // <= 0 selects 1 / (dim * variance) on standardized data
  double tol = 1e-3;   // KKT tolerance
  int max_passes = 200;
  std::uint64_t seed = 0;
  std::size_t cache_mb = 64;  // kernel row cache
};

struct SvmFitReport {
  std::vector<double> objective;  // dual objective after each successful pair update
  double kkt_violation = 0.0;     // largest violation at termination
  int support_vectors = 0;
  std::uint64_t updates = 0;
};

struct SvmConvergenceError : std::runtime_error {
  explicit SvmConvergenceError(double violation_in);
  double violation;
};

TrainedModel fit_svm_rbf(const LabeledDataset& data, const SvmOptions& opts = {},
                         SvmFitReport* report = nullptr);

// ---- k-nearest neighbors ----

struct KnnOptions {
  int k = 1;
};

TrainedModel fit_knn(const LabeledDataset& data, const KnnOptions& opts = {});

// ---- random forest ----

enum class FeatureSubset { Sqrt, All };

struct ForestOptions {
  int trees = 100;
  int min_samples_split = 2;
  std::uint64_t seed = 0;
  bool bootstrap = true;                         // test hook: off = train on full data
  FeatureSubset subset = FeatureSubset::Sqrt;    // test hook: All = plain CART
};

TrainedModel fit_random_forest(const LabeledDataset& data, const ForestOptions& opts = {});

// ---- unified fitting and grid search ----

// Reads kind-specific keys from hyperparams (lr: c; svm: c, gamma; knn: k;
// rf: trees), falling back to the defaults above for missing keys.
TrainedModel fit_model(ModelKind kind, const LabeledDataset& data,
                       const std::map<std::string, double>& hyperparams, std::uint64_t seed);

// Axes in declared order; cells are enumerated lexicographically over them.
using Grid = std::vector<std::pair<std::string, std::vector<double>>>;

Grid default_grid(ModelKind kind);

struct GridCell {
  std::map<std::string, double> params;
  double cv_accuracy = 0.0;
  std::string note;  // non-empty when a fold failed to fit
};

struct GridSearchResult {
  std::map<std::string, double> best;
  double best_accuracy = 0.0;
  std::vector<GridCell> table;  // lexicographic cell order
};

// Stratified k-fold CV per cell; ties keep the earliest cell. A grid point
// whose fit throws scores 0 with a note and the search continues.
GridSearchResult grid_search(ModelKind kind, const Grid& grid, const LabeledDataset& data,
                             int folds, std::uint64_t seed);

}  // namespace tacslip::ml
