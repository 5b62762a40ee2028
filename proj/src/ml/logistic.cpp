#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tacslip/ml/train.hpp"

namespace tacslip::ml {

namespace {

void check_shapes(std::span<const double> x, std::span<const int> y, std::size_t dim,
                  std::span<const double> theta) {
  if (dim == 0) throw std::runtime_error("logistic: zero-dimensional input");
  if (y.empty() || x.size() != y.size() * dim)
    throw std::runtime_error("logistic: matrix/label shape mismatch");
  if (theta.size() != dim + 1) throw std::runtime_error("logistic: theta must hold dim + 1 values");
}

// ln(1 + e^t) without overflow
double softplus(double t) {
  return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)));
}

}  // namespace

double lr_loss(std::span<const double> x, std::span<const int> y, std::size_t dim,
               std::span<const double> theta, double c) {
  check_shapes(x, y, dim, theta);
  if (!(c > 0.0)) throw std::runtime_error("logistic: c must be positive");
  const std::size_t n = y.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double m = theta[dim];
    const double* row = x.data() + i * dim;
    for (std::size_t j = 0; j < dim; ++j) m += theta[j] * row[j];
    total += softplus(y[i] == 1 ? -m : m);
  }
  double penalty = 0.0;
  for (std::size_t j = 0; j < dim; ++j) penalty += theta[j] * theta[j];
  const double nd = static_cast<double>(n);
  return total / nd + penalty / (2.0 * c * nd);
}

void lr_gradient(std::span<const double> x, std::span<const int> y, std::size_t dim,
                 std::span<const double> theta, double c, std::span<double> grad) {
  check_shapes(x, y, dim, theta);
  if (!(c > 0.0)) throw std::runtime_error("logistic: c must be positive");
  if (grad.size() != dim + 1) throw std::runtime_error("logistic: grad must hold dim + 1 values");
  const std::size_t n = y.size();
  std::fill(grad.begin(), grad.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double m = theta[dim];
    const double* row = x.data() + i * dim;
    for (std::size_t j = 0; j < dim; ++j) m += theta[j] * row[j];
    const double r = 1.0 / (1.0 + std::exp(-m)) - (y[i] == 1 ? 1.0 : 0.0);
    for (std::size_t j = 0; j < dim; ++j) grad[j] += r * row[j];
    grad[dim] += r;
  }
  const double nd = static_cast<double>(n);
  for (std::size_t j = 0; j < dim; ++j) grad[j] = grad[j] / nd + theta[j] / (c * nd);
  grad[dim] /= nd;
}

TrainedModel fit_logistic(const LabeledDataset& data, const LrOptions& opts, LrFitReport* report) {
  data.require_two_classes();
  if (!(opts.c > 0.0)) throw std::runtime_error("logistic: c must be positive");
  if (opts.max_iters < 1) throw std::runtime_error("logistic: max_iters must be positive");

  TrainedModel model;
  model.kind = ModelKind::Logistic;
  model.feature_names = data.feature_names;
  model.standardizer = Standardizer::fit(data);
  const std::vector<double> z = model.standardizer.transform_matrix(data);
  const std::size_t d = data.dim;

  std::vector<double> theta(d + 1, 0.0);
  std::vector<double> grad(d + 1);
  std::vector<double> trial(d + 1);
  double loss = lr_loss(z, data.labels, d, theta, opts.c);
  if (report) {
    *report = {};
    report->loss.push_back(loss);
  }

  // gradient descent with backtracking (sufficient-decrease) line search
  double step = 1.0;
  bool converged = false;
  int iterations = 0;
  while (iterations < opts.max_iters) {
    lr_gradient(z, data.labels, d, theta, opts.c, grad);
    double g2 = 0.0;
    for (double g : grad) g2 += g * g;
    if (g2 == 0.0) {
      converged = true;
      break;
    }
    bool accepted = false;
    double next_loss = loss;
    while (step > 1e-18) {
      for (std::size_t j = 0; j <= d; ++j) trial[j] = theta[j] - step * grad[j];
      next_loss = lr_loss(z, data.labels, d, trial, opts.c);
      if (next_loss <= loss - 1e-4 * step * g2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      converged = true;  // no descent direction at working precision
      break;
    }
    theta.swap(trial);
    const double drop = loss - next_loss;
    loss = next_loss;
    ++iterations;
    if (report) report->loss.push_back(loss);
    step = std::min(step * 2.0, 1e6);
    if (drop < opts.tol) {
      converged = true;
      break;
    }
  }

  if (report) {
    report->iterations = iterations;
    report->converged = converged;
  }

  LogisticParams params;
  params.weights.assign(theta.begin(), theta.begin() + d);
  params.bias = theta[d];
  model.params = std::move(params);
  model.hyperparams = {{"c", opts.c}, {"tol", opts.tol}, {"max_iters", double(opts.max_iters)}};
  return model;
}

}  // namespace tacslip::ml
