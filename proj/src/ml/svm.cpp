#include <algorithm>
#include <cmath>
#include <cstring>
#include <list>
#include <stdexcept>
#include <vector>

#include "tacslip/ml/train.hpp"
#include "tacslip/rng.hpp"

namespace tacslip::ml {

SvmConvergenceError::SvmConvergenceError(double violation_in)
    : std::runtime_error("svm: failed to satisfy KKT tolerance, final violation " +
                         std::to_string(violation_in)),
      violation(violation_in) {}

namespace {

// Caches full kernel rows with least-recently-used eviction so repeated
// working-set passes stay O(n d) per new row instead of recomputing pairs.
class KernelCache {
 public:
  KernelCache(const std::vector<double>& x, std::size_t n, std::size_t dim, double gamma,
              std::size_t capacity_rows)
      : x_(x), n_(n), dim_(dim), gamma_(gamma),
        capacity_(std::max<std::size_t>(capacity_rows, 2)), rows_(n), slot_(n, lru_.end()) {}

  std::span<const double> row(std::size_t i) {
    if (slot_[i] != lru_.end()) {
      lru_.splice(lru_.begin(), lru_, slot_[i]);
      return rows_[i];
    }
    if (lru_.size() >= capacity_) {
      const std::size_t victim = lru_.back();
      lru_.pop_back();
      slot_[victim] = lru_.end();
      rows_[victim].clear();
      rows_[victim].shrink_to_fit();
    }
    compute(i);
    lru_.push_front(i);
    slot_[i] = lru_.begin();
    return rows_[i];
  }

 private:
  void compute(std::size_t i) {
    auto& out = rows_[i];
    out.resize(n_);
    const double* xi = x_.data() + i * dim_;
    for (std::size_t j = 0; j < n_; ++j) {
      const double* xj = x_.data() + j * dim_;
      double d2 = 0.0;
      for (std::size_t k = 0; k < dim_; ++k) {
        const double d = xi[k] - xj[k];
        d2 += d * d;
      }
      out[j] = std::exp(-gamma_ * d2);
    }
  }

  const std::vector<double>& x_;
  std::size_t n_;
  std::size_t dim_;
  double gamma_;
  std::size_t capacity_;
  std::vector<std::vector<double>> rows_;
  std::list<std::size_t> lru_;
  std::vector<std::list<std::size_t>::iterator> slot_;
};

class SmoSolver {
 public:
  SmoSolver(const std::vector<double>& z, const std::vector<int>& labels, std::size_t dim,
            const SvmOptions& opts, double gamma)
      : x_(z), dim_(dim), n_(labels.size()), c_(opts.c), tol_(opts.tol), gamma_(gamma),
        rng_(mix_seed(opts.seed, 0x736d6f)),
        cache_(z, labels.size(), dim,
               gamma, opts.cache_mb * 1024 * 1024 / (labels.size() * sizeof(double))) {
    y_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) y_[i] = labels[i] == 1 ? 1.0 : -1.0;
    alpha_.assign(n_, 0.0);
    errors_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) errors_[i] = -y_[i];  // f = 0 at start
  }

  // Platt-style SMO: alternate full sweeps with non-bound sweeps until a full
  // sweep changes nothing, then re-check against freshly computed errors.
  void solve(int max_passes, SvmFitReport* report) {
    int full_sweeps = 0;
    int refreshes = 0;
    bool examine_all = true;
    while (true) {
      // free-subset sweeps each raise the dual objective, so only full sweeps
      // need a cap to bound the outer loop
      if (examine_all && full_sweeps++ >= max_passes)
        throw SvmConvergenceError(exact_violation());
      std::size_t changed = 0;
      for (std::size_t i = 0; i < n_; ++i) {
        if (examine_all || is_free(alpha_[i])) changed += examine(i);
      }
      if (examine_all) {
        if (changed == 0) {
          // cached errors drift a little; confirm on exact values
          refresh_errors();
          const double violation = exact_violation_from_errors();
          if (violation <= tol_) {
            if (report) report->kkt_violation = violation;
            return;
          }
          if (++refreshes > 5) throw SvmConvergenceError(violation);
        } else {
          examine_all = false;
        }
      } else if (changed == 0) {
        examine_all = true;
      }
    }
  }

  TrainedModel finish(const LabeledDataset& data, const Standardizer& standardizer,
                      const SvmOptions& opts, SvmFitReport* report) {
    SvmRbfParams params;
    params.gamma = gamma_;
    params.bias = b_;
    params.dim = dim_;
    for (std::size_t i = 0; i < n_; ++i) {
      if (alpha_[i] > 0.0) {
        params.coeffs.push_back(alpha_[i] * y_[i]);
        params.support.insert(params.support.end(), x_.begin() + i * dim_,
                              x_.begin() + (i + 1) * dim_);
      }
    }
    if (report) {
      report->support_vectors = static_cast<int>(params.coeffs.size());
      report->objective = std::move(objective_trace_);
      report->updates = updates_;
    }

    TrainedModel model;
    model.kind = ModelKind::SvmRbf;
    model.feature_names = data.feature_names;
    model.standardizer = standardizer;
    model.hyperparams = {{"c", opts.c}, {"gamma", gamma_}, {"tol", tol_}};
    model.params = std::move(params);
    return model;
  }

 private:
  bool is_free(double a) const { return a > 0.0 && a < c_; }

  bool examine(std::size_t i2) {
    const double y2 = y_[i2];
    const double a2 = alpha_[i2];
    const double e2 = errors_[i2];
    const double r2 = e2 * y2;
    const bool violated = (r2 < -tol_ && a2 < c_) || (r2 > tol_ && a2 > 0.0);
    if (!violated) return false;

    // best second choice: largest error gap among free multipliers
    std::size_t best = n_;
    double best_gap = -1.0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (!is_free(alpha_[i])) continue;
      const double gap = std::abs(errors_[i] - e2);
      if (gap > best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    if (best < n_ && take_step(best, i2)) return true;

    const std::size_t start = rng_.below(n_ == 0 ? 1 : n_);
    for (std::size_t k = 0; k < n_; ++k) {
      const std::size_t i1 = (start + k) % n_;
      if (is_free(alpha_[i1]) && take_step(i1, i2)) return true;
    }
    for (std::size_t k = 0; k < n_; ++k) {
      const std::size_t i1 = (start + k) % n_;
      if (!is_free(alpha_[i1]) && take_step(i1, i2)) return true;
    }
    return false;
  }

  bool take_step(std::size_t i1, std::size_t i2) {
    if (i1 == i2) return false;
    const double a1 = alpha_[i1];
    const double a2 = alpha_[i2];
    const double y1 = y_[i1];
    const double y2 = y_[i2];
    const double e1 = errors_[i1];
    const double e2 = errors_[i2];
    const double s = y1 * y2;

    double lo;
    double hi;
    if (y1 != y2) {
      lo = std::max(0.0, a2 - a1);
      hi = std::min(c_, c_ + a2 - a1);
    } else {
      lo = std::max(0.0, a1 + a2 - c_);
      hi = std::min(c_, a1 + a2);
    }
    if (lo >= hi) return false;

    std::span<const double> row1 = cache_.row(i1);
    std::span<const double> row2 = cache_.row(i2);
    const double k11 = row1[i1];
    const double k12 = row1[i2];
    const double k22 = row2[i2];
    const double eta = k11 + k22 - 2.0 * k12;

    double a2_new;
    if (eta > 0.0) {
      a2_new = std::clamp(a2 + y2 * (e1 - e2) / eta, lo, hi);
    } else {
      // flat direction: evaluate the pair objective at both clip ends
      const double f1 = y1 * (e1 + b_) - a1 * k11 - s * a2 * k12;
      const double f2 = y2 * (e2 + b_) - s * a1 * k12 - a2 * k22;
      const double l1 = a1 + s * (a2 - lo);
      const double h1 = a1 + s * (a2 - hi);
      const double lo_obj = l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22 +
                            s * lo * l1 * k12;
      const double hi_obj = h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22 +
                            s * hi * h1 * k12;
      if (lo_obj < hi_obj - 1e-12) {
        a2_new = lo;
      } else if (lo_obj > hi_obj + 1e-12) {
        a2_new = hi;
      } else {
        return false;
      }
    }
    if (std::abs(a2_new - a2) < 1e-10 * (a2_new + a2 + 1e-10)) return false;

    double a1_new = a1 + s * (a2 - a2_new);
    // snap to the box so support-vector sets stay clean
    if (a1_new < 1e-10 * c_) a1_new = 0.0;
    if (a1_new > c_ * (1.0 - 1e-10)) a1_new = c_;
    if (a2_new < 1e-10 * c_) a2_new = 0.0;
    if (a2_new > c_ * (1.0 - 1e-10)) a2_new = c_;

    const double d1 = a1_new - a1;
    const double d2 = a2_new - a2;
    const double b1 = b_ - e1 - y1 * d1 * k11 - y2 * d2 * k12;
    const double b2 = b_ - e2 - y1 * d1 * k12 - y2 * d2 * k22;
    double b_new;
    if (is_free(a1_new)) {
      b_new = b1;
    } else if (is_free(a2_new)) {
      b_new = b2;
    } else {
      b_new = 0.5 * (b1 + b2);
    }

    // dual objective gain from the closed-form pair restriction
    const double v1 = e1 + y1 - b_;
    const double v2 = e2 + y2 - b_;
    const double v1_new = v1 + y1 * d1 * k11 + y2 * d2 * k12;
    const double v2_new = v2 + y1 * d1 * k12 + y2 * d2 * k22;
    const double gain =
        d1 + d2 - 0.5 * (y1 * d1 * (v1 + v1_new) + y2 * d2 * (v2 + v2_new));
    objective_ += gain;
    objective_trace_.push_back(objective_);

    const double db = b_new - b_;
    for (std::size_t i = 0; i < n_; ++i)
      errors_[i] += y1 * d1 * row1[i] + y2 * d2 * row2[i] + db;

    alpha_[i1] = a1_new;
    alpha_[i2] = a2_new;
    b_ = b_new;
    ++updates_;
    return true;
  }

  void refresh_errors() {
    std::vector<double> f(n_, b_);
    for (std::size_t j = 0; j < n_; ++j) {
      if (alpha_[j] == 0.0) continue;
      std::span<const double> row = cache_.row(j);
      const double w = alpha_[j] * y_[j];
      for (std::size_t i = 0; i < n_; ++i) f[i] += w * row[i];
    }
    for (std::size_t i = 0; i < n_; ++i) errors_[i] = f[i] - y_[i];
  }

  double exact_violation_from_errors() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double r = errors_[i] * y_[i];
      double v = 0.0;
      if (alpha_[i] <= 0.0) {
        v = std::max(0.0, -r);
      } else if (alpha_[i] >= c_) {
        v = std::max(0.0, r);
      } else {
        v = std::abs(r);
      }
      worst = std::max(worst, v);
    }
    return worst;
  }

  double exact_violation() {
    refresh_errors();
    return exact_violation_from_errors();
  }

  const std::vector<double>& x_;
  std::size_t dim_;
  std::size_t n_;
  double c_;
  double tol_;
  double gamma_;
  Rng rng_;
  KernelCache cache_;
  std::vector<double> y_;
  std::vector<double> alpha_;
  std::vector<double> errors_;
  double b_ = 0.0;
  double objective_ = 0.0;
  std::vector<double> objective_trace_;
  std::uint64_t updates_ = 0;
};

double flattened_variance(const std::vector<double>& z) {
  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= static_cast<double>(z.size());
  double var = 0.0;
  for (double v : z) {
    const double d = v - mean;
    var += d * d;
  }
  return var / static_cast<double>(z.size());
}

}  // namespace

TrainedModel fit_svm_rbf(const LabeledDataset& data, const SvmOptions& opts,
                         SvmFitReport* report) {
  data.require_two_classes();
  if (!(opts.c > 0.0)) throw std::runtime_error("svm: c must be positive");
  if (!(opts.tol > 0.0)) throw std::runtime_error("svm: tol must be positive");
  if (opts.max_passes < 1) throw std::runtime_error("svm: max_passes must be positive");

  const Standardizer standardizer = Standardizer::fit(data);
  const std::vector<double> z = standardizer.transform_matrix(data);

  double gamma = opts.gamma;
  if (!(gamma > 0.0)) {
    const double var = flattened_variance(z);
    gamma = var > 0.0 ? 1.0 / (static_cast<double>(data.dim) * var)
                      : 1.0 / static_cast<double>(data.dim);
  }

  if (report) *report = {};
  SmoSolver solver(z, data.labels, data.dim, opts, gamma);
  solver.solve(opts.max_passes, report);
  return solver.finish(data, standardizer, opts, report);
}

}  // namespace tacslip::ml
