#include "tacslip/ml/metrics.hpp"

#include <stdexcept>

namespace tacslip::ml {

namespace {

Confusion count(std::span<const int> predicted, std::span<const int> actual, int positive) {
  Confusion c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] == positive;
    const bool a = actual[i] == positive;
    if (p && a)
      ++c.tp;
    else if (p && !a)
      ++c.fp;
    else if (!p && a)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

Metrics from_confusion(const Confusion& c) {
  Metrics m;
  m.confusion = c;
  const double n = static_cast<double>(c.tp + c.fp + c.fn + c.tn);
  m.accuracy = static_cast<double>(c.tp + c.tn) / n;
  if (c.tp + c.fp == 0) {
    m.precision = (c.tp + c.fn == 0) ? 1.0 : 0.0;
  } else {
    m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  }
  m.recall = (c.tp + c.fn == 0) ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  const double pr = m.precision + m.recall;
  m.f1 = pr > 0.0 ? 2.0 * m.precision * m.recall / pr : 0.0;
  return m;
}

void validate(std::span<const int> predicted, std::span<const int> actual) {
  if (predicted.empty()) throw std::runtime_error("metrics: empty input");
  if (predicted.size() != actual.size()) throw std::runtime_error("metrics: length mismatch");
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if ((predicted[i] != 0 && predicted[i] != 1) || (actual[i] != 0 && actual[i] != 1))
      throw std::runtime_error("metrics: label outside {0,1}");
  }
}

}  // namespace

Metrics compute_metrics(std::span<const int> predicted, std::span<const int> actual) {
  validate(predicted, actual);
  return from_confusion(count(predicted, actual, 1));
}

Metrics compute_metrics_macro(std::span<const int> predicted, std::span<const int> actual) {
  validate(predicted, actual);
  const Metrics pos = from_confusion(count(predicted, actual, 1));
  const Metrics neg = from_confusion(count(predicted, actual, 0));
  Metrics m;
  m.accuracy = pos.accuracy;
  m.precision = 0.5 * (pos.precision + neg.precision);
  m.recall = 0.5 * (pos.recall + neg.recall);
  m.f1 = 0.5 * (pos.f1 + neg.f1);
  m.confusion = pos.confusion;  // class-1 view
  return m;
}

}  // namespace tacslip::ml
