#pragma once

#include <cstdint>
#include <span>

namespace tacslip::ml {

struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;
};

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Confusion confusion;
};

// Binary metrics with class 1 as the positive class. Degenerate cases:
// precision with no positive predictions is 1 when there are no actual
// positives either, otherwise 0; recall with no actual positives is 1;
// F1 is 0 whenever precision + recall is 0.
Metrics compute_metrics(std::span<const int> predicted, std::span<const int> actual);

// Unweighted mean of the two one-vs-rest scores (accuracy stays plain).
Metrics compute_metrics_macro(std::span<const int> predicted, std::span<const int> actual);

}  // namespace tacslip::ml
