#pragma once

#include <cstdint>
#include <span>

namespace cvrlab::metrics {

struct ScoredExample {
  double score = 0.0;
  uint8_t label = 0;  // binary
};

// Probability that a uniformly random positive outranks a uniformly random
// negative, ties counted 0.5. Rank-statistic implementation, O(n log n);
// tied scores receive their average rank. Throws ValidationError when the
// label set is degenerate (no positives or no negatives) or a score is not
// finite -- never returns NaN.
double auc(std::span<const ScoredExample> examples);

// Explicit double loop over all positive-negative pairs; the oracle for
// auc(). Quadratic, intended for n <= 1e4.
double auc_bruteforce(std::span<const ScoredExample> examples);

}  // namespace cvrlab::metrics
