#include "metrics/auc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "util/errors.hpp"

namespace cvrlab::metrics {

namespace {

void check_inputs(std::span<const ScoredExample> examples, size_t* positives) {
  size_t pos = 0;
  for (const auto& e : examples) {
    if (!std::isfinite(e.score))
      throw ValidationError("non-finite score in AUC input");
    pos += e.label ? 1 : 0;
  }
  if (pos == 0 || pos == examples.size())
    throw ValidationError(
        "degenerate label set for AUC: need at least one positive and one "
        "negative");
  *positives = pos;
}

}  // namespace

double auc(std::span<const ScoredExample> examples) {
  size_t pos = 0;
  check_inputs(examples, &pos);
  const size_t n = examples.size();
  const size_t neg = n - pos;

  std::vector<uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
    return examples[a].score < examples[b].score;
  });

  // average ranks over tie groups; ranks are 1-based
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j < n && examples[order[j]].score == examples[order[i]].score) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // (i+1 + j)/2
    for (size_t k = i; k < j; ++k)
      if (examples[order[k]].label) rank_sum_pos += avg_rank;
    i = j;
  }

  const double p = static_cast<double>(pos);
  return (rank_sum_pos - p * (p + 1.0) * 0.5) /
         (p * static_cast<double>(neg));
}

double auc_bruteforce(std::span<const ScoredExample> examples) {
  size_t pos = 0;
  check_inputs(examples, &pos);
  double wins = 0.0;
  uint64_t pairs = 0;
  for (const auto& a : examples) {
    if (!a.label) continue;
    for (const auto& b : examples) {
      if (b.label) continue;
      ++pairs;
      if (a.score > b.score)
        wins += 1.0;
      else if (a.score == b.score)
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

}  // namespace cvrlab::metrics
