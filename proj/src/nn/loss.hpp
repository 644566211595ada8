#pragma once

#include <algorithm>
#include <cmath>

namespace cvrlab::nn {

// Probabilities entering a log are clamped to [kProbClamp, 1 - kProbClamp];
// inside the clamp region the loss is locally constant and the gradient is
// exactly zero, which keeps analytic and finite-difference gradients
// consistent.
inline constexpr double kProbClamp = 1e-7;

// Head outputs are kept strictly inside (0, 1) even for extreme logits.
inline constexpr double kSigmoidClamp = 1e-12;

inline double sigmoid(double z) {
  const double s = 1.0 / (1.0 + std::exp(-z));
  return std::min(std::max(s, kSigmoidClamp), 1.0 - kSigmoidClamp);
}

struct CeTerm {
  double loss = 0.0;
  double dloss_dp = 0.0;
};

// loss = -(label * log(p^) + (1-label) * log(1-p^)) with p^ the clamped
// probability. For p = sigmoid(z) chained through dp/dz = p(1-p) this yields
// the familiar dloss/dz = p - label.
inline CeTerm cross_entropy(double p, int label) {
  CeTerm t;
  const double q = std::min(std::max(p, kProbClamp), 1.0 - kProbClamp);
  t.loss = label ? -std::log(q) : -std::log(1.0 - q);
  if (p > kProbClamp && p < 1.0 - kProbClamp)
    t.dloss_dp = (q - static_cast<double>(label)) / (q * (1.0 - q));
  return t;
}

}  // namespace cvrlab::nn
