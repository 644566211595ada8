#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cvrlab::nn {

// One parameter tensor and its gradient. Bindings are listed in declaration
// order; checkpoints, Adam and the gradient checker all walk the same list.
template <class S>
struct TensorBinding {
  std::string name;
  S* value = nullptr;
  S* grad = nullptr;
  int64_t size = 0;
  std::vector<int64_t> shape;
  // Embedding tables update touched rows only: non-null means the optimizer
  // must restrict this step to the listed rows (sorted, unique).
  const std::vector<int32_t>* touched_rows = nullptr;
  int64_t row_width = 0;
};

template <class S>
using ParamSet = std::vector<TensorBinding<S>>;

template <class S>
int64_t total_parameters(const ParamSet<S>& params) {
  int64_t n = 0;
  for (const auto& p : params) n += p.size;
  return n;
}

}  // namespace cvrlab::nn
