#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "util/errors.hpp"
#include "util/rng.hpp"

namespace cvrlab::nn {

// One lookup table of the shared feature embedding module. Rows are
// initialized uniform(-r, r) with r = sqrt(6 / (vocab + dim)). Gradients are
// sparse: only rows seen in the current batch are tracked and updated.
template <class S>
class EmbeddingTable {
 public:
  EmbeddingTable(std::string name, int64_t vocab, int64_t dim, uint64_t seed)
      : name_(std::move(name)), vocab_(vocab), dim_(dim) {
    if (vocab <= 0 || dim <= 0)
      throw ValidationError("embedding '" + name_ + "': vocab and dim must be positive");
    w_.resize(static_cast<size_t>(vocab * dim));
    g_.assign(w_.size(), S(0));
    touched_flag_.assign(static_cast<size_t>(vocab), 0);
    const double r = std::sqrt(6.0 / static_cast<double>(vocab + dim));
    SplitMix64 rng(seed);
    for (auto& x : w_) x = static_cast<S>(rng.uniform(-r, r));
  }

  const std::string& name() const { return name_; }
  int64_t vocab() const { return vocab_; }
  int64_t dim() const { return dim_; }

  S* weights() { return w_.data(); }
  const S* weights() const { return w_.data(); }
  S* grads() { return g_.data(); }
  const std::vector<int32_t>& touched() const { return touched_; }

  const S* row(int64_t r) const { return w_.data() + r * dim_; }
  S* mutable_row(int64_t r) { return w_.data() + r * dim_; }

  // Copies the row of each id into dst + k*stride (a column block of the
  // batch input matrix).
  void lookup(std::span<const uint32_t> ids, S* dst, int64_t stride) const {
    for (size_t k = 0; k < ids.size(); ++k) {
      const uint32_t id = ids[k];
      if (id >= vocab_)
        throw ValidationError("embedding '" + name_ + "': index " +
                              std::to_string(id) + " out of range (vocab " +
                              std::to_string(vocab_) + ")");
      const S* src = w_.data() + static_cast<int64_t>(id) * dim_;
      S* out = dst + static_cast<int64_t>(k) * stride;
      for (int64_t j = 0; j < dim_; ++j) out[j] = src[j];
    }
  }

  // Accumulates upstream gradients back into rows; duplicate ids in a batch
  // sum. Rows touched here are the only ones the optimizer may update.
  void scatter_add(std::span<const uint32_t> ids, const S* d, int64_t stride) {
    for (size_t k = 0; k < ids.size(); ++k) {
      const uint32_t id = ids[k];
      S* dst = g_.data() + static_cast<int64_t>(id) * dim_;
      const S* src = d + static_cast<int64_t>(k) * stride;
      for (int64_t j = 0; j < dim_; ++j) dst[j] += src[j];
      if (!touched_flag_[id]) {
        touched_flag_[id] = 1;
        touched_.push_back(static_cast<int32_t>(id));
      }
    }
  }

  // Zeroes touched gradient rows and resets the touched list; untouched rows
  // are never written at all.
  void clear_batch_state() {
    for (int32_t r : touched_) {
      S* dst = g_.data() + static_cast<int64_t>(r) * dim_;
      for (int64_t j = 0; j < dim_; ++j) dst[j] = S(0);
      touched_flag_[static_cast<size_t>(r)] = 0;
    }
    touched_.clear();
  }

  void sort_touched() { std::sort(touched_.begin(), touched_.end()); }

 private:
  std::string name_;
  int64_t vocab_;
  int64_t dim_;
  std::vector<S> w_, g_;
  std::vector<int32_t> touched_;
  std::vector<uint8_t> touched_flag_;
};

}  // namespace cvrlab::nn
