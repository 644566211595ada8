#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "util/errors.hpp"
#include "util/rng.hpp"

namespace cvrlab::nn {

// Fully connected layer, weights stored out x in (canonical, what the
// optimizer and checkpoints see) plus an in x out transposed copy for the
// forward kernel. All three hot kernels are written axpy-style with a
// contiguous inner loop so they vectorize without relaxed FP flags.
template <class S>
struct DenseLayer {
  int64_t in = 0, out = 0;
  std::vector<S> w;    // out x in
  std::vector<S> wt;   // in x out, derived from w
  std::vector<S> b;    // out
  std::vector<S> gw;   // out x in
  std::vector<S> gb;

  DenseLayer(int64_t in_dim, int64_t out_dim, uint64_t seed)
      : in(in_dim), out(out_dim) {
    w.resize(static_cast<size_t>(in * out));
    wt.resize(w.size());
    b.assign(static_cast<size_t>(out), S(0));
    gw.assign(w.size(), S(0));
    gb.assign(static_cast<size_t>(out), S(0));
    const double r = std::sqrt(6.0 / static_cast<double>(in + out));
    SplitMix64 rng(seed);
    for (auto& x : w) x = static_cast<S>(rng.uniform(-r, r));
    sync_transpose();
  }

  void sync_transpose() {
    for (int64_t o = 0; o < out; ++o)
      for (int64_t i = 0; i < in; ++i) wt[i * out + o] = w[o * in + i];
  }

  // z[b][:] = x[b][:] . wt + bias
  void forward(const S* x, int64_t batch, int64_t ld, S* z) const {
    for (int64_t k = 0; k < batch; ++k) {
      const S* xr = x + k * ld;
      S* zr = z + k * out;
      for (int64_t o = 0; o < out; ++o) zr[o] = b[o];
      for (int64_t i = 0; i < in; ++i) {
        const S xi = xr[i];
        if (xi == S(0)) continue;
        const S* wr = wt.data() + i * out;
        for (int64_t o = 0; o < out; ++o) zr[o] += xi * wr[o];
      }
    }
  }

  // Accumulates gw/gb from dz and writes dx (dx may be null for the first
  // layer when the input gradient is routed through scatter_add instead).
  void backward(const S* x, int64_t batch, int64_t ld, const S* dz, S* dx,
                int64_t dx_ld) {
    for (int64_t k = 0; k < batch; ++k) {
      const S* xr = x + k * ld;
      const S* dzr = dz + k * out;
      for (int64_t o = 0; o < out; ++o) {
        const S d = dzr[o];
        if (d == S(0)) continue;
        gb[o] += d;
        S* gwr = gw.data() + o * in;
        for (int64_t i = 0; i < in; ++i) gwr[i] += d * xr[i];
      }
      if (dx) {
        S* dxr = dx + k * dx_ld;
        for (int64_t o = 0; o < out; ++o) {
          const S d = dzr[o];
          if (d == S(0)) continue;
          const S* wr = w.data() + o * in;
          for (int64_t i = 0; i < in; ++i) dxr[i] += d * wr[i];
        }
      }
    }
  }

  void clear_grads() {
    std::fill(gw.begin(), gw.end(), S(0));
    std::fill(gb.begin(), gb.end(), S(0));
  }
};

// Rectifier hidden layers and a final scalar logit. The logistic link is
// applied by the caller (losses want raw logits).
template <class S>
class MlpHead {
 public:
  struct Cache {
    // act[l]: batch x layer_out; hidden layers store post-ReLU values, the
    // final layer stores the raw logit
    std::vector<std::vector<S>> act;
    std::vector<std::vector<S>> dact;  // scratch for backward
    int64_t batch = 0;
  };

  MlpHead(std::string name, int64_t input_dim, std::span<const int> hidden,
          uint64_t seed)
      : name_(std::move(name)) {
    if (input_dim <= 0) throw ValidationError("head '" + name_ + "': bad input dim");
    int64_t cur = input_dim;
    SplitMix64 seeder(seed);
    for (int wdt : hidden) {
      if (wdt <= 0)
        throw ValidationError("head '" + name_ + "': layer width must be positive");
      layers_.emplace_back(cur, wdt, seeder.next());
      cur = wdt;
    }
    layers_.emplace_back(cur, 1, seeder.next());
  }

  const std::string& name() const { return name_; }
  std::vector<DenseLayer<S>>& layers() { return layers_; }
  const std::vector<DenseLayer<S>>& layers() const { return layers_; }

  int64_t parameter_count() const {
    int64_t n = 0;
    for (const auto& l : layers_) n += (l.in + 1) * l.out;
    return n;
  }

  void set_output_bias(S v) { layers_.back().b[0] = v; }

  // x: batch x ld (embedding concat); logits: batch doubles
  void forward(const S* x, int64_t batch, int64_t ld, Cache& c,
               double* logits) const {
    c.batch = batch;
    c.act.resize(layers_.size());
    c.dact.resize(layers_.size());
    const S* cur = x;
    int64_t cur_ld = ld;
    for (size_t l = 0; l < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      c.act[l].resize(static_cast<size_t>(batch * layer.out));
      layer.forward(cur, batch, cur_ld, c.act[l].data());
      if (l + 1 < layers_.size()) {
        for (auto& v : c.act[l])
          if (v < S(0)) v = S(0);
      }
      cur = c.act[l].data();
      cur_ld = layer.out;
    }
    const auto& logit_col = c.act.back();
    for (int64_t k = 0; k < batch; ++k)
      logits[k] = static_cast<double>(logit_col[static_cast<size_t>(k)]);
  }

  // d_logit: per-example dL/dz. Parameter gradients accumulate into the
  // layers; the input gradient accumulates into dx (batch x dx_ld).
  void backward(const S* x, int64_t batch, int64_t ld, Cache& c,
                const double* d_logit, S* dx, int64_t dx_ld) {
    const size_t L = layers_.size();
    c.dact[L - 1].resize(static_cast<size_t>(batch));
    for (int64_t k = 0; k < batch; ++k)
      c.dact[L - 1][static_cast<size_t>(k)] = static_cast<S>(d_logit[k]);

    for (size_t l = L; l-- > 0;) {
      const S* input = (l == 0) ? x : c.act[l - 1].data();
      const int64_t input_ld = (l == 0) ? ld : layers_[l - 1].out;
      S* dinput = nullptr;
      int64_t dinput_ld = 0;
      if (l == 0) {
        dinput = dx;
        dinput_ld = dx_ld;
      } else {
        c.dact[l - 1].assign(static_cast<size_t>(batch * layers_[l - 1].out), S(0));
        dinput = c.dact[l - 1].data();
        dinput_ld = layers_[l - 1].out;
      }
      layers_[l].backward(input, batch, input_ld, c.dact[l].data(), dinput,
                          dinput_ld);
      if (l > 0) {
        // ReLU mask: post-activation zero means the unit was clamped
        const auto& act = c.act[l - 1];
        auto& d = c.dact[l - 1];
        for (size_t i = 0; i < d.size(); ++i)
          if (act[i] == S(0)) d[i] = S(0);
      }
    }
  }

  void sync_transposes() {
    for (auto& l : layers_) l.sync_transpose();
  }

  void clear_grads() {
    for (auto& l : layers_) l.clear_grads();
  }

 private:
  std::string name_;
  std::vector<DenseLayer<S>> layers_;
};

}  // namespace cvrlab::nn
