#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nn/params.hpp"
#include "util/errors.hpp"

namespace cvrlab::nn {

struct AdamConfig {
  double learning_rate = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam. Tensors bound with a touched-rows list get the sparse
// treatment: only listed rows have their moments decayed and their values
// moved, everything else stays bit-identical (bias correction still uses the
// global step count).
template <class S>
class AdamOptimizer {
 public:
  AdamOptimizer(const ParamSet<S>& params, AdamConfig cfg) : cfg_(cfg) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(static_cast<size_t>(params[i].size), 0.0);
      v_[i].assign(static_cast<size_t>(params[i].size), 0.0);
    }
  }

  int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

  void step(ParamSet<S>& params) {
    if (params.size() != m_.size())
      throw std::runtime_error("adam: parameter set changed size");
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      if (static_cast<int64_t>(m_[i].size()) != p.size)
        throw std::runtime_error("adam: tensor '" + p.name + "' changed shape");
      if (p.touched_rows) {
        for (int32_t r : *p.touched_rows) {
          const int64_t off = static_cast<int64_t>(r) * p.row_width;
          update_span(p, off, p.row_width, m_[i].data(), v_[i].data(), bc1, bc2);
        }
      } else {
        update_span(p, 0, p.size, m_[i].data(), v_[i].data(), bc1, bc2);
      }
    }
  }

 private:
  void update_span(TensorBinding<S>& p, int64_t off, int64_t len, double* m,
                   double* v, double bc1, double bc2) {
    for (int64_t k = off; k < off + len; ++k) {
      const double g = static_cast<double>(p.grad[k]);
      if (!std::isfinite(g))
        throw std::runtime_error("adam: non-finite gradient in tensor '" +
                                 p.name + "' at flat index " + std::to_string(k));
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g;
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p.value[k] = static_cast<S>(static_cast<double>(p.value[k]) -
                                  cfg_.learning_rate * mhat /
                                      (std::sqrt(vhat) + cfg_.epsilon));
    }
  }

  AdamConfig cfg_;
  int64_t step_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace cvrlab::nn
