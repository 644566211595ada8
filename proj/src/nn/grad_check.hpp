#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "nn/params.hpp"

namespace cvrlab::nn {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;  // relative, 64-bit models
  // Test hook: corrupt one analytic gradient coordinate before comparing, to
  // prove the checker localizes faults.
  int64_t inject_index = -1;
  double inject_delta = 0.0;
};

struct GradCheckResult {
  bool pass = false;
  double worst_rel_error = 0.0;
  std::string worst_tensor;
  int64_t worst_index_in_tensor = -1;
  int64_t worst_flat_index = -1;  // coordinate across the whole set
  int64_t checked = 0;
};

// Compares every analytic gradient against central finite differences.
// loss_fn must run a fresh forward pass and return the scalar loss;
// compute_grads_fn must clear gradients and run forward + backward. Both see
// parameter perturbations through the bindings. Relative error uses
// |a - f| / max(|a|, |f|, 1e-6); coordinates whose analytic and numeric
// gradients are both below the floor are noise-dominated and compare equal.
GradCheckResult grad_check(ParamSet<double>& params,
                           const std::function<double()>& loss_fn,
                           const std::function<void()>& compute_grads_fn,
                           const GradCheckOptions& opt = {});

}  // namespace cvrlab::nn
