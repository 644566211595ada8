#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "harness/config.hpp"
#include "model/variant_model.hpp"
#include "nn/adam.hpp"
#include "synth/log_io.hpp"
#include "util/rng.hpp"

namespace cvrlab::harness {

// Column-oriented in-memory copy of one behavior log.
struct Dataset {
  std::vector<uint32_t> user, item, category;
  std::vector<uint8_t> click, dmi, dma, pay;

  int64_t size() const { return static_cast<int64_t>(user.size()); }
  void push(const synth::ImpressionRecord& r);
  static Dataset load(const std::string& log_path);
};

struct CurvePoint {
  int64_t step = 0;
  double total = 0.0;
  std::vector<double> task_values;
};

struct TrainResult {
  int64_t steps = 0;
  double initial_loss = 0.0;  // mean total over the first up-to-10 steps
  double final_loss = 0.0;    // mean total over the last up-to-10 steps
  std::vector<std::string> task_names;
  std::vector<CurvePoint> curve;
};

// Conditional label rate of each head slot, estimated from the training log
// under the variant's graph semantics; used to seed output biases.
double slot_prior_rate(const Dataset& data, graph::Variant variant, int slot);

inline double prior_logit(double rate) {
  const double r = std::min(std::max(rate, 1e-5), 1.0 - 1e-5);
  return std::log(r / (1.0 - r));
}

// Epoch-ordered minibatch training with a seeded shuffle. Single training
// thread; identical config and seed give an identical trajectory. Throws
// std::runtime_error on divergence after restoring the last epoch-start
// parameters into the model.
template <class S>
TrainResult train_model(model::VariantModel<S>& m, const Dataset& data,
                        const ExperimentConfig& cfg, uint64_t run_seed) {
  if (data.size() == 0) throw ValidationError("training set is empty");

  if (cfg.bias_prior_init) {
    for (int slot : m.active_slots())
      m.set_output_bias(slot, prior_logit(slot_prior_rate(data, m.variant(), slot)));
    m.sync_transposes();
  }

  auto params = m.params();
  nn::AdamOptimizer<S> adam(params, cfg.adam);

  const int64_t n = data.size();
  const int64_t bs = std::min<int64_t>(cfg.batch_size, n);
  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

  std::vector<uint32_t> bu(bs), bi(bs), bc(bs);
  std::vector<uint8_t> bclick(bs), bdmi(bs), bdma(bs), bpay(bs);
  typename model::VariantModel<S>::Workspace ws;

  TrainResult result;
  result.task_names = m.task_names();

  std::vector<S> snapshot;
  auto take_snapshot = [&] {
    snapshot.clear();
    for (const auto& p : params)
      snapshot.insert(snapshot.end(), p.value, p.value + p.size);
  };
  auto restore_snapshot = [&] {
    size_t off = 0;
    for (auto& p : params) {
      std::copy(snapshot.begin() + static_cast<int64_t>(off),
                snapshot.begin() + static_cast<int64_t>(off) + p.size, p.value);
      off += static_cast<size_t>(p.size);
    }
    m.sync_transposes();
  };

  int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    take_snapshot();
    // Fisher-Yates with a keyed stream: the order depends only on (seed, epoch)
    SplitMix64 rng = keyed_stream(run_seed, fnv1a64("shuffle") + static_cast<uint64_t>(epoch));
    for (int64_t i = n - 1; i > 0; --i)
      std::swap(order[static_cast<size_t>(i)],
                order[static_cast<size_t>(rng.below(static_cast<uint64_t>(i + 1)))]);

    for (int64_t start = 0; start + bs <= n; start += bs) {
      for (int64_t k = 0; k < bs; ++k) {
        const size_t idx = static_cast<size_t>(order[static_cast<size_t>(start + k)]);
        bu[static_cast<size_t>(k)] = data.user[idx];
        bi[static_cast<size_t>(k)] = data.item[idx];
        bc[static_cast<size_t>(k)] = data.category[idx];
        bclick[static_cast<size_t>(k)] = data.click[idx];
        bdmi[static_cast<size_t>(k)] = data.dmi[idx];
        bdma[static_cast<size_t>(k)] = data.dma[idx];
        bpay[static_cast<size_t>(k)] = data.pay[idx];
      }
      model::FeatureBatch batch;
      batch.fields = {bu, bi, bc};
      model::LabelBatch labels{bclick, bdmi, bdma, bpay};

      model::LossBreakdown breakdown;
      try {
        m.clear_grads();
        breakdown = m.loss(batch, labels, ws, true);
        if (!std::isfinite(breakdown.total))
          throw std::runtime_error("non-finite loss");
        m.sort_touched();
        adam.step(params);
      } catch (const ValidationError&) {
        throw;  // bad inputs, not divergence
      } catch (const std::runtime_error& e) {
        restore_snapshot();
        throw std::runtime_error("training diverged at step " +
                                 std::to_string(step) + " (" + e.what() +
                                 "); parameters restored to last epoch start");
      }
      m.sync_transposes();

      CurvePoint pt;
      pt.step = step;
      pt.total = breakdown.total;
      for (const auto& t : breakdown.tasks) pt.task_values.push_back(t.value);
      result.curve.push_back(std::move(pt));
      ++step;
    }
  }

  result.steps = step;
  const size_t window = std::min<size_t>(10, result.curve.size());
  for (size_t i = 0; i < window; ++i) {
    result.initial_loss += result.curve[i].total / static_cast<double>(window);
    result.final_loss +=
        result.curve[result.curve.size() - 1 - i].total / static_cast<double>(window);
  }
  return result;
}

}  // namespace cvrlab::harness
