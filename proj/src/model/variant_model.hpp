#pragma once

#include <algorithm>
#include <array>
#include <span>
#include <string>
#include <vector>

#include "graph/composition.hpp"
#include "model/spec.hpp"
#include "nn/embedding.hpp"
#include "nn/loss.hpp"
#include "nn/mlp.hpp"
#include "nn/params.hpp"
#include "util/errors.hpp"
#include "util/fnv.hpp"
#include "util/rng.hpp"

namespace cvrlab::model {

struct FeatureBatch {
  std::vector<std::span<const uint32_t>> fields;
  int64_t size() const {
    return fields.empty() ? 0 : static_cast<int64_t>(fields[0].size());
  }
};

struct LabelBatch {
  std::span<const uint8_t> click, dmi, dma, pay;
};

struct TaskLoss {
  std::string name;
  double value = 0.0;  // mean over participating examples
  double weight = 1.0;
  int64_t count = 0;
};

struct LossBreakdown {
  double total = 0.0;  // sum of weight * value over tasks
  std::vector<TaskLoss> tasks;
};

// One multi-task network: a shared feature embedding module feeding parallel
// sigmoid heads, one per wired probability slot. hm3/hm3r wire all six
// slots, esm2 four, esmm two. base is special: two fully independent
// networks (separate embeddings) for the click and conversion tasks.
template <class S>
class VariantModel {
 public:
  struct Workspace {
    std::vector<std::vector<S>> input;    // per net: B x input_dim
    std::vector<std::vector<S>> dinput;   // per net: B x input_dim
    std::vector<typename nn::MlpHead<S>::Cache> caches;  // per global head
    std::vector<std::vector<double>> logits;             // per global head
    std::vector<std::vector<double>> dlogits;
    std::vector<graph::HeadProbabilities> heads;         // per example
  };

  explicit VariantModel(const ModelSpec& spec) : spec_(spec) {
    spec_.validate();
    const auto v = spec_.variant;
    if (v == graph::Variant::Base) {
      nets_.push_back(make_net("ctr_net.", {1}));
      nets_.push_back(make_net("cvr_net.", {4}));
    } else if (v == graph::Variant::Esmm) {
      nets_.push_back(make_net("", {1, 4}));
    } else if (v == graph::Variant::Esm2) {
      nets_.push_back(make_net("", {1, 3, 4, 6}));
    } else {
      nets_.push_back(make_net("", {1, 2, 3, 4, 5, 6}));
    }
    build_tasks();
  }

  const ModelSpec& spec() const { return spec_; }
  graph::Variant variant() const { return spec_.variant; }

  int64_t parameter_count() const {
    int64_t n = 0;
    for (const auto& net : nets_) {
      for (const auto& t : net.tables) n += t.vocab() * t.dim();
      for (const auto& h : net.heads) n += h.parameter_count();
    }
    return n;
  }

  // slots wired across all nets, ascending
  std::vector<int> active_slots() const {
    std::vector<int> slots;
    for (const auto& net : nets_)
      slots.insert(slots.end(), net.slots.begin(), net.slots.end());
    std::sort(slots.begin(), slots.end());
    return slots;
  }

  std::vector<std::string> task_names() const {
    std::vector<std::string> names;
    for (const auto& t : tasks_) names.push_back(t.name);
    return names;
  }

  // Bindings in declaration order: per net, embedding tables in field order,
  // then heads in slot order with each layer's weights before its bias.
  nn::ParamSet<S> params() {
    nn::ParamSet<S> set;
    for (auto& net : nets_) {
      for (auto& t : net.tables) {
        set.push_back({net.prefix + t.name(), t.weights(), t.grads(),
                       t.vocab() * t.dim(),
                       {t.vocab(), t.dim()},
                       &t.touched(),
                       t.dim()});
      }
      for (size_t hi = 0; hi < net.heads.size(); ++hi) {
        auto& head = net.heads[hi];
        auto& layers = head.layers();
        for (size_t l = 0; l < layers.size(); ++l) {
          auto& layer = layers[l];
          const std::string base =
              net.prefix + head.name() + ".l" + std::to_string(l);
          set.push_back({base + ".w", layer.w.data(), layer.gw.data(),
                         layer.in * layer.out,
                         {layer.out, layer.in},
                         nullptr,
                         0});
          set.push_back({base + ".b", layer.b.data(), layer.gb.data(),
                         layer.out,
                         {layer.out},
                         nullptr,
                         0});
        }
      }
    }
    return set;
  }

  void forward(const FeatureBatch& batch, Workspace& ws) const {
    check_batch(batch);
    const int64_t B = batch.size();
    const int64_t D = spec_.input_dim();
    ws.input.resize(nets_.size());
    const size_t total_heads = head_total();
    ws.caches.resize(total_heads);
    ws.logits.resize(total_heads);
    ws.heads.assign(static_cast<size_t>(B), default_heads());

    size_t gh = 0;
    for (size_t ni = 0; ni < nets_.size(); ++ni) {
      const auto& net = nets_[ni];
      auto& x = ws.input[ni];
      x.resize(static_cast<size_t>(B * D));
      int64_t col = 0;
      for (size_t f = 0; f < net.tables.size(); ++f) {
        net.tables[f].lookup(batch.fields[f], x.data() + col, D);
        col += net.tables[f].dim();
      }
      for (size_t hi = 0; hi < net.heads.size(); ++hi, ++gh) {
        ws.logits[gh].resize(static_cast<size_t>(B));
        net.heads[hi].forward(x.data(), B, D, ws.caches[gh], ws.logits[gh].data());
        const int slot = net.slots[hi];
        for (int64_t k = 0; k < B; ++k) {
          const double z = ws.logits[gh][static_cast<size_t>(k)];
          if (!std::isfinite(z))
            throw std::runtime_error("non-finite activation in " + net.prefix +
                                     net.heads[hi].name() +
                                     " (training diverged?)");
          set_slot(ws.heads[static_cast<size_t>(k)], slot, nn::sigmoid(z));
        }
      }
    }
  }

  std::vector<graph::CompositeTargets> predict(const FeatureBatch& batch,
                                               Workspace& ws) const {
    forward(batch, ws);
    std::vector<graph::CompositeTargets> out;
    out.reserve(static_cast<size_t>(batch.size()));
    for (const auto& h : ws.heads) out.push_back(graph::compose(spec_.variant, h));
    return out;
  }

  std::vector<graph::CompositeTargets> predict(const FeatureBatch& batch) const {
    Workspace ws;
    return predict(batch, ws);
  }

  // Multi-task cross-entropy over the composed targets. Entire-space tasks
  // average over the whole batch; the base conversion task averages over
  // clicked examples only (and is skipped entirely when none are present).
  // With backward=true, parameter gradients accumulate into the model.
  LossBreakdown loss(const FeatureBatch& batch, const LabelBatch& labels,
                     Workspace& ws, bool backward) {
    forward(batch, ws);
    const int64_t B = batch.size();
    check_labels(labels, B);

    LossBreakdown out;
    const size_t total_heads = head_total();
    if (backward) {
      ws.dlogits.resize(total_heads);
      for (auto& d : ws.dlogits) d.assign(static_cast<size_t>(B), 0.0);
    }

    std::vector<int64_t> counts(tasks_.size(), 0);
    for (const auto& t : tasks_) {
      out.tasks.push_back({t.name, 0.0, t.weight, 0});
    }
    for (size_t ti = 0; ti < tasks_.size(); ++ti) {
      if (tasks_[ti].clicked_only) {
        for (int64_t k = 0; k < B; ++k)
          counts[ti] += labels.click[static_cast<size_t>(k)];
      } else {
        counts[ti] = B;
      }
      out.tasks[ti].count = counts[ti];
    }

    for (int64_t k = 0; k < B; ++k) {
      const auto& h = ws.heads[static_cast<size_t>(k)];
      const auto composed = graph::compose(spec_.variant, h);
      const auto jac = graph::composition_gradients(spec_.variant, h);
      std::array<double, 6> dl_dy{};

      for (size_t ti = 0; ti < tasks_.size(); ++ti) {
        const auto& task = tasks_[ti];
        if (task.clicked_only && !labels.click[static_cast<size_t>(k)]) continue;
        if (counts[ti] == 0) continue;
        const int label = label_of(labels, task.label, k);
        const double p = target_of(composed, task.jac_row);
        const auto ce = nn::cross_entropy(p, label);
        out.tasks[ti].value += ce.loss / static_cast<double>(counts[ti]);
        if (backward) {
          const double scale =
              task.weight * ce.dloss_dp / static_cast<double>(counts[ti]);
          for (int j = 0; j < 6; ++j)
            dl_dy[static_cast<size_t>(j)] +=
                scale * jac.d[static_cast<size_t>(task.jac_row)][static_cast<size_t>(j)];
        }
      }

      if (backward) {
        size_t gh = 0;
        for (const auto& net : nets_) {
          for (size_t hi = 0; hi < net.heads.size(); ++hi, ++gh) {
            const int slot = net.slots[hi];
            const double y = get_slot(h, slot);
            ws.dlogits[gh][static_cast<size_t>(k)] =
                dl_dy[static_cast<size_t>(slot - 1)] * y * (1.0 - y);
          }
        }
      }
    }

    for (const auto& t : out.tasks) out.total += t.weight * t.value;

    if (backward) {
      const int64_t D = spec_.input_dim();
      ws.dinput.resize(nets_.size());
      size_t gh = 0;
      for (size_t ni = 0; ni < nets_.size(); ++ni) {
        auto& net = nets_[ni];
        auto& dx = ws.dinput[ni];
        dx.assign(static_cast<size_t>(B * D), S(0));
        for (size_t hi = 0; hi < net.heads.size(); ++hi, ++gh) {
          net.heads[hi].backward(ws.input[ni].data(), B, D, ws.caches[gh],
                                 ws.dlogits[gh].data(), dx.data(), D);
        }
        int64_t col = 0;
        for (size_t f = 0; f < net.tables.size(); ++f) {
          net.tables[f].scatter_add(batch.fields[f], dx.data() + col, D);
          col += net.tables[f].dim();
        }
      }
    }
    return out;
  }

  void clear_grads() {
    for (auto& net : nets_) {
      for (auto& t : net.tables) t.clear_batch_state();
      for (auto& h : net.heads) h.clear_grads();
    }
  }

  void sync_transposes() {
    for (auto& net : nets_)
      for (auto& h : net.heads) h.sync_transposes();
  }

  void sort_touched() {
    for (auto& net : nets_)
      for (auto& t : net.tables) t.sort_touched();
  }

  // Overrides the output-layer bias of every head wired to this slot (base
  // has slot 1 and slot 4 in different nets).
  void set_output_bias(int slot, double logit) {
    bool found = false;
    for (auto& net : nets_)
      for (size_t hi = 0; hi < net.heads.size(); ++hi)
        if (net.slots[hi] == slot) {
          net.heads[hi].set_output_bias(static_cast<S>(logit));
          found = true;
        }
    if (!found)
      throw ValidationError("variant has no head for slot y" + std::to_string(slot));
  }

  struct Net {
    std::string prefix;
    std::vector<nn::EmbeddingTable<S>> tables;
    std::vector<int> slots;
    std::vector<nn::MlpHead<S>> heads;
  };

  std::vector<Net>& nets() { return nets_; }
  const std::vector<Net>& nets() const { return nets_; }

 private:
  struct TaskDef {
    std::string name;
    int jac_row = 0;
    int label = 0;  // 0 click, 1 dmi, 2 dma, 3 pay
    bool clicked_only = false;
    double weight = 1.0;
  };

  Net make_net(const std::string& prefix, std::vector<int> slots) {
    Net net;
    net.prefix = prefix;
    net.slots = std::move(slots);
    for (size_t f = 0; f < spec_.fields.size(); ++f) {
      const auto& fs = spec_.fields[f];
      const uint64_t seed =
          mix64(spec_.seed ^ fnv1a64(prefix + fs.name + "_emb"));
      net.tables.emplace_back(fs.name + "_emb", fs.vocab, fs.dim, seed);
    }
    for (int slot : net.slots) {
      const std::string name = "head_y" + std::to_string(slot);
      const uint64_t seed = mix64(spec_.seed ^ fnv1a64(prefix + name));
      net.heads.emplace_back(name, spec_.input_dim(),
                             std::span<const int>(spec_.head_widths), seed);
    }
    return net;
  }

  void build_tasks() {
    using J = graph::CompositionJacobian;
    const auto& w = spec_.weights;
    switch (spec_.variant) {
      case graph::Variant::Hm3:
      case graph::Variant::Hm3Reversed:
        tasks_ = {{"ctr", J::kCtr, 0, false, w.ctr},
                  {"dmi", J::kDmi, 1, false, w.dmi},
                  {"dma", J::kDma, 2, false, w.dma},
                  {"ctcvr", J::kCtcvr, 3, false, w.ctcvr}};
        break;
      case graph::Variant::Esm2:
        tasks_ = {{"ctr", J::kCtr, 0, false, w.ctr},
                  {"dma", J::kDma, 2, false, w.dma},
                  {"ctcvr", J::kCtcvr, 3, false, w.ctcvr}};
        break;
      case graph::Variant::Esmm:
        tasks_ = {{"ctr", J::kCtr, 0, false, w.ctr},
                  {"ctcvr", J::kCtcvr, 3, false, w.ctcvr}};
        break;
      case graph::Variant::Base:
        // independent networks: clicks train one, clicked conversions the other
        tasks_ = {{"ctr", J::kCtr, 0, false, w.ctr},
                  {"cvr", J::kCvr, 3, true, 1.0}};
        break;
    }
  }

  size_t head_total() const {
    size_t n = 0;
    for (const auto& net : nets_) n += net.heads.size();
    return n;
  }

  void check_batch(const FeatureBatch& batch) const {
    if (batch.fields.size() != spec_.fields.size())
      throw ValidationError("batch has wrong field count");
    for (size_t f = 1; f < batch.fields.size(); ++f)
      if (batch.fields[f].size() != batch.fields[0].size())
        throw ValidationError("batch fields have mismatched lengths");
  }

  static void check_labels(const LabelBatch& labels, int64_t B) {
    const size_t n = static_cast<size_t>(B);
    if (labels.click.size() != n || labels.dmi.size() != n ||
        labels.dma.size() != n || labels.pay.size() != n)
      throw ValidationError("label arrays have wrong length");
  }

  static graph::HeadProbabilities default_heads() {
    graph::HeadProbabilities h;
    h.y1 = h.y2 = h.y3 = h.y4 = h.y5 = h.y6 = 0.5;  // unwired slots stay 0.5
    return h;
  }

  static void set_slot(graph::HeadProbabilities& h, int slot, double v) {
    switch (slot) {
      case 1: h.y1 = v; return;
      case 2: h.y2 = v; return;
      case 3: h.y3 = v; return;
      case 4: h.y4 = v; return;
      case 5: h.y5 = v; return;
      case 6: h.y6 = v; return;
    }
  }

  static double get_slot(const graph::HeadProbabilities& h, int slot) {
    switch (slot) {
      case 1: return h.y1;
      case 2: return h.y2;
      case 3: return h.y3;
      case 4: return h.y4;
      case 5: return h.y5;
      case 6: return h.y6;
    }
    return 0.0;
  }

  static int label_of(const LabelBatch& labels, int which, int64_t k) {
    const size_t i = static_cast<size_t>(k);
    switch (which) {
      case 0: return labels.click[i];
      case 1: return labels.dmi[i];
      case 2: return labels.dma[i];
      default: return labels.pay[i];
    }
  }

  static double target_of(const graph::CompositeTargets& t, int row) {
    using J = graph::CompositionJacobian;
    switch (row) {
      case J::kCtr: return t.p_ctr;
      case J::kDmi: return t.p_dmi.value();
      case J::kDma: return t.p_dma.value();
      case J::kCvr: return t.p_cvr;
      default: return t.p_ctcvr;
    }
  }

  ModelSpec spec_;
  std::vector<Net> nets_;
  std::vector<TaskDef> tasks_;
};

}  // namespace cvrlab::model
