#include <cmath>
#include <vector>

#include "doctest.h"
#include "model/variant_model.hpp"
#include "nn/adam.hpp"
#include "nn/embedding.hpp"
#include "nn/grad_check.hpp"
#include "nn/loss.hpp"
#include "nn/mlp.hpp"
#include "util/rng.hpp"

using namespace cvrlab;

namespace {

// small hm3 model over tiny vocabularies, double precision
model::ModelSpec tiny_spec(graph::Variant v, uint64_t seed) {
  model::ModelSpec spec;
  spec.variant = v;
  spec.fields = {{"user", 40, 4}, {"item", 40, 4}, {"category", 8, 4}};
  spec.head_widths = {8, 4};
  spec.seed = seed;
  return spec;
}

struct TinyBatch {
  std::vector<uint32_t> u, i, c;
  std::vector<uint8_t> click, dmi, dma, pay;

  model::FeatureBatch features() const {
    model::FeatureBatch b;
    b.fields = {u, i, c};
    return b;
  }
  model::LabelBatch labels() const {
    return {click, dmi, dma, pay};
  }
};

TinyBatch random_batch(int64_t n, uint64_t seed) {
  TinyBatch b;
  SplitMix64 rng(seed);
  for (int64_t k = 0; k < n; ++k) {
    b.u.push_back(static_cast<uint32_t>(rng.below(40)));
    b.i.push_back(static_cast<uint32_t>(rng.below(40)));
    b.c.push_back(static_cast<uint32_t>(rng.below(8)));
    const bool click = rng.uniform() < 0.5;
    b.click.push_back(click);
    b.dmi.push_back(click && rng.uniform() < 0.5);
    b.dma.push_back(click && rng.uniform() < 0.5);
    b.pay.push_back(click && rng.uniform() < 0.4);
  }
  return b;
}

template <class S>
void zero_all_params(model::VariantModel<S>& m) {
  for (auto& p : m.params()) std::fill(p.value, p.value + p.size, S(0));
  m.sync_transposes();
}

}  // namespace

TEST_CASE("sigmoid output stays strictly inside (0, 1)") {
  CHECK(nn::sigmoid(0.0) == 0.5);
  CHECK(nn::sigmoid(1000.0) < 1.0);
  CHECK(nn::sigmoid(1000.0) > 0.0);
  CHECK(nn::sigmoid(-1000.0) > 0.0);
  CHECK(nn::sigmoid(-1000.0) < 1.0);
}

TEST_CASE("cross entropy values and gradients") {
  SUBCASE("logit-zero gradient is p - label") {
    const double p = nn::sigmoid(0.0);
    const auto ce = nn::cross_entropy(p, 1);
    // chain through dp/dz = p(1-p)
    CHECK(std::fabs(ce.dloss_dp * p * (1 - p) - (-0.5)) <= 1e-15);
  }
  SUBCASE("clamped perfect prediction") {
    const auto ce = nn::cross_entropy(1.0, 1);
    CHECK(ce.loss == -std::log(1.0 - nn::kProbClamp));
    CHECK(ce.dloss_dp == 0.0);  // inside the clamp the loss is flat
    CHECK(ce.loss < 1.1e-7);
  }
  SUBCASE("matches the definition on interior points") {
    const auto ce = nn::cross_entropy(0.3, 0);
    CHECK(std::fabs(ce.loss - (-std::log(0.7))) <= 1e-15);
    CHECK(std::fabs(ce.dloss_dp - (0.3 / (0.3 * 0.7))) <= 1e-12);
  }
}

TEST_CASE("forward with zero weights gives 0.5 everywhere") {
  model::VariantModel<double> m(tiny_spec(graph::Variant::Hm3, 1));
  zero_all_params(m);
  const auto batch = random_batch(6, 2);
  const auto targets = m.predict(batch.features());
  for (const auto& t : targets) {
    CHECK(t.p_ctr == 0.5);
    CHECK(t.p_cvr == 0.5);
    CHECK(t.p_ctcvr == 0.25);
  }
}

TEST_CASE("single linear unit matches the closed form") {
  // one field, one-row vocab, no hidden layers: logit = w . x + b
  model::ModelSpec spec;
  spec.variant = graph::Variant::Esmm;
  spec.fields = {{"f", 3, 2}};
  spec.head_widths = {};  // straight to the output unit
  spec.seed = 5;
  model::VariantModel<double> m(spec);

  auto params = m.params();
  // params: table (3x2), then per head l0.w (1x2) + l0.b (1)
  REQUIRE(params.size() == 5);
  double* table = params[0].value;
  table[0] = 0.3;
  table[1] = -0.2;  // row 0
  double* w1 = params[1].value;  // head_y1 weights
  w1[0] = 0.7;
  w1[1] = 0.5;
  params[2].value[0] = 0.11;  // head_y1 bias
  double* w4 = params[3].value;
  w4[0] = -0.4;
  w4[1] = 0.9;
  params[4].value[0] = -0.05;
  m.sync_transposes();

  std::vector<uint32_t> id = {0};
  model::FeatureBatch fb;
  fb.fields = {id};
  const auto t = m.predict(fb);
  const double z1 = 0.7 * 0.3 + 0.5 * -0.2 + 0.11;
  const double z4 = -0.4 * 0.3 + 0.9 * -0.2 + -0.05;
  CHECK(std::fabs(t[0].p_ctr - nn::sigmoid(z1)) <= 1e-15);
  CHECK(std::fabs(t[0].p_cvr - nn::sigmoid(z4)) <= 1e-15);
}

TEST_CASE("forward is deterministic") {
  model::VariantModel<double> m(tiny_spec(graph::Variant::Hm3, 77));
  const auto batch = random_batch(8, 3);
  const auto a = m.predict(batch.features());
  const auto b = m.predict(batch.features());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].p_ctr == b[i].p_ctr);
    CHECK(a[i].p_cvr == b[i].p_cvr);
    CHECK(a[i].p_ctcvr == b[i].p_ctcvr);
  }
}

TEST_CASE("backward: zero upstream means zero gradients") {
  // a zero-weighted loss produces zero upstream everywhere
  auto batch = random_batch(8, 6);
  model::ModelSpec spec = tiny_spec(graph::Variant::Hm3, 4);
  spec.weights = {0.0, 0.0, 0.0, 0.0};
  model::VariantModel<double> zero_w(spec);
  model::VariantModel<double>::Workspace ws;
  zero_w.clear_grads();
  zero_w.loss(batch.features(), batch.labels(), ws, true);
  for (auto& p : zero_w.params())
    for (int64_t k = 0; k < p.size; ++k) CHECK(p.grad[k] == 0.0);
}

TEST_CASE("one-layer linear head gradient equals the input outer product") {
  model::ModelSpec spec;
  spec.variant = graph::Variant::Esmm;
  spec.fields = {{"f", 4, 3}};
  spec.head_widths = {};
  spec.seed = 9;
  model::VariantModel<double> m(spec);
  auto params = m.params();

  std::vector<uint32_t> id = {2};
  std::vector<uint8_t> one = {1}, zero = {0};
  model::FeatureBatch fb;
  fb.fields = {id};
  model::LabelBatch lb{one, zero, zero, one};

  model::VariantModel<double>::Workspace ws;
  m.clear_grads();
  m.loss(fb, lb, ws, true);

  // ctr task: dL/dz1 = (y1 - 1); cvr head sees the ctcvr product rule
  const auto t = m.predict(fb);
  const double* x = params[0].value + 2 * 3;  // embedding row 2
  const double dz1_ctr = t[0].p_ctr - 1.0;    // from the ctr task alone
  // ctcvr task adds (p_ctcvr - 1)/(p(1-p)) * y4 * y1(1-y1) to slot 1
  const auto ce = nn::cross_entropy(t[0].p_ctcvr, 1);
  const double dz1 =
      dz1_ctr + ce.dloss_dp * t[0].p_cvr * t[0].p_ctr * (1 - t[0].p_ctr);
  const double* gw1 = params[1].grad;  // head_y1 l0.w gradient (1x3)
  for (int j = 0; j < 3; ++j)
    CHECK(std::fabs(gw1[j] - dz1 * x[j]) <= 1e-12);
  CHECK(std::fabs(params[2].grad[0] - dz1) <= 1e-12);
}

TEST_CASE("full multi-task gradients match finite differences") {
  for (graph::Variant v : graph::kAllVariants) {
    CAPTURE(graph::variant_name(v));
    model::VariantModel<double> m(tiny_spec(v, 21));
    auto batch = random_batch(16, 22);
    auto params = m.params();
    model::VariantModel<double>::Workspace ws;
    auto loss_fn = [&] {
      m.sync_transposes();
      return m.loss(batch.features(), batch.labels(), ws, false).total;
    };
    auto grads_fn = [&] {
      m.sync_transposes();
      m.clear_grads();
      m.loss(batch.features(), batch.labels(), ws, true);
    };
    const auto res = nn::grad_check(params, loss_fn, grads_fn, {});
    CHECK(res.pass);
    CHECK(res.worst_rel_error <= 1e-4);
  }
}

TEST_CASE("grad check localizes an injected fault") {
  model::VariantModel<double> m(tiny_spec(graph::Variant::Hm3, 33));
  auto batch = random_batch(8, 34);
  auto params = m.params();
  model::VariantModel<double>::Workspace ws;
  auto loss_fn = [&] {
    m.sync_transposes();
    return m.loss(batch.features(), batch.labels(), ws, false).total;
  };
  auto grads_fn = [&] {
    m.sync_transposes();
    m.clear_grads();
    m.loss(batch.features(), batch.labels(), ws, true);
  };
  nn::GradCheckOptions opt;
  // corrupt a head weight, not an (often untouched) embedding row: pick a
  // coordinate inside the first head tensor
  int64_t base = 0;
  for (const auto& p : params) {
    if (p.name.find("head_y1.l0.w") != std::string::npos) break;
    base += p.size;
  }
  opt.inject_index = base + 7;
  opt.inject_delta = 1e-3;
  const auto res = nn::grad_check(params, loss_fn, grads_fn, opt);
  CHECK(!res.pass);
  CHECK(res.worst_flat_index == base + 7);
}

TEST_CASE("adam basics") {
  SUBCASE("zero gradients from a fresh state leave parameters unchanged") {
    std::vector<double> theta = {1.0, -2.0, 3.0};
    std::vector<double> grad = {0.0, 0.0, 0.0};
    nn::ParamSet<double> set = {{"t", theta.data(), grad.data(), 3, {3}, nullptr, 0}};
    nn::AdamOptimizer<double> adam(set, {});
    adam.step(set);
    CHECK(theta == std::vector<double>{1.0, -2.0, 3.0});
  }
  SUBCASE("first step moves by about the learning rate") {
    std::vector<double> theta = {1.0};
    std::vector<double> grad = {0.5};
    nn::ParamSet<double> set = {{"t", theta.data(), grad.data(), 1, {1}, nullptr, 0}};
    nn::AdamConfig cfg;
    nn::AdamOptimizer<double> adam(set, cfg);
    adam.step(set);
    CHECK(std::fabs((1.0 - theta[0]) - cfg.learning_rate) <=
          1e-6 * cfg.learning_rate);
  }
  SUBCASE("steadily descends a convex quadratic") {
    // f(x) = (x - 3)^2 / 2, minimized at 3
    std::vector<double> theta = {0.0};
    std::vector<double> grad = {0.0};
    nn::ParamSet<double> set = {{"x", theta.data(), grad.data(), 1, {1}, nullptr, 0}};
    nn::AdamOptimizer<double> adam(set, {});
    std::vector<double> losses;
    for (int k = 0; k < 100; ++k) {
      grad[0] = theta[0] - 3.0;
      losses.push_back(0.5 * (theta[0] - 3.0) * (theta[0] - 3.0));
      adam.step(set);
    }
    for (size_t k = 5; k + 1 < losses.size(); ++k)
      CHECK(losses[k + 1] < losses[k]);
    CHECK(losses.back() < losses.front());
  }
  SUBCASE("non-finite gradients abort with the tensor name") {
    std::vector<double> theta = {1.0};
    std::vector<double> grad = {std::nan("")};
    nn::ParamSet<double> set = {{"bad", theta.data(), grad.data(), 1, {1}, nullptr, 0}};
    nn::AdamOptimizer<double> adam(set, {});
    CHECK_THROWS_WITH_AS(adam.step(set),
                         doctest::Contains("bad"), std::runtime_error);
  }
}

TEST_CASE("sparse embedding updates leave untouched rows bit-identical") {
  model::VariantModel<float> m(tiny_spec(graph::Variant::Hm3, 55));
  auto params = m.params();
  nn::AdamOptimizer<float> adam(params, {});

  // batch touching only a few ids
  TinyBatch batch;
  batch.u = {3, 3, 7};
  batch.i = {1, 2, 1};
  batch.c = {0, 4, 4};
  batch.click = {1, 0, 1};
  batch.dmi = {1, 0, 0};
  batch.dma = {0, 0, 1};
  batch.pay = {0, 0, 1};

  std::vector<std::vector<float>> before;
  for (auto& p : params) before.emplace_back(p.value, p.value + p.size);

  model::VariantModel<float>::Workspace ws;
  m.clear_grads();
  m.loss(batch.features(), batch.labels(), ws, true);
  m.sort_touched();
  adam.step(params);

  const auto& user_table = m.nets()[0].tables[0];
  for (int64_t row = 0; row < user_table.vocab(); ++row) {
    const bool touched = (row == 3 || row == 7);
    for (int64_t j = 0; j < user_table.dim(); ++j) {
      const float now = params[0].value[row * user_table.dim() + j];
      const float was = before[0][static_cast<size_t>(row * user_table.dim() + j)];
      if (touched)
        CHECK(now != was);
      else
        CHECK(now == was);
    }
  }

  // a second step touching different rows must leave rows 3/7 (values AND
  // moments) alone: their values stay bit-identical across the step
  std::vector<float> after_first(params[0].value, params[0].value + params[0].size);
  TinyBatch other;
  other.u = {11};
  other.i = {12};
  other.c = {5};
  other.click = {0};
  other.dmi = {0};
  other.dma = {0};
  other.pay = {0};
  m.clear_grads();
  m.loss(other.features(), other.labels(), ws, true);
  m.sort_touched();
  adam.step(params);
  for (int64_t row = 0; row < user_table.vocab(); ++row) {
    if (row == 11) continue;  // the only row this step may move
    for (int64_t j = 0; j < user_table.dim(); ++j)
      CHECK(params[0].value[row * user_table.dim() + j] ==
            after_first[static_cast<size_t>(row * user_table.dim() + j)]);
  }
}

TEST_CASE("head outputs stay in (0,1) under extreme weights") {
  model::VariantModel<double> m(tiny_spec(graph::Variant::Esmm, 66));
  for (auto& p : m.params())
    for (int64_t k = 0; k < p.size; ++k) p.value[k] = (k % 2) ? 80.0 : -80.0;
  m.sync_transposes();
  const auto batch = random_batch(16, 67);
  for (const auto& t : m.predict(batch.features())) {
    CHECK(t.p_ctr > 0.0);
    CHECK(t.p_ctr < 1.0);
    CHECK(t.p_cvr > 0.0);
    CHECK(t.p_cvr < 1.0);
  }
}
