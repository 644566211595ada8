#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "graph/composition.hpp"

namespace cvrlab::synth {

// Conditional rate targets for the observable label paths. Defaults follow
// industrial shopping-log proportions: clicks are ~3% of impressions, a
// quarter of clicks show a deterministic micro behavior, purchases are rare.
struct RateTargets {
  double click = 0.0298;
  double dmi_given_click = 0.247;
  double dma_given_click = 0.130;
  double purchase_given_click = 0.0342;
};

struct GeneratorConfig {
  int64_t n_users = 10000;
  int64_t n_items = 10000;
  int64_t n_categories = 100;
  int latent_dim = 8;

  // approximate stddev of each head's logit across (user, item) pairs;
  // controls how much ranking signal exists at all
  double logit_spread = 1.2;
  // weight-direction sharing: click head vs the shared direction, and
  // post-click heads vs the shared direction
  double ctr_correlation = 0.4;
  double post_correlation = 0.7;

  // ratio of advancing through the deterministic branch vs the other branch:
  // P(D-Ma | D-Mi) / P(D-Ma | O-Mi) and P(pay | D-Ma) / P(pay | O-Ma)
  double dma_lift = 4.0;
  double purchase_lift = 4.0;

  RateTargets rates;
  int64_t calibration_pairs = 200000;
  double calibration_rel_tol = 0.002;  // inside the +-2% contract
  uint64_t seed = 1;

  void validate() const;
};

struct ImpressionRecord {
  uint64_t impression_id = 0;
  uint32_t user_id = 0;
  uint32_t item_id = 0;
  uint32_t category_id = 0;
  uint8_t click = 0;
  uint8_t dmi = 0;
  uint8_t dma = 0;
  uint8_t pay = 0;
};

// Reachability on the behavior graph: post-click labels require the click,
// purchase does not require D-Ma (the O-Ma path converts too). Returns an
// explanation for the first violated implication, empty if consistent.
std::string check_record_invariants(const ImpressionRecord& r);

// Hidden latent-factor world. Ground truth for every (user, item) pair is a
// full six-head parameterization of the micro-first behavior graph:
// y_j(u, v) = logistic(a_j . phi(u, v) + b_j) with phi the concatenation of
// user latent, item latent and their elementwise product. Calibration picks
// the six biases so the observable conditional rates hit their targets.
class GenerativeModel {
 public:
  static GenerativeModel build(const GeneratorConfig& cfg);

  // Monotone bisection per head on the expected conditional rate over a
  // fixed Monte-Carlo pair sample. Heads are solved in dependency order
  // (click, micro, the two macro branches, the two purchase branches).
  // Throws ValidationError if a target is unreachable or bisection fails to
  // converge within 60 iterations.
  void calibrate();
  bool calibrated() const { return calibrated_; }

  graph::HeadProbabilities heads(uint32_t user, uint32_t item) const;
  graph::CompositeTargets ground_truth_targets(uint32_t user, uint32_t item) const;

  // Fully determined by (seed, impression_id): records can be produced in
  // any order or in parallel without changing their content.
  ImpressionRecord sample_impression(uint64_t impression_id) const;

  uint32_t category_of(uint32_t item) const;

  const GeneratorConfig& config() const { return cfg_; }
  const std::array<double, 6>& biases() const { return bias_; }
  // manual bias override, bypassing calibration (diagnostics and tests)
  void set_biases(const std::array<double, 6>& b) { bias_ = b; }
  // model-implied conditional rates at the calibration sample, in the order
  // click, dmi|click, dma|click, pay|click
  const std::array<double, 4>& implied_rates() const { return implied_; }

  void save(const std::string& path) const;
  static GenerativeModel load(const std::string& path);

 private:
  GenerativeModel() = default;

  double head_logit(int head, uint32_t user, uint32_t item) const;

  GeneratorConfig cfg_;
  std::vector<double> user_lat_;          // n_users x d
  std::vector<double> item_lat_;          // n_items x d
  std::vector<uint32_t> item_category_;   // n_items
  std::vector<double> head_w_;            // 6 x 3d
  std::array<double, 6> bias_{};
  std::array<double, 4> implied_{};
  bool calibrated_ = false;
};

}  // namespace cvrlab::synth
