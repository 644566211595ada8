#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "graph/composition.hpp"
#include "harness/config.hpp"
#include "synth/log_io.hpp"

namespace cvrlab::harness {

struct GenerateResult {
  std::string data_dir;
  synth::LogManifest train_manifest;
  synth::LogManifest test_manifest;
  std::array<double, 4> implied_rates{};  // click, dmi|c, dma|c, pay|c
};

// Builds and calibrates the generative world, writes generator state, the
// train/test logs (disjoint impression-id ranges) and their manifests, and
// re-scans both logs to verify the manifests. Fails on unreachable rate
// targets.
GenerateResult run_generate(const ExperimentConfig& cfg, const std::string& out_dir);

struct TrainRunResult {
  std::string run_dir;
  std::string checkpoint_path;
  int64_t steps = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double wall_seconds = 0.0;
};

// Trains one variant on data_dir/train.csv at the configured precision and
// writes checkpoint.bin (+ sidecar), curve.csv and run.json under run_dir.
// On divergence the last-good parameters land in checkpoint.last_good.bin
// and the error is rethrown.
TrainRunResult run_train(const ExperimentConfig& cfg, graph::Variant variant,
                         uint64_t seed, const std::string& data_dir,
                         const std::string& run_dir);

// model_source is a checkpoint path, or "oracle" to score the test log with
// the generator's ground-truth targets (the achievable ceiling). Writes
// metrics.kv, metrics.txt and eval.json under out_dir.
void run_eval(const std::string& model_source, const std::string& data_dir,
              const std::string& out_dir);

// Aggregates every eval.json under runs_root into a comparison table:
// per-variant mean +- std over seeds and pairwise seed-matched win counts.
// Writes report.txt and report.kv under out_dir.
void run_report(const std::string& runs_root, const std::string& out_dir);

struct OracleCheckResult {
  bool pass = false;
  uint64_t draws_per_variant = 0;
  double max_abs_diff = 0.0;
  std::string detail;  // counterexample on failure
};

// Closed-form composition vs path enumeration on random head vectors for
// every variant, plus degenerate 0/1 corners and the bit-exact
// p_ctcvr == p_ctr * p_cvr identity.
OracleCheckResult run_oracle_check(uint64_t draws_per_variant, uint64_t seed);

struct GradCheckRun {
  std::string variant;
  bool pass = false;
  double worst_rel_error = 0.0;
  std::string worst_tensor;
  int64_t worst_flat_index = -1;
  int64_t checked = 0;
};

// Full four-task loss of a small 64-bit model on a 32-example batch against
// central finite differences. variant_name "all" checks every variant.
std::vector<GradCheckRun> run_grad_check(const std::string& variant_name,
                                         uint64_t seed, double tolerance);

}  // namespace cvrlab::harness
