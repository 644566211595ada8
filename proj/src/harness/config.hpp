#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "model/spec.hpp"
#include "nn/adam.hpp"
#include "synth/generator.hpp"
#include "util/kv_file.hpp"

namespace cvrlab::harness {

// Whole-experiment configuration: generator world, model architecture,
// training hyperparameters and the seed list. Loaded from a flat dotted-key
// text file; a `preset = <name>` line starts from a named preset and the
// remaining keys override it. The canonical serialization (to_kv) is the
// config-hash source.
struct ExperimentConfig {
  synth::GeneratorConfig gen;
  int64_t train_impressions = 1000000;
  int64_t test_impressions = 250000;

  int64_t embedding_dim = 16;
  std::vector<int> head_widths = {128, 64, 32};
  model::LossWeights weights;

  int64_t batch_size = 1024;
  int epochs = 1;
  nn::AdamConfig adam;
  std::string precision = "f64";  // f32 | f64
  bool deterministic = true;
  // initialize each head's output bias to the logit of its conditional label
  // rate estimated from the training log
  bool bias_prior_init = true;

  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};

  void validate() const;
  KvFile to_kv() const;
  uint64_t config_hash() const;

  static ExperimentConfig from_kv(const KvFile& kv);
  static ExperimentConfig load(const std::string& path);
  static ExperimentConfig preset(const std::string& name);
  static std::vector<std::string> preset_names();

  // model spec for one run; the field vocabularies come from the generator
  model::ModelSpec model_spec(graph::Variant variant, uint64_t seed) const;
};

// Resolves a path against CVRLAB_OUTPUT_ROOT when the variable is set and
// the path is relative; otherwise returns it unchanged.
std::string resolve_output_path(const std::string& path);

}  // namespace cvrlab::harness
