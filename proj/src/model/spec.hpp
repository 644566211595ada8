#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graph/composition.hpp"
#include "json.hpp"

namespace cvrlab::model {

struct FieldSpec {
  std::string name;
  int64_t vocab = 0;
  int64_t dim = 16;
};

// Per-task loss weights. Tasks a variant does not define carry no loss at
// all (they are skipped, not zero-weighted into the sum).
struct LossWeights {
  double ctr = 1.0;
  double dmi = 1.0;
  double dma = 1.0;
  double ctcvr = 1.0;
};

struct ModelSpec {
  graph::Variant variant = graph::Variant::Hm3;
  std::vector<FieldSpec> fields;
  std::vector<int> head_widths = {128, 64, 32};
  LossWeights weights;
  uint64_t seed = 1;

  void validate() const;
  int64_t input_dim() const;  // sum of field dims

  nlohmann::json to_json() const;
  static ModelSpec from_json(const nlohmann::json& j);
};

}  // namespace cvrlab::model
