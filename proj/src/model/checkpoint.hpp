#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "model/variant_model.hpp"
#include "util/blob_file.hpp"
#include "util/errors.hpp"
#include "util/fnv.hpp"

namespace cvrlab::model {

inline constexpr char kCheckpointMagic[8] = {'C', 'V', 'R', 'C', 'K', 'P', 'T', '1'};

struct CheckpointInfo {
  ModelSpec spec;
  int64_t step = 0;
};

CheckpointInfo read_checkpoint_info(const std::string& path);

// Versioned header (variant, shapes, seed, step) + every parameter tensor in
// declaration order as 32-bit little-endian reals. A text sidecar
// (<path>.tensors.txt) lists tensor names, shapes and FNV-1a checksums of
// the stored bytes.
template <class S>
void save_checkpoint(VariantModel<S>& model, int64_t step,
                     const std::string& path) {
  BlobWriter w;
  nlohmann::json meta;
  meta["format_version"] = 1;
  meta["spec"] = model.spec().to_json();
  meta["step"] = step;
  w.set_meta(meta);

  std::ofstream sidecar(path + ".tensors.txt", std::ios::binary);
  if (!sidecar)
    throw std::runtime_error("cannot open sidecar for writing: " + path);

  auto params = model.params();
  std::vector<float> buf;
  for (const auto& p : params) {
    buf.resize(static_cast<size_t>(p.size));
    for (int64_t i = 0; i < p.size; ++i)
      buf[static_cast<size_t>(i)] = static_cast<float>(p.value[i]);
    w.add_f32(p.name, buf.data(), buf.size(), p.shape);
    const uint64_t sum = fnv1a64(buf.data(), buf.size() * sizeof(float));
    sidecar << p.name;
    for (size_t d = 0; d < p.shape.size(); ++d)
      sidecar << (d == 0 ? " " : "x") << p.shape[d];
    char hex[24];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(sum));
    sidecar << " " << p.size << " " << hex << "\n";
  }
  if (!sidecar) throw std::runtime_error("sidecar write failed: " + path);
  w.write(path, kCheckpointMagic);
}

template <class S>
VariantModel<S> load_checkpoint(const std::string& path,
                                int64_t* step_out = nullptr) {
  BlobReader r(path, kCheckpointMagic);
  const auto& meta = r.meta();
  if (meta.value("format_version", 0) != 1)
    throw ValidationError("unsupported checkpoint format in " + path);
  ModelSpec spec = ModelSpec::from_json(meta.at("spec"));
  if (step_out) *step_out = meta.at("step").get<int64_t>();

  VariantModel<S> model(spec);
  auto params = model.params();
  for (auto& p : params) {
    const auto data = r.read_f32(p.name);
    if (static_cast<int64_t>(data.size()) != p.size)
      throw ValidationError("checkpoint tensor '" + p.name +
                            "' has wrong size in " + path);
    for (int64_t i = 0; i < p.size; ++i)
      p.value[i] = static_cast<S>(data[static_cast<size_t>(i)]);
  }
  model.sync_transposes();
  return model;
}

}  // namespace cvrlab::model
