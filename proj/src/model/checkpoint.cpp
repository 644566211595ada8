#include "model/checkpoint.hpp"

namespace cvrlab::model {

CheckpointInfo read_checkpoint_info(const std::string& path) {
  BlobReader r(path, kCheckpointMagic);
  const auto& meta = r.meta();
  if (meta.value("format_version", 0) != 1)
    throw ValidationError("unsupported checkpoint format in " + path);
  CheckpointInfo info;
  info.spec = ModelSpec::from_json(meta.at("spec"));
  info.step = meta.at("step").get<int64_t>();
  return info;
}

}  // namespace cvrlab::model
