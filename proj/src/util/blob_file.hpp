#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace cvrlab {

// Binary container: 8-byte magic, u32 little-endian header length, JSON
// header, then raw little-endian payload sections. The JSON header carries
// free-form metadata plus a section table (name, dtype, shape, offset).
// Checkpoints and generator state both use it.
class BlobWriter {
 public:
  void set_meta(nlohmann::json meta) { meta_ = std::move(meta); }

  void add_f32(const std::string& name, const float* data, size_t count,
               std::vector<int64_t> shape);
  void add_f64(const std::string& name, const double* data, size_t count,
               std::vector<int64_t> shape);
  void add_u32(const std::string& name, const uint32_t* data, size_t count,
               std::vector<int64_t> shape);

  void write(const std::string& path, const char magic[8]) const;

 private:
  void add_raw(const std::string& name, const char* dtype, const void* data,
               size_t bytes, std::vector<int64_t> shape);

  nlohmann::json meta_;
  nlohmann::json sections_ = nlohmann::json::array();
  std::vector<uint8_t> payload_;
};

class BlobReader {
 public:
  BlobReader(const std::string& path, const char magic[8]);

  const nlohmann::json& meta() const { return meta_; }
  bool has(const std::string& name) const;
  std::vector<int64_t> shape(const std::string& name) const;

  std::vector<float> read_f32(const std::string& name) const;
  std::vector<double> read_f64(const std::string& name) const;
  std::vector<uint32_t> read_u32(const std::string& name) const;

 private:
  const nlohmann::json& section(const std::string& name) const;
  void read_bytes(const nlohmann::json& sec, const char* dtype, void* out,
                  size_t bytes) const;

  std::string path_;
  nlohmann::json meta_;
  nlohmann::json sections_;
  std::vector<uint8_t> payload_;
};

}  // namespace cvrlab
