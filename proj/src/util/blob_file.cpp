#include "util/blob_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "util/errors.hpp"

// Payload arrays are memcpy'd; the on-disk format is little-endian.
static_assert(std::endian::native == std::endian::little,
              "big-endian hosts are not supported");

namespace cvrlab {

void BlobWriter::add_raw(const std::string& name, const char* dtype,
                         const void* data, size_t bytes,
                         std::vector<int64_t> shape) {
  nlohmann::json sec;
  sec["name"] = name;
  sec["dtype"] = dtype;
  sec["shape"] = shape;
  sec["offset"] = payload_.size();
  sec["byte_size"] = bytes;
  sections_.push_back(std::move(sec));
  const uint8_t* p = static_cast<const uint8_t*>(data);
  payload_.insert(payload_.end(), p, p + bytes);
}

void BlobWriter::add_f32(const std::string& name, const float* data,
                         size_t count, std::vector<int64_t> shape) {
  add_raw(name, "f32", data, count * sizeof(float), std::move(shape));
}

void BlobWriter::add_f64(const std::string& name, const double* data,
                         size_t count, std::vector<int64_t> shape) {
  add_raw(name, "f64", data, count * sizeof(double), std::move(shape));
}

void BlobWriter::add_u32(const std::string& name, const uint32_t* data,
                         size_t count, std::vector<int64_t> shape) {
  add_raw(name, "u32", data, count * sizeof(uint32_t), std::move(shape));
}

void BlobWriter::write(const std::string& path, const char magic[8]) const {
  nlohmann::json header;
  header["meta"] = meta_;
  header["sections"] = sections_;
  std::string htext = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(magic, 8);
  uint32_t hlen = static_cast<uint32_t>(htext.size());
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  out.write(reinterpret_cast<const char*>(payload_.data()),
            static_cast<std::streamsize>(payload_.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

BlobReader::BlobReader(const std::string& path, const char magic[8])
    : path_(path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  char m[8];
  in.read(m, 8);
  if (!in || std::memcmp(m, magic, 8) != 0)
    throw ValidationError("bad magic in " + path + " (wrong file type?)");
  uint32_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!in) throw ValidationError("truncated header in " + path);
  std::string htext(hlen, '\0');
  in.read(htext.data(), hlen);
  if (!in) throw ValidationError("truncated header in " + path);
  nlohmann::json header = nlohmann::json::parse(htext, nullptr, false);
  if (header.is_discarded())
    throw ValidationError("corrupt header JSON in " + path);
  meta_ = header.value("meta", nlohmann::json::object());
  sections_ = header.value("sections", nlohmann::json::array());
  payload_.assign(std::istreambuf_iterator<char>(in),
                  std::istreambuf_iterator<char>());
}

bool BlobReader::has(const std::string& name) const {
  for (const auto& s : sections_)
    if (s.at("name") == name) return true;
  return false;
}

const nlohmann::json& BlobReader::section(const std::string& name) const {
  for (const auto& s : sections_)
    if (s.at("name") == name) return s;
  throw ValidationError("section '" + name + "' not found in " + path_);
}

std::vector<int64_t> BlobReader::shape(const std::string& name) const {
  return section(name).at("shape").get<std::vector<int64_t>>();
}

void BlobReader::read_bytes(const nlohmann::json& sec, const char* dtype,
                            void* out, size_t bytes) const {
  if (sec.at("dtype") != dtype)
    throw ValidationError("section '" + std::string(sec.at("name")) +
                          "' has dtype " + std::string(sec.at("dtype")) +
                          ", expected " + dtype);
  size_t off = sec.at("offset").get<size_t>();
  size_t sz = sec.at("byte_size").get<size_t>();
  if (sz != bytes || off + sz > payload_.size())
    throw ValidationError("section '" + std::string(sec.at("name")) +
                          "' out of bounds in " + path_);
  std::memcpy(out, payload_.data() + off, bytes);
}

std::vector<float> BlobReader::read_f32(const std::string& name) const {
  const auto& sec = section(name);
  std::vector<float> v(sec.at("byte_size").get<size_t>() / sizeof(float));
  read_bytes(sec, "f32", v.data(), v.size() * sizeof(float));
  return v;
}

std::vector<double> BlobReader::read_f64(const std::string& name) const {
  const auto& sec = section(name);
  std::vector<double> v(sec.at("byte_size").get<size_t>() / sizeof(double));
  read_bytes(sec, "f64", v.data(), v.size() * sizeof(double));
  return v;
}

std::vector<uint32_t> BlobReader::read_u32(const std::string& name) const {
  const auto& sec = section(name);
  std::vector<uint32_t> v(sec.at("byte_size").get<size_t>() / sizeof(uint32_t));
  read_bytes(sec, "u32", v.data(), v.size() * sizeof(uint32_t));
  return v;
}

}  // namespace cvrlab
