#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace cvrlab {

// Flat `key = value` text file with '#' comments. Keys are dotted paths.
// Serialization is sorted by key, so equal content means equal bytes;
// manifests, metric reports and configs all go through this class.
class KvFile {
 public:
  void set(const std::string& key, const std::string& value);
  void set_i64(const std::string& key, int64_t v);
  void set_u64(const std::string& key, uint64_t v);
  // %.17g, round-trips doubles exactly
  void set_f64(const std::string& key, double v);

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  int64_t get_i64(const std::string& key) const;
  uint64_t get_u64(const std::string& key) const;
  double get_f64(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  std::optional<std::string> find(const std::string& key) const;

  std::string serialize() const;
  void write_file(const std::string& path) const;

  static KvFile parse_string(const std::string& text, const std::string& origin);
  static KvFile parse_file(const std::string& path);

  static std::string format_f64(double v);

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace cvrlab
