#include "util/kv_file.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "util/errors.hpp"

namespace cvrlab {

namespace {

std::string trim(std::string_view s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  size_t b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

}  // namespace

void KvFile::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
}

void KvFile::set_i64(const std::string& key, int64_t v) {
  entries_[key] = std::to_string(v);
}

void KvFile::set_u64(const std::string& key, uint64_t v) {
  entries_[key] = std::to_string(v);
}

std::string KvFile::format_f64(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void KvFile::set_f64(const std::string& key, double v) {
  entries_[key] = format_f64(v);
}

bool KvFile::has(const std::string& key) const { return entries_.count(key) > 0; }

const std::string& KvFile::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ValidationError("missing key '" + key + "'");
  return it->second;
}

std::string KvFile::get_or(const std::string& key,
                           const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

std::optional<std::string> KvFile::find(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

int64_t KvFile::get_i64(const std::string& key) const {
  const std::string& s = get(key);
  int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ValidationError("key '" + key + "': not an integer: '" + s + "'");
  return v;
}

uint64_t KvFile::get_u64(const std::string& key) const {
  const std::string& s = get(key);
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ValidationError("key '" + key + "': not an unsigned integer: '" + s + "'");
  return v;
}

double KvFile::get_f64(const std::string& key) const {
  const std::string& s = get(key);
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || s.empty())
    throw ValidationError("key '" + key + "': not a number: '" + s + "'");
  return v;
}

bool KvFile::get_bool(const std::string& key) const {
  const std::string& s = get(key);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ValidationError("key '" + key + "': not a boolean: '" + s + "'");
}

std::string KvFile::serialize() const {
  std::ostringstream out;
  for (const auto& [k, v] : entries_) out << k << " = " << v << "\n";
  return out.str();
}

void KvFile::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << serialize();
  if (!out) throw std::runtime_error("write failed: " + path);
}

KvFile KvFile::parse_string(const std::string& text, const std::string& origin) {
  KvFile kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ValidationError(origin + ":" + std::to_string(lineno) +
                            ": expected 'key = value'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ValidationError(origin + ":" + std::to_string(lineno) + ": empty key");
    kv.entries_[key] = value;
  }
  return kv;
}

KvFile KvFile::parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config/kv file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path);
}

}  // namespace cvrlab
