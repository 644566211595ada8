#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "synth/generator.hpp"
#include "util/kv_file.hpp"

namespace cvrlab::synth {

inline constexpr const char* kLogHeader =
    "impression_id,user_id,item_id,category_id,click,dmi,dma,pay";
inline constexpr const char* kGeneratorVersion = "1";

// Counts and realized conditional rates of one log file. Rates are exactly
// the double quotients of the stored counts, so they can always be
// recomputed bit-identically from the log itself.
struct LogManifest {
  uint64_t record_count = 0;
  uint64_t clicks = 0;
  uint64_t dmis = 0;
  uint64_t dmas = 0;
  uint64_t purchases = 0;
  uint64_t seed = 0;
  std::string generator_version = kGeneratorVersion;

  double rate_click() const;
  double rate_dmi_given_click() const;
  double rate_dma_given_click() const;
  double rate_purchase_given_click() const;

  KvFile to_kv() const;
  static LogManifest from_kv(const KvFile& kv);
  void write(const std::string& path) const;
  static LogManifest read(const std::string& path);
};

// Streams records to a UTF-8 CSV with a fixed header line. Callers append in
// impression-id order; content is independent of how records were produced.
class LogWriter {
 public:
  LogWriter(const std::string& path, uint64_t seed);
  void append(const ImpressionRecord& rec);
  // flushes, closes and returns the manifest
  LogManifest finish();

 private:
  std::ofstream out_;
  std::string path_;
  LogManifest manifest_;
  bool finished_ = false;
};

// Line-by-line reader; validates field ranges and the reachability
// implications of every record, reporting the offending line number.
class LogReader {
 public:
  explicit LogReader(const std::string& path);
  bool next(ImpressionRecord& rec);
  uint64_t records_read() const { return count_; }

 private:
  std::ifstream in_;
  std::string path_;
  std::string line_;
  uint64_t lineno_ = 0;
  uint64_t count_ = 0;
};

std::vector<ImpressionRecord> read_log(const std::string& path);

// Recomputes a manifest (minus seed/version) by scanning a log.
LogManifest scan_log(const std::string& path, uint64_t seed);

}  // namespace cvrlab::synth
