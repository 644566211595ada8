#include "synth/log_io.hpp"

#include <charconv>
#include <cstdio>

#include "util/errors.hpp"

namespace cvrlab::synth {

namespace {

double ratio(uint64_t num, uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double LogManifest::rate_click() const { return ratio(clicks, record_count); }
double LogManifest::rate_dmi_given_click() const { return ratio(dmis, clicks); }
double LogManifest::rate_dma_given_click() const { return ratio(dmas, clicks); }
double LogManifest::rate_purchase_given_click() const {
  return ratio(purchases, clicks);
}

KvFile LogManifest::to_kv() const {
  KvFile kv;
  kv.set_u64("record_count", record_count);
  kv.set_u64("clicks", clicks);
  kv.set_u64("dmis", dmis);
  kv.set_u64("dmas", dmas);
  kv.set_u64("purchases", purchases);
  kv.set_f64("rate.click", rate_click());
  kv.set_f64("rate.dmi_given_click", rate_dmi_given_click());
  kv.set_f64("rate.dma_given_click", rate_dma_given_click());
  kv.set_f64("rate.purchase_given_click", rate_purchase_given_click());
  kv.set_u64("seed", seed);
  kv.set("generator_version", generator_version);
  return kv;
}

LogManifest LogManifest::from_kv(const KvFile& kv) {
  LogManifest m;
  m.record_count = kv.get_u64("record_count");
  m.clicks = kv.get_u64("clicks");
  m.dmis = kv.get_u64("dmis");
  m.dmas = kv.get_u64("dmas");
  m.purchases = kv.get_u64("purchases");
  m.seed = kv.get_u64("seed");
  m.generator_version = kv.get("generator_version");
  // stored rates must be exactly the quotients of the stored counts
  for (auto [key, expect] :
       {std::pair<const char*, double>{"rate.click", m.rate_click()},
        {"rate.dmi_given_click", m.rate_dmi_given_click()},
        {"rate.dma_given_click", m.rate_dma_given_click()},
        {"rate.purchase_given_click", m.rate_purchase_given_click()}}) {
    if (kv.get(key) != KvFile::format_f64(expect))
      throw ValidationError(std::string("manifest rate '") + key +
                            "' does not match its counts");
  }
  return m;
}

void LogManifest::write(const std::string& path) const { to_kv().write_file(path); }

LogManifest LogManifest::read(const std::string& path) {
  return from_kv(KvFile::parse_file(path));
}

LogWriter::LogWriter(const std::string& path, uint64_t seed)
    : out_(path, std::ios::binary), path_(path) {
  if (!out_) throw std::runtime_error("cannot open log for writing: " + path);
  manifest_.seed = seed;
  out_ << kLogHeader << "\n";
}

void LogWriter::append(const ImpressionRecord& rec) {
  const std::string why = check_record_invariants(rec);
  if (!why.empty())
    throw ValidationError("refusing to write inconsistent record " +
                          std::to_string(rec.impression_id) + ": " + why);
  char buf[96];
  const int n = std::snprintf(buf, sizeof(buf), "%llu,%u,%u,%u,%u,%u,%u,%u\n",
                              static_cast<unsigned long long>(rec.impression_id),
                              rec.user_id, rec.item_id, rec.category_id,
                              rec.click, rec.dmi, rec.dma, rec.pay);
  out_.write(buf, n);
  ++manifest_.record_count;
  manifest_.clicks += rec.click;
  manifest_.dmis += rec.dmi;
  manifest_.dmas += rec.dma;
  manifest_.purchases += rec.pay;
}

LogManifest LogWriter::finish() {
  if (!finished_) {
    out_.flush();
    if (!out_) throw std::runtime_error("write failed: " + path_);
    out_.close();
    finished_ = true;
  }
  return manifest_;
}

LogReader::LogReader(const std::string& path)
    : in_(path, std::ios::binary), path_(path) {
  if (!in_) throw ValidationError("cannot open log: " + path);
  if (!std::getline(in_, line_) || line_ != kLogHeader)
    throw ValidationError(path + ":1: missing or wrong header line");
  lineno_ = 1;
}

bool LogReader::next(ImpressionRecord& rec) {
  if (!std::getline(in_, line_)) return false;
  ++lineno_;
  if (!line_.empty() && line_.back() == '\r') line_.pop_back();

  const char* p = line_.data();
  const char* end = p + line_.size();
  uint64_t fields[8];
  for (int f = 0; f < 8; ++f) {
    auto [next_p, ec] = std::from_chars(p, end, fields[f]);
    const bool last = (f == 7);
    if (ec != std::errc() || (last ? next_p != end
                                   : (next_p == end || *next_p != ',')))
      throw ValidationError(path_ + ":" + std::to_string(lineno_) +
                            ": malformed record line");
    p = last ? next_p : next_p + 1;
  }
  rec.impression_id = fields[0];
  rec.user_id = static_cast<uint32_t>(fields[1]);
  rec.item_id = static_cast<uint32_t>(fields[2]);
  rec.category_id = static_cast<uint32_t>(fields[3]);
  for (int f = 4; f < 8; ++f)
    if (fields[f] > 1)
      throw ValidationError(path_ + ":" + std::to_string(lineno_) +
                            ": label fields must be 0 or 1");
  rec.click = static_cast<uint8_t>(fields[4]);
  rec.dmi = static_cast<uint8_t>(fields[5]);
  rec.dma = static_cast<uint8_t>(fields[6]);
  rec.pay = static_cast<uint8_t>(fields[7]);

  const std::string why = check_record_invariants(rec);
  if (!why.empty())
    throw ValidationError(path_ + ":" + std::to_string(lineno_) + ": " + why);
  ++count_;
  return true;
}

std::vector<ImpressionRecord> read_log(const std::string& path) {
  LogReader reader(path);
  std::vector<ImpressionRecord> out;
  ImpressionRecord rec;
  while (reader.next(rec)) out.push_back(rec);
  return out;
}

LogManifest scan_log(const std::string& path, uint64_t seed) {
  LogReader reader(path);
  LogManifest m;
  m.seed = seed;
  ImpressionRecord rec;
  while (reader.next(rec)) {
    ++m.record_count;
    m.clicks += rec.click;
    m.dmis += rec.dmi;
    m.dmas += rec.dma;
    m.purchases += rec.pay;
  }
  return m;
}

}  // namespace cvrlab::synth
