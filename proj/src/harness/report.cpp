#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "harness/pipeline.hpp"
#include "json.hpp"
#include "util/errors.hpp"
#include "util/kv_file.hpp"

namespace fs = std::filesystem;

namespace cvrlab::harness {

namespace {

struct RunEntry {
  std::string variant;
  std::string seed;  // "-" for the oracle reference
  std::optional<double> cvr_auc;
  std::optional<double> ctcvr_auc;
};

struct Stats {
  int n = 0;
  double mean = 0.0;
  std::optional<double> stddev;  // absent for n < 2
};

Stats summarize(const std::vector<double>& xs) {
  Stats s;
  s.n = static_cast<int>(xs.size());
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() >= 2) {
    double acc = 0.0;
    for (double x : xs) acc += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(acc / static_cast<double>(xs.size() - 1));
  }
  return s;
}

// canonical row order; anything unknown goes after, alphabetically
int variant_rank(const std::string& v) {
  if (v == "base") return 0;
  if (v == "esmm") return 1;
  if (v == "esm2") return 2;
  if (v == "hm3") return 3;
  if (v == "hm3r") return 4;
  if (v == "oracle") return 5;
  return 6;
}

}  // namespace

void run_report(const std::string& runs_root, const std::string& out_dir) {
  if (!fs::is_directory(runs_root))
    throw ValidationError("runs root is not a directory: " + runs_root);
  fs::create_directories(out_dir);

  std::vector<RunEntry> entries;
  std::set<std::string> config_hashes;
  std::vector<std::string> dirs;
  for (const auto& e : fs::directory_iterator(runs_root))
    if (e.is_directory() && fs::exists(e.path() / "eval.json"))
      dirs.push_back(e.path().string());
  std::sort(dirs.begin(), dirs.end());

  for (const auto& dir : dirs) {
    std::ifstream in(dir + "/eval.json", std::ios::binary);
    nlohmann::json ej = nlohmann::json::parse(in, nullptr, false);
    if (ej.is_discarded())
      throw ValidationError("corrupt eval.json in " + dir);
    RunEntry entry;
    entry.variant = ej.at("variant").get<std::string>();
    entry.seed = ej.at("seed").get<std::string>();
    if (ej.contains("config_hash"))
      config_hashes.insert(ej.at("config_hash").get<std::string>());
    const KvFile kv = KvFile::parse_file(dir + "/metrics.kv");
    if (kv.has("auc.cvr")) entry.cvr_auc = kv.get_f64("auc.cvr");
    if (kv.has("auc.ctcvr")) entry.ctcvr_auc = kv.get_f64("auc.ctcvr");
    entries.push_back(std::move(entry));
  }
  if (entries.empty())
    throw ValidationError("no completed runs (eval.json) under " + runs_root);

  std::vector<std::string> variants;
  for (const auto& e : entries)
    if (std::find(variants.begin(), variants.end(), e.variant) == variants.end())
      variants.push_back(e.variant);
  std::sort(variants.begin(), variants.end(), [](const auto& a, const auto& b) {
    const int ra = variant_rank(a), rb = variant_rank(b);
    return ra != rb ? ra < rb : a < b;
  });

  // per (variant, seed) metric lookups; seed-matched comparisons only make
  // sense across the model variants, not the oracle reference
  std::map<std::string, std::map<std::string, RunEntry>> by_variant;
  std::set<std::string> model_seeds;
  for (const auto& e : entries) {
    by_variant[e.variant][e.seed] = e;
    if (e.variant != "oracle") model_seeds.insert(e.seed);
  }

  KvFile kv;
  std::ostringstream txt;
  txt << "model comparison";
  if (config_hashes.size() == 1)
    txt << " (config hash " << *config_hashes.begin() << ")";
  txt << "\n\n";
  char line[256];
  std::snprintf(line, sizeof(line), "%-8s %5s  %-22s %-22s\n", "variant",
                "seeds", "cvr_auc (mean+-std)", "ctcvr_auc (mean+-std)");
  txt << line;

  for (const auto& v : variants) {
    std::vector<double> cvr, ctcvr;
    for (const auto& [seed, e] : by_variant[v]) {
      if (e.cvr_auc) cvr.push_back(*e.cvr_auc);
      if (e.ctcvr_auc) ctcvr.push_back(*e.ctcvr_auc);
    }
    const Stats sc = summarize(cvr), st = summarize(ctcvr);
    auto cell = [](const Stats& s) {
      char buf[64];
      if (s.n == 0) {
        std::snprintf(buf, sizeof(buf), "--");
      } else if (s.stddev) {
        std::snprintf(buf, sizeof(buf), "%.5f +- %.5f", s.mean, *s.stddev);
      } else {
        std::snprintf(buf, sizeof(buf), "%.5f +- --", s.mean);
      }
      return std::string(buf);
    };
    std::snprintf(line, sizeof(line), "%-8s %5zu  %-22s %-22s\n", v.c_str(),
                  by_variant[v].size(), cell(sc).c_str(), cell(st).c_str());
    txt << line;

    const std::string prefix = "variant." + v;
    kv.set_u64(prefix + ".runs", by_variant[v].size());
    if (sc.n > 0) kv.set_f64(prefix + ".cvr_auc.mean", sc.mean);
    if (sc.stddev) kv.set_f64(prefix + ".cvr_auc.stddev", *sc.stddev);
    if (st.n > 0) kv.set_f64(prefix + ".ctcvr_auc.mean", st.mean);
    if (st.stddev) kv.set_f64(prefix + ".ctcvr_auc.stddev", *st.stddev);
  }

  // pairwise seed-matched wins (strictly greater on the seeds both have)
  std::vector<std::string> model_variants;
  for (const auto& v : variants)
    if (v != "oracle") model_variants.push_back(v);
  if (model_variants.size() >= 2) {
    txt << "\nseed-matched win counts, row strictly beats column "
           "(cvr_auc / ctcvr_auc, over common seeds):\n";
    std::snprintf(line, sizeof(line), "%-8s", "");
    txt << line;
    for (const auto& b : model_variants) {
      std::snprintf(line, sizeof(line), " %11s", b.c_str());
      txt << line;
    }
    txt << "\n";
    for (const auto& a : model_variants) {
      std::snprintf(line, sizeof(line), "%-8s", a.c_str());
      txt << line;
      for (const auto& b : model_variants) {
        if (a == b) {
          std::snprintf(line, sizeof(line), " %11s", ".");
          txt << line;
          continue;
        }
        int wins_cvr = 0, wins_ctcvr = 0, common = 0;
        for (const auto& seed : model_seeds) {
          const auto ia = by_variant[a].find(seed);
          const auto ib = by_variant[b].find(seed);
          if (ia == by_variant[a].end() || ib == by_variant[b].end()) continue;
          ++common;
          if (ia->second.cvr_auc && ib->second.cvr_auc &&
              *ia->second.cvr_auc > *ib->second.cvr_auc)
            ++wins_cvr;
          if (ia->second.ctcvr_auc && ib->second.ctcvr_auc &&
              *ia->second.ctcvr_auc > *ib->second.ctcvr_auc)
            ++wins_ctcvr;
        }
        char cellbuf[48];
        std::snprintf(cellbuf, sizeof(cellbuf), "%d/%d of %d", wins_cvr,
                      wins_ctcvr, common);
        std::snprintf(line, sizeof(line), " %11s", cellbuf);
        txt << line;
        kv.set_i64("wins.cvr_auc." + a + "." + b, wins_cvr);
        kv.set_i64("wins.ctcvr_auc." + a + "." + b, wins_ctcvr);
        kv.set_i64("wins.common_seeds." + a + "." + b, common);
      }
      txt << "\n";
    }
  }

  // runs missing relative to the union of model seeds
  std::vector<std::string> missing;
  for (const auto& v : model_variants)
    for (const auto& seed : model_seeds)
      if (!by_variant[v].count(seed)) missing.push_back(v + "-seed" + seed);
  if (!missing.empty()) {
    txt << "\nmissing runs:";
    std::string joined;
    for (const auto& msg : missing) joined += " " + msg;
    txt << joined << "\n";
    kv.set("missing_runs", joined.substr(1));
  }
  if (config_hashes.size() > 1) {
    txt << "\nwarning: runs come from " << config_hashes.size()
        << " different configs\n";
    kv.set_u64("config_hash_count", config_hashes.size());
  } else if (config_hashes.size() == 1) {
    kv.set("config_hash", *config_hashes.begin());
  }

  std::ofstream out(out_dir + "/report.txt", std::ios::binary);
  out << txt.str();
  if (!out) throw std::runtime_error("cannot write report.txt");
  out.close();
  kv.write_file(out_dir + "/report.kv");
}

}  // namespace cvrlab::harness
