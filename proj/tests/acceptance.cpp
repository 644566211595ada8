// Acceptance suite: end-to-end checks of the composition calculus, gradient
// engine, AUC implementation, synthetic generator and the full multi-seed
// comparison pipeline at desk-S scale. Prints one PASS/FAIL line per
// criterion and exits nonzero if any fail.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "graph/composition.hpp"
#include "harness/config.hpp"
#include "harness/pipeline.hpp"
#include "harness/trainer.hpp"
#include "metrics/auc.hpp"
#include "model/variant_model.hpp"
#include "synth/log_io.hpp"
#include "util/kv_file.hpp"
#include "util/rng.hpp"

namespace fs = std::filesystem;
using namespace cvrlab;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

bool files_identical(const std::string& a, const std::string& b,
                     std::string* why) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) {
    *why = "cannot open " + (fa ? b : a);
    return false;
  }
  std::string ca((std::istreambuf_iterator<char>(fa)),
                 std::istreambuf_iterator<char>());
  std::string cb((std::istreambuf_iterator<char>(fb)),
                 std::istreambuf_iterator<char>());
  if (ca != cb) {
    *why = a + " differs from " + b;
    return false;
  }
  return true;
}

struct RunMetrics {
  double cvr_auc = 0.0;
  double ctcvr_auc = 0.0;
  double mean_p_ctr = 0.0, empirical_ctr = 0.0;
  double mean_p_ctcvr = 0.0, empirical_ctcvr = 0.0;
};

RunMetrics load_metrics(const std::string& run_dir) {
  const KvFile kv = KvFile::parse_file(run_dir + "/metrics.kv");
  RunMetrics m;
  m.cvr_auc = kv.get_f64("auc.cvr");
  m.ctcvr_auc = kv.get_f64("auc.ctcvr");
  m.mean_p_ctr = kv.get_f64("calibration.mean_p_ctr");
  m.empirical_ctr = kv.get_f64("calibration.empirical_ctr");
  m.mean_p_ctcvr = kv.get_f64("calibration.mean_p_ctcvr");
  m.empirical_ctcvr = kv.get_f64("calibration.empirical_ctcvr");
  return m;
}

// criterion 1: closed forms vs path enumeration, 1e4 draws per variant
void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = harness::run_oracle_check(10000, 20240901);
  const double secs = seconds_since(t0);
  report(1, res.pass && secs < 10.0,
         fmt("composition oracle equivalence: max |closed - enumerated| = "
             "%.3g (tol 1e-12) over 10000 draws x 5 variants, %.2f s "
             "(limit 10 s)%s%s",
             res.max_abs_diff, secs, res.pass ? "" : " :: ",
             res.pass ? "" : res.detail.c_str()));
}

// criterion 2: p_ctcvr == p_ctr * p_cvr bit-exactly
void criterion_2() {
  SplitMix64 rng(424242);
  uint64_t checked = 0, exact = 0;
  for (graph::Variant v : graph::kAllVariants) {
    for (int i = 0; i < 10000; ++i) {
      graph::HeadProbabilities h;
      h.y1 = rng.uniform();
      h.y2 = rng.uniform();
      h.y3 = rng.uniform();
      h.y4 = rng.uniform();
      h.y5 = rng.uniform();
      h.y6 = rng.uniform();
      const auto t = graph::compose(v, h);
      ++checked;
      exact += (t.p_ctcvr == t.p_ctr * t.p_cvr) ? 1 : 0;
    }
  }
  report(2, exact == checked,
         fmt("factorization identity bit-exact on %llu / %llu tested inputs",
             static_cast<unsigned long long>(exact),
             static_cast<unsigned long long>(checked)));
}

// criterion 3: analytic gradients of the full loss vs central differences
void criterion_3() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto runs = harness::run_grad_check("all", 20240901, 1e-4);
  const double secs = seconds_since(t0);
  bool pass = secs < 120.0;
  double worst = 0.0;
  std::string worst_variant;
  for (const auto& r : runs) {
    if (!r.pass) pass = false;
    if (r.worst_rel_error > worst) {
      worst = r.worst_rel_error;
      worst_variant = r.variant;
    }
  }
  report(3, pass,
         fmt("gradient correctness: worst relative error %.3g (%s) vs central "
             "differences, tol 1e-4, 32-example batches, all 5 variants, "
             "%.2f s (limit 120 s)",
             worst, worst_variant.c_str(), secs));
}

// criterion 4: rank-statistic AUC vs brute force on heavy-tie instances
void criterion_4() {
  SplitMix64 rng(77);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    std::vector<metrics::ScoredExample> xs(1000);
    const int levels = 2 + static_cast<int>(rng.below(20));
    for (auto& x : xs) {
      x.score = static_cast<double>(rng.below(static_cast<uint64_t>(levels))) /
                levels;
      x.label = rng.uniform() < 0.3 ? 1 : 0;
    }
    xs[0].label = 1;
    xs[1].label = 0;
    worst = std::max(worst, std::fabs(metrics::auc(xs) -
                                      metrics::auc_bruteforce(xs)));
  }
  report(4, worst <= 1e-12,
         fmt("auc oracle: max |rank-statistic - brute force| = %.3g over 100 "
             "instances of n = 1000 with heavy ties (tol 1e-12)",
             worst));
}

struct PipelineArtifacts {
  std::string data_dir;
  std::string runs_dir;
  std::vector<uint64_t> seeds;
};

// criterion 5: desk-S realized rates within +-5% and invariants on every record
void criterion_5(const harness::ExperimentConfig& cfg,
                 const PipelineArtifacts& art,
                 const synth::LogManifest& manifest) {
  struct Target {
    const char* name;
    double target;
    double realized;
  };
  const Target targets[] = {
      {"click/impr", cfg.gen.rates.click, manifest.rate_click()},
      {"dmi/click", cfg.gen.rates.dmi_given_click,
       manifest.rate_dmi_given_click()},
      {"dma/click", cfg.gen.rates.dma_given_click,
       manifest.rate_dma_given_click()},
      {"purchase/click", cfg.gen.rates.purchase_given_click,
       manifest.rate_purchase_given_click()},
  };
  bool pass = true;
  std::string detail = "generator fidelity on 1e6 impressions:";
  for (const auto& t : targets) {
    const double rel = std::fabs(t.realized - t.target) / t.target;
    pass = pass && rel <= 0.05;
    detail += fmt(" %s %.4f vs %.4f (%+.1f%%)", t.name, t.realized, t.target,
                  100.0 * (t.realized / t.target - 1.0));
  }

  uint64_t records = 0, violations = 0;
  synth::LogReader reader(art.data_dir + "/train.csv");
  synth::ImpressionRecord rec;
  while (reader.next(rec)) {
    ++records;
    if (!synth::check_record_invariants(rec).empty()) ++violations;
  }
  pass = pass && violations == 0 &&
         records == static_cast<uint64_t>(cfg.train_impressions);
  detail += fmt("; invariants hold on %llu/%llu records",
                static_cast<unsigned long long>(records - violations),
                static_cast<unsigned long long>(records));
  report(5, pass, detail);
}

// criteria 6+7 share the trained matrix
void criteria_6_and_7(const harness::ExperimentConfig& cfg,
                      const PipelineArtifacts& art, double gen_seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  std::map<std::string, std::map<uint64_t, RunMetrics>> metrics;
  for (uint64_t seed : art.seeds) {
    for (graph::Variant v : graph::kAllVariants) {
      const std::string name(graph::variant_name(v));
      const std::string run_dir =
          art.runs_dir + "/" + name + "-seed" + std::to_string(seed);
      harness::run_train(cfg, v, seed, art.data_dir, run_dir);
      harness::run_eval(run_dir + "/checkpoint.bin", art.data_dir, run_dir);
      metrics[name][seed] = load_metrics(run_dir);
    }
  }
  fs::create_directories(art.runs_dir + "/oracle");
  harness::run_eval("oracle", art.data_dir, art.runs_dir + "/oracle");
  harness::run_report(art.runs_dir, art.runs_dir);
  const double secs = seconds_since(t0) + gen_seconds;

  auto mean = [&](const std::string& v, bool cvr) {
    double acc = 0.0;
    for (const auto& [seed, m] : metrics[v]) acc += cvr ? m.cvr_auc : m.ctcvr_auc;
    return acc / static_cast<double>(metrics[v].size());
  };
  const double hm3 = mean("hm3", true), esm2 = mean("esm2", true),
               esmm = mean("esmm", true), base = mean("base", true),
               hm3r = mean("hm3r", true);

  int hm3_beats_base_cvr = 0, hm3_beats_base_ctcvr = 0;
  for (uint64_t seed : art.seeds) {
    if (metrics["hm3"][seed].cvr_auc > metrics["base"][seed].cvr_auc)
      ++hm3_beats_base_cvr;
    if (metrics["hm3"][seed].ctcvr_auc > metrics["base"][seed].ctcvr_auc)
      ++hm3_beats_base_ctcvr;
  }

  const bool ordering = hm3 > esm2 && esm2 > esmm && esmm > base;
  const bool reversed_ok = hm3 >= hm3r;
  const bool per_seed = hm3_beats_base_cvr >= 4 && hm3_beats_base_ctcvr >= 4;
  const bool runtime_ok = secs <= 1800.0;
  report(6, ordering && reversed_ok && per_seed && runtime_ok,
         fmt("directional ordering over %zu seeds: mean CVR AUC hm3 %.5f > "
             "esm2 %.5f > esmm %.5f > base %.5f is %s; hm3 %.5f >= hm3r %.5f "
             "is %s; hm3 beats base in %d/5 (cvr) and %d/5 (ctcvr) seeds; "
             "runtime %.0f s (limit 1800 s)",
             art.seeds.size(), hm3, esm2, esmm, base,
             ordering ? "satisfied" : "VIOLATED", hm3, hm3r,
             reversed_ok ? "satisfied" : "VIOLATED", hm3_beats_base_cvr,
             hm3_beats_base_ctcvr, secs));

  // criterion 7: calibration of the first-seed hm3 run
  const auto& first = metrics["hm3"][art.seeds.front()];
  const double ctr_rel = std::fabs(first.mean_p_ctr / first.empirical_ctr - 1.0);
  const double ctcvr_rel =
      std::fabs(first.mean_p_ctcvr / first.empirical_ctcvr - 1.0);
  report(7, ctr_rel <= 0.10 && ctcvr_rel <= 0.20,
         fmt("calibration after one epoch (hm3, seed %llu): mean p_ctr %.5f vs "
             "empirical CTR %.5f (%+.1f%%, bound 10%%); mean p_ctcvr %.6f vs "
             "empirical %.6f (%+.1f%%, bound 20%%)",
             static_cast<unsigned long long>(art.seeds.front()),
             first.mean_p_ctr, first.empirical_ctr, 100.0 * (first.mean_p_ctr / first.empirical_ctr - 1.0),
             first.mean_p_ctcvr, first.empirical_ctcvr,
             100.0 * (first.mean_p_ctcvr / first.empirical_ctcvr - 1.0)));
}

// criterion 8: the full pipeline repeated with identical config is
// byte-identical in every report artifact
void criterion_8(const harness::ExperimentConfig& cfg,
                 const PipelineArtifacts& first, const std::string& redo_root) {
  const std::string data2 = redo_root + "/data";
  const std::string runs2 = redo_root + "/runs";
  harness::run_generate(cfg, data2);
  for (uint64_t seed : first.seeds) {
    for (graph::Variant v : graph::kAllVariants) {
      const std::string name(graph::variant_name(v));
      const std::string run_dir =
          runs2 + "/" + name + "-seed" + std::to_string(seed);
      harness::run_train(cfg, v, seed, data2, run_dir);
      harness::run_eval(run_dir + "/checkpoint.bin", data2, run_dir);
    }
  }
  fs::create_directories(runs2 + "/oracle");
  harness::run_eval("oracle", data2, runs2 + "/oracle");
  harness::run_report(runs2, runs2);

  std::vector<std::pair<std::string, std::string>> pairs = {
      {first.data_dir + "/train.manifest", data2 + "/train.manifest"},
      {first.data_dir + "/test.manifest", data2 + "/test.manifest"},
      {first.runs_dir + "/report.txt", runs2 + "/report.txt"},
      {first.runs_dir + "/report.kv", runs2 + "/report.kv"},
      {first.runs_dir + "/oracle/metrics.kv", runs2 + "/oracle/metrics.kv"},
  };
  for (uint64_t seed : first.seeds) {
    for (graph::Variant v : graph::kAllVariants) {
      const std::string rel = std::string(graph::variant_name(v)) + "-seed" +
                              std::to_string(seed);
      pairs.push_back({first.runs_dir + "/" + rel + "/metrics.kv",
                       runs2 + "/" + rel + "/metrics.kv"});
      pairs.push_back({first.runs_dir + "/" + rel + "/curve.csv",
                       runs2 + "/" + rel + "/curve.csv"});
      pairs.push_back(
          {first.runs_dir + "/" + rel + "/checkpoint.bin.tensors.txt",
           runs2 + "/" + rel + "/checkpoint.bin.tensors.txt"});
    }
  }
  size_t identical = 0;
  std::string why;
  for (const auto& [a, b] : pairs) {
    std::string w;
    if (files_identical(a, b, &w))
      ++identical;
    else if (why.empty())
      why = w;
  }
  report(8, identical == pairs.size(),
         fmt("determinism: %zu/%zu report artifacts byte-identical across a "
             "full pipeline rerun%s%s",
             identical, pairs.size(), why.empty() ? "" : " :: ", why.c_str()));
}

// criterion 9: unclicked batches drive entire-space models but not base's
// conversion network
void criterion_9(const harness::ExperimentConfig& cfg,
                 const PipelineArtifacts& art) {
  harness::Dataset train = harness::Dataset::load(art.data_dir + "/train.csv");
  model::FeatureBatch batch;
  std::vector<uint32_t> u, it, c;
  std::vector<uint8_t> zero;
  for (int64_t i = 0; i < train.size() && u.size() < 512; ++i) {
    if (train.click[static_cast<size_t>(i)]) continue;
    u.push_back(train.user[static_cast<size_t>(i)]);
    it.push_back(train.item[static_cast<size_t>(i)]);
    c.push_back(train.category[static_cast<size_t>(i)]);
  }
  zero.assign(u.size(), 0);
  batch.fields = {u, it, c};
  model::LabelBatch labels{zero, zero, zero, zero};

  bool pass = true;
  std::string detail = "entire-space property on a 512-example unclicked batch:";
  for (graph::Variant v :
       {graph::Variant::Hm3, graph::Variant::Esmm, graph::Variant::Esm2,
        graph::Variant::Base}) {
    model::VariantModel<double> m(cfg.model_spec(v, 1));
    model::VariantModel<double>::Workspace ws;
    m.clear_grads();
    m.loss(batch, labels, ws, true);
    double total = 0.0, cvr_net = 0.0;
    for (auto& p : m.params()) {
      double n = 0.0;
      for (int64_t k = 0; k < p.size; ++k) n += p.grad[k] * p.grad[k];
      total += n;
      if (p.name.rfind("cvr_net.", 0) == 0) cvr_net += n;
    }
    if (v == graph::Variant::Base) {
      pass = pass && cvr_net == 0.0 && total > 0.0;
      detail += fmt(" base cvr-net |g|^2 = %.3g (must be exactly 0)", cvr_net);
    } else {
      pass = pass && total > 0.0;
      detail += fmt(" %s |g|^2 = %.3g", graph::variant_name(v).data(), total);
    }
  }
  report(9, pass, detail);
}

}  // namespace

int main(int argc, char** argv) {
  std::string out_root = (fs::temp_directory_path() / "cvrlab_acceptance").string();
  bool keep = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--out") == 0 && i + 1 < argc)
      out_root = argv[++i];
    else if (std::strcmp(argv[i], "--keep") == 0)
      keep = true;
  }
  fs::remove_all(out_root);
  fs::create_directories(out_root);
  std::printf("acceptance artifacts under %s\n", out_root.c_str());

  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();

  const auto cfg = harness::ExperimentConfig::preset("desk-s");
  PipelineArtifacts art;
  art.data_dir = out_root + "/data";
  art.runs_dir = out_root + "/runs";
  art.seeds = cfg.seeds;

  const auto gen_t0 = std::chrono::steady_clock::now();
  const auto gen = harness::run_generate(cfg, art.data_dir);
  const double gen_seconds = seconds_since(gen_t0);

  criterion_5(cfg, art, gen.train_manifest);
  criteria_6_and_7(cfg, art, gen_seconds);
  criterion_8(cfg, art, out_root + "/redo");
  criterion_9(cfg, art);

  if (!keep && g_failures == 0) fs::remove_all(out_root);
  if (g_failures == 0)
    std::printf("all acceptance criteria passed\n");
  else
    std::printf("%d acceptance criteria FAILED\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
