#include "harness/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "harness/trainer.hpp"
#include "json.hpp"
#include "metrics/evaluation.hpp"
#include "model/checkpoint.hpp"
#include "nn/grad_check.hpp"
#include "synth/generator.hpp"
#include "util/errors.hpp"
#include "util/fnv.hpp"
#include "util/rng.hpp"

namespace fs = std::filesystem;

namespace cvrlab::harness {

namespace {

void ensure_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw std::runtime_error("cannot create directory " + path + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

GenerateResult run_generate(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  ensure_dir(out_dir);

  synth::GenerativeModel model = synth::GenerativeModel::build(cfg.gen);
  model.calibrate();
  model.save(out_dir + "/generator.bin");

  KvFile echo = cfg.to_kv();
  echo.set_u64("config_hash", cfg.config_hash());
  echo.write_file(out_dir + "/gen.cfg");

  GenerateResult result;
  result.data_dir = out_dir;
  result.implied_rates = model.implied_rates();

  // disjoint impression-id ranges; per-record keyed streams make the split
  // independent of generation order
  {
    synth::LogWriter w(out_dir + "/train.csv", cfg.gen.seed);
    for (int64_t id = 0; id < cfg.train_impressions; ++id)
      w.append(model.sample_impression(static_cast<uint64_t>(id)));
    result.train_manifest = w.finish();
    result.train_manifest.write(out_dir + "/train.manifest");
  }
  {
    synth::LogWriter w(out_dir + "/test.csv", cfg.gen.seed);
    for (int64_t id = 0; id < cfg.test_impressions; ++id)
      w.append(model.sample_impression(
          static_cast<uint64_t>(cfg.train_impressions + id)));
    result.test_manifest = w.finish();
    result.test_manifest.write(out_dir + "/test.manifest");
  }

  // verify: re-scan both logs and compare against the manifests
  for (auto [log, manifest] :
       {std::pair<const char*, const synth::LogManifest*>{"train", &result.train_manifest},
        {"test", &result.test_manifest}}) {
    const auto scanned =
        synth::scan_log(out_dir + "/" + log + ".csv", cfg.gen.seed);
    if (scanned.record_count != manifest->record_count ||
        scanned.clicks != manifest->clicks || scanned.dmis != manifest->dmis ||
        scanned.dmas != manifest->dmas ||
        scanned.purchases != manifest->purchases)
      throw VerificationError(std::string("manifest verification failed for ") +
                              log + " log");
  }
  return result;
}

namespace {

template <class S>
TrainRunResult run_train_impl(const ExperimentConfig& cfg, graph::Variant variant,
                              uint64_t seed, const std::string& data_dir,
                              const std::string& run_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  Dataset data = Dataset::load(data_dir + "/train.csv");
  model::VariantModel<S> m(cfg.model_spec(variant, seed));

  TrainResult tr;
  try {
    tr = train_model(m, data, cfg, seed);
  } catch (const std::runtime_error&) {
    // keep whatever state the trainer restored
    model::save_checkpoint(m, 0, run_dir + "/checkpoint.last_good.bin");
    throw;
  }

  TrainRunResult out;
  out.run_dir = run_dir;
  out.checkpoint_path = run_dir + "/checkpoint.bin";
  out.steps = tr.steps;
  out.initial_loss = tr.initial_loss;
  out.final_loss = tr.final_loss;
  model::save_checkpoint(m, tr.steps, out.checkpoint_path);

  std::string curve = "step,total";
  for (const auto& name : tr.task_names) curve += "," + name;
  curve += "\n";
  for (const auto& pt : tr.curve) {
    curve += std::to_string(pt.step) + "," + KvFile::format_f64(pt.total);
    for (double v : pt.task_values) curve += "," + KvFile::format_f64(v);
    curve += "\n";
  }
  write_text(run_dir + "/curve.csv", curve);

  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  nlohmann::json rj;
  rj["variant"] = std::string(graph::variant_name(variant));
  rj["seed"] = seed;
  rj["config_hash"] = cfg.config_hash();
  rj["checkpoint"] = "checkpoint.bin";
  rj["steps"] = tr.steps;
  rj["initial_loss"] = tr.initial_loss;
  rj["final_loss"] = tr.final_loss;
  rj["wall_seconds"] = out.wall_seconds;
  write_text(run_dir + "/run.json", rj.dump(2) + "\n");
  return out;
}

}  // namespace

TrainRunResult run_train(const ExperimentConfig& cfg, graph::Variant variant,
                         uint64_t seed, const std::string& data_dir,
                         const std::string& run_dir) {
  cfg.validate();
  ensure_dir(run_dir);
  if (cfg.precision == "f32")
    return run_train_impl<float>(cfg, variant, seed, data_dir, run_dir);
  return run_train_impl<double>(cfg, variant, seed, data_dir, run_dir);
}

namespace {

std::vector<metrics::PredictionRow> score_with_checkpoint(
    const std::string& checkpoint_path, const Dataset& test) {
  int64_t step = 0;
  auto m = model::load_checkpoint<double>(checkpoint_path, &step);
  std::vector<metrics::PredictionRow> rows(static_cast<size_t>(test.size()));
  const int64_t chunk = 8192;
  model::VariantModel<double>::Workspace ws;
  for (int64_t start = 0; start < test.size(); start += chunk) {
    const int64_t n = std::min(chunk, test.size() - start);
    model::FeatureBatch batch;
    batch.fields = {
        std::span<const uint32_t>(test.user.data() + start, static_cast<size_t>(n)),
        std::span<const uint32_t>(test.item.data() + start, static_cast<size_t>(n)),
        std::span<const uint32_t>(test.category.data() + start,
                                  static_cast<size_t>(n))};
    const auto targets = m.predict(batch, ws);
    for (int64_t k = 0; k < n; ++k) {
      auto& row = rows[static_cast<size_t>(start + k)];
      row.p_ctr = targets[static_cast<size_t>(k)].p_ctr;
      row.p_cvr = targets[static_cast<size_t>(k)].p_cvr;
      row.p_ctcvr = targets[static_cast<size_t>(k)].p_ctcvr;
    }
  }
  return rows;
}

std::vector<metrics::PredictionRow> score_with_oracle(const std::string& data_dir,
                                                      const Dataset& test) {
  auto gen = synth::GenerativeModel::load(data_dir + "/generator.bin");
  std::vector<metrics::PredictionRow> rows(static_cast<size_t>(test.size()));
  for (int64_t k = 0; k < test.size(); ++k) {
    const size_t i = static_cast<size_t>(k);
    const auto t = gen.ground_truth_targets(test.user[i], test.item[i]);
    rows[i].p_ctr = t.p_ctr;
    rows[i].p_cvr = t.p_cvr;
    rows[i].p_ctcvr = t.p_ctcvr;
  }
  return rows;
}

}  // namespace

void run_eval(const std::string& model_source, const std::string& data_dir,
              const std::string& out_dir) {
  ensure_dir(out_dir);
  Dataset test = Dataset::load(data_dir + "/test.csv");

  std::string variant = "oracle";
  std::string seed = "-";
  std::vector<metrics::PredictionRow> rows;
  if (model_source == "oracle") {
    rows = score_with_oracle(data_dir, test);
  } else {
    const auto info = model::read_checkpoint_info(model_source);
    variant = graph::variant_name(info.spec.variant);
    seed = std::to_string(info.spec.seed);
    rows = score_with_checkpoint(model_source, test);
  }
  for (int64_t k = 0; k < test.size(); ++k) {
    const size_t i = static_cast<size_t>(k);
    rows[i].click = test.click[i];
    rows[i].dmi = test.dmi[i];
    rows[i].dma = test.dma[i];
    rows[i].pay = test.pay[i];
  }

  auto report = metrics::eval_protocol(rows);
  report.metadata.push_back({"variant", variant});
  if (seed != "-") report.metadata.push_back({"seed", seed});

  std::string config_hash;
  if (fs::exists(data_dir + "/gen.cfg")) {
    const auto cfg = ExperimentConfig::load(data_dir + "/gen.cfg");
    config_hash = std::to_string(cfg.config_hash());
    report.metadata.push_back({"config_hash", config_hash});
  }

  report.to_kv().write_file(out_dir + "/metrics.kv");
  write_text(out_dir + "/metrics.txt", report.to_table());

  nlohmann::json ej;
  ej["variant"] = variant;
  ej["seed"] = seed;
  ej["source"] = (model_source == "oracle") ? "oracle" : "checkpoint";
  if (!config_hash.empty()) ej["config_hash"] = config_hash;
  write_text(out_dir + "/eval.json", ej.dump(2) + "\n");
}

OracleCheckResult run_oracle_check(uint64_t draws_per_variant, uint64_t seed) {
  OracleCheckResult res;
  res.draws_per_variant = draws_per_variant;
  res.pass = true;

  auto check_one = [&](graph::Variant v, const graph::HeadProbabilities& h) {
    const auto closed = graph::compose(v, h);
    const auto oracle = graph::enumerate_paths(v, h);
    double diff = std::fabs(closed.p_ctr - oracle.p_ctr);
    diff = std::max(diff, std::fabs(closed.p_cvr - oracle.p_cvr));
    diff = std::max(diff, std::fabs(closed.p_ctcvr - oracle.p_ctcvr));
    if (closed.p_dmi || oracle.p_dmi) {
      if (closed.p_dmi.has_value() != oracle.p_dmi.has_value()) diff = 1.0;
      else diff = std::max(diff, std::fabs(*closed.p_dmi - *oracle.p_dmi));
    }
    if (closed.p_dma || oracle.p_dma) {
      if (closed.p_dma.has_value() != oracle.p_dma.has_value()) diff = 1.0;
      else diff = std::max(diff, std::fabs(*closed.p_dma - *oracle.p_dma));
    }
    const bool factorization_ok = closed.p_ctcvr == closed.p_ctr * closed.p_cvr;
    if (diff > res.max_abs_diff) res.max_abs_diff = diff;
    if (diff > 1e-12 || !factorization_ok) {
      res.pass = false;
      if (res.detail.empty()) {
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "%s h=(%.17g,%.17g,%.17g,%.17g,%.17g,%.17g) "
                      "|closed-oracle|=%.3g factorization=%s",
                      std::string(graph::variant_name(v)).c_str(), h.y1, h.y2,
                      h.y3, h.y4, h.y5, h.y6, diff,
                      factorization_ok ? "ok" : "violated");
        res.detail = buf;
      }
    }
  };

  for (graph::Variant v : graph::kAllVariants) {
    SplitMix64 rng =
        keyed_stream(seed, fnv1a64(std::string(graph::variant_name(v))));
    for (uint64_t i = 0; i < draws_per_variant; ++i) {
      graph::HeadProbabilities h;
      h.y1 = rng.uniform();
      h.y2 = rng.uniform();
      h.y3 = rng.uniform();
      h.y4 = rng.uniform();
      h.y5 = rng.uniform();
      h.y6 = rng.uniform();
      check_one(v, h);
    }
    // degenerate corners: a single surviving path, targets in {0, 1}
    for (int mask = 0; mask < 64; ++mask) {
      graph::HeadProbabilities h;
      h.y1 = (mask & 1) ? 1.0 : 0.0;
      h.y2 = (mask & 2) ? 1.0 : 0.0;
      h.y3 = (mask & 4) ? 1.0 : 0.0;
      h.y4 = (mask & 8) ? 1.0 : 0.0;
      h.y5 = (mask & 16) ? 1.0 : 0.0;
      h.y6 = (mask & 32) ? 1.0 : 0.0;
      check_one(v, h);
    }
  }
  return res;
}

std::vector<GradCheckRun> run_grad_check(const std::string& variant_name,
                                         uint64_t seed, double tolerance) {
  std::vector<graph::Variant> variants;
  if (variant_name == "all" || variant_name.empty()) {
    variants.assign(graph::kAllVariants.begin(), graph::kAllVariants.end());
  } else {
    const auto v = graph::variant_from_name(variant_name);
    if (!v) throw ValidationError("unknown variant '" + variant_name + "'");
    variants.push_back(*v);
  }

  std::vector<GradCheckRun> runs;
  for (graph::Variant v : variants) {
    model::ModelSpec spec;
    spec.variant = v;
    spec.fields = {{"user", 50, 4}, {"item", 50, 4}, {"category", 10, 4}};
    spec.head_widths = {8, 4};
    spec.seed = mix64(seed ^ fnv1a64(std::string(graph::variant_name(v))));
    model::VariantModel<double> m(spec);

    // synthetic 32-example batch honoring the label implications
    const int64_t B = 32;
    std::vector<uint32_t> u(B), it(B), c(B);
    std::vector<uint8_t> click(B), dmi(B), dma(B), pay(B);
    SplitMix64 rng = keyed_stream(seed, fnv1a64("gradcheck_batch"));
    for (int64_t k = 0; k < B; ++k) {
      const size_t i = static_cast<size_t>(k);
      u[i] = static_cast<uint32_t>(rng.below(50));
      it[i] = static_cast<uint32_t>(rng.below(50));
      c[i] = static_cast<uint32_t>(rng.below(10));
      click[i] = rng.uniform() < 0.5;
      dmi[i] = click[i] && rng.uniform() < 0.5;
      dma[i] = click[i] && rng.uniform() < 0.5;
      pay[i] = click[i] && rng.uniform() < 0.5;
    }
    model::FeatureBatch batch;
    batch.fields = {u, it, c};
    model::LabelBatch labels{click, dmi, dma, pay};

    auto params = m.params();
    model::VariantModel<double>::Workspace ws;
    auto loss_fn = [&]() {
      m.sync_transposes();
      return m.loss(batch, labels, ws, false).total;
    };
    auto grads_fn = [&]() {
      m.sync_transposes();
      m.clear_grads();
      m.loss(batch, labels, ws, true);
    };

    nn::GradCheckOptions opt;
    opt.tolerance = tolerance;
    const auto res = nn::grad_check(params, loss_fn, grads_fn, opt);

    GradCheckRun run;
    run.variant = graph::variant_name(v);
    run.pass = res.pass;
    run.worst_rel_error = res.worst_rel_error;
    run.worst_tensor = res.worst_tensor;
    run.worst_flat_index = res.worst_flat_index;
    run.checked = res.checked;
    runs.push_back(std::move(run));
  }
  return runs;
}

}  // namespace cvrlab::harness
