// Command-line front end. Talks to the core exclusively through the public C
// API; exit codes are the API status codes (0 ok, 1 validation, 2 runtime,
// 3 verification).

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cvrlab/cvrlab.h"

namespace {

// relative paths resolve under CVRLAB_OUTPUT_ROOT when it is set
std::string resolve(const std::string& path) {
  if (path.empty() || path.front() == '/') return path;
  const char* root = std::getenv("CVRLAB_OUTPUT_ROOT");
  if (!root || !*root) return path;
  std::string r(root);
  if (r.back() != '/') r += '/';
  return r + path;
}

int report_failure(int rc, const char* what) {
  std::fprintf(stderr, "cvrlab %s: %s: %s\n", what, cvrlab_status_name(rc),
               cvrlab_last_error());
  return rc;
}

using ConfigPtr = std::unique_ptr<cvrlab_config, decltype(&cvrlab_config_free)>;

int load_config(const std::string& config_path, const std::string& preset,
                const std::vector<std::string>& overrides, ConfigPtr& out) {
  cvrlab_config* cfg = nullptr;
  int rc;
  if (!config_path.empty())
    rc = cvrlab_config_load(resolve(config_path).c_str(), &cfg);
  else
    rc = cvrlab_config_preset(preset.empty() ? "desk-s" : preset.c_str(), &cfg);
  if (rc != CVRLAB_OK) return report_failure(rc, "config");
  out = ConfigPtr(cfg, &cvrlab_config_free);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "cvrlab: --set expects key=value, got '%s'\n",
                   kv.c_str());
      return CVRLAB_ERR_VALIDATION;
    }
    rc = cvrlab_config_set(out.get(), kv.substr(0, eq).c_str(),
                           kv.substr(eq + 1).c_str());
    if (rc != CVRLAB_OK) return report_failure(rc, "config");
  }
  return CVRLAB_OK;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cvrlab: entire-space multi-task conversion modeling lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cvrlab_version()));

  std::string config_path, preset, out_dir, data_dir, variant, checkpoint,
      runs_root;
  std::vector<std::string> overrides;
  uint64_t seed = 1;
  uint64_t draws = 10000;
  double tolerance = 1e-4;
  bool use_oracle = false;

  auto add_config_opts = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config file (key = value lines)");
    cmd->add_option("--preset", preset, "start from a named preset (desk-s, unit-tiny)");
    cmd->add_option("--set", overrides, "override one config key, key=value")
        ->take_all();
  };

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  add_config_opts(gen);
  gen->add_option("--out", out_dir, "output dataset directory")->required();

  auto* train = app.add_subcommand("train", "train one model variant");
  add_config_opts(train);
  train->add_option("--variant", variant, "base|esmm|esm2|hm3|hm3r")->required();
  train->add_option("--seed", seed, "run seed (init + shuffle)")->required();
  train->add_option("--data", data_dir, "dataset directory from gen")->required();
  train->add_option("--out", out_dir, "run output directory")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a test log");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file");
  eval->add_flag("--oracle", use_oracle,
                 "score with the generator's ground-truth targets instead");
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--out", out_dir, "evaluation output directory")->required();

  auto* report = app.add_subcommand("report", "aggregate runs into a comparison table");
  report->add_option("--runs", runs_root, "directory containing run directories")
      ->required();
  report->add_option("--out", out_dir, "report output directory")->required();

  auto* oracle_check =
      app.add_subcommand("oracle-check", "verify compositions against path enumeration");
  oracle_check->add_option("--draws", draws, "random head vectors per variant");
  oracle_check->add_option("--seed", seed, "rng seed");

  auto* gradcheck = app.add_subcommand(
      "gradcheck", "verify analytic gradients against finite differences");
  gradcheck->add_option("--variant", variant, "one variant, default all");
  gradcheck->add_option("--seed", seed, "rng seed");
  gradcheck->add_option("--tolerance", tolerance, "relative tolerance");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    ConfigPtr cfg(nullptr, &cvrlab_config_free);
    if (int rc = load_config(config_path, preset, overrides, cfg)) return rc;
    if (int rc = cvrlab_generate(cfg.get(), resolve(out_dir).c_str()))
      return report_failure(rc, "gen");
    std::printf("dataset written to %s\n", resolve(out_dir).c_str());
    return 0;
  }
  if (train->parsed()) {
    ConfigPtr cfg(nullptr, &cvrlab_config_free);
    if (int rc = load_config(config_path, preset, overrides, cfg)) return rc;
    if (int rc = cvrlab_train(cfg.get(), variant.c_str(), seed,
                              resolve(data_dir).c_str(), resolve(out_dir).c_str()))
      return report_failure(rc, "train");
    std::printf("run written to %s\n", resolve(out_dir).c_str());
    return 0;
  }
  if (eval->parsed()) {
    if (use_oracle == !checkpoint.empty()) {
      std::fprintf(stderr, "cvrlab eval: need exactly one of --checkpoint or --oracle\n");
      return CVRLAB_ERR_VALIDATION;
    }
    const std::string source = use_oracle ? "oracle" : resolve(checkpoint);
    if (int rc = cvrlab_evaluate(source.c_str(), resolve(data_dir).c_str(),
                                 resolve(out_dir).c_str()))
      return report_failure(rc, "eval");
    std::printf("evaluation written to %s\n", resolve(out_dir).c_str());
    return 0;
  }
  if (report->parsed()) {
    if (int rc = cvrlab_report(resolve(runs_root).c_str(), resolve(out_dir).c_str()))
      return report_failure(rc, "report");
    std::printf("report written to %s\n", resolve(out_dir).c_str());
    return 0;
  }
  if (oracle_check->parsed()) {
    if (int rc = cvrlab_oracle_check(draws, seed))
      return report_failure(rc, "oracle-check");
    std::printf("oracle-check passed (%llu draws per variant)\n",
                static_cast<unsigned long long>(draws));
    return 0;
  }
  if (gradcheck->parsed()) {
    if (int rc = cvrlab_grad_check(variant.empty() ? "all" : variant.c_str(),
                                   seed, tolerance))
      return report_failure(rc, "gradcheck");
    std::printf("gradcheck passed (tolerance %g)\n", tolerance);
    return 0;
  }
  return CVRLAB_ERR_VALIDATION;
}
