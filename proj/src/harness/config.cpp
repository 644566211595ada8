#include "harness/config.hpp"

#include <cstdlib>
#include <sstream>

#include "util/errors.hpp"
#include "util/fnv.hpp"

namespace cvrlab::harness {

namespace {

std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
  std::vector<int> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    try {
      out.push_back(std::stoi(tok));
    } catch (...) {
      throw ValidationError("key '" + key + "': bad integer list element '" + tok + "'");
    }
  }
  if (out.empty()) throw ValidationError("key '" + key + "': empty list");
  return out;
}

std::vector<uint64_t> parse_u64_list(const std::string& s, const std::string& key) {
  std::vector<uint64_t> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    try {
      out.push_back(std::stoull(tok));
    } catch (...) {
      throw ValidationError("key '" + key + "': bad seed list element '" + tok + "'");
    }
  }
  if (out.empty()) throw ValidationError("key '" + key + "': empty list");
  return out;
}

template <class T>
std::string join_list(const std::vector<T>& v) {
  std::ostringstream out;
  for (size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
  return out.str();
}

}  // namespace

void ExperimentConfig::validate() const {
  gen.validate();
  if (train_impressions <= 0 || test_impressions <= 0)
    throw ValidationError("config: impression counts must be positive");
  if (embedding_dim <= 0 || embedding_dim > 1024)
    throw ValidationError("config: embedding_dim out of range");
  for (int w : head_widths)
    if (w <= 0) throw ValidationError("config: head widths must be positive");
  if (weights.ctr < 0 || weights.dmi < 0 || weights.dma < 0 || weights.ctcvr < 0)
    throw ValidationError("config: loss weights must be >= 0");
  if (batch_size <= 0) throw ValidationError("config: batch_size must be positive");
  if (epochs <= 0) throw ValidationError("config: epochs must be positive");
  if (!(adam.learning_rate > 0))
    throw ValidationError("config: learning rate must be positive");
  if (precision != "f32" && precision != "f64")
    throw ValidationError("config: precision must be f32 or f64");
  if (seeds.empty()) throw ValidationError("config: seed list must not be empty");
}

KvFile ExperimentConfig::to_kv() const {
  KvFile kv;
  kv.set_i64("gen.users", gen.n_users);
  kv.set_i64("gen.items", gen.n_items);
  kv.set_i64("gen.categories", gen.n_categories);
  kv.set_i64("gen.latent_dim", gen.latent_dim);
  kv.set_f64("gen.logit_spread", gen.logit_spread);
  kv.set_f64("gen.ctr_correlation", gen.ctr_correlation);
  kv.set_f64("gen.post_correlation", gen.post_correlation);
  kv.set_f64("gen.dma_lift", gen.dma_lift);
  kv.set_f64("gen.purchase_lift", gen.purchase_lift);
  kv.set_f64("gen.rate.click", gen.rates.click);
  kv.set_f64("gen.rate.dmi_given_click", gen.rates.dmi_given_click);
  kv.set_f64("gen.rate.dma_given_click", gen.rates.dma_given_click);
  kv.set_f64("gen.rate.purchase_given_click", gen.rates.purchase_given_click);
  kv.set_i64("gen.calibration_pairs", gen.calibration_pairs);
  kv.set_f64("gen.calibration_rel_tol", gen.calibration_rel_tol);
  kv.set_u64("gen.seed", gen.seed);
  kv.set_i64("gen.train_impressions", train_impressions);
  kv.set_i64("gen.test_impressions", test_impressions);
  kv.set_i64("model.embedding_dim", embedding_dim);
  kv.set("model.head_widths", join_list(head_widths));
  kv.set_f64("model.loss_weight.ctr", weights.ctr);
  kv.set_f64("model.loss_weight.dmi", weights.dmi);
  kv.set_f64("model.loss_weight.dma", weights.dma);
  kv.set_f64("model.loss_weight.ctcvr", weights.ctcvr);
  kv.set_i64("train.batch_size", batch_size);
  kv.set_i64("train.epochs", epochs);
  kv.set_f64("train.learning_rate", adam.learning_rate);
  kv.set_f64("train.adam_beta1", adam.beta1);
  kv.set_f64("train.adam_beta2", adam.beta2);
  kv.set_f64("train.adam_epsilon", adam.epsilon);
  kv.set("train.precision", precision);
  kv.set("train.deterministic", deterministic ? "true" : "false");
  kv.set("train.bias_prior_init", bias_prior_init ? "true" : "false");
  kv.set("run.seeds", join_list(seeds));
  return kv;
}

uint64_t ExperimentConfig::config_hash() const {
  return fnv1a64(to_kv().serialize());
}

ExperimentConfig ExperimentConfig::from_kv(const KvFile& kv) {
  ExperimentConfig cfg;
  if (auto preset_name = kv.find("preset")) cfg = preset(*preset_name);

  for (const auto& [key, value] : kv.entries()) {
    if (key == "preset") continue;
    if (key == "config_hash") continue;  // output-only echo key
    if (key == "gen.users") cfg.gen.n_users = kv.get_i64(key);
    else if (key == "gen.items") cfg.gen.n_items = kv.get_i64(key);
    else if (key == "gen.categories") cfg.gen.n_categories = kv.get_i64(key);
    else if (key == "gen.latent_dim") cfg.gen.latent_dim = static_cast<int>(kv.get_i64(key));
    else if (key == "gen.logit_spread") cfg.gen.logit_spread = kv.get_f64(key);
    else if (key == "gen.ctr_correlation") cfg.gen.ctr_correlation = kv.get_f64(key);
    else if (key == "gen.post_correlation") cfg.gen.post_correlation = kv.get_f64(key);
    else if (key == "gen.dma_lift") cfg.gen.dma_lift = kv.get_f64(key);
    else if (key == "gen.purchase_lift") cfg.gen.purchase_lift = kv.get_f64(key);
    else if (key == "gen.rate.click") cfg.gen.rates.click = kv.get_f64(key);
    else if (key == "gen.rate.dmi_given_click") cfg.gen.rates.dmi_given_click = kv.get_f64(key);
    else if (key == "gen.rate.dma_given_click") cfg.gen.rates.dma_given_click = kv.get_f64(key);
    else if (key == "gen.rate.purchase_given_click") cfg.gen.rates.purchase_given_click = kv.get_f64(key);
    else if (key == "gen.calibration_pairs") cfg.gen.calibration_pairs = kv.get_i64(key);
    else if (key == "gen.calibration_rel_tol") cfg.gen.calibration_rel_tol = kv.get_f64(key);
    else if (key == "gen.seed") cfg.gen.seed = kv.get_u64(key);
    else if (key == "gen.train_impressions") cfg.train_impressions = kv.get_i64(key);
    else if (key == "gen.test_impressions") cfg.test_impressions = kv.get_i64(key);
    else if (key == "model.embedding_dim") cfg.embedding_dim = kv.get_i64(key);
    else if (key == "model.head_widths") cfg.head_widths = parse_int_list(value, key);
    else if (key == "model.loss_weight.ctr") cfg.weights.ctr = kv.get_f64(key);
    else if (key == "model.loss_weight.dmi") cfg.weights.dmi = kv.get_f64(key);
    else if (key == "model.loss_weight.dma") cfg.weights.dma = kv.get_f64(key);
    else if (key == "model.loss_weight.ctcvr") cfg.weights.ctcvr = kv.get_f64(key);
    else if (key == "train.batch_size") cfg.batch_size = kv.get_i64(key);
    else if (key == "train.epochs") cfg.epochs = static_cast<int>(kv.get_i64(key));
    else if (key == "train.learning_rate") cfg.adam.learning_rate = kv.get_f64(key);
    else if (key == "train.adam_beta1") cfg.adam.beta1 = kv.get_f64(key);
    else if (key == "train.adam_beta2") cfg.adam.beta2 = kv.get_f64(key);
    else if (key == "train.adam_epsilon") cfg.adam.epsilon = kv.get_f64(key);
    else if (key == "train.precision") cfg.precision = value;
    else if (key == "train.deterministic") cfg.deterministic = kv.get_bool(key);
    else if (key == "train.bias_prior_init") cfg.bias_prior_init = kv.get_bool(key);
    else if (key == "run.seeds") cfg.seeds = parse_u64_list(value, key);
    else throw ValidationError("config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  return from_kv(KvFile::parse_file(path));
}

// Desk-scale presets. desk-s generates one million training impressions with
// shopping-log sparsity; the tiny presets keep unit tests fast.
ExperimentConfig ExperimentConfig::preset(const std::string& name) {
  ExperimentConfig cfg;
  if (name == "desk-s") {
    cfg.gen.n_users = 3000;
    cfg.gen.n_items = 3000;
    cfg.gen.n_categories = 50;
    cfg.gen.latent_dim = 8;
    cfg.gen.logit_spread = 1.4;
    cfg.gen.ctr_correlation = 0.5;
    cfg.gen.post_correlation = 0.75;
    cfg.gen.dma_lift = 4.0;
    cfg.gen.purchase_lift = 4.0;
    cfg.gen.calibration_pairs = 200000;
    cfg.gen.calibration_rel_tol = 0.002;
    cfg.gen.seed = 20240901;
    cfg.train_impressions = 1000000;
    cfg.test_impressions = 250000;
    cfg.embedding_dim = 8;
    cfg.head_widths = {64, 32};
    cfg.batch_size = 256;
    cfg.epochs = 1;
    cfg.precision = "f32";
    cfg.seeds = {101, 102, 103, 104, 105};
    return cfg;
  }
  if (name == "unit-tiny") {
    cfg.gen.n_users = 200;
    cfg.gen.n_items = 200;
    cfg.gen.n_categories = 10;
    cfg.gen.latent_dim = 4;
    cfg.gen.calibration_pairs = 20000;
    cfg.gen.calibration_rel_tol = 0.005;
    cfg.gen.seed = 7;
    cfg.train_impressions = 30000;
    cfg.test_impressions = 10000;
    cfg.embedding_dim = 4;
    cfg.head_widths = {16, 8};
    cfg.batch_size = 128;
    cfg.epochs = 1;
    cfg.precision = "f64";
    cfg.seeds = {1};
    return cfg;
  }
  throw ValidationError("unknown preset '" + name + "' (available: desk-s, unit-tiny)");
}

std::vector<std::string> ExperimentConfig::preset_names() {
  return {"desk-s", "unit-tiny"};
}

model::ModelSpec ExperimentConfig::model_spec(graph::Variant variant,
                                              uint64_t seed) const {
  model::ModelSpec spec;
  spec.variant = variant;
  spec.fields = {{"user", gen.n_users, embedding_dim},
                 {"item", gen.n_items, embedding_dim},
                 {"category", gen.n_categories, embedding_dim}};
  spec.head_widths = head_widths;
  spec.weights = weights;
  spec.seed = seed;
  return spec;
}

std::string resolve_output_path(const std::string& path) {
  if (path.empty() || path.front() == '/') return path;
  const char* root = std::getenv("CVRLAB_OUTPUT_ROOT");
  if (!root || !*root) return path;
  std::string r(root);
  if (r.back() != '/') r += '/';
  return r + path;
}

}  // namespace cvrlab::harness
