#include "cvrlab/cvrlab.h"

#include <cmath>
#include <cstring>
#include <string>

#include "harness/config.hpp"
#include "harness/pipeline.hpp"
#include "model/checkpoint.hpp"
#include "model/variant_model.hpp"
#include "util/errors.hpp"

using namespace cvrlab;

struct cvrlab_config {
  harness::ExperimentConfig cfg;
};

struct cvrlab_model {
  model::VariantModel<double> net;
  explicit cvrlab_model(model::VariantModel<double> m) : net(std::move(m)) {}
};

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

// exceptions map onto status codes at this boundary; nothing throws past it
template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ValidationError& e) {
    return fail(CVRLAB_ERR_VALIDATION, e.what());
  } catch (const VerificationError& e) {
    return fail(CVRLAB_ERR_VERIFICATION, e.what());
  } catch (const std::exception& e) {
    return fail(CVRLAB_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(CVRLAB_ERR_RUNTIME, "unknown error");
  }
}

int require(const void* p, const char* what) {
  if (p) return CVRLAB_OK;
  return fail(CVRLAB_ERR_VALIDATION, std::string("null argument: ") + what);
}

int copy_out(const std::string& s, char* buf, size_t buf_size, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (!buf || buf_size == 0)
    return fail(CVRLAB_ERR_VALIDATION, "output buffer is null or empty");
  if (buf_size < s.size() + 1)
    return fail(CVRLAB_ERR_VALIDATION, "output buffer too small");
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return CVRLAB_OK;
}

}  // namespace

extern "C" {

const char* cvrlab_version(void) { return "1.0.0"; }

const char* cvrlab_status_name(int status) {
  switch (status) {
    case CVRLAB_OK: return "ok";
    case CVRLAB_ERR_VALIDATION: return "validation_error";
    case CVRLAB_ERR_RUNTIME: return "runtime_error";
    case CVRLAB_ERR_VERIFICATION: return "verification_error";
  }
  return "unknown_status";
}

const char* cvrlab_last_error(void) { return g_last_error.c_str(); }

int cvrlab_config_load(const char* path, cvrlab_config** out) {
  if (int rc = require(path, "path")) return rc;
  if (int rc = require(out, "out")) return rc;
  return guarded([&] {
    auto* handle = new cvrlab_config{harness::ExperimentConfig::load(path)};
    *out = handle;
    return CVRLAB_OK;
  });
}

int cvrlab_config_preset(const char* name, cvrlab_config** out) {
  if (int rc = require(name, "name")) return rc;
  if (int rc = require(out, "out")) return rc;
  return guarded([&] {
    auto* handle = new cvrlab_config{harness::ExperimentConfig::preset(name)};
    *out = handle;
    return CVRLAB_OK;
  });
}

int cvrlab_config_set(cvrlab_config* cfg, const char* key, const char* value) {
  if (int rc = require(cfg, "cfg")) return rc;
  if (int rc = require(key, "key")) return rc;
  if (int rc = require(value, "value")) return rc;
  return guarded([&] {
    KvFile kv = cfg->cfg.to_kv();
    kv.set(key, value);
    cfg->cfg = harness::ExperimentConfig::from_kv(kv);
    return CVRLAB_OK;
  });
}

int cvrlab_config_get(const cvrlab_config* cfg, const char* key, char* buf,
                      size_t buf_size, size_t* needed) {
  if (int rc = require(cfg, "cfg")) return rc;
  if (int rc = require(key, "key")) return rc;
  return guarded([&] {
    const KvFile kv = cfg->cfg.to_kv();
    return copy_out(kv.get(key), buf, buf_size, needed);
  });
}

void cvrlab_config_free(cvrlab_config* cfg) { delete cfg; }

int cvrlab_generate(const cvrlab_config* cfg, const char* out_dir) {
  if (int rc = require(cfg, "cfg")) return rc;
  if (int rc = require(out_dir, "out_dir")) return rc;
  return guarded([&] {
    harness::run_generate(cfg->cfg, out_dir);
    return CVRLAB_OK;
  });
}

int cvrlab_train(const cvrlab_config* cfg, const char* variant, uint64_t seed,
                 const char* data_dir, const char* run_dir) {
  if (int rc = require(cfg, "cfg")) return rc;
  if (int rc = require(variant, "variant")) return rc;
  if (int rc = require(data_dir, "data_dir")) return rc;
  if (int rc = require(run_dir, "run_dir")) return rc;
  return guarded([&] {
    const auto v = graph::variant_from_name(variant);
    if (!v)
      throw ValidationError(std::string("unknown variant '") + variant +
                            "' (expected base|esmm|esm2|hm3|hm3r)");
    harness::run_train(cfg->cfg, *v, seed, data_dir, run_dir);
    return CVRLAB_OK;
  });
}

int cvrlab_evaluate(const char* checkpoint_or_oracle, const char* data_dir,
                    const char* out_dir) {
  if (int rc = require(checkpoint_or_oracle, "checkpoint_or_oracle")) return rc;
  if (int rc = require(data_dir, "data_dir")) return rc;
  if (int rc = require(out_dir, "out_dir")) return rc;
  return guarded([&] {
    harness::run_eval(checkpoint_or_oracle, data_dir, out_dir);
    return CVRLAB_OK;
  });
}

int cvrlab_report(const char* runs_root, const char* out_dir) {
  if (int rc = require(runs_root, "runs_root")) return rc;
  if (int rc = require(out_dir, "out_dir")) return rc;
  return guarded([&] {
    harness::run_report(runs_root, out_dir);
    return CVRLAB_OK;
  });
}

int cvrlab_oracle_check(uint64_t draws_per_variant, uint64_t seed) {
  return guarded([&] {
    if (draws_per_variant == 0)
      throw ValidationError("draws_per_variant must be positive");
    const auto res = harness::run_oracle_check(draws_per_variant, seed);
    if (!res.pass)
      throw VerificationError("composition oracle check failed: " + res.detail);
    return CVRLAB_OK;
  });
}

int cvrlab_grad_check(const char* variant, uint64_t seed, double tolerance) {
  return guarded([&] {
    if (!(tolerance > 0)) throw ValidationError("tolerance must be positive");
    const auto runs = harness::run_grad_check(variant ? variant : "all", seed,
                                              tolerance);
    for (const auto& r : runs) {
      if (!r.pass)
        throw VerificationError(
            "gradient check failed for " + r.variant + ": worst relative error " +
            std::to_string(r.worst_rel_error) + " in " + r.worst_tensor);
    }
    return CVRLAB_OK;
  });
}

int cvrlab_model_load(const char* checkpoint_path, cvrlab_model** out) {
  if (int rc = require(checkpoint_path, "checkpoint_path")) return rc;
  if (int rc = require(out, "out")) return rc;
  return guarded([&] {
    *out = new cvrlab_model(model::load_checkpoint<double>(checkpoint_path));
    return CVRLAB_OK;
  });
}

int cvrlab_model_variant(const cvrlab_model* m, char* buf, size_t buf_size,
                         size_t* needed) {
  if (int rc = require(m, "model")) return rc;
  return guarded([&] {
    return copy_out(std::string(graph::variant_name(m->net.variant())), buf,
                    buf_size, needed);
  });
}

int cvrlab_model_predict(const cvrlab_model* m, size_t n,
                         const uint32_t* user_ids, const uint32_t* item_ids,
                         const uint32_t* category_ids, double* p_ctr,
                         double* p_cvr, double* p_ctcvr, double* p_dmi,
                         double* p_dma) {
  if (int rc = require(m, "model")) return rc;
  if (int rc = require(user_ids, "user_ids")) return rc;
  if (int rc = require(item_ids, "item_ids")) return rc;
  if (int rc = require(category_ids, "category_ids")) return rc;
  return guarded([&] {
    model::FeatureBatch batch;
    batch.fields = {std::span<const uint32_t>(user_ids, n),
                    std::span<const uint32_t>(item_ids, n),
                    std::span<const uint32_t>(category_ids, n)};
    const auto targets = m->net.predict(batch);
    for (size_t i = 0; i < n; ++i) {
      if (p_ctr) p_ctr[i] = targets[i].p_ctr;
      if (p_cvr) p_cvr[i] = targets[i].p_cvr;
      if (p_ctcvr) p_ctcvr[i] = targets[i].p_ctcvr;
      if (p_dmi) p_dmi[i] = targets[i].p_dmi ? *targets[i].p_dmi : NAN;
      if (p_dma) p_dma[i] = targets[i].p_dma ? *targets[i].p_dma : NAN;
    }
    return CVRLAB_OK;
  });
}

void cvrlab_model_free(cvrlab_model* m) { delete m; }

}  // extern "C"
