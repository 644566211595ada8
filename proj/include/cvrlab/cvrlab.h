#ifndef CVRLAB_H
#define CVRLAB_H

/*
 * C interface to the cvrlab core: synthetic behavior-log generation,
 * multi-task conversion-model training, evaluation, comparison reports and
 * the built-in verification suites. All functions return a status code;
 * details of the most recent failure on the calling thread are available
 * through cvrlab_last_error(). Handles are opaque and must be released with
 * their matching *_free function.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CVRLAB_API __declspec(dllexport)
#else
#define CVRLAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as CLI exit codes. */
enum {
  CVRLAB_OK = 0,
  CVRLAB_ERR_VALIDATION = 1,  /* bad config, bad arguments, bad input files */
  CVRLAB_ERR_RUNTIME = 2,     /* I/O failures, divergence, internal errors  */
  CVRLAB_ERR_VERIFICATION = 3 /* an oracle or gradient check failed         */
};

typedef struct cvrlab_config cvrlab_config;
typedef struct cvrlab_model cvrlab_model;

CVRLAB_API const char* cvrlab_version(void);
CVRLAB_API const char* cvrlab_status_name(int status);
CVRLAB_API const char* cvrlab_last_error(void);

/* ---- configuration ---------------------------------------------------- */

/* Flat `key = value` text file; a `preset = <name>` line starts from that
 * preset and the remaining keys override it. */
CVRLAB_API int cvrlab_config_load(const char* path, cvrlab_config** out);
CVRLAB_API int cvrlab_config_preset(const char* name, cvrlab_config** out);
CVRLAB_API int cvrlab_config_set(cvrlab_config* cfg, const char* key,
                                 const char* value);
/* Canonical value of one key. Returns the required buffer size (including
 * the terminator) and fills buf when it is large enough. */
CVRLAB_API int cvrlab_config_get(const cvrlab_config* cfg, const char* key,
                                 char* buf, size_t buf_size, size_t* needed);
CVRLAB_API void cvrlab_config_free(cvrlab_config* cfg);

/* ---- pipeline ----------------------------------------------------------
 * out_dir / run_dir are created if missing. Generation writes train/test
 * logs, their manifests and the generator state; training writes
 * checkpoint.bin (+ .tensors.txt sidecar), curve.csv and run.json;
 * evaluation writes metrics.kv, metrics.txt and eval.json. */

CVRLAB_API int cvrlab_generate(const cvrlab_config* cfg, const char* out_dir);

/* variant: base | esmm | esm2 | hm3 | hm3r */
CVRLAB_API int cvrlab_train(const cvrlab_config* cfg, const char* variant,
                            uint64_t seed, const char* data_dir,
                            const char* run_dir);

/* checkpoint_or_oracle: a checkpoint path, or "oracle" to score with the
 * generator's ground-truth targets. */
CVRLAB_API int cvrlab_evaluate(const char* checkpoint_or_oracle,
                               const char* data_dir, const char* out_dir);

/* Aggregates every run under runs_root into report.txt / report.kv. */
CVRLAB_API int cvrlab_report(const char* runs_root, const char* out_dir);

/* Closed-form graph composition vs exhaustive path enumeration; returns
 * CVRLAB_ERR_VERIFICATION (with a counterexample in the error message) on
 * disagreement beyond 1e-12. */
CVRLAB_API int cvrlab_oracle_check(uint64_t draws_per_variant, uint64_t seed);

/* Analytic gradients of the full multi-task loss vs central finite
 * differences on a small 64-bit model; variant may be NULL or "all". */
CVRLAB_API int cvrlab_grad_check(const char* variant, uint64_t seed,
                                 double tolerance);

/* ---- trained models ----------------------------------------------------
 * Prediction handles are immutable and safe to share across threads. */

CVRLAB_API int cvrlab_model_load(const char* checkpoint_path, cvrlab_model** out);
CVRLAB_API int cvrlab_model_variant(const cvrlab_model* m, char* buf,
                                    size_t buf_size, size_t* needed);
/* Composed targets for n feature rows. Output arrays may be NULL if the
 * caller does not need them; p_dmi / p_dma are written as NaN for variants
 * whose graph lacks that level. */
CVRLAB_API int cvrlab_model_predict(const cvrlab_model* m, size_t n,
                                    const uint32_t* user_ids,
                                    const uint32_t* item_ids,
                                    const uint32_t* category_ids, double* p_ctr,
                                    double* p_cvr, double* p_ctcvr,
                                    double* p_dmi, double* p_dma);
CVRLAB_API void cvrlab_model_free(cvrlab_model* m);

#ifdef __cplusplus
}
#endif

#endif /* CVRLAB_H */
