#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "util/kv_file.hpp"

namespace cvrlab::metrics {

// One scored test impression: composed predictions plus ground labels.
struct PredictionRow {
  double p_ctr = 0.0;
  double p_cvr = 0.0;
  double p_ctcvr = 0.0;
  uint8_t click = 0;
  uint8_t dmi = 0;
  uint8_t dma = 0;
  uint8_t pay = 0;
};

struct CalibrationBucket {
  uint64_t count = 0;
  double mean_predicted = 0.0;
  double empirical_rate = 0.0;
};

// CVR is scored on the clicked subset (standard for post-click conversion);
// CTCVR on every impression. AUC is global, not per-user averaged.
struct EvalReport {
  uint64_t impressions = 0;
  uint64_t clicks = 0;
  uint64_t purchases = 0;

  std::optional<double> cvr_auc;
  std::string cvr_auc_absent_reason;
  double ctcvr_auc = 0.0;
  double ctr_auc = 0.0;

  double logloss_ctr = 0.0;
  double logloss_ctcvr = 0.0;
  std::optional<double> logloss_cvr;  // clicked subset

  double mean_p_ctr = 0.0;
  double empirical_ctr = 0.0;
  double mean_p_ctcvr = 0.0;
  double empirical_ctcvr = 0.0;

  // decile buckets over predicted p_ctr: mean prediction vs empirical CTR
  std::vector<CalibrationBucket> ctr_calibration;

  // extra metadata copied into the key-value report (variant, seed, ...)
  std::vector<std::pair<std::string, std::string>> metadata;

  KvFile to_kv() const;
  std::string to_table() const;
};

EvalReport eval_protocol(const std::vector<PredictionRow>& rows);

}  // namespace cvrlab::metrics
