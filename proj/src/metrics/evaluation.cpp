#include "metrics/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "metrics/auc.hpp"
#include "util/errors.hpp"

namespace cvrlab::metrics {

namespace {

constexpr double kClamp = 1e-7;

double clamped_ce(double p, uint8_t label) {
  const double q = std::min(std::max(p, kClamp), 1.0 - kClamp);
  return label ? -std::log(q) : -std::log(1.0 - q);
}

std::vector<CalibrationBucket> decile_calibration(
    const std::vector<PredictionRow>& rows) {
  std::vector<uint32_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
    return rows[a].p_ctr < rows[b].p_ctr;
  });
  std::vector<CalibrationBucket> buckets;
  const size_t n = order.size();
  for (size_t b = 0; b < 10; ++b) {
    const size_t lo = n * b / 10, hi = n * (b + 1) / 10;
    CalibrationBucket bucket;
    bucket.count = hi - lo;
    if (bucket.count == 0) {
      buckets.push_back(bucket);
      continue;
    }
    double pred = 0.0, emp = 0.0;
    for (size_t k = lo; k < hi; ++k) {
      pred += rows[order[k]].p_ctr;
      emp += rows[order[k]].click;
    }
    bucket.mean_predicted = pred / static_cast<double>(bucket.count);
    bucket.empirical_rate = emp / static_cast<double>(bucket.count);
    buckets.push_back(bucket);
  }
  return buckets;
}

}  // namespace

EvalReport eval_protocol(const std::vector<PredictionRow>& rows) {
  if (rows.empty()) throw ValidationError("eval_protocol: empty test set");

  EvalReport r;
  r.impressions = rows.size();

  std::vector<ScoredExample> ctr_all, ctcvr_all, cvr_clicked;
  ctr_all.reserve(rows.size());
  ctcvr_all.reserve(rows.size());
  double ce_ctr = 0.0, ce_ctcvr = 0.0, ce_cvr = 0.0;
  double sum_p_ctr = 0.0, sum_p_ctcvr = 0.0;
  uint64_t clicked_pos = 0;

  for (const auto& row : rows) {
    ctr_all.push_back({row.p_ctr, row.click});
    ctcvr_all.push_back({row.p_ctcvr, row.pay});
    ce_ctr += clamped_ce(row.p_ctr, row.click);
    ce_ctcvr += clamped_ce(row.p_ctcvr, row.pay);
    sum_p_ctr += row.p_ctr;
    sum_p_ctcvr += row.p_ctcvr;
    r.clicks += row.click;
    r.purchases += row.pay;
    if (row.click) {
      cvr_clicked.push_back({row.p_cvr, row.pay});
      ce_cvr += clamped_ce(row.p_cvr, row.pay);
      clicked_pos += row.pay;
    }
  }

  const double n = static_cast<double>(rows.size());
  r.mean_p_ctr = sum_p_ctr / n;
  r.mean_p_ctcvr = sum_p_ctcvr / n;
  r.empirical_ctr = static_cast<double>(r.clicks) / n;
  r.empirical_ctcvr = static_cast<double>(r.purchases) / n;
  r.logloss_ctr = ce_ctr / n;
  r.logloss_ctcvr = ce_ctcvr / n;

  r.ctr_auc = auc(ctr_all);
  r.ctcvr_auc = auc(ctcvr_all);

  if (cvr_clicked.empty()) {
    r.cvr_auc_absent_reason = "no clicked impressions in test set";
  } else if (clicked_pos == 0) {
    r.cvr_auc_absent_reason = "clicked subset has no purchases";
  } else if (clicked_pos == cvr_clicked.size()) {
    r.cvr_auc_absent_reason = "clicked subset has no negatives";
  } else {
    r.cvr_auc = auc(cvr_clicked);
    r.logloss_cvr = ce_cvr / static_cast<double>(cvr_clicked.size());
  }

  r.ctr_calibration = decile_calibration(rows);
  return r;
}

KvFile EvalReport::to_kv() const {
  KvFile kv;
  for (const auto& [k, v] : metadata) kv.set("meta." + k, v);
  kv.set("meta.auc_type", "global");
  kv.set("meta.cvr_population", "clicked_subset");
  kv.set_u64("counts.impressions", impressions);
  kv.set_u64("counts.clicks", clicks);
  kv.set_u64("counts.purchases", purchases);
  if (cvr_auc)
    kv.set_f64("auc.cvr", *cvr_auc);
  else
    kv.set("auc.cvr_absent_reason", cvr_auc_absent_reason);
  kv.set_f64("auc.ctcvr", ctcvr_auc);
  kv.set_f64("auc.ctr", ctr_auc);
  kv.set_f64("logloss.ctr", logloss_ctr);
  kv.set_f64("logloss.ctcvr", logloss_ctcvr);
  if (logloss_cvr) kv.set_f64("logloss.cvr", *logloss_cvr);
  kv.set_f64("calibration.mean_p_ctr", mean_p_ctr);
  kv.set_f64("calibration.empirical_ctr", empirical_ctr);
  kv.set_f64("calibration.mean_p_ctcvr", mean_p_ctcvr);
  kv.set_f64("calibration.empirical_ctcvr", empirical_ctcvr);
  for (size_t i = 0; i < ctr_calibration.size(); ++i) {
    const auto& b = ctr_calibration[i];
    const std::string prefix = "calibration.ctr_decile_" + std::to_string(i);
    kv.set_u64(prefix + ".count", b.count);
    kv.set_f64(prefix + ".predicted", b.mean_predicted);
    kv.set_f64(prefix + ".empirical", b.empirical_rate);
  }
  return kv;
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  char line[160];
  out << "evaluation report\n";
  for (const auto& [k, v] : metadata) out << "  " << k << ": " << v << "\n";
  std::snprintf(line, sizeof(line),
                "  impressions %llu | clicks %llu | purchases %llu\n",
                static_cast<unsigned long long>(impressions),
                static_cast<unsigned long long>(clicks),
                static_cast<unsigned long long>(purchases));
  out << line;
  if (cvr_auc)
    std::snprintf(line, sizeof(line), "  CVR   AUC %.6f (clicked subset)\n",
                  *cvr_auc);
  else
    std::snprintf(line, sizeof(line), "  CVR   AUC -- (%s)\n",
                  cvr_auc_absent_reason.c_str());
  out << line;
  std::snprintf(line, sizeof(line), "  CTCVR AUC %.6f\n", ctcvr_auc);
  out << line;
  std::snprintf(line, sizeof(line), "  CTR   AUC %.6f\n", ctr_auc);
  out << line;
  std::snprintf(line, sizeof(line),
                "  mean p_ctr %.6g vs empirical %.6g | mean p_ctcvr %.6g vs "
                "empirical %.6g\n",
                mean_p_ctr, empirical_ctr, mean_p_ctcvr, empirical_ctcvr);
  out << line;
  out << "  CTR calibration by predicted decile (count, predicted, empirical):\n";
  for (size_t i = 0; i < ctr_calibration.size(); ++i) {
    const auto& b = ctr_calibration[i];
    std::snprintf(line, sizeof(line), "    d%zu: %8llu  %.6g  %.6g\n", i,
                  static_cast<unsigned long long>(b.count), b.mean_predicted,
                  b.empirical_rate);
    out << line;
  }
  return out.str();
}

}  // namespace cvrlab::metrics
