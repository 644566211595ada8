#include "synth/generator.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "util/blob_file.hpp"
#include "util/errors.hpp"
#include "util/fnv.hpp"
#include "util/rng.hpp"

namespace cvrlab::synth {

namespace {

constexpr char kMagic[8] = {'C', 'V', 'R', 'G', 'E', 'N', '0', '1'};

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_rate(const char* name, double v) {
  if (!(v > 0.0 && v < 1.0))
    throw ValidationError(std::string("generator: rate target '") + name +
                          "' must be strictly inside (0, 1)");
}

}  // namespace

void GeneratorConfig::validate() const {
  if (n_users <= 0 || n_items <= 0 || n_categories <= 0)
    throw ValidationError("generator: user/item/category counts must be positive");
  if (latent_dim <= 0 || latent_dim > 256)
    throw ValidationError("generator: latent_dim out of range");
  if (!(logit_spread > 0.0))
    throw ValidationError("generator: logit_spread must be positive");
  if (ctr_correlation < 0.0 || ctr_correlation >= 1.0 ||
      post_correlation < 0.0 || post_correlation >= 1.0)
    throw ValidationError("generator: correlations must lie in [0, 1)");
  if (!(dma_lift > 0.0) || !(purchase_lift > 0.0))
    throw ValidationError("generator: lifts must be positive");
  check_rate("click", rates.click);
  check_rate("dmi_given_click", rates.dmi_given_click);
  check_rate("dma_given_click", rates.dma_given_click);
  check_rate("purchase_given_click", rates.purchase_given_click);
  if (calibration_pairs < 1000)
    throw ValidationError("generator: calibration_pairs must be >= 1000");
  if (!(calibration_rel_tol > 0.0 && calibration_rel_tol <= 0.02))
    throw ValidationError("generator: calibration_rel_tol must be in (0, 0.02]");
}

std::string check_record_invariants(const ImpressionRecord& r) {
  auto bin = [](uint8_t v) { return v == 0 || v == 1; };
  if (!bin(r.click) || !bin(r.dmi) || !bin(r.dma) || !bin(r.pay))
    return "labels must be 0 or 1";
  if (r.dmi && !r.click) return "dmi=1 requires click=1";
  if (r.dma && !r.click) return "dma=1 requires click=1";
  if (r.pay && !r.click) return "pay=1 requires click=1";
  return {};
}

GenerativeModel GenerativeModel::build(const GeneratorConfig& cfg) {
  cfg.validate();
  GenerativeModel m;
  m.cfg_ = cfg;
  const int d = cfg.latent_dim;
  const int fd = 3 * d;

  m.user_lat_.resize(static_cast<size_t>(cfg.n_users) * d);
  m.item_lat_.resize(static_cast<size_t>(cfg.n_items) * d);
  {
    SplitMix64 rng = keyed_stream(cfg.seed, fnv1a64("user_latents"));
    for (auto& x : m.user_lat_) x = rng.normal();
  }
  {
    SplitMix64 rng = keyed_stream(cfg.seed, fnv1a64("item_latents"));
    for (auto& x : m.item_lat_) x = rng.normal();
  }
  {
    SplitMix64 rng = keyed_stream(cfg.seed, fnv1a64("item_categories"));
    m.item_category_.resize(static_cast<size_t>(cfg.n_items));
    for (auto& c : m.item_category_)
      c = static_cast<uint32_t>(rng.below(static_cast<uint64_t>(cfg.n_categories)));
  }

  // head weights share a common direction so that supervision on one path
  // carries information about the others
  m.head_w_.assign(static_cast<size_t>(6) * fd, 0.0);
  {
    SplitMix64 rng = keyed_stream(cfg.seed, fnv1a64("head_weights"));
    std::vector<double> shared(fd);
    for (auto& x : shared) x = rng.normal();
    const double scale = cfg.logit_spread / std::sqrt(static_cast<double>(fd));
    for (int j = 0; j < 6; ++j) {
      const double c = (j == 0) ? cfg.ctr_correlation : cfg.post_correlation;
      const double own = std::sqrt(1.0 - c * c);
      for (int k = 0; k < fd; ++k)
        m.head_w_[static_cast<size_t>(j) * fd + k] =
            scale * (c * shared[static_cast<size_t>(k)] + own * rng.normal());
    }
  }
  return m;
}

double GenerativeModel::head_logit(int head, uint32_t user, uint32_t item) const {
  const int d = cfg_.latent_dim;
  const double* pu = user_lat_.data() + static_cast<size_t>(user) * d;
  const double* qv = item_lat_.data() + static_cast<size_t>(item) * d;
  const double* a = head_w_.data() + static_cast<size_t>(head) * 3 * d;
  double z = bias_[static_cast<size_t>(head)];
  for (int k = 0; k < d; ++k)
    z += a[k] * pu[k] + a[d + k] * qv[k] + a[2 * d + k] * pu[k] * qv[k];
  return z;
}

graph::HeadProbabilities GenerativeModel::heads(uint32_t user, uint32_t item) const {
  if (user >= cfg_.n_users)
    throw ValidationError("generator: user id out of range");
  if (item >= cfg_.n_items)
    throw ValidationError("generator: item id out of range");
  graph::HeadProbabilities h;
  h.y1 = logistic(head_logit(0, user, item));
  h.y2 = logistic(head_logit(1, user, item));
  h.y3 = logistic(head_logit(2, user, item));
  h.y4 = logistic(head_logit(3, user, item));
  h.y5 = logistic(head_logit(4, user, item));
  h.y6 = logistic(head_logit(5, user, item));
  return h;
}

graph::CompositeTargets GenerativeModel::ground_truth_targets(
    uint32_t user, uint32_t item) const {
  return graph::compose_hm3(heads(user, item));
}

uint32_t GenerativeModel::category_of(uint32_t item) const {
  if (item >= cfg_.n_items)
    throw ValidationError("generator: item id out of range");
  return item_category_[item];
}

void GenerativeModel::calibrate() {
  const int64_t M = cfg_.calibration_pairs;
  const int fd = 3 * cfg_.latent_dim;
  (void)fd;

  // fixed pair sample; every bisection step re-evaluates only its own head
  std::vector<uint32_t> us(static_cast<size_t>(M)), vs(static_cast<size_t>(M));
  {
    SplitMix64 rng = keyed_stream(cfg_.seed, fnv1a64("calibration_pairs"));
    for (int64_t k = 0; k < M; ++k) {
      us[static_cast<size_t>(k)] =
          static_cast<uint32_t>(rng.below(static_cast<uint64_t>(cfg_.n_users)));
      vs[static_cast<size_t>(k)] =
          static_cast<uint32_t>(rng.below(static_cast<uint64_t>(cfg_.n_items)));
    }
  }

  std::array<std::vector<double>, 6> raw;
  for (int j = 0; j < 6; ++j) {
    bias_[static_cast<size_t>(j)] = 0.0;
    raw[static_cast<size_t>(j)].resize(static_cast<size_t>(M));
    for (int64_t k = 0; k < M; ++k)
      raw[static_cast<size_t>(j)][static_cast<size_t>(k)] =
          head_logit(j, us[static_cast<size_t>(k)], vs[static_cast<size_t>(k)]);
  }

  // derive per-head conditional targets from the observable rates and the
  // branch lifts; reject targets the lift pushes out of (0, 1)
  const auto& r = cfg_.rates;
  const double t2 = r.dmi_given_click;
  const double t5 = r.dma_given_click / (t2 * cfg_.dma_lift + (1.0 - t2));
  const double t3 = cfg_.dma_lift * t5;
  const double dma_c = r.dma_given_click;
  const double t6 =
      r.purchase_given_click / (dma_c * cfg_.purchase_lift + (1.0 - dma_c));
  const double t4 = cfg_.purchase_lift * t6;
  for (auto [name, t] : {std::pair<const char*, double>{"P(D-Ma|D-Mi)", t3},
                         {"P(D-Ma|O-Mi)", t5},
                         {"P(pay|D-Ma)", t4},
                         {"P(pay|O-Ma)", t6}}) {
    if (!(t > 0.0 && t < 1.0))
      throw ValidationError(std::string("generator: derived target ") + name +
                            " = " + std::to_string(t) +
                            " falls outside (0, 1); lower the lift or the rate");
  }

  auto bisect = [&](int head, const std::vector<double>& weight, double target) {
    const auto& z = raw[static_cast<size_t>(head)];
    double wsum = 0.0;
    for (double w : weight) wsum += w;
    if (!(wsum > 0.0))
      throw ValidationError("generator: empty conditioning set during calibration");
    auto rate_at = [&](double b) {
      double acc = 0.0;
      for (size_t k = 0; k < z.size(); ++k)
        acc += weight[k] * logistic(z[k] + b);
      return acc / wsum;
    };
    double lo = -40.0, hi = 40.0;
    if (rate_at(lo) > target || rate_at(hi) < target)
      throw ValidationError("generator: head " + std::to_string(head + 1) +
                            " cannot reach target rate " + std::to_string(target) +
                            " with the configured logit spread");
    for (int iter = 0; iter < 60; ++iter) {
      const double mid = 0.5 * (lo + hi);
      const double got = rate_at(mid);
      if (std::fabs(got - target) <= cfg_.calibration_rel_tol * target)
        return mid;
      (got < target ? lo : hi) = mid;
    }
    throw ValidationError("generator: bias bisection for head " +
                          std::to_string(head + 1) +
                          " did not converge in 60 iterations");
  };

  const size_t n = static_cast<size_t>(M);
  std::vector<double> w_all(n, 1.0);
  bias_[0] = bisect(0, w_all, r.click);

  std::vector<double> w_click(n);
  for (size_t k = 0; k < n; ++k) w_click[k] = logistic(raw[0][k] + bias_[0]);
  bias_[1] = bisect(1, w_click, t2);

  std::vector<double> y2(n), w_dmi(n), w_omi(n);
  for (size_t k = 0; k < n; ++k) {
    y2[k] = logistic(raw[1][k] + bias_[1]);
    w_dmi[k] = w_click[k] * y2[k];
    w_omi[k] = w_click[k] * (1.0 - y2[k]);
  }
  bias_[2] = bisect(2, w_dmi, t3);
  bias_[4] = bisect(4, w_omi, t5);

  std::vector<double> w_dma(n), w_oma(n);
  for (size_t k = 0; k < n; ++k) {
    const double y3 = logistic(raw[2][k] + bias_[2]);
    const double y5 = logistic(raw[4][k] + bias_[4]);
    const double reach = y2[k] * y3 + (1.0 - y2[k]) * y5;
    w_dma[k] = w_click[k] * reach;
    w_oma[k] = w_click[k] * (1.0 - reach);
  }
  bias_[3] = bisect(3, w_dma, t4);
  bias_[5] = bisect(5, w_oma, t6);

  // record the model-implied observable rates at the calibration sample
  double cs = 0.0, dmis = 0.0, dmas = 0.0, pays = 0.0;
  for (size_t k = 0; k < n; ++k) {
    const auto h = [&] {
      graph::HeadProbabilities hp;
      hp.y1 = logistic(raw[0][k] + bias_[0]);
      hp.y2 = logistic(raw[1][k] + bias_[1]);
      hp.y3 = logistic(raw[2][k] + bias_[2]);
      hp.y4 = logistic(raw[3][k] + bias_[3]);
      hp.y5 = logistic(raw[4][k] + bias_[4]);
      hp.y6 = logistic(raw[5][k] + bias_[5]);
      return hp;
    }();
    const auto t = graph::compose_hm3(h);
    cs += t.p_ctr;
    dmis += *t.p_dmi;
    dmas += *t.p_dma;
    pays += t.p_ctcvr;
  }
  implied_ = {cs / static_cast<double>(M), dmis / cs, dmas / cs, pays / cs};
  calibrated_ = true;
}

ImpressionRecord GenerativeModel::sample_impression(uint64_t impression_id) const {
  SplitMix64 rng = keyed_stream(cfg_.seed, impression_id);
  ImpressionRecord rec;
  rec.impression_id = impression_id;
  rec.user_id = static_cast<uint32_t>(rng.below(static_cast<uint64_t>(cfg_.n_users)));
  rec.item_id = static_cast<uint32_t>(rng.below(static_cast<uint64_t>(cfg_.n_items)));
  rec.category_id = item_category_[rec.item_id];

  const graph::HeadProbabilities y = heads(rec.user_id, rec.item_id);
  if (rng.uniform() < y.y1) {
    rec.click = 1;
    const bool micro = rng.uniform() < y.y2;
    const bool macro = rng.uniform() < (micro ? y.y3 : y.y5);
    const bool paid = rng.uniform() < (macro ? y.y4 : y.y6);
    rec.dmi = micro ? 1 : 0;
    rec.dma = macro ? 1 : 0;
    rec.pay = paid ? 1 : 0;
  }
  return rec;
}

void GenerativeModel::save(const std::string& path) const {
  BlobWriter w;
  nlohmann::json meta;
  meta["version"] = 1;
  meta["n_users"] = cfg_.n_users;
  meta["n_items"] = cfg_.n_items;
  meta["n_categories"] = cfg_.n_categories;
  meta["latent_dim"] = cfg_.latent_dim;
  meta["logit_spread"] = cfg_.logit_spread;
  meta["ctr_correlation"] = cfg_.ctr_correlation;
  meta["post_correlation"] = cfg_.post_correlation;
  meta["dma_lift"] = cfg_.dma_lift;
  meta["purchase_lift"] = cfg_.purchase_lift;
  meta["rate_click"] = cfg_.rates.click;
  meta["rate_dmi_given_click"] = cfg_.rates.dmi_given_click;
  meta["rate_dma_given_click"] = cfg_.rates.dma_given_click;
  meta["rate_purchase_given_click"] = cfg_.rates.purchase_given_click;
  meta["calibration_pairs"] = cfg_.calibration_pairs;
  meta["calibration_rel_tol"] = cfg_.calibration_rel_tol;
  meta["seed"] = cfg_.seed;
  meta["calibrated"] = calibrated_;
  w.set_meta(meta);
  w.add_f64("user_latents", user_lat_.data(), user_lat_.size(),
            {cfg_.n_users, cfg_.latent_dim});
  w.add_f64("item_latents", item_lat_.data(), item_lat_.size(),
            {cfg_.n_items, cfg_.latent_dim});
  w.add_u32("item_categories", item_category_.data(), item_category_.size(),
            {cfg_.n_items});
  w.add_f64("head_weights", head_w_.data(), head_w_.size(),
            {6, 3 * cfg_.latent_dim});
  w.add_f64("head_biases", bias_.data(), bias_.size(), {6});
  w.add_f64("implied_rates", implied_.data(), implied_.size(), {4});
  w.write(path, kMagic);
}

GenerativeModel GenerativeModel::load(const std::string& path) {
  BlobReader r(path, kMagic);
  const auto& meta = r.meta();
  GenerativeModel m;
  m.cfg_.n_users = meta.at("n_users").get<int64_t>();
  m.cfg_.n_items = meta.at("n_items").get<int64_t>();
  m.cfg_.n_categories = meta.at("n_categories").get<int64_t>();
  m.cfg_.latent_dim = meta.at("latent_dim").get<int>();
  m.cfg_.logit_spread = meta.at("logit_spread").get<double>();
  m.cfg_.ctr_correlation = meta.at("ctr_correlation").get<double>();
  m.cfg_.post_correlation = meta.at("post_correlation").get<double>();
  m.cfg_.dma_lift = meta.at("dma_lift").get<double>();
  m.cfg_.purchase_lift = meta.at("purchase_lift").get<double>();
  m.cfg_.rates.click = meta.at("rate_click").get<double>();
  m.cfg_.rates.dmi_given_click = meta.at("rate_dmi_given_click").get<double>();
  m.cfg_.rates.dma_given_click = meta.at("rate_dma_given_click").get<double>();
  m.cfg_.rates.purchase_given_click =
      meta.at("rate_purchase_given_click").get<double>();
  m.cfg_.calibration_pairs = meta.at("calibration_pairs").get<int64_t>();
  m.cfg_.calibration_rel_tol = meta.at("calibration_rel_tol").get<double>();
  m.cfg_.seed = meta.at("seed").get<uint64_t>();
  m.calibrated_ = meta.at("calibrated").get<bool>();
  m.user_lat_ = r.read_f64("user_latents");
  m.item_lat_ = r.read_f64("item_latents");
  m.item_category_ = r.read_u32("item_categories");
  m.head_w_ = r.read_f64("head_weights");
  const auto b = r.read_f64("head_biases");
  const auto ir = r.read_f64("implied_rates");
  if (b.size() != 6 || ir.size() != 4)
    throw ValidationError("generator state file corrupt: " + path);
  std::copy(b.begin(), b.end(), m.bias_.begin());
  std::copy(ir.begin(), ir.end(), m.implied_.begin());
  return m;
}

}  // namespace cvrlab::synth
