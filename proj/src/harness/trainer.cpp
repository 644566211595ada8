#include "harness/trainer.hpp"

#include "util/errors.hpp"

namespace cvrlab::harness {

void Dataset::push(const synth::ImpressionRecord& r) {
  user.push_back(r.user_id);
  item.push_back(r.item_id);
  category.push_back(r.category_id);
  click.push_back(r.click);
  dmi.push_back(r.dmi);
  dma.push_back(r.dma);
  pay.push_back(r.pay);
}

Dataset Dataset::load(const std::string& log_path) {
  synth::LogReader reader(log_path);
  Dataset d;
  synth::ImpressionRecord rec;
  while (reader.next(rec)) d.push(rec);
  return d;
}

double slot_prior_rate(const Dataset& data, graph::Variant variant, int slot) {
  // conditional event / conditioning set per slot under the variant's graph
  uint64_t num = 0, den = 0;
  const int64_t n = data.size();
  using V = graph::Variant;
  for (int64_t i = 0; i < n; ++i) {
    const size_t k = static_cast<size_t>(i);
    const bool click = data.click[k], dmi = data.dmi[k], dma = data.dma[k],
               pay = data.pay[k];
    bool in = false, event = false;
    switch (variant) {
      case V::Hm3:
        switch (slot) {
          case 1: in = true; event = click; break;
          case 2: in = click; event = dmi; break;
          case 3: in = click && dmi; event = dma; break;
          case 4: in = dma; event = pay; break;
          case 5: in = click && !dmi; event = dma; break;
          case 6: in = click && !dma; event = pay; break;
        }
        break;
      case V::Hm3Reversed:
        switch (slot) {
          case 1: in = true; event = click; break;
          case 2: in = click; event = dma; break;
          case 3: in = click && dma; event = dmi; break;
          case 4: in = dmi; event = pay; break;
          case 5: in = click && !dma; event = dmi; break;
          case 6: in = click && !dmi; event = pay; break;
        }
        break;
      case V::Esm2:
        switch (slot) {
          case 1: in = true; event = click; break;
          case 3: in = click; event = dma; break;
          case 4: in = dma; event = pay; break;
          case 6: in = click && !dma; event = pay; break;
        }
        break;
      case V::Esmm:
      case V::Base:
        switch (slot) {
          case 1: in = true; event = click; break;
          case 4: in = click; event = pay; break;
        }
        break;
    }
    if (in) {
      ++den;
      num += event ? 1 : 0;
    }
  }
  if (den == 0) return 0.0;  // clamped to the logit floor by the caller
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace cvrlab::harness
