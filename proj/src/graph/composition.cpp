#include "graph/composition.hpp"

#include <cmath>

#include "util/errors.hpp"

namespace cvrlab::graph {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Hm3: return "hm3";
    case Variant::Hm3Reversed: return "hm3r";
    case Variant::Esm2: return "esm2";
    case Variant::Esmm: return "esmm";
    case Variant::Base: return "base";
  }
  return "?";
}

std::optional<Variant> variant_from_name(std::string_view name) {
  for (Variant v : kAllVariants)
    if (variant_name(v) == name) return v;
  return std::nullopt;
}

int head_count(Variant v) {
  switch (v) {
    case Variant::Hm3:
    case Variant::Hm3Reversed: return 6;
    case Variant::Esm2: return 4;
    case Variant::Esmm: return 2;
    case Variant::Base: return 1;
  }
  return 0;
}

void validate_heads(const HeadProbabilities& h) {
  const double ys[6] = {h.y1, h.y2, h.y3, h.y4, h.y5, h.y6};
  for (int i = 0; i < 6; ++i) {
    if (!std::isfinite(ys[i]) || ys[i] < 0.0 || ys[i] > 1.0)
      throw ValidationError("head probability y" + std::to_string(i + 1) +
                            " outside [0, 1]: " + std::to_string(ys[i]));
  }
}

CompositeTargets compose_hm3(const HeadProbabilities& h) {
  validate_heads(h);
  // two-level mixture: reach D-Ma either through D-Mi or through O-Mi
  const double reach_dma = h.y2 * h.y3 + (1.0 - h.y2) * h.y5;
  const double miss_dma = h.y2 * (1.0 - h.y3) + (1.0 - h.y2) * (1.0 - h.y5);
  CompositeTargets t;
  t.p_ctr = h.y1;
  t.p_dmi = h.y1 * h.y2;
  t.p_dma = h.y1 * reach_dma;
  t.p_cvr = h.y4 * reach_dma + h.y6 * miss_dma;
  t.p_ctcvr = t.p_ctr * t.p_cvr;
  return t;
}

CompositeTargets compose_hm3_reversed(const HeadProbabilities& h) {
  validate_heads(h);
  // same tree with the macro level first; slots are reinterpreted:
  // y2 = P(D-Ma|click), y3 = P(D-Mi|D-Ma), y5 = P(D-Mi|O-Ma),
  // y4 = P(pay|D-Mi), y6 = P(pay|O-Mi)
  const double reach_dmi = h.y2 * h.y3 + (1.0 - h.y2) * h.y5;
  const double miss_dmi = h.y2 * (1.0 - h.y3) + (1.0 - h.y2) * (1.0 - h.y5);
  CompositeTargets t;
  t.p_ctr = h.y1;
  t.p_dma = h.y1 * h.y2;
  t.p_dmi = h.y1 * reach_dmi;
  t.p_cvr = h.y4 * reach_dmi + h.y6 * miss_dmi;
  t.p_ctcvr = t.p_ctr * t.p_cvr;
  return t;
}

CompositeTargets compose_esm2(const HeadProbabilities& h) {
  validate_heads(h);
  CompositeTargets t;
  t.p_ctr = h.y1;
  t.p_dma = h.y1 * h.y3;
  t.p_cvr = h.y3 * h.y4 + (1.0 - h.y3) * h.y6;
  t.p_ctcvr = t.p_ctr * t.p_cvr;
  return t;
}

CompositeTargets compose_esmm(const HeadProbabilities& h) {
  validate_heads(h);
  CompositeTargets t;
  t.p_ctr = h.y1;
  t.p_cvr = h.y4;
  t.p_ctcvr = t.p_ctr * t.p_cvr;
  return t;
}

CompositeTargets compose(Variant v, const HeadProbabilities& h) {
  switch (v) {
    case Variant::Hm3: return compose_hm3(h);
    case Variant::Hm3Reversed: return compose_hm3_reversed(h);
    case Variant::Esm2: return compose_esm2(h);
    case Variant::Esmm:
    case Variant::Base: return compose_esmm(h);
  }
  throw ValidationError("unknown variant");
}

CompositionJacobian composition_gradients(Variant v, const HeadProbabilities& h) {
  validate_heads(h);
  CompositionJacobian j;
  auto& d = j.d;
  using J = CompositionJacobian;

  switch (v) {
    case Variant::Hm3:
    case Variant::Hm3Reversed: {
      const double mix = h.y2 * h.y3 + (1.0 - h.y2) * h.y5;
      const double cvr = h.y4 * mix +
                         h.y6 * (h.y2 * (1.0 - h.y3) + (1.0 - h.y2) * (1.0 - h.y5));
      // rows for the one-hop and two-hop levels; which one is dmi depends on
      // the variant
      std::array<double, 6> one_hop = {h.y2, h.y1, 0, 0, 0, 0};
      std::array<double, 6> two_hop = {mix, h.y1 * (h.y3 - h.y5), h.y1 * h.y2,
                                       0, h.y1 * (1.0 - h.y2), 0};
      d[J::kCtr] = {1, 0, 0, 0, 0, 0};
      d[J::kCvr] = {0,
                    (h.y3 - h.y5) * (h.y4 - h.y6),
                    h.y2 * (h.y4 - h.y6),
                    mix,
                    (1.0 - h.y2) * (h.y4 - h.y6),
                    1.0 - mix};
      for (int k = 0; k < 6; ++k)
        d[J::kCtcvr][k] = h.y1 * d[J::kCvr][k];
      d[J::kCtcvr][0] = cvr;
      if (v == Variant::Hm3) {
        d[J::kDmi] = one_hop;
        d[J::kDma] = two_hop;
      } else {
        d[J::kDma] = one_hop;
        d[J::kDmi] = two_hop;
      }
      break;
    }
    case Variant::Esm2: {
      const double cvr = h.y3 * h.y4 + (1.0 - h.y3) * h.y6;
      d[J::kCtr] = {1, 0, 0, 0, 0, 0};
      d[J::kDma] = {h.y3, 0, h.y1, 0, 0, 0};
      d[J::kCvr] = {0, 0, h.y4 - h.y6, h.y3, 0, 1.0 - h.y3};
      d[J::kCtcvr] = {cvr, 0, h.y1 * (h.y4 - h.y6), h.y1 * h.y3, 0,
                      h.y1 * (1.0 - h.y3)};
      break;
    }
    case Variant::Esmm:
    case Variant::Base: {
      d[J::kCtr] = {1, 0, 0, 0, 0, 0};
      d[J::kCvr] = {0, 0, 0, 1, 0, 0};
      d[J::kCtcvr] = {h.y4, 0, 0, h.y1, 0, 0};
      break;
    }
  }
  return j;
}

namespace {

struct PathAccumulator {
  double ctr = 0, dmi = 0, dma = 0, ctcvr = 0, cvr = 0;
};

}  // namespace

CompositeTargets enumerate_paths(Variant v, const HeadProbabilities& h) {
  validate_heads(h);

  // Normalized tree: click, an optional first branch, an optional second
  // branch (its probability depends on the first), then pay (probability
  // depends on the last branch). dmi/dma map onto the branches per variant:
  // hm3 first=micro second=macro; hm3r first=macro second=micro; esm2 has a
  // single (second) branch for macro; esmm/base branch straight to pay.
  const bool has_first = (v == Variant::Hm3 || v == Variant::Hm3Reversed);
  const bool has_second = has_first || v == Variant::Esm2;
  const bool dmi_is_first = (v == Variant::Hm3);
  const bool has_dmi = has_first;
  const bool has_dma = has_second;

  PathAccumulator acc;
  for (int click = 0; click <= 1; ++click) {
    const double p_click = click ? h.y1 : 1.0 - h.y1;
    if (!click) continue;  // no post-click events on this path
    acc.ctr += p_click;
    for (int first = 0; first <= 1; ++first) {
      double p_first = 1.0;
      if (has_first) {
        p_first = first ? h.y2 : 1.0 - h.y2;
      } else if (first == 1) {
        continue;  // level absent: only one pseudo-branch
      }
      for (int second = 0; second <= 1; ++second) {
        double p_second = 1.0;
        if (has_second) {
          // without a micro level (esm2) the single branch probability is y3
          const double p_pos = has_first ? (first ? h.y3 : h.y5) : h.y3;
          p_second = second ? p_pos : 1.0 - p_pos;
        } else if (second == 1) {
          continue;
        }
        for (int pay = 0; pay <= 1; ++pay) {
          const double p_pay_pos = has_second ? (second ? h.y4 : h.y6) : h.y4;
          const double p_pay = pay ? p_pay_pos : 1.0 - p_pay_pos;
          const double p_path = p_first * p_second * p_pay;  // given click

          const bool dmi_flag = dmi_is_first ? (first != 0) : (second != 0);
          const bool dma_flag =
              (v == Variant::Esm2) ? (second != 0)
                                   : (dmi_is_first ? (second != 0) : (first != 0));
          if (has_dmi && dmi_flag) acc.dmi += p_click * p_path;
          if (has_dma && dma_flag) acc.dma += p_click * p_path;
          if (pay) {
            acc.ctcvr += p_click * p_path;
            acc.cvr += p_path;  // conditioned on click
          }
        }
      }
    }
  }

  CompositeTargets t;
  t.p_ctr = acc.ctr;
  t.p_cvr = acc.cvr;
  t.p_ctcvr = acc.ctcvr;
  if (has_dmi) t.p_dmi = acc.dmi;
  if (has_dma) t.p_dma = acc.dma;
  return t;
}

}  // namespace cvrlab::graph
