#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace cvrlab::graph {

// Outputs of the (up to) six sigmoid heads. Slot meaning depends on the
// variant's graph wiring:
//
//   hm3 : y1 = P(click|impr), y2 = P(D-Mi|click), y3 = P(D-Ma|D-Mi),
//         y4 = P(pay|D-Ma),   y5 = P(D-Ma|O-Mi),  y6 = P(pay|O-Ma)
//   hm3r: micro and macro levels swapped (y2 = P(D-Ma|click), ...)
//   esm2: macro level only: y1, y3 = P(D-Ma|click), y4 = P(pay|D-Ma),
//         y6 = P(pay|O-Ma); y2/y5 unused
//   esmm/base: y1 = P(click|impr), y4 = P(pay|click); others unused
struct HeadProbabilities {
  double y1 = 0.0;
  double y2 = 0.0;
  double y3 = 0.0;
  double y4 = 0.0;
  double y5 = 0.0;
  double y6 = 0.0;
};

// Entire-impression-space targets composed from the heads. p_dmi / p_dma are
// absent (not just zero) for variants whose graph lacks the level; losses
// must never consume an absent target.
struct CompositeTargets {
  double p_ctr = 0.0;
  double p_cvr = 0.0;    // conditional on click
  double p_ctcvr = 0.0;  // always computed as p_ctr * p_cvr
  std::optional<double> p_dmi;
  std::optional<double> p_dma;
};

enum class Variant { Hm3, Hm3Reversed, Esm2, Esmm, Base };

constexpr std::array<Variant, 5> kAllVariants = {
    Variant::Hm3, Variant::Hm3Reversed, Variant::Esm2, Variant::Esmm,
    Variant::Base};

std::string_view variant_name(Variant v);                       // "hm3", "hm3r", ...
std::optional<Variant> variant_from_name(std::string_view name);

// Heads per network: hm3/hm3r 6, esm2 4, esmm 2, base 1 (per task).
int head_count(Variant v);

// Closed-form compositions. Inputs must be finite and in [0, 1]; anything
// else raises ValidationError. Products are evaluated in the written order
// so that p_ctcvr == p_ctr * p_cvr holds bit-exactly.
CompositeTargets compose_hm3(const HeadProbabilities& h);
CompositeTargets compose_hm3_reversed(const HeadProbabilities& h);
CompositeTargets compose_esm2(const HeadProbabilities& h);
CompositeTargets compose_esmm(const HeadProbabilities& h);
CompositeTargets compose(Variant v, const HeadProbabilities& h);

// Partial derivatives of every composite target with respect to every head.
// Rows for targets a variant does not define are all zero.
struct CompositionJacobian {
  static constexpr int kCtr = 0;
  static constexpr int kDmi = 1;
  static constexpr int kDma = 2;
  static constexpr int kCvr = 3;
  static constexpr int kCtcvr = 4;

  // d[target][head], heads indexed 0..5 for y1..y6
  std::array<std::array<double, 6>, 5> d{};
};

CompositionJacobian composition_gradients(Variant v, const HeadProbabilities& h);

// Independent oracle: enumerates every root-to-leaf path of the variant's
// behavior tree (click x first branch x second branch x pay), multiplies
// edge probabilities along each path and sums per target event. Must agree
// with the closed forms within 1e-12 absolute. p_cvr is accumulated over the
// post-click subtree, so it is defined even when y1 == 0.
CompositeTargets enumerate_paths(Variant v, const HeadProbabilities& h);

// Throws ValidationError unless all six fields are finite and in [0, 1].
void validate_heads(const HeadProbabilities& h);

}  // namespace cvrlab::graph
