#include <cmath>

#include "doctest.h"
#include "graph/composition.hpp"
#include "util/errors.hpp"
#include "util/rng.hpp"

using namespace cvrlab;
using namespace cvrlab::graph;

namespace {

HeadProbabilities heads(double y1, double y2, double y3, double y4, double y5,
                        double y6) {
  HeadProbabilities h;
  h.y1 = y1;
  h.y2 = y2;
  h.y3 = y3;
  h.y4 = y4;
  h.y5 = y5;
  h.y6 = y6;
  return h;
}

HeadProbabilities random_heads(SplitMix64& rng) {
  return heads(rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(),
               rng.uniform(), rng.uniform());
}

void expect_close(double a, double b, double tol = 1e-12) {
  CHECK(std::fabs(a - b) <= tol);
}

}  // namespace

TEST_CASE("hm3 composition matches the worked example") {
  // oracle: enumerate the 8 post-click branch outcomes and sum path
  // probabilities; frozen here
  const auto t = compose_hm3(heads(0.5, 0.4, 0.6, 0.3, 0.2, 0.1));
  expect_close(t.p_ctr, 0.5, 1e-15);
  expect_close(*t.p_dmi, 0.2, 1e-15);
  expect_close(*t.p_dma, 0.18, 1e-15);
  expect_close(t.p_cvr, 0.172, 1e-15);
  expect_close(t.p_ctcvr, 0.086, 1e-15);
}

TEST_CASE("hm3 degenerate corners") {
  SUBCASE("no clicks zero every entire-space target") {
    const auto t = compose_hm3(heads(0.0, 0.3, 0.9, 0.7, 0.4, 0.6));
    CHECK(t.p_ctr == 0.0);
    CHECK(*t.p_dmi == 0.0);
    CHECK(*t.p_dma == 0.0);
    CHECK(t.p_ctcvr == 0.0);
    // the conversion rate is still defined from the post-click heads
    expect_close(t.p_cvr, 0.7 * (0.3 * 0.9 + 0.7 * 0.4) + 0.6 * (0.3 * 0.1 + 0.7 * 0.6),
                 1e-15);
  }
  SUBCASE("deterministic full path") {
    const auto t = compose_hm3(heads(1, 1, 1, 1, 0.25, 0.75));
    CHECK(t.p_cvr == 1.0);
    CHECK(t.p_ctcvr == 1.0);
    CHECK(*t.p_dmi == 1.0);
    CHECK(*t.p_dma == 1.0);
  }
}

TEST_CASE("reversed composition mirrors the levels") {
  SUBCASE("deterministic reversed path") {
    const auto t = compose_hm3_reversed(heads(1, 1, 1, 1, 0.25, 0.75));
    CHECK(*t.p_dma == 1.0);
    CHECK(*t.p_dmi == 1.0);
    CHECK(t.p_ctcvr == 1.0);
  }
  SUBCASE("worked example with the level roles swapped") {
    const auto t = compose_hm3_reversed(heads(0.5, 0.4, 0.6, 0.3, 0.2, 0.1));
    expect_close(*t.p_dma, 0.2, 1e-15);
    expect_close(*t.p_dmi, 0.18, 1e-15);
    expect_close(t.p_cvr, 0.172, 1e-15);
  }
  SUBCASE("one-hop branch eliminated") {
    const auto t = compose_hm3_reversed(heads(0.7, 0.0, 0.6, 0.3, 0.2, 0.1));
    CHECK(*t.p_dma == 0.0);
    expect_close(*t.p_dmi, 0.7 * 0.2, 1e-15);
  }
}

TEST_CASE("esmm composition") {
  SUBCASE("direct product") {
    const auto t = compose_esmm(heads(0.5, 0, 0, 0.2, 0, 0));
    expect_close(t.p_ctcvr, 0.1, 1e-15);
    CHECK(!t.p_dmi.has_value());
    CHECK(!t.p_dma.has_value());
  }
  SUBCASE("identity case") {
    CHECK(compose_esmm(heads(1, 0, 0, 1, 0, 0)).p_ctcvr == 1.0);
  }
  SUBCASE("shopping-log scale rates") {
    // click/impression and purchase/click ratios from a 4.9B-impression log
    const double ctr = 146.0 / 4900.0;
    const double cvr = 5.0 / 146.0;
    const auto t = compose_esmm(heads(ctr, 0, 0, cvr, 0, 0));
    expect_close(t.p_ctcvr, 5.0 / 4900.0, 1e-15);
    CHECK(t.p_ctcvr < 0.0011);  // ~0.1% of impressions convert
  }
}

TEST_CASE("esm2 composition") {
  SUBCASE("deterministic path") {
    CHECK(compose_esm2(heads(1, 0, 1, 1, 0, 0.4)).p_ctcvr == 1.0);
  }
  SUBCASE("macro-only worked example") {
    const auto t = compose_esm2(heads(0.5, 0, 0.36, 0.3, 0, 0.1));
    expect_close(t.p_cvr, 0.172, 1e-15);
    expect_close(t.p_ctcvr, 0.086, 1e-15);
    CHECK(!t.p_dmi.has_value());
  }
  SUBCASE("all traffic through the other-macro branch") {
    const auto t = compose_esm2(heads(0.8, 0, 0.0, 0.3, 0, 0.1));
    expect_close(t.p_cvr, 0.1, 1e-15);
  }
}

TEST_CASE("cross-variant consistency: esm2 with the hm3 mixture") {
  SplitMix64 rng(42);
  for (int i = 0; i < 500; ++i) {
    const auto h = random_heads(rng);
    const double mix = h.y2 * h.y3 + (1.0 - h.y2) * h.y5;
    const auto hm3 = compose_hm3(h);
    const auto esm2 = compose_esm2(heads(h.y1, 0, mix, h.y4, 0, h.y6));
    // equal up to the complement's floating-point associativity
    CHECK(std::fabs(hm3.p_cvr - esm2.p_cvr) <= 1e-15);
  }
}

TEST_CASE("domain errors are rejected") {
  CHECK_THROWS_AS(compose_hm3(heads(-0.1, 0, 0, 0, 0, 0)), ValidationError);
  CHECK_THROWS_AS(compose_hm3(heads(0.5, 1.1, 0, 0, 0, 0)), ValidationError);
  CHECK_THROWS_AS(compose_esmm(heads(0.5, 0, 0, std::nan(""), 0, 0)),
                  ValidationError);
  CHECK_THROWS_AS(
      compose_esm2(heads(std::numeric_limits<double>::infinity(), 0, 0, 0, 0, 0)),
      ValidationError);
}

TEST_CASE("path enumeration equals the closed forms") {
  SplitMix64 rng(7);
  for (Variant v : kAllVariants) {
    for (int i = 0; i < 2000; ++i) {
      const auto h = random_heads(rng);
      const auto closed = compose(v, h);
      const auto oracle = enumerate_paths(v, h);
      expect_close(closed.p_ctr, oracle.p_ctr);
      expect_close(closed.p_cvr, oracle.p_cvr);
      expect_close(closed.p_ctcvr, oracle.p_ctcvr);
      CHECK(closed.p_dmi.has_value() == oracle.p_dmi.has_value());
      CHECK(closed.p_dma.has_value() == oracle.p_dma.has_value());
      if (closed.p_dmi) expect_close(*closed.p_dmi, *oracle.p_dmi);
      if (closed.p_dma) expect_close(*closed.p_dma, *oracle.p_dma);
    }
    // degenerate 0/1 heads leave a single surviving path
    for (int mask = 0; mask < 64; ++mask) {
      const auto h = heads(mask & 1, (mask >> 1) & 1, (mask >> 2) & 1,
                           (mask >> 3) & 1, (mask >> 4) & 1, (mask >> 5) & 1);
      const auto t = enumerate_paths(v, h);
      for (double x : {t.p_ctr, t.p_cvr, t.p_ctcvr})
        CHECK((x == 0.0 || x == 1.0));
    }
  }
}

TEST_CASE("composite target invariants") {
  SplitMix64 rng(99);
  for (Variant v : kAllVariants) {
    for (int i = 0; i < 2000; ++i) {
      const auto h = random_heads(rng);
      const auto t = compose(v, h);
      // factorization is bit-exact by evaluation order
      CHECK(t.p_ctcvr == t.p_ctr * t.p_cvr);
      if (t.p_ctr > 0.0)
        CHECK(std::fabs(t.p_ctcvr / t.p_ctr - t.p_cvr) <=
              4e-16 * std::max(1.0, t.p_cvr));
      CHECK(t.p_ctcvr <= t.p_ctr + 1e-15);
      if (t.p_dmi) CHECK(*t.p_dmi <= t.p_ctr + 1e-15);
      if (t.p_dma) CHECK(*t.p_dma <= t.p_ctr + 1e-15);
      CHECK(t.p_ctr >= 0.0);
      CHECK(t.p_ctr <= 1.0);
      CHECK(t.p_cvr >= 0.0);
      CHECK(t.p_cvr <= 1.0);
      // conversion is a convex mix of the two purchase heads
      const double lo = std::min(h.y4, h.y6), hi = std::max(h.y4, h.y6);
      if (v != Variant::Esmm && v != Variant::Base) {
        CHECK(t.p_cvr >= lo - 1e-12);
        CHECK(t.p_cvr <= hi + 1e-12);
      }
    }
  }
}

TEST_CASE("analytic composition gradients") {
  SUBCASE("structural identities") {
    SplitMix64 rng(3);
    for (int i = 0; i < 100; ++i) {
      const auto h = random_heads(rng);
      using J = CompositionJacobian;
      const auto hm3 = composition_gradients(Variant::Hm3, h);
      const auto t = compose_hm3(h);
      // d p_ctcvr / d y1 = p_cvr since p_cvr has no y1 dependence
      expect_close(hm3.d[J::kCtcvr][0], t.p_cvr, 1e-15);
      const auto esmm = composition_gradients(Variant::Esmm, h);
      CHECK(esmm.d[J::kCtcvr][3] == h.y1);
      CHECK(esmm.d[J::kCtcvr][0] == h.y4);
    }
  }
  SUBCASE("worked value") {
    const auto j =
        composition_gradients(Variant::Hm3, heads(0.5, 0.4, 0.6, 0.3, 0.2, 0.1));
    // d p_cvr / d y4 is the probability of reaching the deterministic macro
    // level; frozen from central differences at step 1e-6
    expect_close(j.d[CompositionJacobian::kCvr][3], 0.36, 1e-6);
  }
  SUBCASE("finite differences across variants") {
    SplitMix64 rng(11);
    const double step = 1e-6;
    for (Variant v : kAllVariants) {
      for (int i = 0; i < 100; ++i) {
        auto h = random_heads(rng);
        // keep the stencil inside [0, 1]
        for (double* y : {&h.y1, &h.y2, &h.y3, &h.y4, &h.y5, &h.y6})
          *y = 0.01 + 0.98 * *y;
        const auto jac = composition_gradients(v, h);
        for (int slot = 0; slot < 6; ++slot) {
          auto hp = h, hm = h;
          double* fields_p[6] = {&hp.y1, &hp.y2, &hp.y3, &hp.y4, &hp.y5, &hp.y6};
          double* fields_m[6] = {&hm.y1, &hm.y2, &hm.y3, &hm.y4, &hm.y5, &hm.y6};
          *fields_p[slot] += step;
          *fields_m[slot] -= step;
          const auto tp = compose(v, hp), tm = compose(v, hm);
          auto check_row = [&](int row, double pv, double mv) {
            const double fd = (pv - mv) / (2 * step);
            const double a = jac.d[static_cast<size_t>(row)][static_cast<size_t>(slot)];
            CHECK(std::fabs(a - fd) <=
                  1e-6 * std::max({1.0, std::fabs(a), std::fabs(fd)}));
          };
          check_row(CompositionJacobian::kCtr, tp.p_ctr, tm.p_ctr);
          check_row(CompositionJacobian::kCvr, tp.p_cvr, tm.p_cvr);
          check_row(CompositionJacobian::kCtcvr, tp.p_ctcvr, tm.p_ctcvr);
          if (tp.p_dmi)
            check_row(CompositionJacobian::kDmi, *tp.p_dmi, *tm.p_dmi);
          if (tp.p_dma)
            check_row(CompositionJacobian::kDma, *tp.p_dma, *tm.p_dma);
        }
      }
    }
  }
}

TEST_CASE("variant metadata") {
  CHECK(head_count(Variant::Hm3) == 6);
  CHECK(head_count(Variant::Hm3Reversed) == 6);
  CHECK(head_count(Variant::Esm2) == 4);
  CHECK(head_count(Variant::Esmm) == 2);
  CHECK(head_count(Variant::Base) == 1);
  CHECK(variant_from_name("hm3r") == Variant::Hm3Reversed);
  CHECK(!variant_from_name("nope").has_value());
  for (Variant v : kAllVariants)
    CHECK(variant_from_name(variant_name(v)) == v);
}
