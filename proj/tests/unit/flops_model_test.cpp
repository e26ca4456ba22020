#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "adp/errors.hpp"
#include "adp/flops_model.hpp"
#include "adp/harness.hpp"
#include "support/oracles.hpp"

using namespace adp::flops;
using oracle::Big;

namespace {

ModelDims unit_dims() {
  ModelDims d;
  d.hidden = d.intermediate = d.layers = d.num_heads = d.head_dim = 1;
  d.l_vis = 1;
  d.l_txt = 1;
  return d;
}

ModelDims seven_b(std::uint64_t l_vis = 512, std::uint64_t l_txt = 40) {
  ModelDims d = preset_dims("llama2-7b-oft");
  d.l_vis = l_vis;
  d.l_txt = l_txt;
  d.l_prop = 1;
  d.l_act = 56;
  return d;
}

Big big(Int128 v) { return Big(adp::harness::int128_to_string(v).c_str()); }

}  // namespace

TEST(LayerFlops, HandValues) {
  EXPECT_EQ(layer_flops(1, 1, 1), 12);
  EXPECT_EQ(layer_flops(2, 1, 1), 28);
}

TEST(LayerFlops, SevenBScaleMatchesBigInteger) {
  EXPECT_EQ(Big(layer_flops(1000, 4096, 11008)), oracle::layer_big(1000, 4096, 11008));
}

TEST(LayerFlops, OverflowIsARangeError) {
  EXPECT_THROW(layer_flops(1ull << 40, 1ull << 20, 1ull << 20), adp::RangeError);
  EXPECT_THROW(layer_flops(0, 1, 1), adp::InvalidArgument);
}

TEST(BaselineFlops, UnitAndDoubling) {
  ModelDims one = unit_dims();
  one.eos = false;  // S = BOS + 1 vis + 1 txt
  const auto h1 = baseline_flops(one);
  EXPECT_EQ(h1, layer_flops(3, 1, 1));
  one.layers = 2;
  EXPECT_EQ(baseline_flops(one), 2 * h1);
}

TEST(BaselineFlops, SevenBMatchesBigInteger) {
  const auto d = seven_b();
  EXPECT_EQ(Big(baseline_flops(d)), Big(32) * oracle::layer_big(d.sequence_length(), 4096, 11008));
}

TEST(ScoringFlops, UnitAndDegenerate) {
  EXPECT_EQ(scoring_flops(unit_dims()), 6);
  ModelDims d = seven_b();
  d.l_vis = 0;
  EXPECT_EQ(scoring_flops(d), 2 * 40 * 4096ll * 4096ll);
  const auto s = seven_b();
  EXPECT_EQ(Big(scoring_flops(s)), 2 * Big(40) * 4096 * 4096 + 2 * Big(512) * 4096 * 4096 + 2 * Big(32) * 40 * 512 * 128);
}

TEST(AdpFlops, FullRetentionAddsOnlyScoring) {
  const auto d = seven_b();
  EXPECT_EQ(adp_flops(d, 1.0), baseline_flops(d) + scoring_flops(d));
}

TEST(AdpFlops, SingleTokenSequenceLength) {
  const auto d = seven_b();
  const double rho = 1.0 / 512.0;
  const auto s_prime = d.sequence_length() - d.l_vis + 1;
  EXPECT_EQ(adp_flops(d, rho), scoring_flops(d) + 32 * layer_flops(s_prime, 4096, 11008));
}

TEST(AdpFlops, HalfRetentionBelowBaseline) {
  const auto d = seven_b();
  const auto f = adp_flops(d, 0.5);
  const Big ref = Big(scoring_flops(d)) + Big(32) * oracle::layer_big(d.sequence_length() - 256, 4096, 11008);
  EXPECT_EQ(Big(f), ref);
  EXPECT_LT(f, baseline_flops(d));
}

TEST(AdpFlops, ScoringLayerRunsEarlyLayersOnFullSequence) {
  const auto d = seven_b();
  const auto full = layer_flops(d.sequence_length(), 4096, 11008);
  const auto pruned = layer_flops(d.pruned_sequence_length(256), 4096, 11008);
  EXPECT_EQ(adp_flops(d, 0.5, 4), scoring_flops(d) + 4 * full + 28 * pruned);
  EXPECT_THROW(adp_flops(d, 0.5, 33), adp::InvalidArgument);
}

TEST(AdpFlops, MonotoneInRho) {
  const auto d = seven_b(300, 30);
  FlopCount prev = 0;
  for (int i = 1; i <= 100; ++i) {
    const auto f = adp_flops(d, i / 100.0);
    EXPECT_GE(f, prev);
    prev = f;
  }
}

TEST(AdpFlops, ScoringPaysForItselfAtSevenBScale) {
  for (std::uint64_t l_vis : {64u, 256u, 512u, 1024u}) {
    for (std::uint64_t l_txt : {16u, 64u, 256u}) {
      const auto d = seven_b(l_vis, l_txt);
      for (int dec = 1; dec <= 9; ++dec) {
        EXPECT_LT(adp_flops(d, dec / 10.0), baseline_flops(d)) << l_vis << " " << l_txt << " " << dec;
      }
    }
  }
}

TEST(AdpFlops, DecileStepsAreNearlyLinear) {
  const auto d = seven_b(512, 40);
  FlopCount lo = std::numeric_limits<FlopCount>::max(), hi = 0;
  for (int dec = 3; dec < 7; ++dec) {
    const auto step = adp_flops(d, (dec + 1) / 10.0) - adp_flops(d, dec / 10.0);
    lo = std::min(lo, step);
    hi = std::max(hi, step);
  }
  EXPECT_LT(static_cast<double>(hi - lo) / static_cast<double>(lo), 0.15);
}

TEST(EpisodeExpected, GammaEndpoints) {
  const auto d = seven_b();
  const auto none = episode_expected_flops(d, 0.5, {0, 1}, 10);
  EXPECT_EQ(big(none.expected_scaled), Big(10) * baseline_flops(d));
  EXPECT_EQ(none.savings_scaled, 0);
  const auto all = episode_expected_flops(d, 0.5, {1, 1}, 10);
  EXPECT_EQ(big(all.expected_scaled), Big(10) * adp_flops(d, 0.5));
}

TEST(EpisodeExpected, HalfGammaArithmetic) {
  const auto d = seven_b();
  const auto c = episode_expected_flops(d, 0.5, {1, 2}, 10);
  const Big base = baseline_flops(d), adp = adp_flops(d, 0.5);
  EXPECT_EQ(big(c.expected_scaled), Big(10) * (adp + base));
  EXPECT_EQ(big(c.savings_scaled), Big(10) * (base - adp));
  EXPECT_EQ(big(c.expected_scaled + c.savings_scaled), Big(10) * 2 * base);
  EXPECT_DOUBLE_EQ(c.expected(), 5.0 * static_cast<double>(adp + base));
}

TEST(EpisodeExpected, Errors) {
  const auto d = seven_b();
  EXPECT_THROW(episode_expected_flops(d, 0.5, {3, 2}, 10), adp::InvalidArgument);
  EXPECT_THROW(episode_expected_flops(d, 0.5, {1, 2}, 0), adp::InvalidArgument);
}

TEST(Fraction, FromDouble) {
  const auto f = Fraction::from_double(0.25, 100);
  EXPECT_EQ(f.num, 25);
  EXPECT_EQ(f.den, 100);
  EXPECT_THROW(Fraction::from_double(1.5), adp::InvalidArgument);
}

TEST(ModelDims, Validation) {
  EXPECT_THROW(preset_dims("gpt-9"), adp::InvalidArgument);
  auto d = seven_b();
  d.num_heads = 31;
  EXPECT_THROW(baseline_flops(d), adp::InvalidArgument);
  d = seven_b();
  d.l_txt = 0;
  EXPECT_THROW(baseline_flops(d), adp::InvalidArgument);
  d = seven_b();
  d.eos = false;
  EXPECT_EQ(d.sequence_length(), 1u + 512 + 1 + 40 + 56);
}

TEST(TeraString, TwoDecimals) {
  EXPECT_EQ(to_tera_string(7.914e12), "7.91");
  EXPECT_EQ(to_tera_string(5.846e12), "5.85");
}

TEST(Calibration, FitsThePublishedColumn) {
  const auto target = CalibrationTarget::libero_oft();
  const auto r = calibrate(preset_dims("llama2-7b-oft"), target);
  EXPECT_LE(r.best().max_relative_error, 0.05);
  for (const auto* fit : {&r.per_forward, &r.episode_average}) {
    ASSERT_EQ(fit->model_tera.size(), 5u);
    ModelDims d = preset_dims("llama2-7b-oft");
    d.l_vis = fit->l_vis;
    d.l_txt = fit->l_other;
    EXPECT_NEAR(fit->model_base_tera, static_cast<double>(baseline_flops(d)) / 1e12, 1e-9);
    for (std::size_t i = 0; i < 5; ++i) {
      const double adp = static_cast<double>(adp_flops(d, target.rhos[i]));
      const double model = fit->gamma * adp + (1.0 - fit->gamma) * static_cast<double>(baseline_flops(d));
      EXPECT_NEAR(fit->model_tera[i], model / 1e12, 1e-9);
    }
  }
  EXPECT_EQ(r.per_forward.gamma, 1.0);
}
