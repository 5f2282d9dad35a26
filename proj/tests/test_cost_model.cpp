#include <gtest/gtest.h>

#include <cmath>

#include "oracle.hpp"
#include "stria/cost_model.hpp"
#include "stria/planner.hpp"
#include "stria/simulate.hpp"

using namespace stria;

TEST(Flops, ExactFormAgreesWithEnumeration) {
  for (auto l : std::vector<LayerSpec>{{64, 64, 3, 3, 56, 56, 1, false, false, ""},
                                       {3, 32, 3, 3, 224, 224, 4, false, false, ""},
                                       {16, 8, 1, 1, 7, 7, 1, false, false, ""},
                                       {5, 7, 5, 3, 9, 6, 2, false, false, ""}})
    EXPECT_EQ(flops(l).exact, oracle::flops_by_enumeration(l)) << l.c_i << " " << l.k_w;
}

TEST(Flops, ReferenceLayerValue) {
  const auto f = flops({64, 64, 3, 3, 56, 56, 1, false, false, ""});
  EXPECT_EQ(f.exact, 231010304u);
  EXPECT_EQ(f.approx, 2u * 9 * 64 * 64 * 3136);
}

TEST(RotCounts, DenseLayersMatchClosedForm) {
  for (int c_n : {2, 4, 8, 32})
    for (int ci : {32, 64, 128})
      for (int co : {32, 64, 256})
        for (int k : {1, 3, 5}) {
          const LayerSpec l{ci, co, k, k, 7, 7, 1, false, false, ""};
          const auto f = oracle::closed_form(ci, co, c_n, k * k, false);
          const RotCounts r = rot_counts(l, c_n);
          EXPECT_EQ(r.in_rot, f.in_rot);
          EXPECT_EQ(r.ex_rot_out, f.ex_rot_out);
          EXPECT_EQ(r.ex_rot_in, f.ex_rot_in);
          EXPECT_DOUBLE_EQ(static_cast<double>(r.ex_rot_chosen), f.ex_rot_min);
          EXPECT_DOUBLE_EQ(r.ex_rot_chosen_literal, f.ex_rot_min);
          EXPECT_EQ(mult_count(l, c_n), f.mult);
          EXPECT_EQ(add_count(l, c_n), f.mult - static_cast<std::uint64_t>(co / c_n));
        }
}

TEST(RotCounts, CrossUsesFiveTapsButLiteralKeepsNine) {
  const LayerSpec l{32, 32, 3, 3, 7, 7, 1, false, true, ""};
  const RotCounts r = rot_counts(l, 8);
  EXPECT_EQ(r.in_rot, 4u * 4);
  // the published closed form counts the centre tap as well
  EXPECT_DOUBLE_EQ(r.in_rot_literal, 4.0 * 5);
  EXPECT_EQ(r.ex_rot_in, 4u * 7 * 5);
  EXPECT_DOUBLE_EQ(mult_count_literal({32, 32, 3, 3, 7, 7, 1, false, false, ""}, 8), 32.0 * 32 * 9 / 8);
}

TEST(RotCounts, ExRotFreeHasNoExternalRotations) {
  const LayerSpec l{64, 64, 3, 3, 14, 14, 1, true, true, ""};
  const RotCounts r = rot_counts(l, 32);
  EXPECT_EQ(r.ex_rot_chosen, 0u);
  EXPECT_EQ(r.in_rot, 2u * 4);
  EXPECT_EQ(mult_count(l, 32), 2u * 2 * 5);
}

TEST(RotCounts, TiledLayersPayPerTile) {
  const LayerSpec l{3, 32, 3, 3, 224, 224, 4, false, false, "stem"};
  const RotCounts r = rot_counts(l, 1, 8);
  EXPECT_EQ(r.in_rot, 3u * 8 * 8);
  EXPECT_EQ(r.ex_rot_chosen, 0u);
  EXPECT_EQ(mult_count(l, 1, 8), 3u * 32 * 9 * 8);
}

TEST(RotCounts, RotationsIgnoreSpatialSizeAtFixedPacking) {
  const LayerSpec a{16, 32, 3, 3, 4, 4, 1, false, false, ""};
  LayerSpec b = a;
  b.width = b.height = 8;
  EXPECT_EQ(layer_counts(a, 4), layer_counts(b, 4));
  EXPECT_NE(flops(a).exact, flops(b).exact);
}

TEST(BlockCost, MatchesLiteralFormulaAndLayerSum) {
  for (auto [D, e, c_n] : std::vector<std::tuple<int, int, int>>{
           {32, 2, 2}, {64, 4, 8}, {128, 6, 32}, {256, 8, 128}, {16, 3, 4}, {64, 2, 128}}) {
    const BlockRot b = striablock_rot(D, e, c_n);
    const auto [in, ex] = oracle::block_rotations(D, e, c_n);
    EXPECT_DOUBLE_EQ(b.in_rot, in);
    EXPECT_DOUBLE_EQ(b.ex_rot, ex);
    if ((e * D) % c_n == 0 && e * D >= c_n && D % c_n == 0) {
      const OpLedger sum = block_counts(D, e, c_n, 7, 7, false);
      EXPECT_DOUBLE_EQ(static_cast<double>(sum.in_rot), in);
      EXPECT_DOUBLE_EQ(static_cast<double>(sum.ex_rot), ex);
    }
  }
}

TEST(Sensitivity, SlopeFollowsFourOverCn) {
  for (int c_n : {2, 8, 32, 128, 512}) {
    EXPECT_DOUBLE_EQ(sensitivity_slope(c_n), 4.0 / c_n);
    EXPECT_DOUBLE_EQ(sensitivity_coefficient(3, c_n) - sensitivity_coefficient(2, c_n), 4.0 / c_n);
  }
  EXPECT_DOUBLE_EQ(sensitivity_slope(2) / sensitivity_slope(512), 256.0);
  EXPECT_DOUBLE_EQ(sensitivity_coefficient(2, 2), 5.0);
}

TEST(Sensitivity, StrictlyIncreasingInE) {
  for (int c_n : {2, 16, 512})
    for (int e = 1; e < 10; ++e) EXPECT_LT(sensitivity_coefficient(e, c_n), sensitivity_coefficient(e + 1, c_n));
}

TEST(Dominance, SmallerSideGoverns) {
  const auto a = dominant_factor({64, 128, 3, 3, 7, 7, 1, false, false, ""});
  EXPECT_EQ(a.tag, Dominance::kOutputChannelBound);
  EXPECT_EQ(a.value, 128);
  const auto b = dominant_factor({16, 512, 1, 1, 7, 7, 1, false, false, ""});
  EXPECT_EQ(b.tag, Dominance::kInputChannelBound);
  EXPECT_EQ(b.value, 16);
  EXPECT_EQ(b.in_rot_factor, "c_i");
}

TEST(Calibration, PublishedPointsAreReturnedExactly) {
  const auto t = CalibrationTable::paper_defaults();
  EXPECT_DOUBLE_EQ(t.in_rot(2).value, 16.10);
  EXPECT_DOUBLE_EQ(t.ex_rot(512).value, 18.93);
  EXPECT_FALSE(t.in_rot(128).clamped);
}

TEST(Calibration, LogLinearInterpolationAndClamping) {
  const auto t = CalibrationTable::paper_defaults();
  // halfway between 2 and 8 in log2 is 4
  EXPECT_NEAR(t.in_rot(4).value, (16.10 + 13.13) / 2, 1e-12);
  const auto lo = t.ex_rot(1);
  EXPECT_TRUE(lo.clamped);
  EXPECT_DOUBLE_EQ(lo.value, 5.71);
  EXPECT_TRUE(t.ex_rot(1024).clamped);
}

TEST(Calibration, CrossTapsetRatioAtSixtyFour) {
  const double r = tapset_ratio(CalibrationTable::paper_defaults(), 64);
  EXPECT_NEAR(r, 23.94 / 128.85, 1e-12);
  EXPECT_LT(std::fabs(r * 100 - 19), 0.5);
}

TEST(Calibration, ValidationNamesTheEntry) {
  auto t = CalibrationTable::paper_defaults();
  t.ex_rot_ms[8] = -1;
  try {
    t.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("ex_rot_ms[8]"), std::string::npos);
  }
}

TEST(Estimate, MonotoneInEveryCount) {
  const auto t = CalibrationTable::paper_defaults();
  const OpLedger base{10, 10, 10, 10, 0};
  const double ms = estimate_time(base, 8, t).ms;
  for (int field = 0; field < 4; ++field) {
    OpLedger more = base;
    (field == 0 ? more.in_rot : field == 1 ? more.ex_rot : field == 2 ? more.mult : more.add) += 1;
    EXPECT_GT(estimate_time(more, 8, t).ms, ms) << field;
  }
}

TEST(Estimate, AddsStayNegligibleOnPresets) {
  const auto t = CalibrationTable::paper_defaults();
  for (const auto& net : {presets::imagenet(), presets::tiny_imagenet(), presets::cifar()}) {
    const CostReport r = report(plan_network(net), t);
    const double add_ms = static_cast<double>(r.total.add) * t.add_ms;
    EXPECT_LE(add_ms / r.est_ms, 0.005) << net.name;
  }
}

TEST(Estimate, FlopsAndHeCostCanDisagree) {
  // nine 1x1 layers: slightly fewer FLOPs than one 3x3, same Mults, nine
  // times the ex-Rot
  const auto t = CalibrationTable::paper_defaults();
  const LayerSpec pointwise{256, 256, 1, 1, 7, 7, 1, false, false, ""};
  const LayerSpec full{256, 256, 3, 3, 7, 7, 1, false, false, ""};
  CostReport a, b;
  for (int i = 0; i < 9; ++i) a.add(cost_layer(pointwise, 128, 1, t));
  b.add(cost_layer(full, 128, 1, t));
  EXPECT_EQ(a.flops, 9 * oracle::flops_by_enumeration(pointwise));
  EXPECT_EQ(b.flops, oracle::flops_by_enumeration(full));
  EXPECT_LT(a.flops, b.flops);
  EXPECT_EQ(a.total.mult, b.total.mult);
  EXPECT_GT(a.est_ms, b.est_ms);
  const Comparison c = compare_networks({{"nine_1x1", a}, {"one_3x3", b}});
  ASSERT_EQ(c.reversals.size(), 1u);
  EXPECT_EQ(c.reversals[0].cheaper_flops, "nine_1x1");
  EXPECT_EQ(c.reversals[0].cheaper_he, "one_3x3");
  EXPECT_EQ(c.rows[0].flops_rank, 1);
  EXPECT_EQ(c.rows[0].he_rank, 2);
}

TEST(Estimate, NoReversalWhenOrdersAgree) {
  const auto t = CalibrationTable::paper_defaults();
  CostReport small, large;
  small.add(cost_layer({32, 32, 3, 3, 7, 7, 1, false, false, ""}, 128, 1, t));
  large.add(cost_layer({256, 256, 3, 3, 7, 7, 1, false, false, ""}, 128, 1, t));
  EXPECT_TRUE(compare_networks({{"small", small}, {"large", large}}).reversals.empty());
}
