#include <gtest/gtest.h>

#include "oracle.hpp"
#include "stria/conv_siso.hpp"
#include "stria/simulate.hpp"

using namespace stria;

TEST(Packing, CapacityLadderAtDefaultSlots) {
  const std::vector<std::pair<int, int>> ladder = {{56, 2}, {28, 8}, {14, 32}, {7, 128}};
  for (auto [hw, cn] : ladder) EXPECT_EQ(channel_capacity(8192, hw, hw), cn) << hw;
  EXPECT_EQ(channel_capacity(8192, 224, 224), 1);
  EXPECT_EQ(channel_capacity(8192, 4, 4), 512);
}

TEST(Packing, TiledRegimeForLargePlanes) {
  const PackLayout l = make_layout(8192, 3, 224, 224);
  EXPECT_EQ(l.c_n, 1);
  EXPECT_EQ(l.tiles_per_channel, 8);  // 256 * 256 / 8192
  EXPECT_EQ(l.cipher_count(), 24);
}

TEST(Packing, ChannelBlocksAreRowMajorAndPadded) {
  SimContext<Exact> ctx(64, 0);
  auto t = FeatureTensor<Exact>::zeros(3, 3, 3);
  for (Eigen::Index i = 0; i < t.values.size(); ++i) t.values(i) = i + 1;
  const auto p = pack(ctx, t);
  ASSERT_EQ(p.layout.c_n, 4);
  ASSERT_EQ(p.ciphers.size(), 1u);
  const auto& c = p.ciphers[0];
  // channel 1, row 2, col 1 sits in block 1 at 2 * 4 + 1
  EXPECT_EQ(c[16 + 9], t.at(1, 2, 1));
  EXPECT_EQ(c[3], 0);       // right pad
  EXPECT_EQ(c[12], 0);      // bottom pad
  EXPECT_EQ(c[48 + 5], 0);  // unused fourth block
}

TEST(Packing, RoundTripAcrossRegimes) {
  Rng rng(3);
  for (auto [slots, c, h, w] : std::vector<std::tuple<std::size_t, int, int, int>>{
           {64, 5, 3, 3}, {64, 1, 4, 4}, {256, 9, 5, 7}, {16, 2, 6, 6}, {1024, 40, 2, 2}}) {
    SimContext<Exact> ctx(slots, 0);
    const auto t = random_tensor<Exact>(rng, c, h, w);
    const auto p = pack(ctx, t);
    EXPECT_TRUE(exactly_equal(unpack(p.ciphers, p.layout), t)) << slots << " " << c << " " << h << "x" << w;
  }
}

TEST(Packing, ChannelOrderIsHonoured) {
  Rng rng(5);
  SimContext<Exact> ctx(64, 0);
  const auto t = random_tensor<Exact>(rng, 4, 2, 2);
  const auto p = pack(ctx, t, {2, 3, 0, 1});
  EXPECT_EQ(p.ciphers[0][0], t.at(2, 0, 0));
  EXPECT_TRUE(exactly_equal(unpack(p.ciphers, p.layout), t));
}

TEST(Packing, RejectsInconsistentInput) {
  SimContext<Exact> ctx(64, 0);
  auto t = FeatureTensor<Exact>::zeros(2, 2, 2);
  t.values.conservativeResize(3);
  EXPECT_THROW(pack(ctx, t), GeometryError);
  EXPECT_THROW(FeatureTensor<Exact>::zeros(0, 2, 2), GeometryError);
}

TEST(Packing, SubsampleKeepsOrigins) {
  auto t = FeatureTensor<Exact>::zeros(1, 5, 5);
  for (Eigen::Index i = 0; i < 25; ++i) t.values(i) = i;
  const auto s = subsample(t, 2);
  EXPECT_EQ(s.width, 3);
  EXPECT_EQ(s.at(0, 1, 1), 12);
  EXPECT_EQ(s.at(0, 2, 2), 24);
}

// ---------------------------------------------------------------- SISO

namespace {

KernelMatrix<Exact> single(const KernelSpec<Exact>& k) {
  KernelMatrix<Exact> km(1, 1, k.kh(), k.kw(), k.pattern(), MatrixPattern::dense(), k.scale_bits());
  km.set_entry(0, 0, k);
  return km;
}

KernelSpec<Exact> random_kernel(Rng& rng, int kh, int kw, KernelPattern pattern) {
  KernelSpec<Exact> k(kh, kw, pattern);
  for (int r = 0; r < kh; ++r)
    for (int c = 0; c < kw; ++c)
      if (k.present(r, c)) k.set(r, c, rng.uniform(-9, 9));
  return k;
}

}  // namespace

TEST(Siso, RegularThreeByThreeUsesEightRotations) {
  SimContext<Exact> ctx(256, 0);
  Rng rng(11);
  const auto t = random_tensor<Exact>(rng, 4, 6, 6, 4);
  const auto p = pack(ctx, t);
  const auto k = random_kernel(rng, 3, 3, KernelPattern::kRegular);
  const auto out = siso_conv(ctx, p.ciphers[0], k, p.layout);
  EXPECT_EQ(ctx.ledger().in_rot, 8u);
  EXPECT_EQ(ctx.ledger().mult, 9u);
  EXPECT_EQ(ctx.ledger().ex_rot, 0u);
  const auto got = unpack(std::vector{out}, p.layout);
  for (int ch = 0; ch < 4; ++ch) {
    auto one = FeatureTensor<Exact>::zeros(1, 6, 6);
    one.channel(0) = t.channel(ch);
    auto want = oracle::conv(oracle::from_tensor(one), single(k));
    auto got_ch = FeatureTensor<Exact>::zeros(1, 6, 6);
    got_ch.channel(0) = got.channel(ch);
    EXPECT_TRUE(oracle::equal(want, got_ch)) << ch;
  }
}

TEST(Siso, CrossKernelUsesFourRotations) {
  SimContext<Exact> ctx(64, 0);
  Rng rng(12);
  const auto t = random_tensor<Exact>(rng, 1, 5, 5, 4);
  const auto p = pack(ctx, t);
  const auto k = random_kernel(rng, 3, 3, KernelPattern::kCross);
  const auto out = siso_conv(ctx, p.ciphers[0], k, p.layout);
  EXPECT_EQ(ctx.ledger().in_rot, 4u);
  EXPECT_EQ(ctx.ledger().mult, 5u);
  const auto got = unpack(std::vector{out}, p.layout);
  EXPECT_TRUE(oracle::equal(oracle::conv(oracle::from_tensor(t), single(k)), got));
}

TEST(Siso, LargerAndRectangularKernels) {
  Rng rng(13);
  for (auto [kh, kw, pattern, rot] : std::vector<std::tuple<int, int, KernelPattern, unsigned>>{
           {5, 5, KernelPattern::kRegular, 24}, {5, 5, KernelPattern::kCross, 8},
           {3, 5, KernelPattern::kRegular, 14}, {1, 3, KernelPattern::kRegular, 2},
           {5, 3, KernelPattern::kCross, 6}}) {
    SimContext<Exact> ctx(128, 0);
    const auto t = random_tensor<Exact>(rng, 2, 7, 6, 4);
    const auto p = pack(ctx, t);
    const auto k = random_kernel(rng, kh, kw, pattern);
    const auto out = siso_conv(ctx, p.ciphers[0], k, p.layout);
    EXPECT_EQ(ctx.ledger().in_rot, rot) << kh << "x" << kw;
    const auto got = unpack(std::vector{out}, p.layout);
    for (int ch = 0; ch < 2; ++ch) {
      auto one = FeatureTensor<Exact>::zeros(1, 7, 6);
      one.channel(0) = t.channel(ch);
      auto g = FeatureTensor<Exact>::zeros(1, 7, 6);
      g.channel(0) = got.channel(ch);
      EXPECT_TRUE(oracle::equal(oracle::conv(oracle::from_tensor(one), single(k)), g));
    }
  }
}

TEST(Siso, KernelLargerThanChannelIsRejected) {
  SimContext<Exact> ctx(64, 0);
  const auto p = pack(ctx, FeatureTensor<Exact>::zeros(1, 2, 2));
  EXPECT_THROW(siso_conv(ctx, p.ciphers[0], KernelSpec<Exact>(5, 5, KernelPattern::kRegular), p.layout),
               GeometryError);
  EXPECT_THROW(KernelSpec<Exact>(2, 3, KernelPattern::kRegular), GeometryError);
}

TEST(Siso, CrossDecomposeMergeRoundTrip) {
  Rng rng(14);
  for (int n : {3, 5, 7}) {
    const auto k = random_kernel(rng, n, n, KernelPattern::kCross);
    const auto [v, h] = decompose_cross(k, 0.5);
    EXPECT_EQ(v.kw(), 1);
    EXPECT_EQ(h.kh(), 1);
    EXPECT_TRUE(merge_cross(v, h) == k);
    EXPECT_EQ(k.parameter_count(), static_cast<std::size_t>(2 * n - 1));
  }
}
