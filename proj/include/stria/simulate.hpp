#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "stria/conv_mimo.hpp"
#include "stria/stria_block.hpp"

namespace stria {

/// The single seeded source of test data. Bounded draws use plain modulo
/// so a seed gives the same stream on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform integer in [lo, hi].
  std::int64_t uniform(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(gen_() % span);
  }
  int pick(int lo, int hi) { return static_cast<int>(uniform(lo, hi)); }
  std::uint64_t next() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

/// raw / 2^bits as a scalar of type S: integral scalars keep the raw value
/// at scale `bits`, the others hold the real value at scale 0.
template <typename S>
S grid_scalar(std::int64_t raw, int bits) {
  if constexpr (kIntegralScalar<S>) {
    return static_cast<S>(raw);
  } else if constexpr (std::is_same_v<S, Rational>) {
    return to_rational(raw, bits);
  } else {
    return static_cast<S>(std::ldexp(static_cast<double>(raw), -bits));
  }
}

template <typename S>
constexpr int grid_scale(int bits) {
  return kIntegralScalar<S> ? bits : 0;
}

inline constexpr int kGridBits = 12;

/// Activations on the 2^-12 grid in [-1, 1].
template <typename S>
FeatureTensor<S> random_tensor(Rng& rng, int channels, int height, int width, int bits = kGridBits) {
  auto t = FeatureTensor<S>::zeros(channels, height, width, grid_scale<S>(bits));
  const std::int64_t r = std::int64_t{1} << bits;
  for (Eigen::Index i = 0; i < t.values.size(); ++i) t.values(i) = grid_scalar<S>(rng.uniform(-r, r), bits);
  return t;
}

/// Fills every present entry with weights on the 2^-bits grid, bounded by
/// roughly 1/fan_in so deep chains stay inside 64 bits.
template <typename S>
void randomize(Rng& rng, KernelMatrix<S>& km, int bits = kGridBits) {
  int fan = 0;
  for (int i = 0; i < km.cols(); ++i) fan += km.present(0, i);
  fan = std::max(1, fan) * km.taps_per_kernel();
  const std::int64_t r = std::max<std::int64_t>(1, (std::int64_t{1} << bits) / fan);
  auto& w = km.weights();
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = grid_scalar<S>(rng.uniform(-r, r), bits);
}

template <typename S>
KernelMatrix<S> random_kernel_matrix(Rng& rng, const LayerSpec& layer, int c_n, int bits = kGridBits) {
  const MatrixPattern pattern = layer.exrot_free ? MatrixPattern::exrot_free(c_n) : MatrixPattern::dense();
  KernelMatrix<S> km(layer.c_o, layer.c_i, layer.k_h, layer.k_w, layer.kernel_pattern(), pattern,
                     grid_scale<S>(bits));
  randomize(rng, km, bits);
  return km;
}

template <typename S>
BlockSpec<S> random_block(Rng& rng, int D, int e, int c_n, int bits = kGridBits) {
  BlockSpec<S> b = build_striablock<S>(D, e, c_n, grid_scale<S>(bits));
  randomize(rng, b.expand, bits);
  randomize(rng, b.middle, bits);
  randomize(rng, b.project, bits);
  return b;
}

struct LayerSimResult {
  OpLedger ledger;
  OpLedger predicted;
  bool values_match = false;
  double max_abs_diff = 0;
};

/// Random weights and input for `layer`, packed run under `scheme`, compared
/// with the plaintext convolution. Strided layers run at stride 1 and are
/// subsampled after unpacking.
template <typename S>
LayerSimResult simulate_layer(SimContext<S>& ctx, Rng& rng, const LayerSpec& layer, MimoScheme scheme,
                              const MimoOptions& opt = {}, double tolerance = 0.0) {
  layer.validate();
  const int c_n = channel_capacity(ctx.slot_count(), layer.width, layer.height);
  const KernelMatrix<S> km = random_kernel_matrix<S>(rng, layer, c_n);
  const FeatureTensor<S> x = random_tensor<S>(rng, layer.c_i, layer.height, layer.width);
  const OpLedger before = ctx.snapshot();
  const PackedTensor<S> out = mimo_conv(ctx, pack(ctx, x), km, scheme, opt);
  LayerSimResult r;
  r.ledger = ledger_diff(before, ctx.snapshot());
  r.predicted = layer_counts(layer, c_n, scheme);
  const FeatureTensor<S> got = subsample(unpack(out.ciphers, out.layout), layer.stride);
  const FeatureTensor<S> want = subsample(conv_plain(x, km), layer.stride);
  r.max_abs_diff = max_abs_diff(got, want);
  r.values_match = tolerance == 0.0 ? exactly_equal(got, want) : r.max_abs_diff <= tolerance;
  return r;
}

}  // namespace stria
