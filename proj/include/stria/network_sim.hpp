#pragma once

#include <vector>

#include "stria/planner.hpp"
#include "stria/simulate.hpp"

namespace stria {

/// Brings a tensor back to `bits` of scale by flooring. Integral modes only;
/// real HE would rescale here, the simulator applies the identical step to
/// the packed and the plaintext path so they stay comparable exactly.
template <typename S>
FeatureTensor<S> rescale_floor(const FeatureTensor<S>& t, int bits) {
  if constexpr (!kIntegralScalar<S>) {
    return t;
  } else {
    if (t.scale_bits <= bits) return rescaled(t, bits);
    FeatureTensor<S> out = t;
    const int shift = t.scale_bits - bits;
    out.values = t.values.unaryExpr([shift](const S& v) { return static_cast<S>(v >> shift); });
    out.scale_bits = bits;
    return out;
  }
}

template <typename S>
struct NetworkSimResult {
  OpLedger ledger;
  OpLedger predicted;
  std::vector<OpLedger> per_layer;  // one entry per planned layer
  bool values_match = true;
  double max_abs_diff = 0;
  FeatureTensor<S> output;
};

/// Runs a planned network end to end on random weights: every layer through
/// the packed engines, every block through eval_encrypted, compared against
/// the plaintext chain. Tiled layers are not simulated.
template <typename S>
NetworkSimResult<S> simulate_network(const NetworkSpec& net, Rng& rng, const MimoOptions& opt = {},
                                     double tolerance = 0.0) {
  SimContext<S> ctx(net.slots);
  const auto layers = network_layers(net);
  NetworkSimResult<S> r;
  const int channels = net.stem ? net.stem->c_i : (net.stages.empty() ? 1 : net.stages.front().D);
  const int edge = net.stem ? net.stem->width : (net.stages.empty() ? 1 : net.stages.front().hw);
  FeatureTensor<S> x = random_tensor<S>(rng, channels, edge, edge);
  FeatureTensor<S> ref = x;

  auto finish = [&](FeatureTensor<S> got, FeatureTensor<S> want, const OpLedger& used, int stride) {
    got = rescale_floor(subsample(got, stride), kGridBits);
    want = rescale_floor(subsample(want, stride), kGridBits);
    const double diff = max_abs_diff(got, want);
    r.max_abs_diff = std::max(r.max_abs_diff, diff);
    r.values_match &= tolerance == 0.0 ? exactly_equal(got, want) : diff <= tolerance;
    r.per_layer.push_back(used);
    x = std::move(got);
    ref = std::move(want);
  };

  for (std::size_t idx = 0; idx < layers.size(); ++idx) {
    const PlannedLayer& p = layers[idx];
    if (p.tiles > 1) throw GeometryError("layer " + p.layer.name + " spans several ciphertexts per channel");
    if (x.channels != p.layer.c_i || x.width != p.layer.width || x.height != p.layer.height)
      throw GeometryError("layer " + p.layer.name + " does not match the incoming tensor");
    if (p.block >= 0 && p.layer.name == "expand") {
      const StageSpec& st = net.stages[static_cast<std::size_t>(p.stage_index)];
      const BlockSpec<S> b = random_block<S>(rng, st.D, *st.e, st.c_n);
      const EncryptedResult<S> enc = eval_encrypted(ctx, b, x, opt);
      const FeatureTensor<S> want = eval_plain(b, ref);
      // one ledger entry per layer keeps per_layer aligned with the plan
      r.per_layer.push_back({});
      r.per_layer.push_back({});
      finish(enc.output, want, enc.ledger, 1);
      idx += 2;
      continue;
    }
    const KernelMatrix<S> km = random_kernel_matrix<S>(rng, p.layer, p.c_n);
    const OpLedger before = ctx.snapshot();
    const PackedTensor<S> out = mimo_conv(ctx, pack(ctx, x), km, select_scheme(p.layer), opt);
    finish(unpack(out.ciphers, out.layout), conv_plain(ref, km), ledger_diff(before, ctx.snapshot()),
           p.layer.stride);
  }
  r.ledger = ctx.ledger();
  for (const auto& p : layers) {
    OpLedger l = layer_counts(p.layer, p.c_n, p.tiles);
    l.add += p.residual_adds;
    r.predicted += l;
  }
  r.output = x;
  return r;
}

}  // namespace stria
