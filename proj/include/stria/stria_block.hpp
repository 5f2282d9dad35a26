#pragma once

#include <utility>
#include <vector>

#include "stria/conv_mimo.hpp"
#include "stria/cost_model.hpp"
#include "stria/kernel_matrix.hpp"
#include "stria/layer.hpp"

namespace stria {

/// Inverted-residual block: 1x1 expand D -> eD, exRot-free cross k x k over
/// eD channels, 1x1 project eD -> D, identity skip.
template <typename S>
struct BlockSpec {
  int D = 1;
  int e = 1;
  int c_n = 1;
  int kernel = 3;
  bool residual = true;
  KernelMatrix<S> expand;   // eD x D
  KernelMatrix<S> middle;   // eD x eD
  KernelMatrix<S> project;  // D x eD

  int inner() const { return e * D; }

  std::vector<LayerSpec> layers(int width, int height) const {
    LayerSpec ex{D, inner(), 1, 1, width, height, 1, false, false, "expand"};
    LayerSpec mid{inner(), inner(), kernel, kernel, width, height, 1, true, true, "middle"};
    LayerSpec pr{inner(), D, 1, 1, width, height, 1, false, false, "project"};
    return {ex, mid, pr};
  }

  std::size_t parameter_count() const {
    return expand.parameter_count() + middle.parameter_count() + project.parameter_count();
  }

  /// Structural assertion: the middle support lies inside the mask.
  bool valid() const {
    return middle.within_exrot_free(c_n) && middle.kernel_pattern() == KernelPattern::kCross &&
           expand.rows() == inner() && expand.cols() == D && middle.rows() == inner() &&
           middle.cols() == inner() && project.rows() == D && project.cols() == inner();
  }

  friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

/// Zero-weight block. Requires eD >= c_n and c_n | eD so the mask has whole
/// diagonal families.
template <typename S>
BlockSpec<S> build_striablock(int D, int e, int c_n, int scale_bits = 0, int kernel = 3) {
  if (D < 1 || e < 1) throw ConfigError("D and e must be positive");
  if (c_n < 1) throw ConfigError("channel packing capacity must be positive");
  const int inner = e * D;
  if (inner < c_n)
    throw ConfigError("eD = " + std::to_string(inner) + " is below c_n = " + std::to_string(c_n));
  if (inner % c_n != 0)
    throw ConfigError("eD = " + std::to_string(inner) + " is not a multiple of c_n = " +
                      std::to_string(c_n));
  BlockSpec<S> b;
  b.D = D;
  b.e = e;
  b.c_n = c_n;
  b.kernel = kernel;
  b.expand = KernelMatrix<S>(inner, D, 1, 1, KernelPattern::kRegular, MatrixPattern::dense(), scale_bits);
  b.middle = KernelMatrix<S>(inner, inner, kernel, kernel, KernelPattern::kCross,
                             MatrixPattern::exrot_free(c_n), scale_bits);
  b.project = KernelMatrix<S>(D, inner, 1, 1, KernelPattern::kRegular, MatrixPattern::dense(), scale_bits);
  return b;
}

/// One depthwise sub-layer of the decomposed middle convolution: output
/// channel r reads input channel (r + shift) mod eD through a column
/// kernel plus a row kernel.
template <typename S>
struct DepthwiseGroup {
  int shift = 0;
  std::vector<KernelSpec<S>> vertical;    // (k, 1), one per output channel
  std::vector<KernelSpec<S>> horizontal;  // (1, k)

  friend bool operator==(const DepthwiseGroup&, const DepthwiseGroup&) = default;
};

template <typename S>
struct TrainingForm {
  int D = 1;
  int e = 1;
  int c_n = 1;
  int kernel = 3;
  bool residual = true;
  KernelMatrix<S> expand;
  std::vector<DepthwiseGroup<S>> groups;
  KernelMatrix<S> project;

  int inner() const { return e * D; }

  std::size_t parameter_count() const {
    std::size_t n = expand.parameter_count() + project.parameter_count();
    for (const auto& g : groups)
      for (std::size_t r = 0; r < g.vertical.size(); ++r)
        n += static_cast<std::size_t>(g.vertical[r].kh() + g.horizontal[r].kw());
    return n;
  }
};

/// Splits the middle layer by mask diagonal: group j holds the kernels at
/// (r, (r + j c_n) mod eD), applied to the input shifted by j c_n channels,
/// and every cross kernel becomes a column and a row kernel.
template <typename S>
TrainingForm<S> to_training_form(const BlockSpec<S>& b, double center_split = 0.5) {
  if (!b.valid()) throw ConfigError("block is not a valid StriaBlock");
  TrainingForm<S> tf;
  tf.D = b.D;
  tf.e = b.e;
  tf.c_n = b.c_n;
  tf.kernel = b.kernel;
  tf.residual = b.residual;
  tf.expand = b.expand;
  tf.project = b.project;
  const int inner = b.inner();
  for (int j = 0; j < inner / b.c_n; ++j) {
    DepthwiseGroup<S> g;
    g.shift = j * b.c_n;
    for (int r = 0; r < inner; ++r) {
      const int col = (r + g.shift) % inner;
      // absent entries materialize as zero kernels
      const KernelSpec<S> k = b.middle.present(r, col)
                                  ? b.middle.entry(r, col)
                                  : KernelSpec<S>(b.kernel, b.kernel, KernelPattern::kCross,
                                                  b.middle.scale_bits());
      auto [v, h] = decompose_cross(k, center_split);
      g.vertical.push_back(std::move(v));
      g.horizontal.push_back(std::move(h));
    }
    tf.groups.push_back(std::move(g));
  }
  return tf;
}

template <typename S>
BlockSpec<S> to_inference_form(const TrainingForm<S>& tf) {
  const int inner = tf.inner();
  if (tf.c_n < 1 || inner % tf.c_n != 0) throw GeometryError("training form has an invalid c_n");
  if (static_cast<int>(tf.groups.size()) != inner / tf.c_n)
    throw GeometryError("training form needs " + std::to_string(inner / tf.c_n) +
                        " depthwise groups, has " + std::to_string(tf.groups.size()));
  BlockSpec<S> b = build_striablock<S>(tf.D, tf.e, tf.c_n, tf.expand.scale_bits(), tf.kernel);
  if (tf.expand.rows() != inner || tf.expand.cols() != tf.D || tf.project.rows() != tf.D ||
      tf.project.cols() != inner)
    throw GeometryError("expand/project shapes do not match D and e");
  b.residual = tf.residual;
  b.expand = tf.expand;
  b.project = tf.project;
  for (std::size_t j = 0; j < tf.groups.size(); ++j) {
    const auto& g = tf.groups[j];
    if (g.shift != static_cast<int>(j) * tf.c_n)
      throw GeometryError("depthwise group " + std::to_string(j) + " has shift " +
                          std::to_string(g.shift));
    if (static_cast<int>(g.vertical.size()) != inner || static_cast<int>(g.horizontal.size()) != inner)
      throw GeometryError("depthwise group " + std::to_string(j) + " has the wrong channel count");
    for (int r = 0; r < inner; ++r) {
      const auto& v = g.vertical[static_cast<std::size_t>(r)];
      const auto& h = g.horizontal[static_cast<std::size_t>(r)];
      if (v.kh() != tf.kernel || h.kw() != tf.kernel)
        throw GeometryError("sub-kernel size differs from the block kernel");
      b.middle.set_entry(r, (r + g.shift) % inner, merge_cross(v, h));
    }
  }
  return b;
}

namespace detail {

template <typename S>
void relu_inplace(FeatureTensor<S>& t) {
  t.values = t.values.unaryExpr([](const S& v) { return v < S(0) ? S(0) : v; });
}

template <typename S>
FeatureTensor<S> add_residual(const FeatureTensor<S>& y, const FeatureTensor<S>& x) {
  if (!same_shape(x, y)) throw GeometryError("residual shape mismatch");
  const int scale = std::max(x.scale_bits, y.scale_bits);
  FeatureTensor<S> a = rescaled(y, scale);
  const FeatureTensor<S> b = rescaled(x, scale);
  bool overflow = false;
  a.values = a.values.binaryExpr(b.values, CheckedSum<S>{&overflow});
  if (overflow) throw PrecisionError("overflow in residual add");
  return a;
}

template <typename S>
void check_block_input(const FeatureTensor<S>& x, int D) {
  if (!x.consistent()) throw GeometryError("tensor shape does not match its values");
  if (x.channels != D)
    throw GeometryError("block expects " + std::to_string(D) + " channels, got " +
                        std::to_string(x.channels));
}

}  // namespace detail

/// Plaintext forward pass; ReLU after expand and middle when `relu` is set.
template <typename S>
FeatureTensor<S> eval_plain(const BlockSpec<S>& b, const FeatureTensor<S>& x, bool relu = false) {
  detail::check_block_input(x, b.D);
  FeatureTensor<S> h = conv_plain(x, b.expand);
  if (relu) detail::relu_inplace(h);
  h = conv_plain(h, b.middle);
  if (relu) detail::relu_inplace(h);
  h = conv_plain(h, b.project);
  return b.residual ? detail::add_residual(h, x) : h;
}

template <typename S>
FeatureTensor<S> eval_plain(const TrainingForm<S>& tf, const FeatureTensor<S>& x, bool relu = false) {
  detail::check_block_input(x, tf.D);
  FeatureTensor<S> h = conv_plain(x, tf.expand);
  if (relu) detail::relu_inplace(h);
  const int scale = h.scale_bits + tf.groups.front().vertical.front().scale_bits();
  auto mid = FeatureTensor<S>::zeros(tf.inner(), h.height, h.width, scale);
  for (const auto& g : tf.groups) {
    const FeatureTensor<S> shifted = reorder_channels(h, g.shift);
    for (int r = 0; r < tf.inner(); ++r) {
      auto src = shifted.channel(r);
      correlate_accumulate(src, h.height, h.width, g.vertical[static_cast<std::size_t>(r)], mid.channel(r));
      correlate_accumulate(src, h.height, h.width, g.horizontal[static_cast<std::size_t>(r)], mid.channel(r));
    }
  }
  if (relu) detail::relu_inplace(mid);
  h = conv_plain(mid, tf.project);
  return tf.residual ? detail::add_residual(h, x) : h;
}

template <typename S>
struct EncryptedResult {
  FeatureTensor<S> output;
  OpLedger ledger;
};

/// Packed evaluation: each layer runs under select_scheme and the skip is
/// one Add per output cipher. The plane must pack at the block's c_n.
template <typename S>
EncryptedResult<S> eval_encrypted(SimContext<S>& ctx, const BlockSpec<S>& b,
                                  const FeatureTensor<S>& x, const MimoOptions& opt = {}) {
  detail::check_block_input(x, b.D);
  const OpLedger before = ctx.snapshot();
  const PackedTensor<S> in = pack(ctx, x);
  if (in.layout.tiled() || in.layout.c_n != b.c_n)
    throw ConfigError("a " + std::to_string(x.width) + "x" + std::to_string(x.height) +
                      " plane packs " + std::to_string(in.layout.c_n) +
                      " channels per cipher, block was built for c_n = " + std::to_string(b.c_n));
  const auto specs = b.layers(x.width, x.height);
  PackedTensor<S> h = mimo_conv(ctx, in, b.expand, select_scheme(specs[0]), opt);
  h = mimo_conv(ctx, h, b.middle, select_scheme(specs[1]), opt);
  h = mimo_conv(ctx, h, b.project, select_scheme(specs[2]), opt);
  if (b.residual)
    for (std::size_t c = 0; c < h.ciphers.size(); ++c) h.ciphers[c] = add(ctx, h.ciphers[c], in.ciphers[c]);
  return {unpack(h.ciphers, h.layout), ledger_diff(before, ctx.snapshot())};
}

/// Predicted block ledger from the per-layer formulas, residual included.
inline OpLedger block_counts(int D, int e, int c_n, int width, int height, bool residual = true,
                             int kernel = 3) {
  LayerSpec ex{D, e * D, 1, 1, width, height, 1, false, false, "expand"};
  LayerSpec mid{e * D, e * D, kernel, kernel, width, height, 1, true, true, "middle"};
  LayerSpec pr{e * D, D, 1, 1, width, height, 1, false, false, "project"};
  OpLedger l = layer_counts(ex, c_n) + layer_counts(mid, c_n) + layer_counts(pr, c_n);
  if (residual) l.add += static_cast<std::uint64_t>((D + c_n - 1) / c_n);
  return l;
}

}  // namespace stria
