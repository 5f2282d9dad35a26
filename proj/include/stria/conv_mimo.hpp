#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <optional>
#include <thread>
#include <vector>

#include "stria/conv_siso.hpp"
#include "stria/kernel_matrix.hpp"
#include "stria/layer.hpp"

namespace stria {

enum class MimoScheme { kOutputRotation, kInputRotation };

inline const char* to_string(MimoScheme s) {
  return s == MimoScheme::kOutputRotation ? "output_rotation" : "input_rotation";
}

/// Cheaper scheme by comparing c_o against taps * c_i; ties go to output
/// rotation. Cross layers compare against their k_w + k_h - 1 taps.
inline MimoScheme select_scheme(const LayerSpec& l) {
  const long long lhs = l.c_o;
  const long long rhs = static_cast<long long>(l.taps()) * l.c_i;
  return lhs <= rhs ? MimoScheme::kOutputRotation : MimoScheme::kInputRotation;
}

struct MimoOptions {
  int threads = 1;  // workers for the per-output-cipher loop
};

namespace detail {

template <typename S>
void check_mimo_inputs(const SimContext<S>& ctx, const PackedTensor<S>& in, const KernelMatrix<S>& km) {
  const PackLayout& l = in.layout;
  if (l.slot_count != ctx.slot_count()) throw ContextError("layout slot count differs from the context");
  if (l.tiled()) throw GeometryError("MIMO convolution over tiled channels is not simulated");
  if (km.cols() != l.channels)
    throw GeometryError("kernel matrix has " + std::to_string(km.cols()) + " columns for " +
                        std::to_string(l.channels) + " packed channels");
  if (static_cast<int>(in.ciphers.size()) != l.cipher_count())
    throw ContextError("cipher count does not match the layout");
  for (std::size_t p = 0; p < l.channel_order.size(); ++p)
    if (l.channel_order[p] != static_cast<int>(p))
      throw ConfigError("MIMO convolution expects identity channel order");
}

template <typename S>
std::vector<SlotVector<S>> tap_masks(const PackLayout& layout, const std::vector<Tap>& taps) {
  std::vector<SlotVector<S>> masks;
  masks.reserve(taps.size());
  for (const auto& t : taps) masks.push_back(tap_mask<S>(layout, t));
  return masks;
}

/// Runs fn(worker_ctx, item) for item in [0, count) on up to `threads`
/// workers, each with its own ledger, then merges the ledgers into ctx.
/// Items are dealt out in fixed stripes, so results never depend on timing.
template <typename S>
void parallel_items(SimContext<S>& ctx, int count, int threads,
                    const std::function<void(SimContext<S>&, int)>& fn) {
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(ctx, i);
    return;
  }
  std::vector<SimContext<S>> contexts(
      static_cast<std::size_t>(workers),
      SimContext<S>(ctx.slot_count(), ctx.scale_bits(), ctx.max_scale_bits()));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += workers) fn(contexts[static_cast<std::size_t>(w)], i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (const auto& c : contexts) ctx.merge(c.ledger());
}

/// (block, row, col) triples of one plaintext.
struct BlockEntry {
  int block;
  int row;
  int col;
};

template <typename S>
Plaintext<S> block_plaintext(const KernelMatrix<S>& km, const std::vector<BlockEntry>& entries,
                             const SlotVector<S>& mask, int tap, std::size_t slots,
                             Eigen::Index block) {
  Plaintext<S> p{SlotVector<S>::Zero(static_cast<Eigen::Index>(slots)), km.scale_bits()};
  for (const auto& e : entries)
    p.slots.segment(e.block * block, block) = mask * km.tap_weights(e.row, e.col)(tap);
  return p;
}

/// Support of the kernel matrix zero-padded to whole groups of c_n. Padded
/// rows and columns follow the matrix pattern, so a partial pack costs what
/// the full pack would; custom supports are not padded.
template <typename S>
bool scheduled(const KernelMatrix<S>& km, int o, int i) {
  if (o < km.rows() && i < km.cols()) return km.present(o, i);
  const MatrixPattern& p = km.pattern();
  return p.kind == SupportKind::kDense ||
         (p.kind == SupportKind::kExRotFree && in_exrot_free_mask(o, i, p.c_n));
}

}  // namespace detail

/// Grouped output-rotation MIMO. Kernel entries are gathered along the
/// generalized diagonals of each c_n x c_n block: diagonal d pairs packed
/// input block k with output block (k + d) mod c_n. Each diagonal is
/// accumulated on its own, then rotated once into output order.
template <typename S>
PackedTensor<S> mimo_conv_output_rot(SimContext<S>& ctx, const PackedTensor<S>& in,
                                     const KernelMatrix<S>& km, const MimoOptions& opt = {}) {
  detail::check_mimo_inputs(ctx, in, km);
  const PackLayout& l = in.layout;
  const int cn = l.c_n;
  const int c_i = km.cols();
  const int c_o = km.rows();
  const int gi_count = (c_i + cn - 1) / cn;
  const int go_count = (c_o + cn - 1) / cn;
  const auto block = static_cast<Eigen::Index>(l.block_size());
  const auto taps = tap_geometry(km.kh(), km.kw(), km.kernel_pattern(), l);
  const auto masks = detail::tap_masks<S>(l, taps);
  const int out_scale = (in.ciphers.empty() ? 0 : in.ciphers.front().scale_bits()) + km.scale_bits();

  // tap rotations of every input cipher that feeds at least one entry
  std::vector<std::vector<SimCipher<S>>> shifted(static_cast<std::size_t>(gi_count));
  for (int g = 0; g < gi_count; ++g) {
    bool used = false;
    for (int i = g * cn; i < std::min(c_i, (g + 1) * cn) && !used; ++i)
      for (int o = 0; o < go_count * cn && !used; ++o) used = detail::scheduled(km, o, i);
    if (!used) continue;
    for (const auto& t : taps)
      shifted[static_cast<std::size_t>(g)].push_back(
          rotate(ctx, in.ciphers[static_cast<std::size_t>(g)], t.offset, RotRole::kInRot));
  }

  std::vector<std::optional<SimCipher<S>>> outputs(static_cast<std::size_t>(go_count));
  detail::parallel_items<S>(ctx, go_count, opt.threads, [&](SimContext<S>& wctx, int g_out) {
    std::optional<SimCipher<S>> total;
    std::vector<detail::BlockEntry> entries;
    for (int d = 0; d < cn; ++d) {
      std::optional<SimCipher<S>> acc;
      for (int g_in = 0; g_in < gi_count; ++g_in) {
        entries.clear();
        bool group = false;
        for (int k = 0; k < cn; ++k) {
          const int o = g_out * cn + (k + d) % cn;
          const int i = g_in * cn + k;
          group |= detail::scheduled(km, o, i);
          if (o < c_o && i < c_i && km.present(o, i)) entries.push_back({k, o, i});
        }
        if (!group) continue;
        for (std::size_t t = 0; t < taps.size(); ++t)
          multiply_accumulate(wctx, acc, shifted[static_cast<std::size_t>(g_in)][t],
                              detail::block_plaintext(km, entries, masks[t], static_cast<int>(t),
                                                      wctx.slot_count(), block));
      }
      if (!acc) continue;
      SimCipher<S> aligned =
          d == 0 ? std::move(*acc) : rotate(wctx, *acc, -d * block, RotRole::kExRot);
      total = total ? add(wctx, *total, aligned) : std::move(aligned);
    }
    outputs[static_cast<std::size_t>(g_out)] = total ? std::move(total) : zero_cipher(wctx, out_scale);
  });

  PackedTensor<S> out{{}, make_layout(l.slot_count, c_o, l.width, l.height)};
  for (auto& c : outputs) out.ciphers.push_back(std::move(*c));
  return out;
}

/// Input-rotation MIMO: each input cipher is rotated by d blocks for every
/// diagonal d, the rotated copy gets its own tap rotations, and products land
/// directly in output order. Alignment rotations and the tap rotations on
/// rotated copies are both ex-Rot; the latter are also tallied as ex_rot_tap.
template <typename S>
PackedTensor<S> mimo_conv_input_rot(SimContext<S>& ctx, const PackedTensor<S>& in,
                                    const KernelMatrix<S>& km, const MimoOptions& opt = {}) {
  detail::check_mimo_inputs(ctx, in, km);
  const PackLayout& l = in.layout;
  const int cn = l.c_n;
  const int c_i = km.cols();
  const int c_o = km.rows();
  const int gi_count = (c_i + cn - 1) / cn;
  const int go_count = (c_o + cn - 1) / cn;
  const auto block = static_cast<Eigen::Index>(l.block_size());
  const auto taps = tap_geometry(km.kh(), km.kw(), km.kernel_pattern(), l);
  const auto masks = detail::tap_masks<S>(l, taps);
  const int out_scale = (in.ciphers.empty() ? 0 : in.ciphers.front().scale_bits()) + km.scale_bits();

  std::vector<std::optional<SimCipher<S>>> outputs(static_cast<std::size_t>(go_count));
  std::vector<std::vector<detail::BlockEntry>> entries(static_cast<std::size_t>(go_count));
  std::vector<char> group(static_cast<std::size_t>(go_count));
  for (int g_in = 0; g_in < gi_count; ++g_in) {
    for (int d = 0; d < cn; ++d) {
      bool needed = false;
      for (int g_out = 0; g_out < go_count; ++g_out) {
        auto& e = entries[static_cast<std::size_t>(g_out)];
        auto& has = group[static_cast<std::size_t>(g_out)];
        e.clear();
        has = false;
        for (int k = 0; k < cn; ++k) {
          const int o = g_out * cn + k;
          const int i = g_in * cn + (k + d) % cn;
          has |= detail::scheduled(km, o, i);
          if (o < c_o && i < c_i && km.present(o, i)) e.push_back({k, o, i});
        }
        needed |= has;
      }
      if (!needed) continue;
      const SimCipher<S>& base = in.ciphers[static_cast<std::size_t>(g_in)];
      const SimCipher<S> v = d == 0 ? base : rotate(ctx, base, d * block, RotRole::kExRot);
      const RotRole tap_role = d == 0 ? RotRole::kInRot : RotRole::kExRotTap;
      std::vector<SimCipher<S>> shifted;
      for (const auto& t : taps) shifted.push_back(rotate(ctx, v, t.offset, tap_role));

      detail::parallel_items<S>(ctx, go_count, opt.threads, [&](SimContext<S>& wctx, int g_out) {
        const auto& e = entries[static_cast<std::size_t>(g_out)];
        if (!group[static_cast<std::size_t>(g_out)]) return;
        for (std::size_t t = 0; t < taps.size(); ++t)
          multiply_accumulate(wctx, outputs[static_cast<std::size_t>(g_out)], shifted[t],
                              detail::block_plaintext(km, e, masks[t], static_cast<int>(t),
                                                      wctx.slot_count(), block));
      });
    }
  }

  PackedTensor<S> out{{}, make_layout(l.slot_count, c_o, l.width, l.height)};
  for (auto& c : outputs) out.ciphers.push_back(c ? std::move(*c) : zero_cipher(ctx, out_scale));
  return out;
}

template <typename S>
PackedTensor<S> mimo_conv(SimContext<S>& ctx, const PackedTensor<S>& in, const KernelMatrix<S>& km,
                          MimoScheme scheme, const MimoOptions& opt = {}) {
  return scheme == MimoScheme::kOutputRotation ? mimo_conv_output_rot(ctx, in, km, opt)
                                               : mimo_conv_input_rot(ctx, in, km, opt);
}

/// Operation counts the two engines incur for a given support, derived from
/// the support structure alone (no values). `present` is asked about padded
/// indices too and decides whether padding is scheduled.
template <typename Present>
OpLedger structural_counts(int c_i, int c_o, int c_n, int taps, MimoScheme scheme,
                           Present&& present) {
  const int gi_count = (c_i + c_n - 1) / c_n;
  const int go_count = (c_o + c_n - 1) / c_n;
  const std::uint64_t tap_rot = static_cast<std::uint64_t>(taps - 1);
  auto group_has = [&](int g_out, int g_in, int d, bool input_side) {
    for (int k = 0; k < c_n; ++k) {
      const int o = input_side ? g_out * c_n + k : g_out * c_n + (k + d) % c_n;
      const int i = input_side ? g_in * c_n + (k + d) % c_n : g_in * c_n + k;
      if (present(o, i)) return true;
    }
    return false;
  };
  OpLedger l;
  std::vector<std::uint64_t> per_out(static_cast<std::size_t>(go_count), 0);
  if (scheme == MimoScheme::kOutputRotation) {
    for (int g_in = 0; g_in < gi_count; ++g_in) {
      bool used = false;
      for (int i = g_in * c_n; i < std::min(c_i, (g_in + 1) * c_n) && !used; ++i)
        for (int o = 0; o < go_count * c_n && !used; ++o) used = present(o, i);
      if (used) l.in_rot += tap_rot;
    }
    for (int g_out = 0; g_out < go_count; ++g_out)
      for (int d = 0; d < c_n; ++d) {
        std::uint64_t groups = 0;
        for (int g_in = 0; g_in < gi_count; ++g_in) groups += group_has(g_out, g_in, d, false);
        l.mult += groups * static_cast<std::uint64_t>(taps);
        per_out[static_cast<std::size_t>(g_out)] += groups * static_cast<std::uint64_t>(taps);
        if (groups > 0 && d != 0) ++l.ex_rot;
      }
  } else {
    for (int g_in = 0; g_in < gi_count; ++g_in)
      for (int d = 0; d < c_n; ++d) {
        bool needed = false;
        for (int g_out = 0; g_out < go_count; ++g_out) {
          if (!group_has(g_out, g_in, d, true)) continue;
          needed = true;
          l.mult += static_cast<std::uint64_t>(taps);
          per_out[static_cast<std::size_t>(g_out)] += static_cast<std::uint64_t>(taps);
        }
        if (!needed) continue;
        if (d == 0) {
          l.in_rot += tap_rot;
        } else {
          l.ex_rot += 1 + tap_rot;
          l.ex_rot_tap += tap_rot;
        }
      }
  }
  for (auto m : per_out)
    if (m > 0) l.add += m - 1;
  return l;
}

template <typename S>
OpLedger structural_counts(const KernelMatrix<S>& km, int c_n, MimoScheme scheme) {
  return structural_counts(km.cols(), km.rows(), c_n, km.taps_per_kernel(), scheme,
                           [&](int o, int i) { return detail::scheduled(km, o, i); });
}

struct DepthwiseCounts {
  OpLedger output_rotation;
  OpLedger input_rotation;
  MimoScheme chosen = MimoScheme::kOutputRotation;
  std::uint64_t ex_rot = 0;  // under the chosen scheme
};

/// Counts for a block-diagonal (grouped) kernel matrix with dense square
/// groups of `group_size` channels. group_size 1 is a depthwise layer.
inline DepthwiseCounts depthwise_counts(int c, int c_n, int k_w, int k_h, int group_size) {
  if (group_size < 1 || c % group_size != 0)
    throw ConfigError("group size must divide the channel count");
  const int taps = k_w * k_h;
  auto present = [c, group_size](int o, int i) {
    return o < c && i < c && o / group_size == i / group_size;
  };
  DepthwiseCounts r;
  r.output_rotation = structural_counts(c, c, c_n, taps, MimoScheme::kOutputRotation, present);
  r.input_rotation = structural_counts(c, c, c_n, taps, MimoScheme::kInputRotation, present);
  const bool input_cheaper = r.input_rotation.ex_rot < r.output_rotation.ex_rot;
  r.chosen = input_cheaper ? MimoScheme::kInputRotation : MimoScheme::kOutputRotation;
  r.ex_rot = input_cheaper ? r.input_rotation.ex_rot : r.output_rotation.ex_rot;
  return r;
}

}  // namespace stria
