#pragma once

#include <optional>
#include <vector>

#include "stria/kernel.hpp"
#include "stria/packing.hpp"
#include "stria/slot_engine.hpp"

namespace stria {

/// 0/1 mask over one channel block: 1 where the output position lies in the
/// W x H region and the tap reads a position that also lies inside it.
/// Zeroes both padding and the wrap-around of the rotation.
template <typename S>
SlotVector<S> tap_mask(const PackLayout& layout, const Tap& tap) {
  SlotVector<S> mask = SlotVector<S>::Zero(static_cast<Eigen::Index>(layout.block_size()));
  for (int y = 0; y < layout.height; ++y) {
    const int sy = y + tap.dy;
    if (sy < 0 || sy >= layout.height) continue;
    for (int x = 0; x < layout.width; ++x) {
      const int sx = x + tap.dx;
      if (sx < 0 || sx >= layout.width) continue;
      mask(static_cast<Eigen::Index>(y) * layout.padded_w + x) = S(1);
    }
  }
  return mask;
}

/// SISO convolution of every channel packed in `c` with the same kernel:
/// one in-Rot per non-centre tap, one Mult per tap. Boundary masks are folded
/// into the weight plaintexts.
template <typename S>
SimCipher<S> siso_conv(SimContext<S>& ctx, const SimCipher<S>& c, const KernelSpec<S>& kernel,
                       const PackLayout& layout) {
  if (layout.slot_count != ctx.slot_count()) throw ContextError("layout slot count differs");
  const TapSet<S> taps = kernel_taps(kernel, layout);
  const auto block = static_cast<Eigen::Index>(layout.block_size());
  std::optional<SimCipher<S>> acc;
  for (std::size_t t = 0; t < taps.taps.size(); ++t) {
    const Tap& tap = taps.taps[t];
    const SlotVector<S> mask = tap_mask<S>(layout, tap);
    Plaintext<S> p{SlotVector<S>::Zero(static_cast<Eigen::Index>(ctx.slot_count())),
                   kernel.scale_bits()};
    for (int k = 0; k < layout.c_n; ++k) p.slots.segment(k * block, block) = mask * taps.weights[t];
    const SimCipher<S> shifted = rotate(ctx, c, tap.offset, RotRole::kInRot);
    multiply_accumulate(ctx, acc, shifted, p);
  }
  return *acc;
}

}  // namespace stria
