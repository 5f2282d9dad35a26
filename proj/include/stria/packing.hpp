#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "stria/errors.hpp"
#include "stria/slot_engine.hpp"

namespace stria {

/// c x H x W grid of raw scaled values, channel-major with row-major planes.
template <typename S>
struct FeatureTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  int scale_bits = 0;
  SlotVector<S> values;

  static FeatureTensor zeros(int channels, int height, int width, int scale_bits = 0) {
    if (channels < 1 || height < 1 || width < 1)
      throw GeometryError("tensor dimensions must be positive");
    FeatureTensor t{channels, height, width, scale_bits, {}};
    t.values = SlotVector<S>::Zero(static_cast<Eigen::Index>(channels) * height * width);
    return t;
  }

  Eigen::Index plane() const { return static_cast<Eigen::Index>(height) * width; }
  Eigen::Index index(int c, int y, int x) const {
    return static_cast<Eigen::Index>(c) * plane() + static_cast<Eigen::Index>(y) * width + x;
  }
  S& at(int c, int y, int x) { return values(index(c, y, x)); }
  const S& at(int c, int y, int x) const { return values(index(c, y, x)); }

  auto channel(int c) { return values.segment(static_cast<Eigen::Index>(c) * plane(), plane()); }
  auto channel(int c) const {
    return values.segment(static_cast<Eigen::Index>(c) * plane(), plane());
  }

  bool consistent() const {
    return channels >= 1 && height >= 1 && width >= 1 &&
           values.size() == static_cast<Eigen::Index>(channels) * plane();
  }
};

/// Where tensor channels live inside a list of ciphertexts.
struct PackLayout {
  std::size_t slot_count = kDefaultSlotCount;
  int channels = 0;
  int width = 0;
  int height = 0;
  int padded_w = 0;
  int padded_h = 0;
  int c_n = 1;
  int tiles_per_channel = 1;
  std::vector<int> channel_order;  // packed position -> tensor channel

  std::size_t block_size() const {
    return static_cast<std::size_t>(padded_w) * static_cast<std::size_t>(padded_h);
  }
  bool tiled() const { return tiles_per_channel > 1; }
  int cipher_count() const {
    if (tiled()) return channels * tiles_per_channel;
    return (channels + c_n - 1) / c_n;
  }

  friend bool operator==(const PackLayout&, const PackLayout&) = default;
};

inline int next_power_of_two(int v) {
  int p = 1;
  while (p < v) p <<= 1;
  return p;
}

/// Least powers of two covering the width and height.
inline std::pair<int, int> padded_dims(int width, int height) {
  if (width < 1 || height < 1) throw GeometryError("spatial dimensions must be positive");
  return {next_power_of_two(width), next_power_of_two(height)};
}

/// Channels per ciphertext; 1 when a single channel needs several.
inline int channel_capacity(std::size_t slot_count, int width, int height) {
  if (!is_power_of_two(slot_count)) throw ContextError("slot count must be a power of two");
  const auto [nw, nh] = padded_dims(width, height);
  const std::size_t area = static_cast<std::size_t>(nw) * static_cast<std::size_t>(nh);
  return area <= slot_count ? static_cast<int>(slot_count / area) : 1;
}

inline PackLayout make_layout(std::size_t slot_count, int channels, int width, int height) {
  if (channels < 1) throw GeometryError("at least one channel is required");
  PackLayout l;
  l.slot_count = slot_count;
  l.channels = channels;
  l.width = width;
  l.height = height;
  std::tie(l.padded_w, l.padded_h) = padded_dims(width, height);
  l.c_n = channel_capacity(slot_count, width, height);
  const std::size_t area = l.block_size();
  l.tiles_per_channel = area <= slot_count ? 1 : static_cast<int>((area + slot_count - 1) / slot_count);
  l.channel_order.resize(static_cast<std::size_t>(channels));
  std::iota(l.channel_order.begin(), l.channel_order.end(), 0);
  return l;
}

template <typename S>
struct PackedTensor {
  std::vector<SimCipher<S>> ciphers;
  PackLayout layout;
};

/// Packs channel `order[p]` at packed position p: cipher p / c_n, slot block
/// p % c_n. Planes are row-major with zero padding right and bottom.
template <typename S>
PackedTensor<S> pack(const SimContext<S>& ctx, const FeatureTensor<S>& t,
                     std::vector<int> order = {}) {
  if (!t.consistent()) throw GeometryError("tensor shape does not match its values");
  PackLayout layout = make_layout(ctx.slot_count(), t.channels, t.width, t.height);
  if (!order.empty()) {
    if (order.size() != static_cast<std::size_t>(t.channels))
      throw GeometryError("channel order has the wrong length");
    layout.channel_order = std::move(order);
  }
  const auto n = static_cast<Eigen::Index>(ctx.slot_count());
  const auto block = static_cast<Eigen::Index>(layout.block_size());
  std::vector<SlotVector<S>> slots(static_cast<std::size_t>(layout.cipher_count()),
                                   SlotVector<S>::Zero(n));
  for (int p = 0; p < t.channels; ++p) {
    const int ch = layout.channel_order[static_cast<std::size_t>(p)];
    for (int y = 0; y < t.height; ++y) {
      for (int x = 0; x < t.width; ++x) {
        const Eigen::Index local = static_cast<Eigen::Index>(y) * layout.padded_w + x;
        if (layout.tiled()) {
          const auto tile = static_cast<std::size_t>(local / n);
          slots[static_cast<std::size_t>(p) * static_cast<std::size_t>(layout.tiles_per_channel) +
                tile](local % n) = t.at(ch, y, x);
        } else {
          slots[static_cast<std::size_t>(p / layout.c_n)]((p % layout.c_n) * block + local) =
              t.at(ch, y, x);
        }
      }
    }
  }
  PackedTensor<S> out{{}, std::move(layout)};
  out.ciphers.reserve(slots.size());
  for (auto& s : slots) out.ciphers.emplace_back(ctx, std::move(s), t.scale_bits);
  return out;
}

/// Inverse of pack; pad slots are discarded.
template <typename S>
FeatureTensor<S> unpack(const std::vector<SimCipher<S>>& ciphers, const PackLayout& layout) {
  if (static_cast<int>(ciphers.size()) != layout.cipher_count())
    throw ContextError("cipher count does not match the layout");
  if (layout.channel_order.size() != static_cast<std::size_t>(layout.channels))
    throw ContextError("layout channel order is inconsistent");
  int scale = ciphers.empty() ? 0 : ciphers.front().scale_bits();
  for (const auto& c : ciphers) {
    if (c.size() != layout.slot_count) throw ContextError("cipher slot count differs from layout");
    if (c.scale_bits() != scale) throw ContextError("ciphers in one tensor disagree on scale");
  }
  auto t = FeatureTensor<S>::zeros(layout.channels, layout.height, layout.width, scale);
  const auto n = static_cast<Eigen::Index>(layout.slot_count);
  const auto block = static_cast<Eigen::Index>(layout.block_size());
  for (int p = 0; p < layout.channels; ++p) {
    const int ch = layout.channel_order[static_cast<std::size_t>(p)];
    for (int y = 0; y < layout.height; ++y) {
      for (int x = 0; x < layout.width; ++x) {
        const Eigen::Index local = static_cast<Eigen::Index>(y) * layout.padded_w + x;
        if (layout.tiled()) {
          t.at(ch, y, x) = ciphers[static_cast<std::size_t>(p) *
                                       static_cast<std::size_t>(layout.tiles_per_channel) +
                                   static_cast<std::size_t>(local / n)][static_cast<std::size_t>(local % n)];
        } else {
          t.at(ch, y, x) = ciphers[static_cast<std::size_t>(p / layout.c_n)]
                                  [static_cast<std::size_t>((p % layout.c_n) * block + local)];
        }
      }
    }
  }
  return t;
}

/// Cyclic channel shift: output channel k is input channel (k + shift) mod c.
template <typename S>
FeatureTensor<S> reorder_channels(const FeatureTensor<S>& t, int shift) {
  if (shift < 0 || shift >= t.channels) throw ConfigError("channel shift out of range");
  auto out = FeatureTensor<S>::zeros(t.channels, t.height, t.width, t.scale_bits);
  for (int k = 0; k < t.channels; ++k) out.channel(k) = t.channel((k + shift) % t.channels);
  return out;
}

/// Keeps every stride-th row and column starting at the origin.
template <typename S>
FeatureTensor<S> subsample(const FeatureTensor<S>& t, int stride) {
  if (stride == 1) return t;
  if (stride < 1) throw GeometryError("stride must be positive");
  const int h = (t.height + stride - 1) / stride;
  const int w = (t.width + stride - 1) / stride;
  auto out = FeatureTensor<S>::zeros(t.channels, h, w, t.scale_bits);
  for (int c = 0; c < t.channels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(c, y, x) = t.at(c, y * stride, x * stride);
  return out;
}

/// Moves every value to a finer scale (exact).
template <typename S>
FeatureTensor<S> rescaled(const FeatureTensor<S>& t, int scale_bits) {
  if (scale_bits < t.scale_bits) throw PrecisionError("cannot coarsen a scale exactly");
  FeatureTensor<S> out = t;
  out.scale_bits = scale_bits;
  if (scale_bits != t.scale_bits) out.values = detail::lifted(t.values, scale_bits - t.scale_bits);
  return out;
}

template <typename S>
bool same_shape(const FeatureTensor<S>& a, const FeatureTensor<S>& b) {
  return a.channels == b.channels && a.height == b.height && a.width == b.width;
}

/// Exact equality of the unscaled values.
template <typename S>
bool exactly_equal(const FeatureTensor<S>& a, const FeatureTensor<S>& b) {
  if (!same_shape(a, b)) return false;
  if (a.scale_bits == b.scale_bits) return a.values == b.values;
  const int scale = std::max(a.scale_bits, b.scale_bits);
  return rescaled(a, scale).values == rescaled(b, scale).values;
}

template <typename A, typename B>
double max_abs_diff(const FeatureTensor<A>& a, const FeatureTensor<B>& b) {
  if (a.channels != b.channels || a.height != b.height || a.width != b.width)
    throw GeometryError("tensor shapes differ");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.values.size(); ++i)
    worst = std::max(worst, std::fabs(to_double(a.values(i), a.scale_bits) -
                                      to_double(b.values(i), b.scale_bits)));
  return worst;
}

/// Converts every value to another scalar type; integral targets keep the
/// scale, other targets hold the unscaled value.
template <typename To, typename From>
FeatureTensor<To> convert_tensor(const FeatureTensor<From>& t) {
  const int scale = kIntegralScalar<To> ? t.scale_bits : 0;
  auto out = FeatureTensor<To>::zeros(t.channels, t.height, t.width, scale);
  for (Eigen::Index i = 0; i < t.values.size(); ++i) {
    if constexpr (kIntegralScalar<To> && kIntegralScalar<From>) {
      out.values(i) = static_cast<To>(t.values(i));
    } else if constexpr (std::is_same_v<To, Rational>) {
      out.values(i) = to_rational(t.values(i), t.scale_bits);
    } else if constexpr (std::is_floating_point_v<To>) {
      out.values(i) = static_cast<To>(to_double(t.values(i), t.scale_bits));
    } else {
      static_assert(!kIntegralScalar<To>, "integral target needs an integral source");
    }
  }
  return out;
}

}  // namespace stria
