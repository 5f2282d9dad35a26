#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "stria/errors.hpp"
#include "stria/packing.hpp"
#include "stria/scalar.hpp"

namespace stria {

enum class KernelPattern { kRegular, kCross };

inline const char* to_string(KernelPattern p) {
  return p == KernelPattern::kCross ? "cross" : "regular";
}

/// Kernel positions that carry a parameter, row-major. A cross kernel keeps
/// row (k_h+1)/2 and column (k_w+1)/2 (1-based), k_w + k_h - 1 positions.
inline std::vector<std::pair<int, int>> kernel_positions(int kh, int kw, KernelPattern pattern) {
  std::vector<std::pair<int, int>> pos;
  const int cr = kh / 2;
  const int cc = kw / 2;
  for (int r = 0; r < kh; ++r)
    for (int c = 0; c < kw; ++c)
      if (pattern == KernelPattern::kRegular || r == cr || c == cc) pos.emplace_back(r, c);
  return pos;
}

inline int tap_count(int kh, int kw, KernelPattern pattern) {
  return pattern == KernelPattern::kCross ? kw + kh - 1 : kw * kh;
}

template <typename S>
class KernelSpec {
 public:
  using Grid = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  KernelSpec() { grid_.setZero(1, 1); }

  /// Zero kernel. Dimensions must be odd.
  KernelSpec(int kh, int kw, KernelPattern pattern, int scale_bits = 0)
      : kh_(kh), kw_(kw), pattern_(pattern), scale_bits_(scale_bits) {
    if (kh < 1 || kw < 1 || kh % 2 == 0 || kw % 2 == 0)
      throw GeometryError("kernel dimensions must be odd, got " + std::to_string(kh) + "x" +
                          std::to_string(kw));
    // setZero rather than construction from an expression: 2D Eigen
    // expressions trip boost's byte-container detection for rationals
    grid_.setZero(kh, kw);
  }

  static KernelSpec regular(const Grid& weights, int scale_bits = 0) {
    KernelSpec k(static_cast<int>(weights.rows()), static_cast<int>(weights.cols()),
                 KernelPattern::kRegular, scale_bits);
    k.grid_ = weights;
    return k;
  }

  /// Cross kernel from its centre row (k_w values) and centre column (k_h
  /// values); the two must agree on the centre weight.
  static KernelSpec cross(const SlotVector<S>& row, const SlotVector<S>& column,
                          int scale_bits = 0) {
    KernelSpec k(static_cast<int>(column.size()), static_cast<int>(row.size()),
                 KernelPattern::kCross, scale_bits);
    if (row(k.center_col()) != column(k.center_row()))
      throw ConfigError("cross row and column disagree on the centre weight");
    k.grid_.row(k.center_row()) = row.transpose();
    k.grid_.col(k.center_col()) = column;
    return k;
  }

  int kh() const { return kh_; }
  int kw() const { return kw_; }
  KernelPattern pattern() const { return pattern_; }
  int scale_bits() const { return scale_bits_; }
  int center_row() const { return kh_ / 2; }
  int center_col() const { return kw_ / 2; }

  bool present(int r, int c) const {
    if (r < 0 || c < 0 || r >= kh_ || c >= kw_) return false;
    return pattern_ == KernelPattern::kRegular || r == center_row() || c == center_col();
  }

  const S& at(int r, int c) const {
    if (!present(r, c)) throw GeometryError("no parameter at this kernel position");
    return grid_(r, c);
  }
  void set(int r, int c, const S& v) {
    if (!present(r, c)) throw GeometryError("no parameter at this kernel position");
    grid_(r, c) = v;
  }

  /// Dense view; absent positions read as zero.
  const Grid& grid() const { return grid_; }

  std::size_t parameter_count() const {
    return static_cast<std::size_t>(tap_count(kh_, kw_, pattern_));
  }

  /// Weights in kernel_positions order.
  SlotVector<S> backbone() const {
    const auto pos = kernel_positions(kh_, kw_, pattern_);
    SlotVector<S> w(static_cast<Eigen::Index>(pos.size()));
    for (std::size_t i = 0; i < pos.size(); ++i)
      w(static_cast<Eigen::Index>(i)) = grid_(pos[i].first, pos[i].second);
    return w;
  }

  friend bool operator==(const KernelSpec& a, const KernelSpec& b) {
    return a.kh_ == b.kh_ && a.kw_ == b.kw_ && a.pattern_ == b.pattern_ &&
           a.scale_bits_ == b.scale_bits_ && a.grid_ == b.grid_;
  }

 private:
  int kh_ = 1;
  int kw_ = 1;
  KernelPattern pattern_ = KernelPattern::kRegular;
  int scale_bits_ = 0;
  Grid grid_;
};

/// Geometry of one kernel position relative to the centre.
struct Tap {
  std::ptrdiff_t offset = 0;  // dy * N_w + dx
  int dy = 0;
  int dx = 0;
  int row = 0;  // position inside the kernel
  int col = 0;
};

template <typename S>
struct TapSet {
  std::vector<Tap> taps;
  std::vector<S> weights;

  /// Rotations needed to align every tap (the centre needs none).
  std::size_t rotations() const {
    std::size_t n = 0;
    for (const auto& t : taps) n += t.offset != 0;
    return n;
  }
};

/// Tap geometry for a kernel shape under a packing layout.
inline std::vector<Tap> tap_geometry(int kh, int kw, KernelPattern pattern,
                                     const PackLayout& layout) {
  if (layout.tiled()) throw GeometryError("convolution over tiled channels is not simulated");
  if (kw > layout.padded_w || kh > layout.padded_h)
    throw GeometryError("kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                        " does not fit a " + std::to_string(layout.padded_h) + "x" +
                        std::to_string(layout.padded_w) + " channel");
  std::vector<Tap> taps;
  for (const auto& [r, c] : kernel_positions(kh, kw, pattern)) {
    Tap t;
    t.row = r;
    t.col = c;
    t.dy = r - kh / 2;
    t.dx = c - kw / 2;
    t.offset = static_cast<std::ptrdiff_t>(t.dy) * layout.padded_w + t.dx;
    taps.push_back(t);
  }
  return taps;
}

template <typename S>
TapSet<S> kernel_taps(const KernelSpec<S>& k, const PackLayout& layout) {
  TapSet<S> set;
  set.taps = tap_geometry(k.kh(), k.kw(), k.pattern(), layout);
  for (const auto& t : set.taps) set.weights.push_back(k.grid()(t.row, t.col));
  return set;
}

namespace detail {

template <typename S>
S split_part(const S& value, double fraction) {
  if constexpr (kIntegralScalar<S>) {
    // fraction is applied on a 2^-16 grid; the remainder goes to the partner
    const auto num = static_cast<S>(std::llround(fraction * 65536.0));
    S prod;
    if (checked_mul(value, num, prod)) throw PrecisionError("overflow splitting a cross centre");
    return prod / static_cast<S>(65536);
  } else if constexpr (std::is_same_v<S, Rational>) {
    return value * Rational(fraction);
  } else {
    return static_cast<S>(value * fraction);
  }
}

}  // namespace detail

/// Splits a cross kernel into a (k_h x 1) column kernel and a (1 x k_w) row
/// kernel. The centre weight is shared: the column part takes `center_split`
/// of it and the row part takes the exact remainder.
template <typename S>
std::pair<KernelSpec<S>, KernelSpec<S>> decompose_cross(const KernelSpec<S>& k,
                                                        double center_split = 0.5) {
  if (k.pattern() != KernelPattern::kCross) throw ConfigError("decompose_cross needs a cross kernel");
  const S center = k.grid()(k.center_row(), k.center_col());
  const S vertical_center = detail::split_part(center, center_split);
  typename KernelSpec<S>::Grid col = k.grid().col(k.center_col());
  typename KernelSpec<S>::Grid row = k.grid().row(k.center_row());
  col(k.center_row(), 0) = vertical_center;
  row(0, k.center_col()) = center - vertical_center;
  return {KernelSpec<S>::regular(col, k.scale_bits()), KernelSpec<S>::regular(row, k.scale_bits())};
}

/// Reassembles a cross kernel; the centre is the sum of both sub-centres.
template <typename S>
KernelSpec<S> merge_cross(const KernelSpec<S>& vertical, const KernelSpec<S>& horizontal) {
  if (vertical.kw() != 1 || horizontal.kh() != 1)
    throw GeometryError("merge_cross expects (k_h,1) and (1,k_w) kernels");
  if (vertical.scale_bits() != horizontal.scale_bits())
    throw PrecisionError("sub-kernels disagree on scale");
  const int kh = vertical.kh();
  const int kw = horizontal.kw();
  SlotVector<S> column = vertical.grid().col(0);
  SlotVector<S> row = horizontal.grid().row(0).transpose();
  const S center = column(kh / 2) + row(kw / 2);
  column(kh / 2) = center;
  row(kw / 2) = center;
  return KernelSpec<S>::cross(row, column, vertical.scale_bits());
}

/// Plaintext same-padding cross-correlation of one plane, accumulated into
/// `out`: out[y][x] += sum k[r][c] * in[y + r - k_h/2][x + c - k_w/2].
template <typename S, typename In, typename Out>
void correlate_accumulate(const In& in, int height, int width, const KernelSpec<S>& k, Out&& out) {
  bool overflow = false;
  for (const auto& [r, c] : kernel_positions(k.kh(), k.kw(), k.pattern())) {
    const S w = k.grid()(r, c);
    const int dy = r - k.kh() / 2;
    const int dx = c - k.kw() / 2;
    for (int y = 0; y < height; ++y) {
      const int sy = y + dy;
      if (sy < 0 || sy >= height) continue;
      for (int x = 0; x < width; ++x) {
        const int sx = x + dx;
        if (sx < 0 || sx >= width) continue;
        S prod;
        S sum;
        overflow |= checked_mul(w, in(static_cast<Eigen::Index>(sy) * width + sx), prod);
        const Eigen::Index o = static_cast<Eigen::Index>(y) * width + x;
        overflow |= checked_add(out(o), prod, sum);
        out(o) = sum;
      }
    }
  }
  if (overflow) throw PrecisionError("overflow in plaintext convolution");
}

}  // namespace stria
