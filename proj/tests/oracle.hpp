#pragma once

// Reference implementations the tests compare the library against. Nothing
// here calls library arithmetic: convolutions are nested loops over plain
// integers, counts are the closed forms written out longhand.

#include <cstdint>
#include <optional>
#include <vector>

#include "stria/kernel_matrix.hpp"
#include "stria/layer.hpp"
#include "stria/packing.hpp"

namespace oracle {

using i128 = __int128;

/// Dense c x h x w volume of raw integers.
struct Volume {
  int c = 0, h = 0, w = 0;
  std::vector<i128> v;

  i128 at(int ch, int y, int x) const {
    if (y < 0 || x < 0 || y >= h || x >= w) return 0;
    return v[static_cast<std::size_t>((ch * h + y) * w + x)];
  }
};

inline Volume from_tensor(const stria::FeatureTensor<std::int64_t>& t) {
  Volume out{t.channels, t.height, t.width, {}};
  for (Eigen::Index i = 0; i < t.values.size(); ++i) out.v.push_back(t.values(i));
  return out;
}

/// Raw weight of kernel (o, i) at grid position (r, c), or nullopt when the
/// kernel or the position is absent.
inline std::optional<i128> weight(const stria::KernelMatrix<std::int64_t>& km, int o, int i, int r,
                                  int c) {
  if (!km.present(o, i)) return std::nullopt;
  const auto k = km.entry(o, i);
  if (!k.present(r, c)) return std::nullopt;
  return k.at(r, c);
}

/// Zero-padded "same" cross-correlation, kernel centred on the output pixel.
inline Volume conv(const Volume& x, const stria::KernelMatrix<std::int64_t>& km) {
  Volume out{km.rows(), x.h, x.w, {}};
  out.v.assign(static_cast<std::size_t>(out.c * out.h * out.w), 0);
  const int cy = km.kh() / 2, cx = km.kw() / 2;
  for (int o = 0; o < km.rows(); ++o)
    for (int y = 0; y < x.h; ++y)
      for (int xx = 0; xx < x.w; ++xx) {
        i128 sum = 0;
        for (int i = 0; i < km.cols(); ++i)
          for (int r = 0; r < km.kh(); ++r)
            for (int c = 0; c < km.kw(); ++c)
              if (auto wgt = weight(km, o, i, r, c)) sum += *wgt * x.at(i, y + r - cy, xx + c - cx);
        out.v[static_cast<std::size_t>((o * x.h + y) * x.w + xx)] = sum;
      }
  return out;
}

inline bool equal(const Volume& a, const stria::FeatureTensor<std::int64_t>& b) {
  if (a.c != b.channels || a.h != b.height || a.w != b.width) return false;
  for (std::size_t i = 0; i < a.v.size(); ++i)
    if (a.v[i] != static_cast<i128>(b.values(static_cast<Eigen::Index>(i)))) return false;
  return true;
}

/// Left rotation of a slot vector.
inline std::vector<std::int64_t> rotate(const std::vector<std::int64_t>& in, long off) {
  const long n = static_cast<long>(in.size());
  std::vector<std::int64_t> out(in.size());
  for (long j = 0; j < n; ++j) out[static_cast<std::size_t>(j)] = in[static_cast<std::size_t>(((j + off) % n + n) % n)];
  return out;
}

/// Multiplies and additions of a layer, counted one output value at a time.
inline std::uint64_t flops_by_enumeration(const stria::LayerSpec& l) {
  std::uint64_t ops = 0;
  for (int o = 0; o < l.c_o; ++o)
    for (int y = 0; y < l.height; y += l.stride)
      for (int x = 0; x < l.width; x += l.stride) {
        std::uint64_t mults = 0;
        for (int i = 0; i < l.c_i; ++i)
          for (int r = 0; r < l.k_h; ++r)
            for (int c = 0; c < l.k_w; ++c) ++mults;
        ops += mults + (mults - 1);
      }
  return ops;
}

/// Closed-form rotation and multiplication counts for a layer whose channel
/// counts are multiples of c_n. T is the number of kernel weights.
struct Counts {
  std::uint64_t in_rot, ex_rot_out, ex_rot_in, mult;
  double ex_rot_min;  // ((c_n - 1) / c_n) * min(T c_i, c_o)
};

inline Counts closed_form(int c_i, int c_o, int c_n, int T, bool exrot_free) {
  Counts k{};
  k.in_rot = static_cast<std::uint64_t>(c_i / c_n) * (T - 1);
  k.ex_rot_out = exrot_free ? 0 : static_cast<std::uint64_t>(c_o / c_n) * (c_n - 1);
  k.ex_rot_in = exrot_free ? 0 : static_cast<std::uint64_t>(c_i / c_n) * (c_n - 1) * T;
  k.mult = static_cast<std::uint64_t>(c_o / c_n) * (c_i / c_n) * (exrot_free ? 1 : c_n) * T;
  const double lo = std::min<double>(static_cast<double>(T) * c_i, c_o);
  k.ex_rot_min = exrot_free ? 0 : (c_n - 1.0) / c_n * lo;
  return k;
}

/// Rotations of one block: 4 e D / c_n in-Rot and 2 D (c_n - 1) / c_n ex-Rot.
inline std::pair<double, double> block_rotations(int D, int e, int c_n) {
  return {4.0 * e * D / c_n, 2.0 * D * (c_n - 1) / c_n};
}

}  // namespace oracle
