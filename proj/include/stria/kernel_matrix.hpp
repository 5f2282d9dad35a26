#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "stria/kernel.hpp"
#include "stria/packing.hpp"

namespace stria {

enum class SupportKind { kDense, kExRotFree, kCustom };

/// Which (row, col) entries of a kernel matrix exist.
struct MatrixPattern {
  SupportKind kind = SupportKind::kDense;
  int c_n = 1;  // only meaningful for kExRotFree

  static MatrixPattern dense() { return {}; }
  static MatrixPattern exrot_free(int c_n) { return {SupportKind::kExRotFree, c_n}; }
  friend bool operator==(const MatrixPattern&, const MatrixPattern&) = default;
};

inline bool in_exrot_free_mask(int row, int col, int c_n) { return row % c_n == col % c_n; }

/// Entries (k + c_n*i, k + c_n*j) for k < c_n, i < ceil(c_o/c_n),
/// j < ceil(c_i/c_n), clipped to the matrix. Sorted by row, then column.
inline std::vector<std::pair<int, int>> exrot_free_mask(int c_i, int c_o, int c_n) {
  if (c_n < 1) throw ConfigError("channel packing capacity must be positive");
  const int m = (c_o + c_n - 1) / c_n;
  const int n = (c_i + c_n - 1) / c_n;
  std::vector<std::pair<int, int>> entries;
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < c_n; ++k)
      for (int j = 0; j < n; ++j) {
        const int row = k + c_n * i;
        const int col = k + c_n * j;
        if (row < c_o && col < c_i) entries.emplace_back(row, col);
      }
  std::sort(entries.begin(), entries.end());
  return entries;
}

/// c_o x c_i matrix of optional kernels sharing one shape and pattern.
/// Only present entries own parameters.
template <typename S>
class KernelMatrix {
 public:
  using Weights = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  KernelMatrix() = default;

  KernelMatrix(int c_o, int c_i, int kh, int kw, KernelPattern kernel_pattern,
               MatrixPattern pattern = MatrixPattern::dense(), int scale_bits = 0)
      : c_o_(c_o), c_i_(c_i), kh_(kh), kw_(kw), kernel_pattern_(kernel_pattern),
        pattern_(pattern), scale_bits_(scale_bits) {
    KernelSpec<S> probe(kh, kw, kernel_pattern);  // validates the shape
    if (c_o < 1 || c_i < 1) throw GeometryError("kernel matrix needs positive channel counts");
    if (pattern.kind == SupportKind::kExRotFree && pattern.c_n < 1)
      throw ConfigError("exRot-free pattern needs c_n >= 1");
    index_.assign(static_cast<std::size_t>(c_o) * static_cast<std::size_t>(c_i), -1);
    std::int32_t next = 0;
    for (int o = 0; o < c_o; ++o)
      for (int i = 0; i < c_i; ++i)
        if (pattern.kind == SupportKind::kDense || in_exrot_free_mask(o, i, pattern.c_n))
          index_[flat(o, i)] = next++;
    weights_ = Weights::Zero(next, taps_per_kernel());
  }

  /// Matrix whose support is exactly `entries`.
  static KernelMatrix with_support(int c_o, int c_i, int kh, int kw, KernelPattern kernel_pattern,
                                   const std::vector<std::pair<int, int>>& entries,
                                   int scale_bits = 0) {
    KernelMatrix km(1, 1, kh, kw, kernel_pattern, MatrixPattern::dense(), scale_bits);
    km.c_o_ = c_o;
    km.c_i_ = c_i;
    km.pattern_ = {SupportKind::kCustom, 1};
    km.index_.assign(static_cast<std::size_t>(c_o) * static_cast<std::size_t>(c_i), -1);
    std::int32_t next = 0;
    for (const auto& [o, i] : entries) {
      if (o < 0 || i < 0 || o >= c_o || i >= c_i) throw GeometryError("entry outside the matrix");
      if (km.index_[km.flat(o, i)] < 0) km.index_[km.flat(o, i)] = next++;
    }
    km.weights_ = Weights::Zero(next, km.taps_per_kernel());
    return km;
  }

  int rows() const { return c_o_; }
  int cols() const { return c_i_; }
  int kh() const { return kh_; }
  int kw() const { return kw_; }
  KernelPattern kernel_pattern() const { return kernel_pattern_; }
  const MatrixPattern& pattern() const { return pattern_; }
  int scale_bits() const { return scale_bits_; }
  int taps_per_kernel() const { return tap_count(kh_, kw_, kernel_pattern_); }
  std::size_t present_count() const { return static_cast<std::size_t>(weights_.rows()); }
  std::size_t parameter_count() const { return static_cast<std::size_t>(weights_.size()); }

  bool present(int o, int i) const {
    if (o < 0 || i < 0 || o >= c_o_ || i >= c_i_) return false;
    return index_[flat(o, i)] >= 0;
  }

  /// Weights of entry (o, i) in kernel_positions order.
  auto tap_weights(int o, int i) const { return weights_.row(require(o, i)); }
  auto tap_weights(int o, int i) { return weights_.row(require(o, i)); }

  KernelSpec<S> entry(int o, int i) const {
    KernelSpec<S> k(kh_, kw_, kernel_pattern_, scale_bits_);
    const auto row = weights_.row(require(o, i));
    const auto pos = kernel_positions(kh_, kw_, kernel_pattern_);
    for (std::size_t t = 0; t < pos.size(); ++t)
      k.set(pos[t].first, pos[t].second, row(static_cast<Eigen::Index>(t)));
    return k;
  }

  void set_entry(int o, int i, const KernelSpec<S>& k) {
    if (k.kh() != kh_ || k.kw() != kw_ || k.pattern() != kernel_pattern_)
      throw GeometryError("kernel shape differs from the matrix");
    if (k.scale_bits() != scale_bits_) throw PrecisionError("kernel scale differs from the matrix");
    weights_.row(require(o, i)) = k.backbone().transpose();
  }

  std::vector<std::pair<int, int>> support() const {
    std::vector<std::pair<int, int>> s;
    for (int o = 0; o < c_o_; ++o)
      for (int i = 0; i < c_i_; ++i)
        if (present(o, i)) s.emplace_back(o, i);
    return s;
  }

  /// True when every present entry satisfies row = col (mod c_n).
  bool within_exrot_free(int c_n) const {
    for (int o = 0; o < c_o_; ++o)
      for (int i = 0; i < c_i_; ++i)
        if (present(o, i) && !in_exrot_free_mask(o, i, c_n)) return false;
    return true;
  }

  const Weights& weights() const { return weights_; }
  Weights& weights() { return weights_; }

  friend bool operator==(const KernelMatrix& a, const KernelMatrix& b) {
    return a.c_o_ == b.c_o_ && a.c_i_ == b.c_i_ && a.kh_ == b.kh_ && a.kw_ == b.kw_ &&
           a.kernel_pattern_ == b.kernel_pattern_ && a.scale_bits_ == b.scale_bits_ &&
           a.index_ == b.index_ && a.weights_ == b.weights_;
  }

 private:
  std::size_t flat(int o, int i) const {
    return static_cast<std::size_t>(o) * static_cast<std::size_t>(c_i_) + static_cast<std::size_t>(i);
  }
  Eigen::Index require(int o, int i) const {
    if (!present(o, i))
      throw GeometryError("kernel matrix has no entry at (" + std::to_string(o) + ", " +
                          std::to_string(i) + ")");
    return index_[flat(o, i)];
  }

  int c_o_ = 0;
  int c_i_ = 0;
  int kh_ = 1;
  int kw_ = 1;
  KernelPattern kernel_pattern_ = KernelPattern::kRegular;
  MatrixPattern pattern_;
  int scale_bits_ = 0;
  std::vector<std::int32_t> index_;
  Weights weights_;
};

/// Plaintext multi-channel convolution: output o is the sum over present
/// entries (o, i) of the correlation of input channel i with kernel (o, i).
template <typename S>
FeatureTensor<S> conv_plain(const FeatureTensor<S>& x, const KernelMatrix<S>& km) {
  if (x.channels != km.cols()) throw GeometryError("input channels differ from kernel matrix columns");
  auto out = FeatureTensor<S>::zeros(km.rows(), x.height, x.width, x.scale_bits + km.scale_bits());
  const auto pos = kernel_positions(km.kh(), km.kw(), km.kernel_pattern());
  for (int o = 0; o < km.rows(); ++o) {
    auto dst = out.channel(o);
    for (int i = 0; i < km.cols(); ++i) {
      if (!km.present(o, i)) continue;
      correlate_accumulate(x.channel(i), x.height, x.width, km.entry(o, i), dst);
    }
  }
  return out;
}

}  // namespace stria
