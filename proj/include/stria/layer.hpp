#pragma once

#include <string>

#include "stria/errors.hpp"
#include "stria/kernel.hpp"

namespace stria {

/// One convolution: channel counts, kernel shape, input plane and the
/// kernel-matrix modifiers. exrot_free and cross are independent flags.
struct LayerSpec {
  int c_i = 1;
  int c_o = 1;
  int k_w = 1;
  int k_h = 1;
  int width = 1;
  int height = 1;
  int stride = 1;
  bool exrot_free = false;
  bool cross = false;
  std::string name;

  KernelPattern kernel_pattern() const {
    return cross ? KernelPattern::kCross : KernelPattern::kRegular;
  }
  /// Weights per kernel: k_w*k_h, or k_w + k_h - 1 for a cross.
  int taps() const { return tap_count(k_h, k_w, kernel_pattern()); }
  int out_width() const { return (width + stride - 1) / stride; }
  int out_height() const { return (height + stride - 1) / stride; }

  void validate() const {
    if (c_i < 1 || c_o < 1) throw ConfigError("layer " + name + ": channel counts must be positive");
    if (k_w < 1 || k_h < 1 || k_w % 2 == 0 || k_h % 2 == 0)
      throw ConfigError("layer " + name + ": kernel dimensions must be odd and positive");
    if (width < 1 || height < 1) throw ConfigError("layer " + name + ": plane must be non-empty");
    if (stride < 1) throw ConfigError("layer " + name + ": stride must be positive");
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

}  // namespace stria
