#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stria/conv_mimo.hpp"
#include "stria/layer.hpp"
#include "stria/slot_engine.hpp"

namespace stria {

struct FlopCount {
  std::uint64_t exact = 0;   // (2 c_i k_w k_h - 1) * H_out * W_out * c_o
  std::uint64_t approx = 0;  // 2 k_w k_h c_i c_o H_out W_out
};

FlopCount flops(const LayerSpec& layer);

/// Rotation counts for one layer at capacity c_n. Integer fields use
/// ceilings for partial packs and match the simulator; *_literal fields are
/// the closed forms as written, as reals.
struct RotCounts {
  std::uint64_t in_rot = 0;          // tap-exact
  std::uint64_t ex_rot_out = 0;      // output-rotation scheme
  std::uint64_t ex_rot_in = 0;       // input-rotation scheme, aggregate
  std::uint64_t ex_rot_in_align = 0; // ... of which channel alignment
  std::uint64_t ex_rot_in_tap = 0;   // ... of which taps on rotated copies
  std::uint64_t ex_rot_chosen = 0;
  MimoScheme scheme = MimoScheme::kOutputRotation;

  double in_rot_literal = 0;         // cross: c_i (k_w + k_h - 1) / c_n
  double ex_rot_chosen_literal = 0;  // ((c_n-1)/c_n) min<k_w k_h c_i, c_o>
};

/// `tiles` > 1 only for the oversized-channel regime (c_n = 1), where every
/// channel spans several ciphertexts and each pays its own tap rotations.
RotCounts rot_counts(const LayerSpec& layer, int c_n, int tiles = 1);

std::uint64_t mult_count(const LayerSpec& layer, int c_n, int tiles = 1);
double mult_count_literal(const LayerSpec& layer, int c_n);
std::uint64_t add_count(const LayerSpec& layer, int c_n, int tiles = 1);

/// Predicted ledger for one layer under `scheme`.
OpLedger layer_counts(const LayerSpec& layer, int c_n, MimoScheme scheme, int tiles = 1);
inline OpLedger layer_counts(const LayerSpec& layer, int c_n, int tiles = 1) {
  return layer_counts(layer, c_n, select_scheme(layer), tiles);
}

struct BlockRot {
  double in_rot = 0;
  double ex_rot = 0;
  double total() const { return in_rot + ex_rot; }
};

/// (4/c_n) e D in-Rot plus ((c_n-1)/c_n) 2D ex-Rot.
BlockRot striablock_rot(int D, int e, int c_n);

/// 2((c_n-1)/c_n + 2e/c_n).
double sensitivity_coefficient(double e, int c_n);
/// d coef / d e = 4 / c_n.
double sensitivity_slope(int c_n);

/// Which side of min<k_w k_h c_i, c_o> governs ex-Rot.
enum class Dominance { kOutputChannelBound, kInputChannelBound };

struct DominanceDiagnosis {
  Dominance tag = Dominance::kOutputChannelBound;
  long long value = 0;            // the smaller side
  std::string in_rot_factor = "c_i";
};

inline const char* to_string(Dominance d) {
  return d == Dominance::kOutputChannelBound ? "output_channel_bound" : "input_channel_bound";
}

DominanceDiagnosis dominant_factor(const LayerSpec& layer);

/// Per-op timings in milliseconds keyed by c_n (rotations) or channel edge N
/// (tap sets). Lookups interpolate linearly in log2(key).
struct CalibrationTable {
  std::map<int, double> in_rot_ms;
  std::map<int, double> ex_rot_ms;
  std::map<int, double> cross_tapset_ms;
  std::map<int, double> regular_tapset_ms;
  double mult_ms = 1.61;  // free parameter: a tenth of the c_n = 2 in-Rot, nothing measured
  double add_ms = 0.005;

  static CalibrationTable paper_defaults();

  /// Throws ConfigError naming the offending entry.
  void validate() const;

  struct Lookup {
    double value = 0;
    bool clamped = false;
  };
  static Lookup interpolate(const std::map<int, double>& table, double key);

  Lookup in_rot(double c_n) const { return interpolate(in_rot_ms, c_n); }
  Lookup ex_rot(double c_n) const { return interpolate(ex_rot_ms, c_n); }
  Lookup cross_tapset(double n) const { return interpolate(cross_tapset_ms, n); }
  Lookup regular_tapset(double n) const { return interpolate(regular_tapset_ms, n); }

  friend bool operator==(const CalibrationTable&, const CalibrationTable&) = default;
};

/// Cross over regular 3x3 tap-set time at channel edge N.
double tapset_ratio(const CalibrationTable& calib, int n);

struct TimeEstimate {
  double ms = 0;
  bool clamped = false;
};

TimeEstimate estimate_time(const OpLedger& counts, int c_n, const CalibrationTable& calib);

struct LayerCost {
  std::string stage;
  LayerSpec layer;
  int c_n = 1;
  int tiles = 1;
  MimoScheme scheme = MimoScheme::kOutputRotation;
  OpLedger counts;
  FlopCount flops;
  double est_ms = 0;
  bool clamped = false;
  DominanceDiagnosis dominance;
};

struct CostReport {
  std::vector<LayerCost> layers;
  OpLedger total;
  std::uint64_t flops = 0;
  std::uint64_t flops_approx = 0;
  double est_ms = 0;
  bool clamped = false;

  void add(LayerCost cost);
};

/// Full cost row for one layer; `extra_adds` are residual Adds charged to it.
LayerCost cost_layer(const LayerSpec& layer, int c_n, int tiles, const CalibrationTable& calib,
                     std::string stage = {}, std::uint64_t extra_adds = 0);

}  // namespace stria
