#include "stria/cost_model.hpp"

#include <algorithm>
#include <cmath>

namespace stria {

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

void require_capacity(int c_n, int tiles) {
  if (c_n < 1) throw ConfigError("channel packing capacity must be positive");
  if (tiles < 1) throw ConfigError("tile count must be positive");
  if (tiles > 1 && c_n != 1) throw ConfigError("tiled channels imply c_n = 1");
}

}  // namespace

FlopCount flops(const LayerSpec& l) {
  const auto hw = static_cast<std::uint64_t>(l.out_height()) * static_cast<std::uint64_t>(l.out_width());
  const auto kk = static_cast<std::uint64_t>(l.k_w) * static_cast<std::uint64_t>(l.k_h);
  const auto ci = static_cast<std::uint64_t>(l.c_i);
  const auto co = static_cast<std::uint64_t>(l.c_o);
  return {(2 * ci * kk - 1) * hw * co, 2 * kk * ci * co * hw};
}

RotCounts rot_counts(const LayerSpec& l, int c_n, int tiles) {
  l.validate();
  require_capacity(c_n, tiles);
  const std::uint64_t cn = static_cast<std::uint64_t>(c_n);
  const std::uint64_t gi = ceil_div(static_cast<std::uint64_t>(l.c_i), cn) * static_cast<std::uint64_t>(tiles);
  const std::uint64_t go = ceil_div(static_cast<std::uint64_t>(l.c_o), cn);
  const std::uint64_t t = static_cast<std::uint64_t>(l.taps());

  RotCounts r;
  r.scheme = select_scheme(l);
  r.in_rot = gi * (t - 1);
  if (!l.exrot_free) {
    r.ex_rot_out = go * (cn - 1);
    r.ex_rot_in_align = gi * (cn - 1);
    r.ex_rot_in_tap = gi * (cn - 1) * (t - 1);
    r.ex_rot_in = r.ex_rot_in_align + r.ex_rot_in_tap;
    r.ex_rot_chosen = r.scheme == MimoScheme::kOutputRotation ? r.ex_rot_out : r.ex_rot_in;
  }

  const double dcn = c_n;
  const double literal_taps = l.cross ? l.k_w + l.k_h - 1 : l.k_w * l.k_h - 1;
  r.in_rot_literal = l.c_i * literal_taps / dcn * tiles;
  if (!l.exrot_free) {
    const double side = std::min(static_cast<double>(l.k_w) * l.k_h * l.c_i, static_cast<double>(l.c_o));
    r.ex_rot_chosen_literal = (dcn - 1) / dcn * side;
  }
  return r;
}

std::uint64_t mult_count(const LayerSpec& l, int c_n, int tiles) {
  l.validate();
  require_capacity(c_n, tiles);
  const std::uint64_t cn = static_cast<std::uint64_t>(c_n);
  const std::uint64_t gi = ceil_div(static_cast<std::uint64_t>(l.c_i), cn) * static_cast<std::uint64_t>(tiles);
  const std::uint64_t go = ceil_div(static_cast<std::uint64_t>(l.c_o), cn);
  const std::uint64_t t = static_cast<std::uint64_t>(l.taps());
  const std::uint64_t diagonals = l.exrot_free ? 1 : cn;
  return go * gi * diagonals * t;
}

double mult_count_literal(const LayerSpec& l, int c_n) {
  const double dcn = c_n;
  const double base = static_cast<double>(l.c_i) * l.c_o * l.taps() / dcn;
  return l.exrot_free ? base / dcn : base;
}

std::uint64_t add_count(const LayerSpec& l, int c_n, int tiles) {
  const std::uint64_t m = mult_count(l, c_n, tiles);
  const std::uint64_t outputs =
      ceil_div(static_cast<std::uint64_t>(l.c_o), static_cast<std::uint64_t>(c_n)) *
      static_cast<std::uint64_t>(tiles);
  return m > outputs ? m - outputs : 0;
}

OpLedger layer_counts(const LayerSpec& l, int c_n, MimoScheme scheme, int tiles) {
  const RotCounts r = rot_counts(l, c_n, tiles);
  OpLedger out;
  out.in_rot = r.in_rot;
  if (scheme == MimoScheme::kOutputRotation) {
    out.ex_rot = r.ex_rot_out;
  } else {
    out.ex_rot = r.ex_rot_in;
    out.ex_rot_tap = r.ex_rot_in_tap;
  }
  out.mult = mult_count(l, c_n, tiles);
  out.add = add_count(l, c_n, tiles);
  return out;
}

BlockRot striablock_rot(int D, int e, int c_n) {
  if (D < 1 || e < 1 || c_n < 1) throw ConfigError("D, e and c_n must be positive");
  const double dcn = c_n;
  return {4.0 / dcn * e * D, (dcn - 1) / dcn * 2.0 * D};
}

double sensitivity_coefficient(double e, int c_n) {
  if (c_n < 1) throw ConfigError("channel packing capacity must be positive");
  const double dcn = c_n;
  return 2.0 * ((dcn - 1) / dcn + 2.0 * e / dcn);
}

double sensitivity_slope(int c_n) {
  if (c_n < 1) throw ConfigError("channel packing capacity must be positive");
  return 4.0 / static_cast<double>(c_n);
}

DominanceDiagnosis dominant_factor(const LayerSpec& l) {
  const long long input_side = static_cast<long long>(l.k_w) * l.k_h * l.c_i;
  DominanceDiagnosis d;
  if (l.c_o <= input_side) {
    d.tag = Dominance::kOutputChannelBound;
    d.value = l.c_o;
  } else {
    d.tag = Dominance::kInputChannelBound;
    d.value = input_side;
  }
  return d;
}

CalibrationTable CalibrationTable::paper_defaults() {
  CalibrationTable t;
  t.in_rot_ms = {{2, 16.10}, {8, 13.13}, {32, 11.48}, {128, 9.68}, {512, 8.82}};
  t.ex_rot_ms = {{2, 5.71}, {8, 7.50}, {32, 11.30}, {128, 14.50}, {512, 18.93}};
  t.cross_tapset_ms = {{4, 23.27}, {8, 22.78}, {16, 23.80}, {32, 23.93}, {64, 23.94}};
  t.regular_tapset_ms = {{4, 70.58}, {8, 77.41}, {16, 91.85}, {32, 105.00}, {64, 128.85}};
  return t;
}

void CalibrationTable::validate() const {
  auto check = [](const std::map<int, double>& m, const char* name) {
    if (m.empty()) throw ConfigError(std::string(name) + " is empty");
    for (const auto& [k, v] : m) {
      if (k < 1) throw ConfigError(std::string(name) + " has a non-positive key " + std::to_string(k));
      if (!(v > 0) || !std::isfinite(v))
        throw ConfigError(std::string(name) + "[" + std::to_string(k) + "] must be positive");
    }
  };
  check(in_rot_ms, "in_rot_ms");
  check(ex_rot_ms, "ex_rot_ms");
  check(cross_tapset_ms, "cross_tapset_ms");
  check(regular_tapset_ms, "regular_tapset_ms");
  if (!(mult_ms >= 0) || !std::isfinite(mult_ms)) throw ConfigError("mult_ms must be non-negative");
  if (!(add_ms >= 0) || !std::isfinite(add_ms)) throw ConfigError("add_ms must be non-negative");
}

CalibrationTable::Lookup CalibrationTable::interpolate(const std::map<int, double>& table, double key) {
  if (table.empty()) throw ConfigError("calibration table is empty");
  if (!(key > 0)) throw ConfigError("calibration key must be positive");
  const auto first = table.begin();
  const auto last = std::prev(table.end());
  if (key <= first->first) return {first->second, key < first->first};
  if (key >= last->first) return {last->second, key > last->first};
  auto hi = table.lower_bound(static_cast<int>(std::ceil(key)));
  if (hi->first == key) return {hi->second, false};
  auto lo = std::prev(hi);
  const double x0 = std::log2(lo->first);
  const double x1 = std::log2(hi->first);
  const double w = (std::log2(key) - x0) / (x1 - x0);
  return {lo->second + w * (hi->second - lo->second), false};
}

double tapset_ratio(const CalibrationTable& calib, int n) {
  return calib.cross_tapset(n).value / calib.regular_tapset(n).value;
}

TimeEstimate estimate_time(const OpLedger& counts, int c_n, const CalibrationTable& calib) {
  TimeEstimate t;
  if (counts.in_rot > 0) {
    const auto in = calib.in_rot(c_n);
    t.ms += static_cast<double>(counts.in_rot) * in.value;
    t.clamped |= in.clamped;
  }
  if (counts.ex_rot > 0) {
    const auto ex = calib.ex_rot(c_n);
    t.ms += static_cast<double>(counts.ex_rot) * ex.value;
    t.clamped |= ex.clamped;
  }
  t.ms += static_cast<double>(counts.mult) * calib.mult_ms;
  t.ms += static_cast<double>(counts.add) * calib.add_ms;
  return t;
}

void CostReport::add(LayerCost cost) {
  total += cost.counts;
  flops += cost.flops.exact;
  flops_approx += cost.flops.approx;
  est_ms += cost.est_ms;
  clamped |= cost.clamped;
  layers.push_back(std::move(cost));
}

LayerCost cost_layer(const LayerSpec& layer, int c_n, int tiles, const CalibrationTable& calib,
                     std::string stage, std::uint64_t extra_adds) {
  LayerCost c;
  c.stage = std::move(stage);
  c.layer = layer;
  c.c_n = c_n;
  c.tiles = tiles;
  c.scheme = select_scheme(layer);
  c.counts = layer_counts(layer, c_n, c.scheme, tiles);
  c.counts.add += extra_adds;
  c.flops = flops(layer);
  const TimeEstimate t = estimate_time(c.counts, c_n, calib);
  c.est_ms = t.ms;
  c.clamped = t.clamped;
  c.dominance = dominant_factor(layer);
  return c;
}

}  // namespace stria
