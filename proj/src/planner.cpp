#include "stria/planner.hpp"

#include <algorithm>
#include <numeric>

#include "stria/packing.hpp"

namespace stria {

namespace {

std::string stage_name(std::size_t i) { return "stage" + std::to_string(i + 1); }

}  // namespace

CpasSchedule cpas_schedule(const std::vector<std::pair<int, int>>& stages, std::size_t slots,
                           const CpasOptions& opt) {
  if (opt.e_min < 1 || opt.e_min > opt.e_max)
    throw ConfigError("need 1 <= e_min <= e_max, got " + std::to_string(opt.e_min) + ".." +
                      std::to_string(opt.e_max));
  if (opt.e_step < 0) throw ConfigError("e_step must be non-negative");
  CpasSchedule s;
  for (const auto& [hw, D] : stages) s.c_n.push_back(channel_capacity(slots, hw, hw));
  if (stages.empty()) return s;
  s.budget = opt.budget ? *opt.budget : sensitivity_coefficient(opt.e_min, s.c_n.front());
  int prev = 0;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const int lo = i == 0 ? opt.e_min : std::max(opt.e_min, prev);
    const int hi = i == 0 ? opt.e_max : std::min(opt.e_max, prev + opt.e_step);
    int chosen = 0;
    for (int e = hi; e >= lo; --e)
      if (sensitivity_coefficient(e, s.c_n[i]) <= s.budget) {
        chosen = e;
        break;
      }
    if (chosen == 0)
      throw PlanningError(static_cast<int>(i) + 1,
                          "no e in [" + std::to_string(lo) + ", " + std::to_string(hi) +
                              "] keeps the sensitivity coefficient at c_n = " +
                              std::to_string(s.c_n[i]) + " within budget " +
                              std::to_string(s.budget));
    s.e.push_back(chosen);
    prev = chosen;
  }
  return s;
}

NetworkSpec plan_network(NetworkSpec net, const CpasOptions& opt) {
  if (!is_power_of_two(net.slots)) throw ConfigError("slot count must be a power of two");
  for (std::size_t i = 0; i < net.stages.size(); ++i) {
    const auto& st = net.stages[i];
    if (st.hw < 1 || st.D < 1 || st.blocks < 0)
      throw PlanningError(static_cast<int>(i) + 1, "stage dimensions must be positive");
    if (i > 0 && st.hw > net.stages[i - 1].hw)
      throw PlanningError(static_cast<int>(i) + 1, "spatial size grows with depth");
  }
  const bool need_schedule = std::any_of(net.stages.begin(), net.stages.end(),
                                         [](const StageSpec& s) { return !s.e; });
  std::vector<std::pair<int, int>> dims;
  for (const auto& st : net.stages) dims.emplace_back(st.hw, st.D);
  std::optional<CpasSchedule> sched;
  if (need_schedule) sched = cpas_schedule(dims, net.slots, opt);
  for (std::size_t i = 0; i < net.stages.size(); ++i) {
    auto& st = net.stages[i];
    st.c_n = channel_capacity(net.slots, st.hw, st.hw);
    if (!st.e) st.e = sched->e[i];
    const int inner = *st.e * st.D;
    if (inner < st.c_n)
      throw PlanningError(static_cast<int>(i) + 1, "eD = " + std::to_string(inner) + " is below c_n = " +
                                             std::to_string(st.c_n));
    if (inner % st.c_n != 0)
      throw PlanningError(static_cast<int>(i) + 1, "eD = " + std::to_string(inner) +
                                             " is not a multiple of c_n = " + std::to_string(st.c_n));
  }
  if (net.stem) net.stem->validate();
  if (net.head) net.head->validate();
  return net;
}

std::vector<PlannedLayer> network_layers(const NetworkSpec& net) {
  std::vector<PlannedLayer> out;
  int stage_index = -1;
  auto place = [&](const LayerSpec& l, std::string stage, std::uint64_t residual, int block) {
    PlannedLayer p;
    p.stage = std::move(stage);
    p.layer = l;
    const auto [nw, nh] = padded_dims(l.width, l.height);
    const std::size_t area = static_cast<std::size_t>(nw) * static_cast<std::size_t>(nh);
    p.c_n = channel_capacity(net.slots, l.width, l.height);
    p.tiles = area <= net.slots ? 1 : static_cast<int>((area + net.slots - 1) / net.slots);
    p.residual_adds = residual;
    p.block = block;
    p.stage_index = stage_index;
    out.push_back(std::move(p));
  };
  if (net.stem) place(*net.stem, "stem", 0, -1);
  for (std::size_t i = 0; i < net.stages.size(); ++i) {
    const auto& st = net.stages[i];
    stage_index = static_cast<int>(i);
    if (!st.e) throw PlanningError(static_cast<int>(i) + 1, "stage has no scaling factor; plan the network first");
    if (i > 0) {
      const auto& prev = net.stages[i - 1];
      if (prev.D != st.D || prev.hw != st.hw) {
        const int stride = std::max(1, prev.hw / st.hw);
        LayerSpec t{prev.D, st.D, 1, 1, prev.hw, prev.hw, stride, false, false, "transition"};
        place(t, stage_name(i), 0, -1);
      }
    }
    const int inner = *st.e * st.D;
    const std::uint64_t residual = static_cast<std::uint64_t>((st.D + st.c_n - 1) / std::max(1, st.c_n));
    for (int b = 0; b < st.blocks; ++b) {
      place({st.D, inner, 1, 1, st.hw, st.hw, 1, false, false, "expand"}, stage_name(i), 0, b);
      place({inner, inner, 3, 3, st.hw, st.hw, 1, true, true, "middle"}, stage_name(i), 0, b);
      place({inner, st.D, 1, 1, st.hw, st.hw, 1, false, false, "project"}, stage_name(i), residual, b);
    }
  }
  stage_index = -1;
  if (net.head) place(*net.head, "head", 0, -1);
  return out;
}

CostReport report(const NetworkSpec& net, const CalibrationTable& calib) {
  CostReport r;
  for (const auto& p : network_layers(net))
    r.add(cost_layer(p.layer, p.c_n, p.tiles, calib, p.stage, p.residual_adds));
  return r;
}

CostReport report_layers(const std::vector<LayerSpec>& layers, std::size_t slots,
                         const CalibrationTable& calib) {
  CostReport r;
  for (const auto& l : layers) {
    const auto [nw, nh] = padded_dims(l.width, l.height);
    const std::size_t area = static_cast<std::size_t>(nw) * static_cast<std::size_t>(nh);
    const int tiles = area <= slots ? 1 : static_cast<int>((area + slots - 1) / slots);
    r.add(cost_layer(l, channel_capacity(slots, l.width, l.height), tiles, calib, l.name));
  }
  return r;
}

Comparison compare_networks(const std::vector<std::pair<std::string, CostReport>>& reports) {
  Comparison c;
  for (const auto& [name, r] : reports) c.rows.push_back({name, r.flops, r.est_ms, 0, 0});
  // rank = 1 + number of strictly cheaper entries, so ties share a rank
  for (auto& row : c.rows)
    for (const auto& other : c.rows) {
      row.flops_rank += other.flops < row.flops;
      row.he_rank += other.est_ms < row.est_ms;
    }
  for (auto& row : c.rows) {
    ++row.flops_rank;
    ++row.he_rank;
  }
  for (const auto& a : c.rows)
    for (const auto& b : c.rows)
      if (a.flops < b.flops && a.est_ms > b.est_ms) c.reversals.push_back({a.name, b.name});
  return c;
}

namespace presets {

namespace {

LayerSpec conv(int c_i, int c_o, int k, int hw, int stride, std::string name) {
  return {c_i, c_o, k, k, hw, hw, stride, false, false, std::move(name)};
}

}  // namespace

NetworkSpec imagenet() {
  NetworkSpec n;
  n.name = "imagenet";
  n.input = 224;
  n.slots = kDefaultSlotCount;
  n.stem = conv(3, 32, 3, 224, 4, "stem");
  n.stages = {{56, 32, 2, {}, 0}, {28, 64, 3, {}, 0}, {14, 128, 4, {}, 0}, {7, 256, 2, {}, 0}};
  n.head = conv(256, 1280, 1, 7, 1, "head");
  n.inferred = true;
  return n;
}

NetworkSpec tiny_imagenet() {
  NetworkSpec n;
  n.name = "tiny";
  n.input = 64;
  n.slots = kDefaultSlotCount;
  n.stem = conv(3, 32, 3, 64, 2, "stem");
  n.stages = {{32, 32, 2, {}, 0}, {16, 64, 3, {}, 0}, {8, 128, 3, {}, 0}, {4, 256, 2, {}, 0}};
  n.head = conv(256, 1024, 1, 4, 1, "head");
  n.inferred = true;
  return n;
}

NetworkSpec cifar() {
  NetworkSpec n;
  n.name = "cifar";
  n.input = 32;
  n.slots = kDefaultSlotCount;
  n.stem = conv(3, 16, 3, 32, 1, "stem");
  n.stages = {{32, 16, 2, {}, 0}, {16, 32, 3, {}, 0}, {8, 64, 3, {}, 0}};
  n.head = conv(64, 256, 1, 8, 1, "head");
  n.inferred = true;
  return n;
}

std::optional<NetworkSpec> by_name(const std::string& name) {
  if (name == "imagenet") return imagenet();
  if (name == "tiny") return tiny_imagenet();
  if (name == "cifar") return cifar();
  return std::nullopt;
}

}  // namespace presets

}  // namespace stria
