#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stria/cost_model.hpp"
#include "stria/layer.hpp"

namespace stria {

struct StageSpec {
  int hw = 1;      // square plane edge
  int D = 1;       // block width
  int blocks = 1;
  std::optional<int> e;  // empty: filled by the CPAS schedule
  int c_n = 0;           // derived by plan_network

  friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

struct NetworkSpec {
  std::string name;
  int input = 224;
  int input_channels = 3;
  std::size_t slots = kDefaultSlotCount;
  std::optional<LayerSpec> stem;
  std::vector<StageSpec> stages;
  std::optional<LayerSpec> head;
  bool inferred = false;  // preset reconstructed from partial information

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct CpasOptions {
  int e_min = 2;
  int e_max = 8;
  int e_step = 2;                // largest increase between consecutive stages
  std::optional<double> budget;  // default: coefficient of e_min at the first stage
};

struct CpasSchedule {
  std::vector<int> e;
  std::vector<int> c_n;
  double budget = 0;
};

/// Per stage, the largest e in [max(e_min, e_prev), min(e_max, e_prev + e_step)]
/// whose sensitivity coefficient at that stage's c_n stays within budget.
/// Throws PlanningError naming the first stage with no such e.
CpasSchedule cpas_schedule(const std::vector<std::pair<int, int>>& stages, std::size_t slots,
                           const CpasOptions& opt = {});

/// Fills c_n and e for every stage and checks that each block fits its mask.
NetworkSpec plan_network(NetworkSpec net, const CpasOptions& opt = {});

/// Layers of a planned network in execution order, with their cost context.
struct PlannedLayer {
  std::string stage;
  LayerSpec layer;
  int c_n = 1;
  int tiles = 1;
  std::uint64_t residual_adds = 0;
  int block = -1;  // index within the stage, -1 for stem/transition/head
  int stage_index = -1;
};

std::vector<PlannedLayer> network_layers(const NetworkSpec& planned);

CostReport report(const NetworkSpec& planned, const CalibrationTable& calib);

/// Cost of a plain layer list (imported CNNs): dense formulas, select_scheme.
CostReport report_layers(const std::vector<LayerSpec>& layers, std::size_t slots,
                         const CalibrationTable& calib);

struct ComparisonRow {
  std::string name;
  std::uint64_t flops = 0;
  double est_ms = 0;
  int flops_rank = 0;  // 1 = cheapest
  int he_rank = 0;
};

struct Reversal {
  std::string cheaper_flops;  // lower FLOPs ...
  std::string cheaper_he;     // ... but this one is cheaper under HE
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  std::vector<Reversal> reversals;
};

Comparison compare_networks(const std::vector<std::pair<std::string, CostReport>>& reports);

namespace presets {
NetworkSpec imagenet();
NetworkSpec tiny_imagenet();
NetworkSpec cifar();
std::optional<NetworkSpec> by_name(const std::string& name);
}  // namespace presets

}  // namespace stria
