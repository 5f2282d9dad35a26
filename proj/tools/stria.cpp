// stria: simulate packed convolutions, count operations, plan networks and
// manage calibration tables.
//
// Exit status: 0 ok, 1 oracle mismatch, 2 input error, 3 planning infeasible.

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "stria/io.hpp"
#include "stria/network_sim.hpp"
#include "stria/planner.hpp"
#include "stria/simulate.hpp"

namespace {

using namespace stria;
using nlohmann::json;

constexpr int kOk = 0;
constexpr int kMismatch = 1;
constexpr int kInputError = 2;
constexpr int kInfeasible = 3;

/// "D=32,e=2,cn=2" -> {D:32, e:2, cn:2}; bare words map to "1".
std::map<std::string, std::string> parse_kv(const std::string& text, const std::string& source,
                                            const std::vector<std::string>& allowed) {
  std::map<std::string, std::string> kv;
  std::istringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    const std::string key = item.substr(0, eq);
    const std::string value = eq == std::string::npos ? "1" : item.substr(eq + 1);
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ParseError(source, 0, "unknown key '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

int kv_int(const std::map<std::string, std::string>& kv, const std::string& key, int fallback,
           const std::string& source) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t used = 0;
    const int v = std::stoi(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ParseError(source, 0, key + " must be an integer, got '" + it->second + "'");
  }
}

bool kv_flag(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  return it != kv.end() && it->second != "0" && it->second != "false";
}

std::size_t slots_from_env(std::size_t fallback) {
  const char* env = std::getenv("STRIA_SLOTS");
  if (!env || !*env) return fallback;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0' || !is_power_of_two(v)) throw ParseError("STRIA_SLOTS", 0, "must be a power of two");
  return static_cast<std::size_t>(v);
}

json ledger_json(const OpLedger& l) {
  return {{"in_rot", l.in_rot}, {"ex_rot", l.ex_rot}, {"ex_rot_tap", l.ex_rot_tap},
          {"mult", l.mult},     {"add", l.add}};
}

json header_json(const std::string& command, const std::string& config, std::uint64_t seed) {
  return {{"tool", "stria"},
          {"version", STRIA_VERSION},
          {"command", command},
          {"config", config},
          {"config_hash", io::fnv1a_hex(config)},
          {"seed", seed}};
}

/// Plane of `slots / c_n` slots, as square as powers of two allow.
std::pair<int, int> plane_for(std::size_t slots, int c_n) {
  if (c_n < 1 || slots % static_cast<std::size_t>(c_n) != 0 ||
      !is_power_of_two(slots / static_cast<std::size_t>(c_n)))
    throw ConfigError("c_n = " + std::to_string(c_n) + " does not divide " + std::to_string(slots) +
                      " slots into a power-of-two plane");
  const std::size_t area = slots / static_cast<std::size_t>(c_n);
  int log = 0;
  while ((std::size_t{1} << log) < area) ++log;
  const int w = 1 << ((log + 1) / 2);
  return {w, static_cast<int>(area / static_cast<std::size_t>(w))};
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string block;
  std::string layer;
  std::string spec;
  std::string preset;
  std::string mode = "exact";
  std::uint64_t seed = 1;
  std::size_t slots = 0;
  int threads = 1;
  std::string out;
};

struct BlockConfig {
  int D = 0;
  int e = 0;
  int c_n = 0;
  int width = 0;
  int height = 0;
  std::size_t slots = 0;
};

struct LayerConfig {
  LayerSpec layer;
  std::size_t slots = 0;
  std::string scheme = "auto";
};

template <typename S>
struct RunOutcome {
  FeatureTensor<S> output;
  OpLedger ledger;
  bool match = false;
  double diff = 0;
};

// float accumulates rounding across taps and channels; the integral modes are exact
template <typename S>
constexpr double kTolerance = kIntegralScalar<S> ? 0.0 : 1e-4;

template <typename S>
RunOutcome<S> compared(FeatureTensor<S> got, const FeatureTensor<S>& want, const OpLedger& ledger) {
  const double diff = max_abs_diff(got, want);
  const bool match = kTolerance<S> == 0.0 ? exactly_equal(got, want) : diff <= kTolerance<S>;
  return {std::move(got), ledger, match, diff};
}

template <typename S>
RunOutcome<S> run_block(const BlockConfig& c, std::uint64_t seed, int threads) {
  Rng rng(seed);
  SimContext<S> ctx(c.slots);
  const BlockSpec<S> b = random_block<S>(rng, c.D, c.e, c.c_n);
  const FeatureTensor<S> x = random_tensor<S>(rng, c.D, c.height, c.width);
  EncryptedResult<S> enc = eval_encrypted(ctx, b, x, {threads});
  return compared(std::move(enc.output), eval_plain(b, x), enc.ledger);
}

template <typename S>
RunOutcome<S> run_layer(const LayerConfig& c, std::uint64_t seed, int threads, MimoScheme scheme) {
  Rng rng(seed);
  SimContext<S> ctx(c.slots);
  const int c_n = channel_capacity(c.slots, c.layer.width, c.layer.height);
  const KernelMatrix<S> km = random_kernel_matrix<S>(rng, c.layer, c_n);
  const FeatureTensor<S> x = random_tensor<S>(rng, c.layer.c_i, c.layer.height, c.layer.width);
  const PackedTensor<S> out = mimo_conv(ctx, pack(ctx, x), km, scheme, {threads});
  return compared(subsample(unpack(out.ciphers, out.layout), c.layer.stride),
                  subsample(conv_plain(x, km), c.layer.stride), ctx.ledger());
}

template <typename S>
RunOutcome<S> run_network(const NetworkSpec& net, std::uint64_t seed, int threads) {
  Rng rng(seed);
  NetworkSimResult<S> r = simulate_network<S>(net, rng, {threads}, kTolerance<S>);
  return {std::move(r.output), r.ledger, r.values_match, r.max_abs_diff};
}

/// Runs `fn` in the requested mode and fills the summary. Float mode also
/// runs the exact path and records how far the float output drifts from it.
template <typename Fn>
int run_modes(const std::string& mode, Fn&& fn, json& summary, OpLedger& ledger,
              std::optional<FeatureTensor<Exact>>& exact_output) {
  auto record = [&](const auto& run) {
    summary["values_match"] = run.match;
    summary["oracle_max_abs_diff"] = run.diff;
    ledger = run.ledger;
    return run.match ? kOk : kMismatch;
  };
  if (mode == "exact") {
    auto run = fn.template operator()<Exact>();
    exact_output = run.output;
    return record(run);
  }
  if (mode == "wide") return record(fn.template operator()<Wide>());
  if (mode == "rational") return record(fn.template operator()<Rational>());
  if (mode == "float") {
    const auto run = fn.template operator()<float>();
    const auto exact = fn.template operator()<Exact>();
    summary["float_vs_exact_max_abs_diff"] = max_abs_diff(run.output, exact.output);
    exact_output = exact.output;
    return record(run);
  }
  throw ConfigError("unknown mode '" + mode + "' (exact, wide, rational, float)");
}

int cmd_simulate(const SimulateArgs& a) {
  const int sources = !a.block.empty() + !a.layer.empty() + !a.spec.empty() + !a.preset.empty();
  if (sources != 1) throw ConfigError("give exactly one of --block, --layer, --spec, --preset");
  const std::size_t slots = a.slots ? a.slots : slots_from_env(kDefaultSlotCount);
  if (!is_power_of_two(slots)) throw ConfigError("slot count must be a power of two");

  json spec_json;
  std::string kind;
  if (!a.block.empty()) {
    kind = "block";
    const auto kv = parse_kv(a.block, "--block", {"D", "e", "cn", "c_n", "hw", "width", "height"});
    spec_json = {{"D", kv_int(kv, "D", 0, "--block")},
                 {"e", kv_int(kv, "e", 0, "--block")},
                 {"c_n", kv_int(kv, "cn", kv_int(kv, "c_n", 0, "--block"), "--block")}};
    const int hw = kv_int(kv, "hw", 0, "--block");
    if (hw) spec_json["width"] = spec_json["height"] = hw;
    if (kv.count("width")) spec_json["width"] = kv_int(kv, "width", 0, "--block");
    if (kv.count("height")) spec_json["height"] = kv_int(kv, "height", 0, "--block");
  } else if (!a.layer.empty()) {
    kind = "layer";
    const auto kv = parse_kv(a.layer, "--layer",
                             {"ci", "co", "k", "kw", "kh", "hw", "width", "height", "stride",
                              "exrot_free", "cross", "scheme"});
    const int k = kv_int(kv, "k", 1, "--layer");
    const int hw = kv_int(kv, "hw", 0, "--layer");
    spec_json = {{"c_i", kv_int(kv, "ci", 0, "--layer")},
                 {"c_o", kv_int(kv, "co", 0, "--layer")},
                 {"k_w", kv_int(kv, "kw", k, "--layer")},
                 {"k_h", kv_int(kv, "kh", k, "--layer")},
                 {"width", kv_int(kv, "width", hw ? hw : 3, "--layer")},
                 {"height", kv_int(kv, "height", hw ? hw : 3, "--layer")},
                 {"stride", kv_int(kv, "stride", 1, "--layer")},
                 {"exrot_free", kv_flag(kv, "exrot_free")},
                 {"cross", kv_flag(kv, "cross")},
                 {"scheme", kv.count("scheme") ? kv.at("scheme") : "auto"}};
  } else if (!a.spec.empty()) {
    const std::string text = io::read_file(a.spec);
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      int line = 1;
      for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) line += text[i] == '\n';
      throw ParseError(a.spec, line, e.what());
    }
    if (j.is_object() && j.contains("block")) {
      kind = "block";
      spec_json = j.at("block");
    } else if (j.is_object() && j.contains("layer")) {
      kind = "layer";
      spec_json = j.at("layer");
    } else {
      kind = "network";
      spec_json = j;
    }
  } else {
    kind = "network";
    auto preset = presets::by_name(a.preset);
    if (!preset) throw ConfigError("unknown preset '" + a.preset + "'");
    spec_json = json::parse(io::network_json(*preset));
  }

  json summary;
  OpLedger ledger;
  OpLedger predicted;
  int status = kOk;
  std::string config;
  std::optional<FeatureTensor<Exact>> exact_output;

  if (kind == "block") {
    BlockConfig c;
    const std::string src = a.spec.empty() ? "--block" : a.spec;
    try {
      c.D = spec_json.at("D").get<int>();
      c.e = spec_json.at("e").get<int>();
      c.c_n = spec_json.contains("c_n") ? spec_json.at("c_n").get<int>() : spec_json.at("cn").get<int>();
    } catch (const json::exception& e) {
      throw ParseError(src, 0, std::string("block needs D, e and c_n: ") + e.what());
    }
    c.slots = slots;
    if (spec_json.contains("width") || spec_json.contains("height")) {
      c.width = spec_json.value("width", spec_json.value("height", 1));
      c.height = spec_json.value("height", c.width);
      if (channel_capacity(slots, c.width, c.height) != c.c_n)
        throw ConfigError("a " + std::to_string(c.width) + "x" + std::to_string(c.height) +
                          " plane does not pack c_n = " + std::to_string(c.c_n) + " at " +
                          std::to_string(slots) + " slots");
    } else {
      std::tie(c.width, c.height) = plane_for(slots, c.c_n);
    }
    build_striablock<Exact>(c.D, c.e, c.c_n);  // validates before any work
    config = "simulate block D=" + std::to_string(c.D) + " e=" + std::to_string(c.e) +
             " c_n=" + std::to_string(c.c_n) + " plane=" + std::to_string(c.width) + "x" +
             std::to_string(c.height) + " slots=" + std::to_string(slots) + " mode=" + a.mode +
             " seed=" + std::to_string(a.seed);
    auto fn = [&]<typename S>() { return run_block<S>(c, a.seed, a.threads); };
    status = run_modes(a.mode, fn, summary, ledger, exact_output);
    predicted = block_counts(c.D, c.e, c.c_n, c.width, c.height);
    const BlockRot rot = striablock_rot(c.D, c.e, c.c_n);
    summary["block_formula"] = {{"in_rot", rot.in_rot}, {"ex_rot", rot.ex_rot}};
  } else if (kind == "layer") {
    LayerConfig c;
    const std::string src = a.spec.empty() ? "--layer" : a.spec;
    c.layer = io::parse_layer_json(spec_json.dump(), src);
    c.scheme = spec_json.value("scheme", "auto");
    c.slots = slots;
    const MimoScheme scheme = c.scheme == "auto"     ? select_scheme(c.layer)
                              : c.scheme == "output" ? MimoScheme::kOutputRotation
                              : c.scheme == "input"  ? MimoScheme::kInputRotation
                                                     : throw ParseError(src, 0, "scheme must be auto, output or input");
    const int c_n = channel_capacity(slots, c.layer.width, c.layer.height);
    config = "simulate layer " + spec_json.dump() + " slots=" + std::to_string(slots) + " mode=" +
             a.mode + " seed=" + std::to_string(a.seed);
    auto fn = [&]<typename S>() { return run_layer<S>(c, a.seed, a.threads, scheme); };
    status = run_modes(a.mode, fn, summary, ledger, exact_output);
    predicted = layer_counts(c.layer, c_n, scheme);
    summary["scheme"] = to_string(scheme);
    summary["c_n"] = c_n;
  } else {
    NetworkSpec net = io::parse_network(spec_json.dump(), a.spec.empty() ? a.preset : a.spec);
    if (a.slots || std::getenv("STRIA_SLOTS")) net.slots = slots;
    net = plan_network(net);
    config = "simulate network " + io::network_json(net) + " mode=" + a.mode + " seed=" + std::to_string(a.seed);
    auto fn = [&]<typename S>() { return run_network<S>(net, a.seed, a.threads); };
    status = run_modes(a.mode, fn, summary, ledger, exact_output);
    const auto layers = network_layers(net);
    for (const auto& p : layers) {
      OpLedger l = layer_counts(p.layer, p.c_n, p.tiles);
      l.add += p.residual_adds;
      predicted += l;
    }
  }

  const bool ledger_ok = ledger == predicted;
  if (!ledger_ok) status = kMismatch;
  json out = header_json("simulate", config, a.seed);
  out["kind"] = kind;
  out["mode"] = a.mode;
  out["ledger"] = ledger_json(ledger);
  out["predicted"] = ledger_json(predicted);
  out["ledger_matches_prediction"] = ledger_ok;
  for (auto& [k, v] : summary.items()) out[k] = v;
  out["status"] = status;

  if (!a.out.empty()) {
    const io::fs::path dir(a.out);
    io::write_file(dir / "summary.json", out.dump(2) + "\n");
    io::write_file(dir / "ledger.json", ledger_json(ledger).dump(2) + "\n");
    if (exact_output) io::write_tensor(dir / "output.bin", *exact_output);
  }
  std::cout << out.dump(2) << '\n';
  if (status == kMismatch) std::cerr << "oracle mismatch\n";
  return status;
}

// ------------------------------------------------------------------- count

struct CountArgs {
  std::string layer;
  std::string spec;
  std::string preset;
  bool sweep = false;
  bool exrot_free = false;
  bool verify = false;
  int threads = 1;
  std::string calibration;
  std::string csv;
  std::string json_path;
  std::uint64_t seed = 1;
};

struct CountRow {
  LayerSpec layer;
  int c_n = 1;
};

std::vector<CountRow> sweep_rows(bool only_exrot_free) {
  std::vector<CountRow> rows;
  for (int ci : {4, 8, 16, 32})
    for (int co : {4, 8, 16, 32})
      for (int cn : {2, 4, 8})
        for (int k : {1, 3})
          for (int variant = 0; variant < 4; ++variant) {
            const bool ef = variant & 1;
            const bool cross = variant & 2;
            if (only_exrot_free && !ef) continue;
            if (cross && k == 1) continue;  // a 1x1 cross is a 1x1 kernel
            LayerSpec l{ci, co, k, k, 3, 3, 1, ef, cross, ""};
            rows.push_back({l, cn});
          }
  return rows;
}

std::string count_csv(const std::vector<CountRow>& rows) {
  std::ostringstream out;
  out << "c_i,c_o,k_w,k_h,c_n,exrot_free,cross,in_rot,in_rot_literal,ex_rot_out,ex_rot_in,"
         "ex_rot_in_align,ex_rot_in_tap,scheme,ex_rot_chosen,ex_rot_chosen_literal,mult,"
         "mult_literal,add,flops\n";
  for (const auto& r : rows) {
    const LayerSpec& l = r.layer;
    const RotCounts rc = rot_counts(l, r.c_n);
    out << l.c_i << ',' << l.c_o << ',' << l.k_w << ',' << l.k_h << ',' << r.c_n << ','
        << l.exrot_free << ',' << l.cross << ',' << rc.in_rot << ',' << io::fixed(rc.in_rot_literal, 3)
        << ',' << rc.ex_rot_out << ',' << rc.ex_rot_in << ',' << rc.ex_rot_in_align << ','
        << rc.ex_rot_in_tap << ',' << to_string(rc.scheme) << ',' << rc.ex_rot_chosen << ','
        << io::fixed(rc.ex_rot_chosen_literal, 3) << ',' << mult_count(l, r.c_n) << ','
        << io::fixed(mult_count_literal(l, r.c_n), 3) << ',' << add_count(l, r.c_n) << ','
        << flops(l).exact << '\n';
  }
  return out.str();
}

/// Simulates each row at the smallest plane holding c_n channels and checks
/// both schemes against the formulas. Returns the failing rows.
std::vector<std::string> verify_rows(const std::vector<CountRow>& rows, std::uint64_t seed, int threads) {
  std::vector<std::string> failures(rows.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      const CountRow& r = rows[i];
      LayerSpec l = r.layer;
      const auto [nw, nh] = padded_dims(l.width, l.height);
      const std::size_t slots = static_cast<std::size_t>(r.c_n) * static_cast<std::size_t>(nw) *
                                static_cast<std::size_t>(nh);
      Rng rng(seed + i);
      for (MimoScheme s : {MimoScheme::kOutputRotation, MimoScheme::kInputRotation}) {
        SimContext<Exact> ctx(slots);
        const LayerSimResult res = simulate_layer(ctx, rng, l, s);
        if (!res.values_match || !(res.ledger == res.predicted)) {
          std::ostringstream msg;
          msg << "c_i=" << l.c_i << " c_o=" << l.c_o << " k=" << l.k_w << " c_n=" << r.c_n
              << " exrot_free=" << l.exrot_free << " cross=" << l.cross << " " << to_string(s)
              << ": ledger " << res.ledger << " predicted " << res.predicted
              << (res.values_match ? "" : " values differ");
          failures[i] += msg.str();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::max(1, threads); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  std::vector<std::string> out;
  for (auto& f : failures)
    if (!f.empty()) out.push_back(std::move(f));
  return out;
}

int cmd_count(const CountArgs& a) {
  const int sources = !a.layer.empty() + !a.spec.empty() + !a.preset.empty() + a.sweep;
  if (sources != 1) throw ConfigError("give exactly one of --layer, --sweep, --spec, --preset");
  const CalibrationTable calib =
      a.calibration.empty() ? CalibrationTable::paper_defaults() : io::read_calibration(a.calibration);

  if (!a.spec.empty() || !a.preset.empty()) {
    NetworkSpec net;
    if (!a.spec.empty()) {
      net = io::read_network(a.spec);
    } else {
      auto p = presets::by_name(a.preset);
      if (!p) throw ConfigError("unknown preset '" + a.preset + "'");
      net = *p;
    }
    if (std::getenv("STRIA_SLOTS")) net.slots = slots_from_env(net.slots);
    net = plan_network(net);
    const CostReport r = report(net, calib);
    const std::string config = "count network " + io::network_json(net) + io::calibration_json(calib);
    const std::string csv = io::report_csv(r);
    const std::string js = io::report_json(r, {"count", io::fnv1a_hex(config), a.seed});
    if (!a.csv.empty()) io::write_file(a.csv, csv);
    if (!a.json_path.empty()) io::write_file(a.json_path, js);
    std::cout << csv << js;
    if (a.verify) {
      Rng rng(a.seed);
      const auto sim = simulate_network<Exact>(net, rng, {a.threads});
      if (!(sim.ledger == r.total) || !sim.values_match) {
        std::cerr << "verify failed: simulated " << sim.ledger << " reported " << r.total << '\n';
        return kMismatch;
      }
      std::cerr << "verify ok: " << sim.ledger << '\n';
    }
    return kOk;
  }

  std::vector<CountRow> rows;
  if (a.sweep) {
    rows = sweep_rows(a.exrot_free);
  } else {
    const auto kv = parse_kv(a.layer, "--layer",
                             {"ci", "co", "k", "kw", "kh", "cn", "hw", "width", "height", "exrot_free", "cross"});
    const int k = kv_int(kv, "k", 1, "--layer");
    const int hw = kv_int(kv, "hw", 3, "--layer");
    LayerSpec l{kv_int(kv, "ci", 0, "--layer"),
                kv_int(kv, "co", 0, "--layer"),
                kv_int(kv, "kw", k, "--layer"),
                kv_int(kv, "kh", k, "--layer"),
                kv_int(kv, "width", hw, "--layer"),
                kv_int(kv, "height", hw, "--layer"),
                1,
                a.exrot_free || kv_flag(kv, "exrot_free"),
                kv_flag(kv, "cross"),
                ""};
    try {
      l.validate();
    } catch (const ConfigError& e) {
      throw ParseError("--layer", 0, e.what());
    }
    int cn = kv_int(kv, "cn", 0, "--layer");
    if (cn == 0) cn = channel_capacity(slots_from_env(kDefaultSlotCount), l.width, l.height);
    rows.push_back({l, cn});
  }
  const std::string csv = count_csv(rows);
  if (!a.csv.empty()) io::write_file(a.csv, csv);
  std::cout << csv;
  if (a.verify) {
    const auto failures = verify_rows(rows, a.seed, a.threads);
    for (const auto& f : failures) std::cerr << "verify failed: " << f << '\n';
    std::cerr << "verified " << rows.size() - failures.size() << "/" << rows.size() << " layers\n";
    if (!failures.empty()) return kMismatch;
  }
  return kOk;
}

// -------------------------------------------------------------------- plan

struct PlanArgs {
  std::string preset;
  std::string spec;
  int e_min = 2;
  int e_max = 8;
  int e_step = 2;
  std::optional<double> budget;
  std::size_t slots = 0;
  std::string calibration;
  std::string out_spec;
  std::string csv;
  std::string json_path;
  std::uint64_t seed = 1;
};

int cmd_plan(const PlanArgs& a) {
  if (a.preset.empty() == a.spec.empty()) throw ConfigError("give exactly one of --preset, --spec");
  NetworkSpec net;
  if (!a.spec.empty()) {
    net = io::read_network(a.spec);
  } else {
    auto p = presets::by_name(a.preset);
    if (!p) throw ConfigError("unknown preset '" + a.preset + "'");
    net = *p;
  }
  if (a.slots) net.slots = a.slots;
  else if (std::getenv("STRIA_SLOTS")) net.slots = slots_from_env(net.slots);
  const CalibrationTable calib =
      a.calibration.empty() ? CalibrationTable::paper_defaults() : io::read_calibration(a.calibration);
  CpasOptions opt;
  opt.e_min = a.e_min;
  opt.e_max = a.e_max;
  opt.e_step = a.e_step;
  opt.budget = a.budget;
  std::vector<std::pair<int, int>> dims;
  for (const auto& s : net.stages) dims.emplace_back(s.hw, s.D);
  const CpasSchedule sched = cpas_schedule(dims, net.slots, opt);
  const NetworkSpec planned = plan_network(net, opt);
  const CostReport r = report(planned, calib);

  std::ostringstream config;
  config << "plan " << io::network_json(net) << " e_min=" << a.e_min << " e_max=" << a.e_max
         << " e_step=" << a.e_step << " budget=" << io::fixed(sched.budget) << io::calibration_json(calib);
  const std::string hash = io::fnv1a_hex(config.str());

  std::cout << "# " << planned.name << (planned.inferred ? " (inferred preset)" : "") << ", budget "
            << io::fixed(sched.budget, 4) << ", config " << hash << "\n";
  std::cout << "stage,hw,D,blocks,c_n,e,coef,block_in_rot,block_ex_rot\n";
  for (std::size_t i = 0; i < planned.stages.size(); ++i) {
    const auto& s = planned.stages[i];
    const BlockRot br = striablock_rot(s.D, *s.e, s.c_n);
    std::cout << i + 1 << ',' << s.hw << ',' << s.D << ',' << s.blocks << ',' << s.c_n << ',' << *s.e
              << ',' << io::fixed(sensitivity_coefficient(*s.e, s.c_n), 4) << ','
              << io::fixed(br.in_rot, 2) << ',' << io::fixed(br.ex_rot, 2) << '\n';
  }
  std::cout << "total: in_rot=" << r.total.in_rot << " ex_rot=" << r.total.ex_rot
            << " mult=" << r.total.mult << " add=" << r.total.add << " flops=" << r.flops
            << " est_ms=" << io::fixed(r.est_ms, 2) << (r.clamped ? " (calibration clamped)" : "") << '\n';
  if (!a.out_spec.empty()) io::write_file(a.out_spec, io::network_json(planned));
  if (!a.csv.empty()) io::write_file(a.csv, io::report_csv(r));
  if (!a.json_path.empty()) io::write_file(a.json_path, io::report_json(r, {"plan", hash, a.seed}));
  return kOk;
}

// --------------------------------------------------------------- calibrate

struct CalibrateArgs {
  bool paper_defaults = false;
  std::string measurements;
  std::string out;
  std::vector<double> query_cn;
  std::vector<double> query_n;
};

int cmd_calibrate(const CalibrateArgs& a) {
  if (a.paper_defaults == !a.measurements.empty())
    throw ConfigError("give exactly one of --paper-defaults, --measurements");
  const CalibrationTable t =
      a.paper_defaults ? CalibrationTable::paper_defaults() : io::read_calibration(a.measurements);
  t.validate();
  const std::string js = io::calibration_json(t);
  if (!a.out.empty()) io::write_file(a.out, js);
  std::cout << js;
  for (double cn : a.query_cn) {
    const auto in = t.in_rot(cn);
    const auto ex = t.ex_rot(cn);
    std::cout << "c_n=" << cn << " in_rot_ms=" << io::fixed(in.value, 4) << " ex_rot_ms=" << io::fixed(ex.value, 4)
              << (in.clamped || ex.clamped ? " clamped" : "") << '\n';
  }
  for (double n : a.query_n) {
    const auto c = t.cross_tapset(n);
    const auto r = t.regular_tapset(n);
    std::cout << "N=" << n << " cross_tapset_ms=" << io::fixed(c.value, 4)
              << " regular_tapset_ms=" << io::fixed(r.value, 4) << " ratio=" << io::fixed(c.value / r.value, 4)
              << (c.clamped || r.clamped ? " clamped" : "") << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Packed-ciphertext convolution simulator and rotation cost planner"};
  app.set_version_flag("--version", std::string("stria ") + STRIA_VERSION);
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Run a block, layer or network through the packed engines");
  s->add_option("--block", sim.block, "Block as D=..,e=..,cn=..[,hw=..]");
  s->add_option("--layer", sim.layer, "Layer as ci=..,co=..,k=..[,hw=..,exrot_free,cross,scheme=..]");
  s->add_option("--spec", sim.spec, "JSON file with a block, layer or network");
  s->add_option("--preset", sim.preset, "Network preset (imagenet, tiny, cifar)");
  s->add_option("--mode", sim.mode, "exact, wide, rational or float")->capture_default_str();
  s->add_option("--seed", sim.seed, "Seed for weights and inputs")->capture_default_str();
  s->add_option("--slots", sim.slots, "Slot count (default: STRIA_SLOTS or 8192)");
  s->add_option("--threads", sim.threads, "Worker threads")->check(CLI::PositiveNumber);
  s->add_option("--out", sim.out, "Directory for summary, ledger and output tensor");

  CountArgs cnt;
  auto* c = app.add_subcommand("count", "Closed-form operation counts");
  c->add_option("--layer", cnt.layer, "Layer as ci=..,co=..,k=..,cn=..[,exrot_free,cross]");
  c->add_flag("--sweep", cnt.sweep, "Count the standard layer sweep");
  c->add_option("--spec", cnt.spec, "Network JSON file");
  c->add_option("--preset", cnt.preset, "Network preset (imagenet, tiny, cifar)");
  c->add_flag("--exrot-free", cnt.exrot_free, "Use the exRot-free kernel-matrix pattern");
  c->add_flag("--verify", cnt.verify, "Also simulate and require ledger equality");
  c->add_option("--threads", cnt.threads, "Workers for --verify")->check(CLI::PositiveNumber);
  c->add_option("--calibration", cnt.calibration, "Calibration JSON");
  c->add_option("--csv", cnt.csv, "Write the CSV here");
  c->add_option("--json", cnt.json_path, "Write the JSON summary here");
  c->add_option("--seed", cnt.seed, "Seed for --verify")->capture_default_str();

  PlanArgs plan;
  auto* p = app.add_subcommand("plan", "Plan a network and report its cost");
  p->add_option("--preset", plan.preset, "Network preset (imagenet, tiny, cifar)");
  p->add_option("--spec", plan.spec, "Network JSON file; stages without e are scheduled");
  p->add_option("--e-min", plan.e_min)->capture_default_str();
  p->add_option("--e-max", plan.e_max)->capture_default_str();
  p->add_option("--e-step", plan.e_step, "Largest e increase between stages")->capture_default_str();
  p->add_option("--budget", plan.budget, "Sensitivity coefficient budget");
  p->add_option("--slots", plan.slots, "Slot count override");
  p->add_option("--calibration", plan.calibration, "Calibration JSON");
  p->add_option("--out-spec", plan.out_spec, "Write the planned network JSON here");
  p->add_option("--csv", plan.csv, "Per-layer report CSV");
  p->add_option("--json", plan.json_path, "Report summary JSON");
  p->add_option("--seed", plan.seed, "Recorded in the report header")->capture_default_str();

  CalibrateArgs cal;
  auto* k = app.add_subcommand("calibrate", "Validate and emit a calibration table");
  k->add_flag("--paper-defaults", cal.paper_defaults, "Use the published measurements");
  k->add_option("--measurements", cal.measurements, "Calibration JSON to validate");
  k->add_option("--out", cal.out, "Write the table here");
  k->add_option("--query-cn", cal.query_cn, "Interpolate rotation costs at these c_n");
  k->add_option("--query-n", cal.query_n, "Interpolate tap-set costs at these channel edges");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    if (*s) return cmd_simulate(sim);
    if (*c) return cmd_count(cnt);
    if (*p) return cmd_plan(plan);
    if (*k) return cmd_calibrate(cal);
  } catch (const PlanningError& e) {
    std::cerr << "planning infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kInputError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kInputError;
}
