// Acceptance suite: one PASS/FAIL line per criterion. The whole suite runs
// twice (single-threaded, then multi-threaded) and the two report
// directories must be byte-identical.

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "oracle.hpp"
#include "stria/io.hpp"
#include "stria/planner.hpp"
#include "stria/simulate.hpp"

using namespace stria;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;  // deterministic: goes into the report
};

struct Criterion {
  int id;
  std::string name;
  double limit_s;
  std::function<Outcome(std::uint64_t seed, int threads)> run;
};

void require(Outcome& o, bool ok, const std::string& what) {
  if (!ok) {
    o.pass = false;
    o.detail += "FAILED " + what + "; ";
  }
}

std::size_t slots_for(int c_n, int hw) {
  const auto [nw, nh] = padded_dims(hw, hw);
  return static_cast<std::size_t>(c_n) * static_cast<std::size_t>(nw) * static_cast<std::size_t>(nh);
}

// ------------------------------------------------------------------ 1

Outcome block_counts_reproduced(std::uint64_t seed, int threads) {
  struct Row {
    int D, e, c_n, hw;
    std::uint64_t in, ex;
  };
  const std::vector<Row> rows = {{32, 2, 2, 56, 128, 32},
                                 {64, 4, 8, 28, 128, 112},
                                 {128, 6, 32, 14, 96, 248},
                                 {256, 8, 128, 7, 64, 508}};
  Outcome o;
  for (const auto& r : rows) {
    const BlockRot f = striablock_rot(r.D, r.e, r.c_n);
    Rng rng(seed);
    SimContext<Exact> ctx(kDefaultSlotCount);
    const auto b = random_block<Exact>(rng, r.D, r.e, r.c_n);
    const auto x = random_tensor<Exact>(rng, r.D, r.hw, r.hw);
    const auto enc = eval_encrypted(ctx, b, x, {threads});
    std::ostringstream row;
    row << "(" << enc.ledger.in_rot << "," << enc.ledger.ex_rot << ") ";
    o.detail += row.str();
    const std::string tag = "D=" + std::to_string(r.D);
    require(o, f.in_rot == static_cast<double>(r.in) && f.ex_rot == static_cast<double>(r.ex), tag + " formula");
    require(o, enc.ledger.in_rot == r.in && enc.ledger.ex_rot == r.ex, tag + " ledger");
    require(o, exactly_equal(enc.output, eval_plain(b, x)), tag + " values");
  }
  return o;
}

// ------------------------------------------------------------------ 2

Outcome exrot_free_needs_no_ex_rot(std::uint64_t seed, int threads) {
  Outcome o;
  Rng rng(seed);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int c_n = 1 << rng.pick(1, 3);
    const int ci = rng.pick(4, 32), co = rng.pick(4, 32);
    const bool cross = rng.pick(0, 1) == 1;
    const LayerSpec l{ci, co, 3, 3, 3, 3, 1, true, cross, ""};
    const auto km = random_kernel_matrix<Exact>(rng, l, c_n);
    const auto x = random_tensor<Exact>(rng, ci, 3, 3);
    const auto want = oracle::conv(oracle::from_tensor(x), km);
    for (auto s : {MimoScheme::kOutputRotation, MimoScheme::kInputRotation}) {
      SimContext<Exact> ctx(slots_for(c_n, 3));
      const auto p = mimo_conv(ctx, pack(ctx, x), km, s, {threads});
      const std::string tag = "trial " + std::to_string(trial) + " " + to_string(s);
      require(o, ctx.ledger().ex_rot == 0, tag + " ex_rot");
      require(o, oracle::equal(want, unpack(p.ciphers, p.layout)), tag + " values");
      ++checked;
    }
  }
  o.detail += std::to_string(checked) + " scheme runs, ex_rot 0, outputs equal the oracle";
  return o;
}

// ------------------------------------------------------------------ 3

Outcome formulas_equal_ledgers(std::uint64_t seed, int threads) {
  Outcome o;
  Rng rng(seed);
  int configs = 0;
  for (int ci : {4, 8, 16, 32})
    for (int co : {4, 8, 16, 32})
      for (int c_n : {2, 4, 8})
        for (int k : {1, 3})
          for (bool cross : {false, true}) {
            if (ci < c_n || co < c_n) continue;  // the closed forms assume whole packs
            if (cross && k == 1) continue;
            const LayerSpec l{ci, co, k, k, 3, 3, 1, false, cross, ""};
            const int T = l.taps();
            const auto f = oracle::closed_form(ci, co, c_n, T, false);
            const auto km = random_kernel_matrix<Exact>(rng, l, c_n);
            const auto x = random_tensor<Exact>(rng, ci, 3, 3);
            OpLedger led[2];
            int idx = 0;
            for (auto s : {MimoScheme::kOutputRotation, MimoScheme::kInputRotation}) {
              SimContext<Exact> ctx(slots_for(c_n, 3));
              const OpLedger before = ctx.snapshot();
              mimo_conv(ctx, pack(ctx, x), km, s, {threads});
              led[idx++] = ledger_diff(before, ctx.snapshot());
            }
            const RotCounts rc = rot_counts(l, c_n);
            const std::string tag = std::to_string(ci) + "x" + std::to_string(co) + " c_n=" +
                                    std::to_string(c_n) + " T=" + std::to_string(T);
            require(o, led[0].in_rot == f.in_rot && led[1].in_rot == f.in_rot, tag + " in_rot");
            require(o, led[0].ex_rot == f.ex_rot_out, tag + " ex_rot output scheme");
            require(o, led[1].ex_rot == f.ex_rot_in, tag + " ex_rot input scheme");
            require(o, led[0].mult == f.mult && led[1].mult == f.mult, tag + " mult");
            require(o, static_cast<double>(rc.ex_rot_chosen) == f.ex_rot_min, tag + " chosen");
            const OpLedger& chosen = select_scheme(l) == MimoScheme::kOutputRotation ? led[0] : led[1];
            require(o, chosen.ex_rot == rc.ex_rot_chosen, tag + " chosen ledger");
            ++configs;
          }
  o.detail += std::to_string(configs) + " configurations";
  require(o, configs >= 96, "sweep size");
  return o;
}

// ------------------------------------------------------------------ 4

Outcome siso_rotation_counts(std::uint64_t seed, int) {
  Outcome o;
  Rng rng(seed);
  for (auto pattern : {KernelPattern::kRegular, KernelPattern::kCross}) {
    SimContext<Exact> ctx(kDefaultSlotCount);
    const auto t = random_tensor<Exact>(rng, 2, 56, 56);
    const auto p = pack(ctx, t);
    KernelSpec<Exact> k(3, 3, pattern, kGridBits);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        if (k.present(r, c)) k.set(r, c, rng.uniform(-64, 64));
    const auto out = siso_conv(ctx, p.ciphers[0], k, p.layout);
    const std::uint64_t want = pattern == KernelPattern::kRegular ? 8 : 4;
    o.detail += std::string(to_string(pattern)) + " " + std::to_string(ctx.ledger().in_rot) + " in-Rot; ";
    require(o, ctx.ledger().in_rot == want, std::string(to_string(pattern)) + " in_rot");
    KernelMatrix<Exact> km(1, 1, 3, 3, pattern, MatrixPattern::dense(), kGridBits);
    km.set_entry(0, 0, k);
    const auto got = unpack(std::vector{out}, p.layout);
    for (int ch = 0; ch < 2; ++ch) {
      auto one = FeatureTensor<Exact>::zeros(1, 56, 56, t.scale_bits);
      one.channel(0) = t.channel(ch);
      auto g = FeatureTensor<Exact>::zeros(1, 56, 56, got.scale_bits);
      g.channel(0) = got.channel(ch);
      require(o, oracle::equal(oracle::conv(oracle::from_tensor(one), km), g), "siso values");
    }
  }
  const double ratio = tapset_ratio(CalibrationTable::paper_defaults(), 64);
  o.detail += "tapset ratio " + io::fixed(ratio, 4);
  require(o, std::fabs(ratio - 23.94 / 128.85) < 1e-12, "ratio value");
  require(o, std::fabs(ratio * 100.0 - 19.0) <= 0.5, "ratio within half a point of 19%");
  return o;
}

// ------------------------------------------------------------------ 5

Outcome training_form_equivalence(std::uint64_t seed, int) {
  Outcome o;
  Rng rng(seed);
  double worst_float = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int c_n = 1 << rng.pick(1, 3);
    const int D = c_n * rng.pick(1, 4);
    const int e = rng.pick(1, 6);
    const int hw = rng.pick(3, 6);
    const auto b = random_block<Exact>(rng, D, e, c_n);
    const auto x = random_tensor<Exact>(rng, D, hw, hw);
    const auto tf = to_training_form(b);
    const std::string tag = "trial " + std::to_string(trial);
    require(o, exactly_equal(eval_plain(tf, x), eval_plain(b, x)), tag + " exact");
    require(o, to_inference_form(tf) == b, tag + " roundtrip");

    const auto bf = random_block<float>(rng, D, e, c_n);
    const auto xf = random_tensor<float>(rng, D, hw, hw);
    const double d = max_abs_diff(eval_plain(to_training_form(bf), xf), eval_plain(bf, xf));
    worst_float = std::max(worst_float, d);
    require(o, d < 1e-5, tag + " float");
  }
  std::ostringstream s;
  s << "100 blocks exact-equal and weight-identical, float max diff " << std::scientific
    << std::setprecision(2) << worst_float;
  o.detail += s.str();
  return o;
}

// ------------------------------------------------------------------ 6

Outcome schemes_agree(std::uint64_t seed, int threads) {
  Outcome o;
  Rng rng(seed);
  for (int trial = 0; trial < 50; ++trial) {
    const int c_n = 1 << rng.pick(1, 3);
    const int ci = rng.pick(1, 24), co = rng.pick(1, 24);
    const int k = rng.pick(0, 1) ? 3 : 1;
    const LayerSpec l{ci, co, k, k, 4, 4, 1, false, rng.pick(0, 1) == 1 && k == 3, ""};
    const auto km = random_kernel_matrix<Exact>(rng, l, c_n);
    const auto x = random_tensor<Exact>(rng, ci, 4, 4);
    SimContext<Exact> a(slots_for(c_n, 4)), b(slots_for(c_n, 4));
    const auto pa = mimo_conv(a, pack(a, x), km, MimoScheme::kOutputRotation, {threads});
    const auto pb = mimo_conv(b, pack(b, x), km, MimoScheme::kInputRotation, {threads});
    require(o, exactly_equal(unpack(pa.ciphers, pa.layout), unpack(pb.ciphers, pb.layout)),
            "trial " + std::to_string(trial));
  }
  o.detail += "50 dense instances identical under both schemes";
  return o;
}

// ------------------------------------------------------------------ 7

Outcome cpas_behaviour(std::uint64_t, int) {
  Outcome o;
  const double ratio = sensitivity_slope(2) / sensitivity_slope(512);
  require(o, ratio == 256.0, "slope ratio");
  for (int c_n : {2, 8, 32, 128, 512})
    require(o, sensitivity_slope(c_n) == 4.0 / c_n &&
                   sensitivity_coefficient(5, c_n) - sensitivity_coefficient(4, c_n) == 4.0 / c_n,
            "slope at c_n=" + std::to_string(c_n));
  const CpasSchedule s = cpas_schedule({{56, 32}, {28, 64}, {14, 128}, {7, 256}}, kDefaultSlotCount);
  std::ostringstream d;
  d << "slope ratio " << ratio << ", schedule e =";
  for (int e : s.e) d << ' ' << e;
  o.detail += d.str();
  require(o, std::is_sorted(s.e.begin(), s.e.end()), "non-decreasing e");
  require(o, s.c_n.back() == 128 && s.e.back() == 8, "e = 8 at c_n = 128");
  return o;
}

// ------------------------------------------------------------------ 8

Outcome capacity_ladder(std::uint64_t, int) {
  Outcome o;
  std::ostringstream d;
  const std::vector<std::pair<int, int>> want = {{56, 2}, {28, 8}, {14, 32}, {7, 128}};
  for (auto [hw, cn] : want) {
    const int got = channel_capacity(8192, hw, hw);
    d << hw << "->" << got << ' ';
    require(o, got == cn, std::to_string(hw));
  }
  o.detail += d.str();
  return o;
}

// ------------------------------------------------------------------ 9

Outcome efficiency_reversal(std::uint64_t, int) {
  Outcome o;
  const auto calib = CalibrationTable::paper_defaults();
  const LayerSpec pointwise{256, 256, 1, 1, 7, 7, 1, false, false, "pointwise"};
  const LayerSpec full{256, 256, 3, 3, 7, 7, 1, false, false, "full"};
  CostReport a, b;
  for (int i = 0; i < 9; ++i) a.add(cost_layer(pointwise, 128, 1, calib));
  b.add(cost_layer(full, 128, 1, calib));
  const Comparison c = compare_networks({{"nine_1x1", a}, {"one_3x3", b}});
  o.detail += "nine_1x1 flops " + std::to_string(a.flops) + " ms " + io::fixed(a.est_ms, 2) + " vs one_3x3 flops " +
              std::to_string(b.flops) + " ms " + io::fixed(b.est_ms, 2);
  require(o, a.flops < b.flops && a.est_ms > b.est_ms, "constructed pair");
  require(o, c.reversals.size() == 1 && c.reversals[0].cheaper_flops == "nine_1x1", "reversal flagged");
  return o;
}

std::vector<Criterion> criteria() {
  return {
      {1, "block rotation counts (128,32) (128,112) (96,248) (64,508)", 60, block_counts_reproduced},
      {2, "exRot-free kernel matrices need no ex-Rot", 120, exrot_free_needs_no_ex_rot},
      {3, "closed forms equal simulated ledgers", 600, formulas_equal_ledgers},
      {4, "SISO in-Rot counts and cross tap-set ratio", 600, siso_rotation_counts},
      {5, "training form equals inference form", 120, training_form_equivalence},
      {6, "output- and input-rotation MIMO agree", 600, schemes_agree},
      {7, "sensitivity slope and default scaling schedule", 600, cpas_behaviour},
      {8, "channel capacity ladder", 600, capacity_ladder},
      {9, "FLOPs and HE cost rank a pair differently", 600, efficiency_reversal},
  };
}

struct SuiteRun {
  std::vector<Outcome> outcomes;
  std::vector<double> seconds;
};

/// Runs criteria 1..9 and writes the deterministic reports into `dir`.
SuiteRun run_suite(const fs::path& dir, std::uint64_t seed, int threads) {
  fs::create_directories(dir);
  SuiteRun run;
  std::ostringstream summary;
  summary << "seed " << seed << '\n';
  for (const auto& c : criteria()) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(seed, threads);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail += std::string("exception: ") + e.what();
    }
    run.seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    summary << c.id << ' ' << (o.pass ? "pass" : "fail") << ' ' << o.detail << '\n';
    run.outcomes.push_back(std::move(o));
  }
  io::write_file(dir / "summary.txt", summary.str());

  const auto calib = CalibrationTable::paper_defaults();
  for (const char* name : {"imagenet", "tiny", "cifar"}) {
    const NetworkSpec n = plan_network(*presets::by_name(name));
    const CostReport r = report(n, calib);
    const std::string hash = io::fnv1a_hex(io::network_json(n) + io::calibration_json(calib));
    io::write_file(dir / (std::string(name) + ".csv"), io::report_csv(r));
    io::write_file(dir / (std::string(name) + ".json"), io::report_json(r, {"acceptance", hash, seed}));
  }
  return run;
}

bool same_bytes(const fs::path& a, const fs::path& b, std::string& diff) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(a)) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  std::size_t count_b = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(b)) ++count_b;
  if (count_b != names.size()) {
    diff = "file sets differ";
    return false;
  }
  for (const auto& n : names) {
    if (!fs::exists(b / n) || io::read_file(a / n) != io::read_file(b / n)) {
      diff = n;
      return false;
    }
  }
  diff = std::to_string(names.size()) + " files";
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string out = "acceptance";
  std::uint64_t seed = 20240611;
  int threads = 4;
  app.add_option("--out", out, "Directory for the two report runs");
  app.add_option("--seed", seed)->capture_default_str();
  app.add_option("--threads", threads, "Workers for the second run")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const fs::path root(out);
  fs::remove_all(root);
  const SuiteRun first = run_suite(root / "run1", seed, 1);
  const SuiteRun second = run_suite(root / "run2", seed, threads);

  bool all = true;
  const auto list = criteria();
  for (std::size_t i = 0; i < list.size(); ++i) {
    const Outcome& o = first.outcomes[i];
    const bool in_time = first.seconds[i] <= list[i].limit_s;
    const bool pass = o.pass && second.outcomes[i].pass && in_time;
    all &= pass;
    std::printf("%s  %2d  %s: %s (%.2fs%s)\n", pass ? "PASS" : "FAIL", list[i].id, list[i].name.c_str(),
                o.detail.c_str(), first.seconds[i], in_time ? "" : ", over the time limit");
  }
  std::string diff;
  const bool same = same_bytes(root / "run1", root / "run2", diff);
  all &= same;
  std::printf("%s  10  two runs produce byte-identical reports: %s\n", same ? "PASS" : "FAIL",
              same ? diff.c_str() : ("differs in " + diff).c_str());
  return all ? 0 : 1;
}
