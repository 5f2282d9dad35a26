#pragma once

// File formats. Weights and tensors are stored as raw fixed-point integers
// together with their scale, so every round trip is lossless.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "stria/cost_model.hpp"
#include "stria/kernel_matrix.hpp"
#include "stria/packing.hpp"
#include "stria/planner.hpp"
#include "stria/stria_block.hpp"

namespace stria::io {

namespace fs = std::filesystem;

// Tensor container: "STRT", then c, W, H, scale as little-endian int32, then
// c*H*W little-endian int64 values (channel-major, row-major planes).
void write_tensor(const fs::path& path, const FeatureTensor<Exact>& t);
FeatureTensor<Exact> read_tensor(const fs::path& path);

/// Small CSV tensors: first line "channels,height,width[,scale]", then one
/// line of `width` real values per plane row. '#' starts a comment.
FeatureTensor<Exact> read_tensor_csv(std::istream& in, const std::string& source = "<csv>",
                                     int default_scale = 12);

// Kernel text: "kernel <regular|cross> <k_h> <k_w> scale <bits>" followed by
// k_h rows of k_w raw integers; '.' marks the positions a cross kernel lacks.
void write_kernel(std::ostream& out, const KernelSpec<Exact>& k);
KernelSpec<Exact> read_kernel(std::istream& in, const std::string& source = "<kernel>");

// Kernel matrix: "kernel_matrix <c_o> <c_i> <k_h> <k_w> <regular|cross>
// <dense|exrot_free|custom> <c_n> scale <bits>", then one line per present
// entry: "entry <row> <col> w..." with the weights in backbone order.
void write_kernel_matrix(std::ostream& out, const KernelMatrix<Exact>& km);
KernelMatrix<Exact> read_kernel_matrix(std::istream& in, const std::string& source = "<matrix>");

/// Block weights: manifest.json plus one kernel-matrix file per layer.
void write_block(const fs::path& dir, const BlockSpec<Exact>& b);
BlockSpec<Exact> read_block(const fs::path& dir);

NetworkSpec parse_network(const std::string& text, const std::string& source = "<network>");
NetworkSpec read_network(const fs::path& path);
std::string network_json(const NetworkSpec& net);

LayerSpec parse_layer_json(const std::string& text, const std::string& source = "<layer>");

CalibrationTable parse_calibration(const std::string& text, const std::string& source = "<calibration>");
CalibrationTable read_calibration(const fs::path& path);
std::string calibration_json(const CalibrationTable& calib);

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, const std::string& content);

/// 64-bit FNV-1a, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& data);

struct ReportMeta {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
};

std::string report_csv(const CostReport& r);
std::string report_json(const CostReport& r, const ReportMeta& meta);

/// Fixed six-decimal rendering used by every report.
std::string fixed(double v, int digits = 6);

}  // namespace stria::io
