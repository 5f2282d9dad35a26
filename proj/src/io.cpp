#include "stria/io.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace stria::io {

using nlohmann::json;

namespace {

constexpr std::array<char, 4> kTensorMagic{'S', 'T', 'R', 'T'};

void put_le(std::ostream& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(std::istream& in, int bytes, const std::string& source) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == EOF) throw ParseError(source, 0, "truncated tensor container");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

/// Line-oriented tokenizer that remembers where it is for diagnostics.
class Lines {
 public:
  Lines(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  /// Next non-blank line split into tokens, comments removed.
  bool next(std::vector<std::string>& tokens) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream ss(line);
      tokens.clear();
      for (std::string t; ss >> t;) tokens.push_back(t);
      if (!tokens.empty()) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, line_no_, what); }

  long long integer(const std::string& tok) const {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(tok, &used);
    } catch (const std::exception&) {
      fail("expected an integer, got '" + tok + "'");
    }
    if (used != tok.size()) fail("expected an integer, got '" + tok + "'");
    return v;
  }

  int line() const { return line_no_; }
  const std::string& source() const { return source_; }

 private:
  std::istream& in_;
  std::string source_;
  int line_no_ = 0;
};

KernelPattern parse_pattern(const Lines& l, const std::string& tok) {
  if (tok == "regular") return KernelPattern::kRegular;
  if (tok == "cross") return KernelPattern::kCross;
  l.fail("unknown kernel pattern '" + tok + "'");
}

int line_of_offset(const std::string& text, std::size_t offset) {
  int line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) line += text[i] == '\n';
  return line;
}

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source, line_of_offset(text, e.byte), e.what());
  }
}

template <typename T>
T field(const json& j, const char* key, const std::string& source) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(source, 0, std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback, const std::string& source) {
  if (!j.contains(key)) return fallback;
  return field<T>(j, key, source);
}

LayerSpec layer_from_json(const json& j, const std::string& source) {
  if (!j.is_object()) throw ParseError(source, 0, "layer must be an object");
  LayerSpec l;
  l.c_i = field<int>(j, "c_i", source);
  l.c_o = field<int>(j, "c_o", source);
  const int k = field_or<int>(j, "k", 1, source);
  l.k_w = field_or<int>(j, "k_w", k, source);
  l.k_h = field_or<int>(j, "k_h", k, source);
  const int hw = field_or<int>(j, "hw", 1, source);
  l.width = field_or<int>(j, "width", hw, source);
  l.height = field_or<int>(j, "height", hw, source);
  l.stride = field_or<int>(j, "stride", 1, source);
  l.exrot_free = field_or<bool>(j, "exrot_free", false, source);
  l.cross = field_or<bool>(j, "cross", false, source);
  l.name = field_or<std::string>(j, "name", "", source);
  try {
    l.validate();
  } catch (const ConfigError& e) {
    throw ParseError(source, 0, e.what());
  }
  return l;
}

json layer_to_json(const LayerSpec& l) {
  json j;
  j["name"] = l.name;
  j["c_i"] = l.c_i;
  j["c_o"] = l.c_o;
  j["k_w"] = l.k_w;
  j["k_h"] = l.k_h;
  j["width"] = l.width;
  j["height"] = l.height;
  j["stride"] = l.stride;
  j["exrot_free"] = l.exrot_free;
  j["cross"] = l.cross;
  return j;
}

std::map<int, double> table_from_json(const json& j, const char* key, const std::string& source) {
  std::map<int, double> m;
  if (!j.contains(key)) return m;
  const json& t = j.at(key);
  if (!t.is_object()) throw ParseError(source, 0, std::string(key) + " must map keys to costs");
  for (const auto& [k, v] : t.items()) {
    int key_value = 0;
    try {
      std::size_t used = 0;
      key_value = std::stoi(k, &used);
      if (used != k.size()) throw std::invalid_argument(k);
    } catch (const std::exception&) {
      throw ParseError(source, 0, std::string(key) + ": key '" + k + "' is not an integer");
    }
    if (!v.is_number()) throw ParseError(source, 0, std::string(key) + "[" + k + "] is not a number");
    m[key_value] = v.get<double>();
  }
  return m;
}

json table_to_json(const std::map<int, double>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[std::to_string(k)] = v;
  return j;
}

}  // namespace

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

void write_tensor(const fs::path& path, const FeatureTensor<Exact>& t) {
  if (!t.consistent()) throw GeometryError("tensor shape does not match its values");
  std::ostringstream out(std::ios::binary);
  out.write(kTensorMagic.data(), kTensorMagic.size());
  put_le(out, static_cast<std::uint32_t>(t.channels), 4);
  put_le(out, static_cast<std::uint32_t>(t.width), 4);
  put_le(out, static_cast<std::uint32_t>(t.height), 4);
  put_le(out, static_cast<std::uint32_t>(t.scale_bits), 4);
  for (Eigen::Index i = 0; i < t.values.size(); ++i) put_le(out, static_cast<std::uint64_t>(t.values(i)), 8);
  write_file(path, out.str());
}

FeatureTensor<Exact> read_tensor(const fs::path& path) {
  const std::string source = path.string();
  std::istringstream in(read_file(path), std::ios::binary);
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kTensorMagic) throw ParseError(source, 0, "not a tensor container");
  const auto c = static_cast<std::int32_t>(get_le(in, 4, source));
  const auto w = static_cast<std::int32_t>(get_le(in, 4, source));
  const auto h = static_cast<std::int32_t>(get_le(in, 4, source));
  const auto scale = static_cast<std::int32_t>(get_le(in, 4, source));
  if (c < 1 || w < 1 || h < 1 || scale < 0 || scale > ScalarTraits<Exact>::kMaxScaleBits)
    throw ParseError(source, 0, "invalid tensor header");
  auto t = FeatureTensor<Exact>::zeros(c, h, w, scale);
  for (Eigen::Index i = 0; i < t.values.size(); ++i)
    t.values(i) = static_cast<std::int64_t>(get_le(in, 8, source));
  if (in.peek() != EOF) throw ParseError(source, 0, "trailing bytes after tensor data");
  return t;
}

FeatureTensor<Exact> read_tensor_csv(std::istream& in, const std::string& source, int default_scale) {
  std::string line;
  int line_no = 0;
  auto next = [&](std::vector<std::string>& cells) {
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      cells.clear();
      std::istringstream ss(line);
      for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
      return true;
    }
    return false;
  };
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (s.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ParseError(source, line_no, "not a number: '" + s + "'");
    }
  };
  std::vector<std::string> cells;
  if (!next(cells)) throw ParseError(source, line_no, "empty CSV tensor");
  if (cells.size() < 3 || cells.size() > 4)
    throw ParseError(source, line_no, "header must be channels,height,width[,scale]");
  const int c = static_cast<int>(number(cells[0]));
  const int h = static_cast<int>(number(cells[1]));
  const int w = static_cast<int>(number(cells[2]));
  const int scale = cells.size() == 4 ? static_cast<int>(number(cells[3])) : default_scale;
  if (c < 1 || h < 1 || w < 1) throw ParseError(source, line_no, "dimensions must be positive");
  auto t = FeatureTensor<Exact>::zeros(c, h, w, scale);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y) {
      if (!next(cells)) throw ParseError(source, line_no, "missing rows");
      if (static_cast<int>(cells.size()) != w)
        throw ParseError(source, line_no, "expected " + std::to_string(w) + " values");
      for (int x = 0; x < w; ++x) t.at(ch, y, x) = encode_value<Exact>(number(cells[static_cast<std::size_t>(x)]), scale);
    }
  if (next(cells)) throw ParseError(source, line_no, "extra rows after the tensor");
  return t;
}

void write_kernel(std::ostream& out, const KernelSpec<Exact>& k) {
  out << "kernel " << to_string(k.pattern()) << ' ' << k.kh() << ' ' << k.kw() << " scale "
      << k.scale_bits() << '\n';
  for (int r = 0; r < k.kh(); ++r) {
    for (int c = 0; c < k.kw(); ++c) {
      if (c) out << ' ';
      if (k.present(r, c))
        out << k.at(r, c);
      else
        out << '.';
    }
    out << '\n';
  }
}

KernelSpec<Exact> read_kernel(std::istream& in, const std::string& source) {
  Lines lines(in, source);
  std::vector<std::string> tok;
  if (!lines.next(tok)) lines.fail("empty kernel file");
  if (tok.size() != 6 || tok[0] != "kernel" || tok[4] != "scale")
    lines.fail("header must be 'kernel <pattern> <k_h> <k_w> scale <bits>'");
  const KernelPattern pattern = parse_pattern(lines, tok[1]);
  const int kh = static_cast<int>(lines.integer(tok[2]));
  const int kw = static_cast<int>(lines.integer(tok[3]));
  const int scale = static_cast<int>(lines.integer(tok[5]));
  KernelSpec<Exact> k;
  try {
    k = KernelSpec<Exact>(kh, kw, pattern, scale);
  } catch (const Error& e) {
    lines.fail(e.what());
  }
  for (int r = 0; r < kh; ++r) {
    if (!lines.next(tok)) lines.fail("expected " + std::to_string(kh) + " weight rows");
    if (static_cast<int>(tok.size()) != kw) lines.fail("expected " + std::to_string(kw) + " weights");
    for (int c = 0; c < kw; ++c) {
      const std::string& t = tok[static_cast<std::size_t>(c)];
      if (!k.present(r, c)) {
        if (t != ".") lines.fail("position (" + std::to_string(r) + "," + std::to_string(c) + ") has no weight in a cross kernel");
        continue;
      }
      if (t == ".") lines.fail("missing weight at (" + std::to_string(r) + "," + std::to_string(c) + ")");
      k.set(r, c, lines.integer(t));
    }
  }
  if (lines.next(tok)) lines.fail("unexpected content after the kernel");
  return k;
}

void write_kernel_matrix(std::ostream& out, const KernelMatrix<Exact>& km) {
  const char* support = km.pattern().kind == SupportKind::kDense       ? "dense"
                        : km.pattern().kind == SupportKind::kExRotFree ? "exrot_free"
                                                                       : "custom";
  out << "kernel_matrix " << km.rows() << ' ' << km.cols() << ' ' << km.kh() << ' ' << km.kw() << ' '
      << to_string(km.kernel_pattern()) << ' ' << support << ' ' << km.pattern().c_n << " scale "
      << km.scale_bits() << '\n';
  for (const auto& [o, i] : km.support()) {
    out << "entry " << o << ' ' << i;
    const auto w = km.tap_weights(o, i);
    for (Eigen::Index t = 0; t < w.size(); ++t) out << ' ' << w(t);
    out << '\n';
  }
}

KernelMatrix<Exact> read_kernel_matrix(std::istream& in, const std::string& source) {
  Lines lines(in, source);
  std::vector<std::string> tok;
  if (!lines.next(tok)) lines.fail("empty kernel-matrix file");
  if (tok.size() != 10 || tok[0] != "kernel_matrix" || tok[8] != "scale")
    lines.fail("header must be 'kernel_matrix <c_o> <c_i> <k_h> <k_w> <pattern> <support> <c_n> scale <bits>'");
  const int c_o = static_cast<int>(lines.integer(tok[1]));
  const int c_i = static_cast<int>(lines.integer(tok[2]));
  const int kh = static_cast<int>(lines.integer(tok[3]));
  const int kw = static_cast<int>(lines.integer(tok[4]));
  const KernelPattern pattern = parse_pattern(lines, tok[5]);
  const std::string support = tok[6];
  const int c_n = static_cast<int>(lines.integer(tok[7]));
  const int scale = static_cast<int>(lines.integer(tok[9]));
  if (c_o < 1 || c_i < 1 || c_n < 1) lines.fail("matrix dimensions and c_n must be positive");
  if (support != "dense" && support != "exrot_free" && support != "custom")
    lines.fail("unknown support '" + support + "'");
  const int header_line = lines.line();

  struct Row {
    int line;
    int o;
    int i;
    std::vector<long long> w;
  };
  std::vector<Row> rows;
  const int taps = tap_count(kh, kw, pattern);
  while (lines.next(tok)) {
    if (tok[0] != "entry") lines.fail("expected 'entry <row> <col> weights...'");
    if (static_cast<int>(tok.size()) != 3 + taps)
      lines.fail("entry needs " + std::to_string(taps) + " weights");
    Row r{lines.line(), static_cast<int>(lines.integer(tok[1])), static_cast<int>(lines.integer(tok[2])), {}};
    if (r.o < 0 || r.i < 0 || r.o >= c_o || r.i >= c_i) lines.fail("entry index outside the matrix");
    if (support == "exrot_free" && !in_exrot_free_mask(r.o, r.i, c_n))
      lines.fail("entry (" + std::to_string(r.o) + "," + std::to_string(r.i) +
                 ") violates the exRot-free mask for c_n = " + std::to_string(c_n));
    for (int t = 0; t < taps; ++t) r.w.push_back(lines.integer(tok[static_cast<std::size_t>(3 + t)]));
    rows.push_back(std::move(r));
  }

  KernelMatrix<Exact> km;
  try {
    if (support == "custom") {
      std::vector<std::pair<int, int>> entries;
      for (const auto& r : rows) entries.emplace_back(r.o, r.i);
      km = KernelMatrix<Exact>::with_support(c_o, c_i, kh, kw, pattern, entries, scale);
    } else {
      const MatrixPattern mp = support == "dense" ? MatrixPattern::dense() : MatrixPattern::exrot_free(c_n);
      km = KernelMatrix<Exact>(c_o, c_i, kh, kw, pattern, mp, scale);
    }
  } catch (const Error& e) {
    throw ParseError(source, header_line, e.what());
  }
  for (const auto& r : rows) {
    auto w = km.tap_weights(r.o, r.i);
    for (int t = 0; t < taps; ++t) w(t) = r.w[static_cast<std::size_t>(t)];
  }
  return km;
}

void write_block(const fs::path& dir, const BlockSpec<Exact>& b) {
  fs::create_directories(dir);
  json m;
  m["D"] = b.D;
  m["e"] = b.e;
  m["c_n"] = b.c_n;
  m["kernel"] = b.kernel;
  m["residual"] = b.residual;
  m["layers"] = {"expand.km", "middle.km", "project.km"};
  write_file(dir / "manifest.json", m.dump(2) + "\n");
  const std::array<const KernelMatrix<Exact>*, 3> mats{&b.expand, &b.middle, &b.project};
  for (std::size_t i = 0; i < mats.size(); ++i) {
    std::ostringstream out;
    write_kernel_matrix(out, *mats[i]);
    write_file(dir / m["layers"][i].get<std::string>(), out.str());
  }
}

BlockSpec<Exact> read_block(const fs::path& dir) {
  const std::string manifest_path = (dir / "manifest.json").string();
  const json m = parse_json(read_file(dir / "manifest.json"), manifest_path);
  const int D = field<int>(m, "D", manifest_path);
  const int e = field<int>(m, "e", manifest_path);
  const int c_n = field<int>(m, "c_n", manifest_path);
  const int kernel = field_or<int>(m, "kernel", 3, manifest_path);
  const auto names = field<std::vector<std::string>>(m, "layers", manifest_path);
  if (names.size() != 3) throw ParseError(manifest_path, 0, "a block lists exactly three layers");
  std::array<KernelMatrix<Exact>, 3> mats;
  for (std::size_t i = 0; i < 3; ++i) {
    const fs::path p = dir / names[i];
    std::istringstream in(read_file(p));
    mats[i] = read_kernel_matrix(in, p.string());
  }
  BlockSpec<Exact> b;
  try {
    b = build_striablock<Exact>(D, e, c_n, mats[1].scale_bits(), kernel);
  } catch (const Error& err) {
    throw ParseError(manifest_path, 0, err.what());
  }
  b.residual = field_or<bool>(m, "residual", true, manifest_path);
  b.expand = std::move(mats[0]);
  b.middle = std::move(mats[1]);
  b.project = std::move(mats[2]);
  if (!b.middle.within_exrot_free(c_n))
    throw ParseError((dir / names[1]).string(), 0, "middle layer has entries outside the exRot-free mask");
  if (!b.valid()) throw ParseError(manifest_path, 0, "layer shapes do not form a StriaBlock");
  return b;
}

NetworkSpec parse_network(const std::string& text, const std::string& source) {
  const json j = parse_json(text, source);
  if (!j.is_object()) throw ParseError(source, 1, "network spec must be an object");
  NetworkSpec n;
  n.name = field_or<std::string>(j, "name", "network", source);
  n.input = field_or<int>(j, "input", 224, source);
  n.input_channels = field_or<int>(j, "input_channels", 3, source);
  n.slots = field_or<std::size_t>(j, "slots", kDefaultSlotCount, source);
  n.inferred = field_or<bool>(j, "inferred", false, source);
  if (!j.contains("stages") || !j.at("stages").is_array())
    throw ParseError(source, 0, "network spec needs a 'stages' array");
  for (const auto& s : j.at("stages")) {
    StageSpec st;
    st.hw = field<int>(s, "hw", source);
    st.D = field<int>(s, "d", source);
    st.blocks = field<int>(s, "blocks", source);
    if (s.contains("e") && !s.at("e").is_null()) st.e = field<int>(s, "e", source);
    st.c_n = field_or<int>(s, "c_n", 0, source);
    if (st.hw < 1 || st.D < 1 || st.blocks < 0 || (st.e && *st.e < 1))
      throw ParseError(source, 0, "stage fields must be positive");
    n.stages.push_back(st);
  }
  if (j.contains("stem") && !j.at("stem").is_null()) n.stem = layer_from_json(j.at("stem"), source);
  if (j.contains("head") && !j.at("head").is_null()) n.head = layer_from_json(j.at("head"), source);
  return n;
}

NetworkSpec read_network(const fs::path& path) { return parse_network(read_file(path), path.string()); }

std::string network_json(const NetworkSpec& n) {
  json j;
  j["name"] = n.name;
  j["input"] = n.input;
  j["input_channels"] = n.input_channels;
  j["slots"] = n.slots;
  j["inferred"] = n.inferred;
  j["stages"] = json::array();
  for (const auto& s : n.stages) {
    json st;
    st["hw"] = s.hw;
    st["d"] = s.D;
    st["blocks"] = s.blocks;
    if (s.e) st["e"] = *s.e;
    if (s.c_n) st["c_n"] = s.c_n;
    j["stages"].push_back(st);
  }
  j["stem"] = n.stem ? layer_to_json(*n.stem) : json();
  j["head"] = n.head ? layer_to_json(*n.head) : json();
  return j.dump(2) + "\n";
}

LayerSpec parse_layer_json(const std::string& text, const std::string& source) {
  return layer_from_json(parse_json(text, source), source);
}

CalibrationTable parse_calibration(const std::string& text, const std::string& source) {
  const json j = parse_json(text, source);
  if (!j.is_object()) throw ParseError(source, 1, "calibration must be an object");
  const CalibrationTable defaults = CalibrationTable::paper_defaults();
  CalibrationTable c;
  c.in_rot_ms = table_from_json(j, "in_rot_ms", source);
  c.ex_rot_ms = table_from_json(j, "ex_rot_ms", source);
  c.cross_tapset_ms = table_from_json(j, "cross_tapset_ms", source);
  c.regular_tapset_ms = table_from_json(j, "regular_tapset_ms", source);
  if (c.cross_tapset_ms.empty()) c.cross_tapset_ms = defaults.cross_tapset_ms;
  if (c.regular_tapset_ms.empty()) c.regular_tapset_ms = defaults.regular_tapset_ms;
  c.mult_ms = field_or<double>(j, "mult_ms", defaults.mult_ms, source);
  c.add_ms = field_or<double>(j, "add_ms", defaults.add_ms, source);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ParseError(source, 0, e.what());
  }
  return c;
}

CalibrationTable read_calibration(const fs::path& path) {
  return parse_calibration(read_file(path), path.string());
}

std::string calibration_json(const CalibrationTable& c) {
  json j;
  j["in_rot_ms"] = table_to_json(c.in_rot_ms);
  j["ex_rot_ms"] = table_to_json(c.ex_rot_ms);
  j["cross_tapset_ms"] = table_to_json(c.cross_tapset_ms);
  j["regular_tapset_ms"] = table_to_json(c.regular_tapset_ms);
  j["mult_ms"] = c.mult_ms;
  j["add_ms"] = c.add_ms;
  return j.dump(2) + "\n";
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string report_csv(const CostReport& r) {
  std::ostringstream out;
  out << "stage,layer,c_i,c_o,k_w,k_h,width,height,stride,exrot_free,cross,c_n,tiles,scheme,"
         "dominance,in_rot,ex_rot,mult,add,flops,est_ms\n";
  for (const auto& l : r.layers) {
    const LayerSpec& s = l.layer;
    out << l.stage << ',' << s.name << ',' << s.c_i << ',' << s.c_o << ',' << s.k_w << ',' << s.k_h
        << ',' << s.width << ',' << s.height << ',' << s.stride << ',' << s.exrot_free << ','
        << s.cross << ',' << l.c_n << ',' << l.tiles << ',' << to_string(l.scheme) << ','
        << to_string(l.dominance.tag) << ',' << l.counts.in_rot << ',' << l.counts.ex_rot << ','
        << l.counts.mult << ',' << l.counts.add << ',' << l.flops.exact << ',' << fixed(l.est_ms)
        << '\n';
  }
  return out.str();
}

std::string report_json(const CostReport& r, const ReportMeta& meta) {
  json j;
  j["tool"] = "stria";
  j["version"] = STRIA_VERSION;
  j["command"] = meta.command;
  j["config_hash"] = meta.config_hash;
  j["seed"] = meta.seed;
  j["layers"] = r.layers.size();
  j["in_rot"] = r.total.in_rot;
  j["ex_rot"] = r.total.ex_rot;
  j["ex_rot_tap"] = r.total.ex_rot_tap;
  j["mult"] = r.total.mult;
  j["add"] = r.total.add;
  j["flops"] = r.flops;
  j["flops_approx"] = r.flops_approx;
  j["est_ms"] = fixed(r.est_ms);
  j["calibration_clamped"] = r.clamped;
  return j.dump(2) + "\n";
}

}  // namespace stria::io
