#include "repmetric/matrix_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "repmetric/errors.hpp"

namespace repmetric {
namespace {

constexpr std::array<char, 4> kMagic{'R', 'M', 'X', '1'};
constexpr std::size_t kHeaderBytes = 16;

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::vector<std::byte>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::byte>((bits >> (8 * i)) & 0xffu));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::to_integer<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64() {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::to_integer<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }

  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s(n, '\0');
    std::memcpy(s.data(), bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw ValidationError(std::string("truncated matrix file: ") + what);
  }

 private:
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::optional<double> parse_double(std::string_view field) {
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) return std::nullopt;
  return v;
}

void append_double(std::string& out, double v) {
  std::array<char, 40> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  out.append(buf.data(), res.ptr);
}

void check_expected_kind(MatrixKind actual, MatrixKind expected) {
  if (actual != expected) {
    throw ValidationError("matrix kind mismatch: file holds " + std::string(to_string(actual)) +
                          ", expected " + std::string(to_string(expected)));
  }
}

}  // namespace

std::string_view to_string(MatrixKind kind) {
  switch (kind) {
    case MatrixKind::representation: return "representation";
    case MatrixKind::kernel: return "kernel";
    case MatrixKind::distance: return "distance";
  }
  return "unknown";
}

MatrixKind parse_matrix_kind(std::string_view text) {
  if (text == "representation") return MatrixKind::representation;
  if (text == "kernel") return MatrixKind::kernel;
  if (text == "distance") return MatrixKind::distance;
  throw ValidationError("unknown matrix kind '" + std::string(text) + "'");
}

FileFormat format_for_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv" ? FileFormat::csv : FileFormat::binary;
}

void validate_matrix(const LabeledMatrix& m) {
  const auto rows = m.values.rows();
  const auto cols = m.values.cols();
  if (rows == 0 || cols == 0) throw ValidationError("matrix is empty");
  if (!m.labels.empty() && static_cast<Eigen::Index>(m.labels.size()) != rows) {
    throw ValidationError("label count " + std::to_string(m.labels.size()) +
                          " does not match row count " + std::to_string(rows));
  }
  if (!m.values.allFinite()) throw ValidationError("matrix contains non-finite values");
  if (m.kind == MatrixKind::kernel && rows != cols) throw ValidationError("kernel must be square");
  if (m.kind == MatrixKind::distance) {
    if (rows != cols) throw ValidationError("distance matrix must be square");
    if ((m.values.array() < 0.0).any()) throw ValidationError("distances must be nonnegative");
  }
}

std::vector<std::byte> encode_binary(const LabeledMatrix& m) {
  validate_matrix(m);
  const auto rows = static_cast<std::uint64_t>(m.values.rows());
  const auto cols = static_cast<std::uint64_t>(m.values.cols());
  if (rows > UINT32_MAX || cols > UINT32_MAX) throw ValidationError("matrix too large for RMX1");

  std::vector<std::byte> out;
  out.reserve(kHeaderBytes + rows * cols * 8);
  for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
  put_u32(out, static_cast<std::uint32_t>(m.kind));
  put_u32(out, static_cast<std::uint32_t>(rows));
  put_u32(out, static_cast<std::uint32_t>(cols));
  for (Eigen::Index i = 0; i < m.values.rows(); ++i)
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) put_f64(out, m.values(i, j));

  if (!m.labels.empty()) {
    put_u32(out, static_cast<std::uint32_t>(m.labels.size()));
    for (const auto& label : m.labels) {
      put_u32(out, static_cast<std::uint32_t>(label.size()));
      for (char c : label) out.push_back(static_cast<std::byte>(c));
    }
  }
  return out;
}

LabeledMatrix decode_binary(std::span<const std::byte> bytes, MatrixKind expected) {
  ByteReader in(bytes);
  in.need(kHeaderBytes, "header");
  const auto magic = in.text(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) {
    throw ValidationError("malformed header: bad magic");
  }
  const auto raw_kind = in.u32("kind");
  if (raw_kind > 2) throw ValidationError("malformed header: unknown kind " + std::to_string(raw_kind));
  const auto kind = static_cast<MatrixKind>(raw_kind);
  const std::uint64_t rows = in.u32("n_rows");
  const std::uint64_t cols = in.u32("n_cols");
  if (in.remaining() < rows * cols * 8) {
    throw ValidationError("size mismatch: header declares " + std::to_string(rows) + "x" +
                          std::to_string(cols) + " but payload is " + std::to_string(in.remaining()) +
                          " bytes");
  }

  LabeledMatrix m;
  m.kind = kind;
  m.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.values.rows(); ++i)
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) m.values(i, j) = in.f64();

  if (in.remaining() > 0) {
    const auto count = in.u32("label count");
    if (count != rows) throw ValidationError("size mismatch: label block count differs from n_rows");
    m.labels.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      const auto len = in.u32("label length");
      m.labels.push_back(in.text(len, "label"));
    }
    if (in.remaining() != 0) throw ValidationError("size mismatch: trailing bytes after label block");
  }

  validate_matrix(m);
  check_expected_kind(m.kind, expected);
  return m;
}

std::string encode_csv(const LabeledMatrix& m, bool header) {
  validate_matrix(m);
  std::string out;
  const bool with_header = header && !m.labels.empty() && m.kind != MatrixKind::representation;
  if (with_header) {
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
      if (m.labels[i].find_first_of(",\n\r") != std::string::npos) {
        throw ValidationError("label '" + m.labels[i] + "' cannot be written to CSV");
      }
      if (i) out += ',';
      out += m.labels[i];
    }
    out += '\n';
  }
  for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
      if (j) out += ',';
      append_double(out, m.values(i, j));
    }
    out += '\n';
  }
  return out;
}

LabeledMatrix decode_csv(std::string_view text, MatrixKind expected) {
  std::vector<std::vector<std::string_view>> rows;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (trim(line).empty()) continue;
    rows.push_back(split_fields(line));
  }
  if (rows.empty()) throw ValidationError("matrix is empty");

  LabeledMatrix m;
  m.kind = expected;
  if (!parse_double(rows.front().front())) {
    if (expected == MatrixKind::representation) {
      throw ValidationError("malformed CSV: representation files take no header row");
    }
    for (auto f : rows.front()) m.labels.emplace_back(f);
    rows.erase(rows.begin());
    if (rows.empty()) throw ValidationError("matrix is empty");
  }

  const auto cols = rows.front().size();
  m.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) {
      throw ValidationError("size mismatch: CSV row " + std::to_string(i + 1) + " has " +
                            std::to_string(rows[i].size()) + " fields, expected " + std::to_string(cols));
    }
    for (std::size_t j = 0; j < cols; ++j) {
      const auto v = parse_double(rows[i][j]);
      if (!v) throw ValidationError("malformed CSV value '" + std::string(rows[i][j]) + "'");
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = *v;
    }
  }
  validate_matrix(m);
  return m;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw ValidationError("write to '" + path.string() + "' failed");
}

LabeledMatrix read_matrix(const std::filesystem::path& path, MatrixKind expected) {
  const auto contents = read_file(path);
  try {
    if (format_for_path(path) == FileFormat::csv) return decode_csv(contents, expected);
    return decode_binary(std::as_bytes(std::span(contents.data(), contents.size())), expected);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_matrix(const LabeledMatrix& m, const std::filesystem::path& path, std::optional<FileFormat> format) {
  const auto fmt = format.value_or(format_for_path(path));
  if (fmt == FileFormat::csv) {
    write_file(path, encode_csv(m));
  } else {
    const auto bytes = encode_binary(m);
    write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  }
}

std::filesystem::path LayerManifest::resolve(const ManifestEntry& e) const {
  if (e.path.is_absolute() || base_dir.empty()) return e.path;
  return base_dir / e.path;
}

LayerManifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir) {
  using nlohmann::json;
  LayerManifest manifest;
  manifest.base_dir = base_dir;
  try {
    const auto doc = json::parse(json_text);
    if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array()) {
      throw ValidationError("manifest must be an object with an \"entries\" list");
    }
    std::set<std::string> seen;
    for (const auto& item : doc["entries"]) {
      ManifestEntry e;
      e.name = item.at("name").get<std::string>();
      e.path = item.at("path").get<std::string>();
      e.kind = item.contains("kind") ? parse_matrix_kind(item["kind"].get<std::string>()) : MatrixKind::kernel;
      if (e.kind == MatrixKind::distance) throw ValidationError("manifest entry '" + e.name + "' cannot be a distance matrix");
      if (!seen.insert(e.name).second) throw ValidationError("duplicate manifest entry name '" + e.name + "'");
      manifest.entries.push_back(std::move(e));
    }
    if (doc.contains("seed")) manifest.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("a")) manifest.a = doc["a"].get<double>();
    if (doc.contains("b")) manifest.b = doc["b"].get<double>();
    if (doc.contains("n_samples")) manifest.n_samples = doc["n_samples"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
  return manifest;
}

std::string dump_manifest(const LayerManifest& manifest) {
  nlohmann::ordered_json doc;
  doc["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : manifest.entries) {
    doc["entries"].push_back({{"name", e.name}, {"path", e.path.generic_string()}, {"kind", to_string(e.kind)}});
  }
  if (manifest.seed) doc["seed"] = *manifest.seed;
  if (manifest.a) doc["a"] = *manifest.a;
  if (manifest.b) doc["b"] = *manifest.b;
  if (manifest.n_samples) doc["n_samples"] = *manifest.n_samples;
  return doc.dump(2) + "\n";
}

LayerManifest read_manifest(const std::filesystem::path& path) {
  try {
    return parse_manifest(read_file(path), path.parent_path());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_manifest(const LayerManifest& manifest, const std::filesystem::path& path) {
  write_file(path, dump_manifest(manifest));
}

}  // namespace repmetric
