#pragma once

// Reading and writing of representation, kernel and distance matrices, plus
// the JSON layer manifest.
//
// Binary layout ("RMX1"), all integers and floats little-endian:
//
//   offset  size        field
//   0       4           magic "RMX1"
//   4       4           kind (u32: 0 representation, 1 kernel, 2 distance)
//   8       4           n_rows (u32)
//   12      4           n_cols (u32)
//   16      8*r*c       payload, row-major IEEE-754 binary64
//   ...                 optional label block: u32 count (= n_rows), then per
//                       label a u32 byte length followed by UTF-8 bytes
//
// CSV holds one matrix row per line with values printed to 17 significant
// digits. Kernel and distance CSVs may carry a first row of stimulus or layer
// labels; it is detected by the first field not parsing as a number.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "repmetric/types.hpp"

namespace repmetric {

enum class MatrixKind : std::uint32_t { representation = 0, kernel = 1, distance = 2 };

std::string_view to_string(MatrixKind kind);
MatrixKind parse_matrix_kind(std::string_view text);

struct LabeledMatrix {
  Matrix values;
  Labels labels;  // empty, or one per row
  MatrixKind kind = MatrixKind::representation;
};

enum class FileFormat { binary, csv };

/// `.csv` (any case) selects CSV; everything else is binary.
FileFormat format_for_path(const std::filesystem::path& path);

/// Throws ValidationError if `m` violates the invariants of its kind.
void validate_matrix(const LabeledMatrix& m);

std::vector<std::byte> encode_binary(const LabeledMatrix& m);
LabeledMatrix decode_binary(std::span<const std::byte> bytes, MatrixKind expected);

/// `header` is honoured only for kernel and distance matrices with labels.
std::string encode_csv(const LabeledMatrix& m, bool header = true);
LabeledMatrix decode_csv(std::string_view text, MatrixKind expected);

LabeledMatrix read_matrix(const std::filesystem::path& path, MatrixKind expected);
void write_matrix(const LabeledMatrix& m, const std::filesystem::path& path,
                  std::optional<FileFormat> format = std::nullopt);

struct ManifestEntry {
  std::string name;
  std::filesystem::path path;  // relative paths resolve against the manifest directory
  MatrixKind kind = MatrixKind::kernel;
};

struct LayerManifest {
  std::vector<ManifestEntry> entries;
  std::optional<std::uint64_t> seed;
  std::optional<double> a;
  std::optional<double> b;
  std::optional<std::size_t> n_samples;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const ManifestEntry& e) const;
};

LayerManifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir = {});
std::string dump_manifest(const LayerManifest& manifest);
LayerManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const LayerManifest& manifest, const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace repmetric
