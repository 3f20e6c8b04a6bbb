#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ser::io {

// Little-endian primitives, independent of host byte order.
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f32(std::ostream& os, float v);
void write_string(std::ostream& os, const std::string& s);

/// Each reader returns false on clean EOF before the first byte and throws
/// ser::Error on a truncated value.
bool read_u32(std::istream& is, std::uint32_t& v);
std::uint64_t read_u64(std::istream& is);
float read_f32(std::istream& is);
std::string read_string(std::istream& is);

/// Row-major float matrix tagged with an utterance id. The on-disk layout is
/// {u32 id_len, id bytes, u32 rows, u32 cols, rows*cols f32}, all
/// little-endian. Both the feature cache and the embedding file use it.
struct MatrixRecord {
  std::string id;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> values;
};

void write_matrix_record(std::ostream& os, const MatrixRecord& rec);
/// Returns false at end of stream.
bool read_matrix_record(std::istream& is, MatrixRecord& rec);

std::vector<MatrixRecord> read_matrix_file(const std::filesystem::path& path);
void write_matrix_file(const std::filesystem::path& path, std::span<const MatrixRecord> records);

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace ser::io
