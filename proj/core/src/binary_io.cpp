#include "ser/binary_io.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ser/error.h"

namespace ser::io {

namespace {

void put_bytes(std::ostream& os, std::uint64_t v, int n) {
  char buf[8];
  for (int i = 0; i < n; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf, n);
}

bool get_bytes(std::istream& is, std::uint64_t& v, int n, bool eof_ok) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), n);
  const auto got = is.gcount();
  if (got == 0 && eof_ok) return false;
  if (got != n) throw Error("truncated binary record");
  v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return true;
}

}  // namespace

void write_u32(std::ostream& os, std::uint32_t v) { put_bytes(os, v, 4); }
void write_u64(std::ostream& os, std::uint64_t v) { put_bytes(os, v, 8); }
void write_f32(std::ostream& os, float v) { put_bytes(os, std::bit_cast<std::uint32_t>(v), 4); }

void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

bool read_u32(std::istream& is, std::uint32_t& v) {
  std::uint64_t raw;
  if (!get_bytes(is, raw, 4, true)) return false;
  v = static_cast<std::uint32_t>(raw);
  return true;
}

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t raw;
  get_bytes(is, raw, 8, false);
  return raw;
}

float read_f32(std::istream& is) {
  std::uint64_t raw;
  get_bytes(is, raw, 4, false);
  return std::bit_cast<float>(static_cast<std::uint32_t>(raw));
}

std::string read_string(std::istream& is) {
  std::uint32_t n;
  if (!read_u32(is, n)) throw Error("truncated string");
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (static_cast<std::uint32_t>(is.gcount()) != n) throw Error("truncated string");
  return s;
}

void write_matrix_record(std::ostream& os, const MatrixRecord& rec) {
  if (rec.values.size() != static_cast<std::size_t>(rec.rows) * rec.cols) {
    throw Error("matrix record '" + rec.id + "' has inconsistent size");
  }
  write_string(os, rec.id);
  write_u32(os, rec.rows);
  write_u32(os, rec.cols);
  for (float v : rec.values) write_f32(os, v);
}

bool read_matrix_record(std::istream& is, MatrixRecord& rec) {
  std::uint32_t id_len;
  if (!read_u32(is, id_len)) return false;
  rec.id.assign(id_len, '\0');
  is.read(rec.id.data(), id_len);
  if (static_cast<std::uint32_t>(is.gcount()) != id_len) throw Error("truncated record id");
  if (!read_u32(is, rec.rows) || !read_u32(is, rec.cols)) throw Error("truncated record header");
  const std::size_t n = static_cast<std::size_t>(rec.rows) * rec.cols;
  rec.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) rec.values[i] = read_f32(is);
  return true;
}

std::vector<MatrixRecord> read_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<MatrixRecord> out;
  MatrixRecord rec;
  while (read_matrix_record(in, rec)) out.push_back(std::move(rec));
  return out;
}

void write_matrix_file(const std::filesystem::path& path, std::span<const MatrixRecord> records) {
  std::ostringstream os(std::ios::binary);
  for (const auto& rec : records) write_matrix_record(os, rec);
  write_file_atomic(path, os.str());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace ser::io
