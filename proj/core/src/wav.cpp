#include "ser/wav.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <sstream>

#include "ser/binary_io.h"
#include "ser/error.h"

namespace ser {

namespace {

std::uint32_t le32(const std::string& b, std::size_t at) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[at])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 3])) << 24;
}

std::uint16_t le16(const std::string& b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    static_cast<unsigned char>(b[at + 1]) << 8);
}

void put16(std::ostream& os, std::uint16_t v) {
  char buf[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  os.write(buf, 2);
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  const std::string bytes = io::read_text_file(path);
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0) {
    throw Error(path.string() + ": not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string tag = bytes.substr(pos, 4);
    const std::uint32_t size = le32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw Error(path.string() + ": truncated chunk '" + tag + "'");
    if (tag == "fmt ") {
      if (size < 16) throw Error(path.string() + ": short fmt chunk");
      format = le16(bytes, body);
      channels = le16(bytes, body + 2);
      rate = le32(bytes, body + 4);
      bits = le16(bytes, body + 14);
      have_fmt = true;
    } else if (tag == "data") {
      if (!have_fmt) throw Error(path.string() + ": data chunk before fmt chunk");
      if (channels != 1) throw Error(path.string() + ": only mono audio is supported");
      Waveform wave;
      wave.sample_rate = static_cast<int>(rate);
      if (format == 1 && bits == 16) {
        wave.samples.resize(size / 2);
        for (std::size_t i = 0; i < wave.samples.size(); ++i) {
          const auto raw = static_cast<std::int16_t>(le16(bytes, body + 2 * i));
          wave.samples[i] = static_cast<float>(raw) / 32768.0f;
        }
      } else if (format == 3 && bits == 32) {
        wave.samples.resize(size / 4);
        for (std::size_t i = 0; i < wave.samples.size(); ++i) {
          wave.samples[i] = std::bit_cast<float>(le32(bytes, body + 4 * i));
        }
      } else {
        throw Error(path.string() + ": unsupported sample format");
      }
      return wave;
    }
    pos = body + size + (size & 1);
  }
  throw Error(path.string() + ": no data chunk");
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  std::ostringstream os(std::ios::binary);
  const auto data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 4);
  os.write("RIFF", 4);
  io::write_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  io::write_u32(os, 16);
  put16(os, 3);
  put16(os, 1);
  io::write_u32(os, static_cast<std::uint32_t>(wave.sample_rate));
  io::write_u32(os, static_cast<std::uint32_t>(wave.sample_rate) * 4);
  put16(os, 4);
  put16(os, 32);
  os.write("data", 4);
  io::write_u32(os, data_bytes);
  for (float s : wave.samples) io::write_f32(os, s);
  io::write_file_atomic(path, os.str());
}

}  // namespace ser
