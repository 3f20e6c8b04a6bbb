#pragma once

#include <filesystem>
#include <vector>

namespace ser {

struct Waveform {
  int sample_rate = 16000;
  std::vector<float> samples;  // mono, nominally in [-1, 1]
};

/// Reads a mono RIFF/WAVE file holding 16-bit PCM or 32-bit IEEE float.
Waveform read_wav(const std::filesystem::path& path);

/// Writes 32-bit IEEE float so synthetic waveforms round-trip exactly.
void write_wav(const std::filesystem::path& path, const Waveform& wave);

}  // namespace ser
