#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ser/labels.h"
#include "ser/nn/batch.h"
#include "ser/random.h"

namespace ser::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ser-" + tag + "-" + std::to_string(getpid_portable()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  static long getpid_portable();
  std::filesystem::path path_;
};

/// Gaussian batch with random valid lengths in [1, max_steps], labels b % 4.
inline nn::MaskedBatch random_batch(Rng& rng, std::size_t batch, std::size_t max_steps, std::size_t dim) {
  nn::MaskedBatch mb;
  mb.data = nn::SeqBatch(batch, max_steps, dim);
  for (std::size_t b = 0; b < batch; ++b) {
    mb.data.lengths[b] = 1 + static_cast<std::size_t>(rng.uniform_int(max_steps));
    for (std::size_t t = 0; t < mb.data.lengths[b]; ++t) {
      for (std::size_t d = 0; d < dim; ++d) mb.data.row(b, t)[d] = rng.normal();
    }
    mb.ids.push_back("u" + std::to_string(b));
    mb.labels.push_back(static_cast<int>(b % kNumClasses));
  }
  return mb;
}

/// Copy of `mb` with `extra` zero steps appended to every row.
inline nn::MaskedBatch pad_more(const nn::MaskedBatch& mb, std::size_t extra) {
  nn::MaskedBatch out = mb;
  const auto& src = mb.data;
  out.data = nn::SeqBatch(src.batch, src.steps + extra, src.dim);
  out.data.lengths = src.lengths;
  for (std::size_t b = 0; b < src.batch; ++b) {
    for (std::size_t t = 0; t < src.steps; ++t) {
      for (std::size_t d = 0; d < src.dim; ++d) out.data.row(b, t)[d] = src.row(b, t)[d];
    }
  }
  return out;
}

}  // namespace ser::testing
