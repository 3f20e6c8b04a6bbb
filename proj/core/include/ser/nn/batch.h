#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ser::nn {

enum class Mode { kTrain, kEval };

/// Zero-padded batch of sequences, batch x steps x dim, row-major. Row b is
/// valid on the prefix [0, lengths[b]); the remaining steps are padding and
/// hold zeros. A flat B x D matrix is the steps == 1 case.
struct SeqBatch {
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::size_t dim = 0;
  std::vector<double> values;
  std::vector<std::size_t> lengths;

  SeqBatch() = default;
  SeqBatch(std::size_t b, std::size_t t, std::size_t d);
  /// Zero batch with the same batch/steps/lengths as `shape` and width d.
  static SeqBatch like(const SeqBatch& shape, std::size_t d);

  double* row(std::size_t b, std::size_t t) { return values.data() + (b * steps + t) * dim; }
  const double* row(std::size_t b, std::size_t t) const { return values.data() + (b * steps + t) * dim; }
  bool mask(std::size_t b, std::size_t t) const { return t < lengths[b]; }
  std::size_t valid_count() const;
  /// Throws ser::Error unless every row has 1 <= length <= steps and the
  /// value buffer matches the shape.
  void validate() const;
  void zero_padding();
};

/// A model input: padded values, utterance ids for alignment checks, and
/// class labels (empty at inference).
struct MaskedBatch {
  SeqBatch data;
  std::vector<std::string> ids;
  std::vector<int> labels;
};

/// Trainable tensor with its gradient accumulator.
struct Param {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool frozen = false;

  Param() = default;
  Param(std::string n, std::vector<std::size_t> s);
  std::size_t size() const { return value.size(); }
  void zero_grad();
};

}  // namespace ser::nn
