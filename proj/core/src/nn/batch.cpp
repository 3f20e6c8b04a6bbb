#include "ser/nn/batch.h"

#include <algorithm>
#include <functional>
#include <numeric>

#include "ser/error.h"

namespace ser::nn {

SeqBatch::SeqBatch(std::size_t b, std::size_t t, std::size_t d)
    : batch(b), steps(t), dim(d), values(b * t * d, 0.0), lengths(b, t) {}

SeqBatch SeqBatch::like(const SeqBatch& shape, std::size_t d) {
  SeqBatch out(shape.batch, shape.steps, d);
  out.lengths = shape.lengths;
  return out;
}

std::size_t SeqBatch::valid_count() const {
  return std::accumulate(lengths.begin(), lengths.end(), std::size_t{0});
}

void SeqBatch::validate() const {
  if (values.size() != batch * steps * dim) throw Error("batch buffer does not match its shape");
  if (lengths.size() != batch) throw Error("batch lengths do not match batch size");
  for (auto len : lengths) {
    if (len == 0) throw Error("batch row has no valid steps");
    if (len > steps) throw Error("batch row length exceeds padded length");
  }
}

void SeqBatch::zero_padding() {
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = lengths[b]; t < steps; ++t) std::fill_n(row(b, t), dim, 0.0);
  }
}

Param::Param(std::string n, std::vector<std::size_t> s) : name(std::move(n)), shape(std::move(s)) {
  const std::size_t count = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  value.assign(count, 0.0);
  grad.assign(count, 0.0);
}

void Param::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

}  // namespace ser::nn
