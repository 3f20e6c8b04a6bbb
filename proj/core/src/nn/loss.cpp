#include "ser/nn/loss.h"

#include <algorithm>
#include <cmath>

#include "ser/error.h"

namespace ser::nn {

SeqBatch softmax(const SeqBatch& logits) {
  if (logits.steps != 1) throw Error("softmax expects one step per row");
  SeqBatch p = logits;
  for (std::size_t b = 0; b < p.batch; ++b) {
    double* r = p.row(b, 0);
    const double mx = *std::max_element(r, r + p.dim);
    double z = 0.0;
    for (std::size_t c = 0; c < p.dim; ++c) {
      r[c] = std::exp(r[c] - mx);
      z += r[c];
    }
    for (std::size_t c = 0; c < p.dim; ++c) r[c] /= z;
  }
  return p;
}

LossResult weighted_softmax_xent(const SeqBatch& logits, std::span<const int> labels,
                                 std::span<const double> class_weights) {
  if (labels.size() != logits.batch) throw Error("label count does not match batch size");
  if (class_weights.size() != logits.dim) throw Error("class weight count does not match logit width");
  for (double v : logits.values) {
    if (!std::isfinite(v)) throw Error("non-finite logit");
  }
  LossResult out;
  out.probs = softmax(logits);
  out.grad_logits = SeqBatch::like(logits, logits.dim);
  const double inv_b = 1.0 / static_cast<double>(logits.batch);
  for (std::size_t b = 0; b < logits.batch; ++b) {
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= logits.dim) throw Error("label out of range");
    const double w = class_weights[static_cast<std::size_t>(y)];
    const double* p = out.probs.row(b, 0);
    out.loss += w * -std::log(std::max(p[y], kLogClamp));
    double* g = out.grad_logits.row(b, 0);
    for (std::size_t c = 0; c < logits.dim; ++c) {
      g[c] = w * inv_b * (p[c] - (static_cast<std::size_t>(y) == c ? 1.0 : 0.0));
    }
  }
  out.loss *= inv_b;
  return out;
}

}  // namespace ser::nn
