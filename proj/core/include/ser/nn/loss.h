#pragma once

#include <span>
#include <vector>

#include "ser/nn/batch.h"

namespace ser::nn {

inline constexpr double kLogClamp = 1e-12;

struct LossResult {
  double loss = 0.0;
  SeqBatch probs;        // B x 1 x C
  SeqBatch grad_logits;  // d(loss)/d(logits)
};

/// Row-wise softmax of a B x 1 x C batch.
SeqBatch softmax(const SeqBatch& logits);

/// loss = (1/B) * sum_i w[y_i] * -log p_i[y_i]; the gradient is the usual
/// softmax cross-entropy gradient scaled by each instance's class weight.
LossResult weighted_softmax_xent(const SeqBatch& logits, std::span<const int> labels,
                                 std::span<const double> class_weights);

}  // namespace ser::nn
