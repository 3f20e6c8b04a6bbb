#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "ser/nn/batch.h"

namespace ser::nn {

struct GradCheckOptions {
  double eps = 1e-5;
  /// 0 checks every entry; otherwise a seeded random subset of this size
  /// per tensor.
  std::size_t max_entries_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Compares analytic gradients against central differences
/// (f(x + eps) - f(x - eps)) / 2 eps. The error of one entry is
/// |a - n| / max(|a|, |n|, 1e-8).
///
/// `loss` evaluates the objective; `loss_and_grad` evaluates it and
/// accumulates gradients into the (zeroed) params. Both must be
/// deterministic.
GradCheckResult grad_check(std::span<Param* const> params, const std::function<double()>& loss,
                           const std::function<double()>& loss_and_grad, const GradCheckOptions& options = {});

}  // namespace ser::nn
