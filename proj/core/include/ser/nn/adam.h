#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ser/nn/batch.h"

namespace ser::nn {

struct LrSchedule {
  double base_lr = 0.0007;
  std::size_t warmup_steps = 40;
};

/// base_lr * min(1, step / warmup_steps); constant when warmup_steps == 0.
/// `step` counts optimizer updates already applied.
double lr_at(std::size_t step, const LrSchedule& schedule);

struct AdamState {
  LrSchedule schedule;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

enum class StepStatus { kApplied, kNonFiniteGradient };

/// One bias-corrected Adam update using lr_at(state.step). Frozen params are
/// skipped entirely. A non-finite gradient aborts the step before anything
/// is modified.
StepStatus adam_step(std::span<Param* const> params, AdamState& state);

}  // namespace ser::nn
