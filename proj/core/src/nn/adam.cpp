#include "ser/nn/adam.h"

#include <algorithm>
#include <cmath>

#include "ser/error.h"

namespace ser::nn {

double lr_at(std::size_t step, const LrSchedule& schedule) {
  if (schedule.warmup_steps == 0 || step >= schedule.warmup_steps) return schedule.base_lr;
  return schedule.base_lr * static_cast<double>(step) / static_cast<double>(schedule.warmup_steps);
}

StepStatus adam_step(std::span<Param* const> params, AdamState& state) {
  if (state.m.empty()) {
    for (const Param* p : params) {
      state.m.emplace_back(p->size(), 0.0);
      state.v.emplace_back(p->size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw Error("optimizer state does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i]->size()) throw Error("optimizer state shape mismatch for " + params[i]->name);
  }

  for (const Param* p : params) {
    if (p->frozen) continue;
    for (double g : p->grad) {
      if (!std::isfinite(g)) return StepStatus::kNonFiniteGradient;
    }
  }

  const double lr = lr_at(state.step, state.schedule);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    if (p.frozen) continue;
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double g = p.grad[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p.value[j] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
  return StepStatus::kApplied;
}

}  // namespace ser::nn
