#include "ser/nn/grad_check.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ser/random.h"

namespace ser::nn {

GradCheckResult grad_check(std::span<Param* const> params, const std::function<double()>& loss,
                           const std::function<double()>& loss_and_grad, const GradCheckOptions& options) {
  for (Param* p : params) p->zero_grad();
  loss_and_grad();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const Param* p : params) analytic.push_back(p->grad);

  GradCheckResult result;
  Rng rng(options.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Param& p = *params[pi];
    std::vector<std::size_t> entries(p.size());
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (options.max_entries_per_param != 0 && entries.size() > options.max_entries_per_param) {
      rng.shuffle(entries);
      entries.resize(options.max_entries_per_param);
      std::sort(entries.begin(), entries.end());
    }
    for (std::size_t idx : entries) {
      const double saved = p.value[idx];
      p.value[idx] = saved + options.eps;
      const double up = loss();
      p.value[idx] = saved - options.eps;
      const double down = loss();
      p.value[idx] = saved;

      const double numeric = (up - down) / (2.0 * options.eps);
      const double a = analytic[pi][idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      ++result.entries_checked;
      if (err > result.max_rel_error || !std::isfinite(err)) {
        result.max_rel_error = std::isfinite(err) ? err : INFINITY;
        result.worst_param = p.name;
        result.worst_index = idx;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace ser::nn
