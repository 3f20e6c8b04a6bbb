#include "ser/nn/init.h"

#include <cmath>

#include "ser/error.h"

namespace ser::nn {

double xavier_bound(std::size_t fan_in, std::size_t fan_out) {
  if (fan_in == 0 || fan_out == 0) throw Error("xavier init needs positive fans");
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

std::vector<double> xavier_uniform_init(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed) {
  Rng rng(seed);
  return xavier_uniform_init(fan_in, fan_out, fan_in * fan_out, rng);
}

std::vector<double> xavier_uniform_init(std::size_t fan_in, std::size_t fan_out, std::size_t count, Rng& rng) {
  const double a = xavier_bound(fan_in, fan_out);
  std::vector<double> w(count);
  for (auto& x : w) x = rng.uniform(-a, a);
  return w;
}

}  // namespace ser::nn
