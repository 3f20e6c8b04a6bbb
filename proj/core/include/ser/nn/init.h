#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ser/random.h"

namespace ser::nn {

/// sqrt(6 / (fan_in + fan_out)).
double xavier_bound(std::size_t fan_in, std::size_t fan_out);

/// fan_in * fan_out i.i.d. draws from U[-a, a], a = xavier_bound.
std::vector<double> xavier_uniform_init(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed);
/// `count` draws with the same bound, for tensors whose size differs from
/// fan_in * fan_out (convolution kernels).
std::vector<double> xavier_uniform_init(std::size_t fan_in, std::size_t fan_out, std::size_t count, Rng& rng);

}  // namespace ser::nn
