#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "covert_isac/linalg.hpp"

namespace cisac {

using Rng = std::mt19937_64;

// Independent substream derived from a master seed and a stream name,
// optionally further split by an index (sample partition, sweep point, ...).
Rng substream(std::uint64_t master, std::string_view name, std::uint64_t index = 0);

// Circularly-symmetric complex Gaussian vector with E[v v^H] = var * I.
CVec complex_gaussian(Rng& rng, int n, double var = 1.0);

// Uniform draw from the closed complex ball of the given radius.
CVec uniform_in_ball(Rng& rng, int n, double radius);

}  // namespace cisac
