#pragma once

#include <array>
#include <random>
#include <vector>

#include "svcal/common.hpp"

namespace svcal {

/// Latin hypercube over axis-aligned bounds: each dimension is cut into n
/// equal strata, every stratum is hit exactly once (uniform draw inside,
/// independent permutation per dimension). Deterministic given the engine
/// state; dimensions are processed in order.
Matrix latin_hypercube(const std::vector<std::array<double, 2>>& bounds,
                       std::size_t n, std::mt19937_64& rng);

}  // namespace svcal
