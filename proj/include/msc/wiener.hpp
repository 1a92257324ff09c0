#pragma once

#include "msc/sde_model.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace msc {

// Discretized Wiener path for one ensemble member. The increments depend only
// on (master_seed, path_index, dt, steps, m), never on how paths are scheduled.
struct NoiseGrid {
    double dt = 0.0;
    std::size_t steps = 0;
    int m = 1;
    std::uint64_t master_seed = 42;
    std::uint64_t path_index = 0;
};

// SplitMix64 finalizer applied to (master_seed, stream). Distinct streams give
// decorrelated 64-bit seeds.
std::uint64_t substream_seed(std::uint64_t master_seed, std::uint64_t stream) noexcept;

// Engine for a substream, used by the path generator and the estimators.
std::mt19937_64 substream_engine(std::uint64_t master_seed, std::uint64_t stream);

// N(0, dt) increments, one vector of length m per step.
std::vector<Vector> increments(const NoiseGrid& grid);

// Diagonal (dW^j)^2 - dt, off-diagonal dW^{j1} dW^{j2}.
Matrix milstein_products(const Vector& dw, double dt);

}  // namespace msc
