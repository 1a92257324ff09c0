#include "msc/wiener.hpp"

#include "msc/errors.hpp"

#include <cmath>

namespace msc {

namespace {

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t substream_seed(std::uint64_t master_seed, std::uint64_t stream) noexcept {
    return splitmix64(splitmix64(master_seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

std::mt19937_64 substream_engine(std::uint64_t master_seed, std::uint64_t stream) {
    const std::uint64_t s = substream_seed(master_seed, stream);
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
    return std::mt19937_64(seq);
}

std::vector<Vector> increments(const NoiseGrid& grid) {
    if (!(grid.dt > 0.0)) throw UsageError("noise grid: dt must be positive");
    if (grid.steps < 1) throw UsageError("noise grid: at least one step is required");
    if (grid.m < 1) throw UsageError("noise grid: noise dimension must be positive");

    auto engine = substream_engine(grid.master_seed, grid.path_index);
    // libstdc++ draws with the Marsaglia polar method.
    std::normal_distribution<double> normal(0.0, std::sqrt(grid.dt));
    std::vector<Vector> out;
    out.reserve(grid.steps);
    for (std::size_t n = 0; n < grid.steps; ++n) {
        Vector dw(grid.m);
        for (int j = 0; j < grid.m; ++j) dw[j] = normal(engine);
        out.push_back(std::move(dw));
    }
    return out;
}

Matrix milstein_products(const Vector& dw, double dt) {
    Matrix p = dw * dw.transpose();
    p.diagonal().array() -= dt;
    return p;
}

}  // namespace msc
