#pragma once

#include "msc/integrators.hpp"
#include "msc/sde_model.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace msc {

// Componentwise bounding box of sampled states.
struct SampleBox {
    Vector lower;
    Vector upper;

    static SampleBox unit(int n) { return {Vector::Zero(n), Vector::Ones(n)}; }
};

// max is the sound rule for a one-sided Lipschitz constant; min is kept as an
// alternative sampling rule.
enum class MuRule { max, min };

struct EstimationConfig {
    std::size_t paths = 2000;
    std::size_t pairs = 10000;
    std::uint64_t seed = 42;
    double degeneracy_eps = 1e-12;
    MuRule mu_rule = MuRule::max;

    void validate() const;
};

SampleBox sample_box(std::span<const Trajectory> trajectories);

// Largest |g(x)-g(y)|_F^2 / |x-y|^2 over Q uniform pairs drawn from the box.
double estimate_L(const SdeProblem& problem, const SampleBox& box, const EstimationConfig& config);

// Extreme (per mu_rule) of <x-y, f(x)-f(y)> / |x-y|^2 over Q uniform pairs.
double estimate_mu(const SdeProblem& problem, const SampleBox& box, const EstimationConfig& config);

// max over grid times of the path average of |f'(X_n)|_F^2.
double estimate_M(const SdeProblem& problem, std::span<const Trajectory> trajectories);

using TrajectoryPair = std::pair<Trajectory, Trajectory>;

// Sum over (i, j, k, l) of sup_t E h^{k,l}_{i,j}(X, Y) / E|X - Y|^2, with
// expectations replaced by path averages over the coupled pairs.
double estimate_M_tilde(const SdeProblem& problem, std::span<const TrajectoryPair> pairs);

}  // namespace msc
