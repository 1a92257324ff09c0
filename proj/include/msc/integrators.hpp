#pragma once

#include "msc/sde_model.hpp"
#include "msc/wiener.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace msc {

enum class Scheme { maruyama, milstein };

std::string_view to_string(Scheme s);
// Accepts "maruyama" or "milstein" (case-insensitive); throws UsageError otherwise.
Scheme parse_scheme(std::string_view text);

struct MethodConfig {
    Scheme scheme = Scheme::maruyama;
    double theta = 0.5;
    double dt = 0.25;
    double newton_tol = 1e-12;
    int newton_max_iter = 50;

    // Throws UsageError naming the violated constraint.
    void validate() const;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;
    MethodConfig config;
    std::uint64_t path_index = 0;
};

struct SolveStats {
    int iterations = 0;
    double residual = 0.0;
};

// Solves a - h f(a) = b by Newton's method started at initial_guess (default
// b), halving the update while the residual fails to decrease. If Newton does
// not converge within max_iter, pseudo-transient continuation restarts from the
// same guess. Converged when |a - h f(a) - b| <= tol * max(1, |b|).
// Steps pass the current state X_n as the guess.
Vector implicit_solve(const SdeProblem& problem, double h, const Vector& b, double tol = 1e-12,
                      int max_iter = 50, SolveStats* stats = nullptr, const Vector* initial_guess = nullptr);

// One step of X_{n+1} = X_n + (1-theta) dt f(X_n) + theta dt f(X_{n+1}) + g(X_n) dW.
Vector maruyama_step(const SdeProblem& problem, const MethodConfig& config, const Vector& x, const Vector& dw);

// As maruyama_step plus the commutative Milstein correction
// 1/2 sum_{j1,j2} L^{j1} g^{j2}(X_n) P_{j1 j2} with P from milstein_products.
Vector milstein_step(const SdeProblem& problem, const MethodConfig& config, const Vector& x, const Vector& dw);

Vector step(const SdeProblem& problem, const MethodConfig& config, const Vector& x, const Vector& dw);

Trajectory integrate(const SdeProblem& problem, const MethodConfig& config, const Vector& x0,
                     std::span<const Vector> dw, std::uint64_t path_index = 0);

// Two solutions driven by the same increments.
std::pair<Trajectory, Trajectory> integrate_pair(const SdeProblem& problem, const MethodConfig& config,
                                                 const Vector& x0, const Vector& y0, std::span<const Vector> dw,
                                                 std::uint64_t path_index = 0);

std::pair<Trajectory, Trajectory> integrate_pair(const SdeProblem& problem, const MethodConfig& config,
                                                 const Vector& x0, const Vector& y0, const NoiseGrid& grid);

// Number of steps covering [0, horizon] at stepsize dt (at least one).
std::size_t step_count(double horizon, double dt);

}  // namespace msc
