#include "msc/integrators.hpp"

#include "msc/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace msc {

std::string_view to_string(Scheme s) {
    switch (s) {
        case Scheme::maruyama: return "maruyama";
        case Scheme::milstein: return "milstein";
    }
    return "unknown";
}

Scheme parse_scheme(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "maruyama") return Scheme::maruyama;
    if (lower == "milstein") return Scheme::milstein;
    throw UsageError(fmt::format("unknown scheme '{}'; expected maruyama or milstein", text));
}

void MethodConfig::validate() const {
    if (!(theta >= 0.0 && theta <= 1.0)) {
        throw UsageError(fmt::format("theta must lie in [0,1], got {}", theta));
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) throw UsageError(fmt::format("dt must be positive, got {}", dt));
    if (!(newton_tol > 0.0)) throw UsageError("newton_tol must be positive");
    if (newton_max_iter < 1) throw UsageError("newton_max_iter must be at least 1");
}

namespace {

Vector newton_matrix_solve(const Matrix& jac, const Vector& r) {
    if (jac.rows() == 1) {
        if (jac(0, 0) == 0.0) throw LinearAlgebraError("singular Newton matrix I - h f'(a)");
        return r / jac(0, 0);
    }
    Eigen::FullPivLU<Matrix> lu(jac);
    if (!lu.isInvertible()) throw LinearAlgebraError("singular Newton matrix I - h f'(a)");
    return lu.solve(r);
}

struct NewtonOutcome {
    Vector a;
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
    bool stalled = false;
};

// Newton with step halving while the residual fails to decrease.
NewtonOutcome damped_newton(const SdeProblem& problem, double h, const Vector& b, Vector a, double target,
                            int max_iter) {
    const auto n = b.size();
    const Matrix identity = Matrix::Identity(n, n);
    NewtonOutcome out;
    Vector r = a - h * problem.drift(a) - b;
    double rnorm = r.norm();
    while (rnorm > target && out.iterations < max_iter && std::isfinite(rnorm)) {
        ++out.iterations;
        const Vector delta = newton_matrix_solve(identity - h * problem.drift_jacobian(a), r);
        double lambda = 1.0;
        Vector candidate = a - delta;
        Vector rc = candidate - h * problem.drift(candidate) - b;
        double rcnorm = rc.norm();
        for (int halvings = 0; !(rcnorm < rnorm) && halvings < 40; ++halvings) {
            lambda *= 0.5;
            candidate = a - lambda * delta;
            rc = candidate - h * problem.drift(candidate) - b;
            rcnorm = rc.norm();
        }
        if (!(rcnorm < rnorm)) {
            out.stalled = true;
            break;
        }
        a = std::move(candidate);
        r = std::move(rc);
        rnorm = rcnorm;
    }
    out.a = std::move(a);
    out.residual = rnorm;
    out.converged = rnorm <= target;
    return out;
}

// Pseudo-transient continuation: implicit Euler on da/dtau = -F(a) with the
// pseudo time step grown by residual ratios. Reaches a root whenever the flow
// does, e.g. for monotone or decoupled scalar residuals where plain Newton can
// stall at a nonzero local minimum of |F|.
NewtonOutcome pseudo_transient(const SdeProblem& problem, double h, const Vector& b, Vector a, double target,
                               int max_iter) {
    const auto n = b.size();
    const Matrix identity = Matrix::Identity(n, n);
    NewtonOutcome out;
    Vector r = a - h * problem.drift(a) - b;
    double rnorm = r.norm();
    double tau = 1e-2;
    while (rnorm > target && out.iterations < max_iter && std::isfinite(rnorm)) {
        ++out.iterations;
        const Matrix jac = identity - h * problem.drift_jacobian(a);
        Vector delta;
        for (int shrink = 0;; ++shrink) {
            const Matrix shifted = identity / tau + jac;
            Eigen::FullPivLU<Matrix> lu(shifted);
            if (lu.isInvertible() && lu.rcond() > 1e-12) {
                delta = lu.solve(r);
                break;
            }
            if (shrink > 60) throw LinearAlgebraError("pseudo-transient continuation: singular shifted matrix");
            tau *= 0.5;
        }
        a -= delta;
        Vector r_next = a - h * problem.drift(a) - b;
        const double next = r_next.norm();
        tau = std::min(1e12, tau * std::clamp(rnorm / next, 0.1, 10.0));
        r = std::move(r_next);
        rnorm = next;
    }
    out.a = std::move(a);
    out.residual = rnorm;
    out.converged = rnorm <= target;
    return out;
}

}  // namespace

Vector implicit_solve(const SdeProblem& problem, double h, const Vector& b, double tol, int max_iter,
                      SolveStats* stats, const Vector* initial_guess) {
    if (!(h > 0.0)) throw UsageError(fmt::format("implicit solve needs h > 0, got {}", h));
    const double target = tol * std::max(1.0, b.norm());
    const Vector& start = initial_guess ? *initial_guess : b;

    auto result = damped_newton(problem, h, b, start, target, max_iter);
    int iterations = result.iterations;
    if (!result.converged) {
        result = pseudo_transient(problem, h, b, start, target, 20 * max_iter);
        iterations += result.iterations;
    }
    if (!result.converged) {
        throw SolverError(fmt::format("implicit solve did not converge after {} iterations (residual {:.3e})",
                                      iterations, result.residual),
                          result.residual, iterations);
    }
    if (stats) {
        stats->iterations = iterations;
        stats->residual = result.residual;
    }
    return result.a;
}

namespace {

Vector explicit_part(const SdeProblem& problem, const MethodConfig& config, const Vector& x, const Vector& dw) {
    if (x.size() != problem.n()) {
        throw UsageError(fmt::format("state has dimension {}, problem expects {}", x.size(), problem.n()));
    }
    if (dw.size() != problem.m()) {
        throw UsageError(fmt::format("increment has dimension {}, problem expects {}", dw.size(), problem.m()));
    }
    Vector b = x + problem.diffusion(x) * dw;
    if (config.theta < 1.0) b += (1.0 - config.theta) * config.dt * problem.drift(x);
    return b;
}

Vector finish_step(const SdeProblem& problem, const MethodConfig& config, const Vector& x, const Vector& b) {
    if (config.theta == 0.0) return b;
    return implicit_solve(problem, config.theta * config.dt, b, config.newton_tol, config.newton_max_iter, nullptr,
                          &x);
}

}  // namespace

Vector maruyama_step(const SdeProblem& problem, const MethodConfig& config, const Vector& x, const Vector& dw) {
    return finish_step(problem, config, x, explicit_part(problem, config, x, dw));
}

Vector milstein_step(const SdeProblem& problem, const MethodConfig& config, const Vector& x, const Vector& dw) {
    Vector b = explicit_part(problem, config, x, dw);
    const auto table = evaluate_levy_free_correction(problem, x);
    const Matrix products = milstein_products(dw, config.dt);
    for (int j1 = 0; j1 < problem.m(); ++j1) {
        for (int j2 = 0; j2 < problem.m(); ++j2) {
            b += 0.5 * products(j1, j2) * table(j1, j2);
        }
    }
    return finish_step(problem, config, x, b);
}

Vector step(const SdeProblem& problem, const MethodConfig& config, const Vector& x, const Vector& dw) {
    return config.scheme == Scheme::milstein ? milstein_step(problem, config, x, dw)
                                             : maruyama_step(problem, config, x, dw);
}

std::size_t step_count(double horizon, double dt) {
    const double ratio = horizon / dt;
    const auto n = static_cast<std::size_t>(std::llround(ratio));
    return std::max<std::size_t>(1, n);
}

Trajectory integrate(const SdeProblem& problem, const MethodConfig& config, const Vector& x0,
                     std::span<const Vector> dw, std::uint64_t path_index) {
    config.validate();
    if (config.scheme == Scheme::milstein && !problem.commutative_noise()) {
        throw UnsupportedProblemError(
            fmt::format("Milstein requires commutative noise; problem '{}' is not flagged commutative",
                        problem.label()));
    }
    Trajectory traj;
    traj.config = config;
    traj.path_index = path_index;
    traj.times.reserve(dw.size() + 1);
    traj.states.reserve(dw.size() + 1);
    traj.times.push_back(0.0);
    traj.states.push_back(x0);
    for (std::size_t n = 0; n < dw.size(); ++n) {
        try {
            traj.states.push_back(step(problem, config, traj.states.back(), dw[n]));
        } catch (const SolverError& e) {
            throw SolverError(fmt::format("path {} step {}: {}", path_index, n, e.what()), e.residual(),
                              e.iterations());
        } catch (const LinearAlgebraError& e) {
            throw LinearAlgebraError(fmt::format("path {} step {}: {}", path_index, n, e.what()));
        }
        traj.times.push_back(static_cast<double>(n + 1) * config.dt);
    }
    return traj;
}

std::pair<Trajectory, Trajectory> integrate_pair(const SdeProblem& problem, const MethodConfig& config,
                                                 const Vector& x0, const Vector& y0, std::span<const Vector> dw,
                                                 std::uint64_t path_index) {
    return {integrate(problem, config, x0, dw, path_index), integrate(problem, config, y0, dw, path_index)};
}

std::pair<Trajectory, Trajectory> integrate_pair(const SdeProblem& problem, const MethodConfig& config,
                                                 const Vector& x0, const Vector& y0, const NoiseGrid& grid) {
    const auto dw = increments(grid);
    return integrate_pair(problem, config, x0, y0, dw, grid.path_index);
}

}  // namespace msc
