#include "msc/ensemble.hpp"

#include "msc/errors.hpp"
#include "msc/summation.hpp"
#include "msc/wiener.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

namespace msc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Runs body(p) for p in [0, count) on `workers` threads with a strided
// assignment. If any call throws, the exception of the lowest failing index is
// rethrown so the reported error does not depend on scheduling.
template <class Body>
void parallel_paths(std::size_t count, unsigned workers, Body body) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    std::vector<std::size_t> failed_at(workers, std::numeric_limits<std::size_t>::max());
    std::vector<std::exception_ptr> failures(workers);

    auto run = [&](unsigned w) {
        for (std::size_t p = w; p < count; p += workers) {
            try {
                body(p);
            } catch (...) {
                failed_at[w] = p;
                failures[w] = std::current_exception();
                return;
            }
        }
    };

    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::jthread> threads;
        threads.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) threads.emplace_back(run, w);
    }

    const auto first = std::min_element(failed_at.begin(), failed_at.end());
    if (*first != std::numeric_limits<std::size_t>::max()) {
        std::rethrow_exception(failures[static_cast<std::size_t>(first - failed_at.begin())]);
    }
}

void check_initial_data(const SdeProblem& problem, const Vector& x0, const Vector& y0) {
    if (x0.size() != problem.n() || y0.size() != problem.n()) {
        throw UsageError(fmt::format("initial data must have dimension {}", problem.n()));
    }
}

}  // namespace

std::size_t fit_start_index(std::size_t steps) {
    return static_cast<std::size_t>(std::ceil(kFitSkipFraction * static_cast<double>(steps)));
}

SlopeFit fit_log_slope(std::span<const double> times, std::span<const double> msd) {
    if (times.size() != msd.size() || msd.empty()) throw FitError("fit: times and msd must be nonempty and aligned");
    const std::size_t steps = msd.size() - 1;
    const double d0 = msd.front();
    if (!(d0 > 0.0)) throw FitError("fit: initial mean-square deviation is zero");

    const std::size_t first = fit_start_index(steps);
    std::size_t end = first;
    while (end < msd.size() && std::isfinite(msd[end]) && msd[end] > 0.0 && msd[end] >= kFitFloor * d0) ++end;
    if (end < first + 3) {
        throw FitError(fmt::format("fit: only {} usable points in the fit window", end > first ? end - first : 0));
    }

    const auto count = static_cast<double>(end - first);
    double t_mean = 0.0;
    double y_mean = 0.0;
    for (std::size_t i = first; i < end; ++i) {
        t_mean += times[i];
        y_mean += std::log(msd[i]);
    }
    t_mean /= count;
    y_mean /= count;
    double sty = 0.0;
    double stt = 0.0;
    for (std::size_t i = first; i < end; ++i) {
        const double dt = times[i] - t_mean;
        sty += dt * (std::log(msd[i]) - y_mean);
        stt += dt * dt;
    }
    SlopeFit fit;
    fit.slope = sty / stt;
    fit.intercept = y_mean - fit.slope * t_mean;
    fit.window = {first, end - 1};
    return fit;
}

std::vector<TrajectoryPair> simulate_pairs(const SdeProblem& problem, const MethodConfig& config, const Vector& x0,
                                           const Vector& y0, const EnsembleOptions& options) {
    config.validate();
    check_initial_data(problem, x0, y0);
    if (options.paths < 1) throw UsageError("ensemble: at least one path is required");
    const std::size_t steps = step_count(problem.horizon(), config.dt);
    std::vector<TrajectoryPair> out(options.paths);
    parallel_paths(options.paths, options.workers, [&](std::size_t p) {
        const NoiseGrid grid{config.dt, steps, problem.m(), options.seed, p};
        out[p] = integrate_pair(problem, config, x0, y0, grid);
    });
    return out;
}

EnsembleResult run_ensemble(const SdeProblem& problem, const MethodConfig& config, const Vector& x0, const Vector& y0,
                            const EnsembleOptions& options, const std::optional<ProblemConstants>& constants) {
    config.validate();
    check_initial_data(problem, x0, y0);
    if (options.paths < 2) throw UsageError("ensemble: at least two paths are required");
    const std::size_t steps = step_count(problem.horizon(), config.dt);
    const std::size_t len = steps + 1;
    const std::size_t paths = options.paths;

    // deviations[n * paths + p] = |X_n - Y_n|^2 on path p
    std::vector<double> deviations(len * paths);
    parallel_paths(paths, options.workers, [&](std::size_t p) {
        const NoiseGrid grid{config.dt, steps, problem.m(), options.seed, p};
        const auto [xs, ys] = integrate_pair(problem, config, x0, y0, grid);
        for (std::size_t n = 0; n < len; ++n) deviations[n * paths + p] = (xs.states[n] - ys.states[n]).squaredNorm();
    });

    EnsembleResult r;
    r.paths = paths;
    r.seed = options.seed;
    r.config = config;
    r.times.resize(len);
    r.msd.resize(len);
    r.msd_stderr.resize(len);
    std::vector<double> centered(paths);
    for (std::size_t n = 0; n < len; ++n) {
        const std::span<const double> row(deviations.data() + n * paths, paths);
        const double mean = pairwise_sum(row) / static_cast<double>(paths);
        for (std::size_t p = 0; p < paths; ++p) centered[p] = (row[p] - mean) * (row[p] - mean);
        const double var = pairwise_sum(centered) / static_cast<double>(paths - 1);
        r.times[n] = static_cast<double>(n) * config.dt;
        r.msd[n] = mean;
        r.msd_stderr[n] = std::sqrt(var / static_cast<double>(paths));
    }

    r.theoretical_exponent = kNaN;
    if (constants) {
        const double factor = contraction_factor(config.scheme, *constants, config.theta, config.dt);
        if (factor > 0.0) r.theoretical_exponent = std::log(factor) / config.dt;
    }

    try {
        const auto fit = fit_log_slope(r.times, r.msd);
        r.fitted_slope = fit.slope;
        r.fit_window = fit.window;
        r.fit_note = "least-squares slope of ln(msd) vs t";
    } catch (const FitError& e) {
        r.fitted_slope = kNaN;
        r.fit_note = e.what();
    }
    return r;
}

double fit_slope(const EnsembleResult& result) { return fit_log_slope(result.times, result.msd).slope; }

std::vector<std::size_t> bound_violations(const EnsembleResult& result, double exponent, double sigmas) {
    std::vector<std::size_t> out;
    if (result.msd.empty()) return out;
    const double d0 = result.msd.front();
    const std::size_t first = fit_start_index(result.msd.size() - 1);
    for (std::size_t n = first; n < result.msd.size(); ++n) {
        if (result.msd[n] < kFitFloor * d0) break;
        const double bound = d0 * std::exp(exponent * result.times[n]);
        if (result.msd[n] - sigmas * result.msd_stderr[n] > bound) out.push_back(n);
    }
    return out;
}

bool decreasing_within_margin(const EnsembleResult& result, double sigmas) {
    if (result.msd.size() < 2) return true;
    const std::size_t first = fit_start_index(result.msd.size() - 1);
    for (std::size_t n = first; n + 1 < result.msd.size(); ++n) {
        const double margin = sigmas * std::hypot(result.msd_stderr[n], result.msd_stderr[n + 1]);
        if (result.msd[n + 1] > result.msd[n] + margin) return false;
    }
    return true;
}

ExperimentTable contractivity_experiment(const SdeProblem& problem, const ProblemConstants& constants, Scheme scheme,
                                         double theta, std::span<const double> dt_list, const Vector& x0,
                                         const Vector& y0, const EnsembleOptions& options) {
    if (dt_list.empty()) throw UsageError("experiment: the stepsize list is empty");
    ExperimentTable table;
    table.problem = problem.label();
    table.scheme = scheme;
    table.theta = theta;
    table.constants = constants;
    table.region = region(scheme, constants, theta);
    for (double dt : dt_list) {
        ExperimentRow row;
        row.dt = dt;
        row.inside_region = table.region.contains(dt);
        row.theoretical_exponent = kNaN;
        try {
            const double factor = contraction_factor(scheme, constants, theta, dt);
            if (factor > 0.0) row.theoretical_exponent = std::log(factor) / dt;
        } catch (const DomainError&) {
        }
        try {
            MethodConfig config;
            config.scheme = scheme;
            config.theta = theta;
            config.dt = dt;
            row.result = run_ensemble(problem, config, x0, y0, options, constants);
        } catch (const Error& e) {
            row.error = e.what();
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace msc
