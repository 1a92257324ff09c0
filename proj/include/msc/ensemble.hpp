#pragma once

#include "msc/contractivity.hpp"
#include "msc/estimation.hpp"
#include "msc/integrators.hpp"
#include "msc/sde_model.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace msc {

struct EnsembleOptions {
    std::size_t paths = 2000;
    std::uint64_t seed = 42;
    // Affects wall time only; results are identical for every worker count.
    unsigned workers = 1;
};

// Inclusive index range [first, last] of the least-squares fit.
struct FitWindow {
    std::size_t first = 0;
    std::size_t last = 0;
};

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    FitWindow window;
};

// Relative floor below which squared deviations are excluded from fits.
inline constexpr double kFitFloor = 1e-24;
// Leading fraction of steps skipped by the default fit window.
inline constexpr double kFitSkipFraction = 0.05;

// Least-squares slope of ln(msd) against t. The window starts after the first
// 5% of steps and stops before the first value below 1e-24 * msd[0] (or any
// non-positive value). Throws FitError with fewer than 3 usable points.
SlopeFit fit_log_slope(std::span<const double> times, std::span<const double> msd);

// Default first index of the fit window for a series with `steps` steps.
std::size_t fit_start_index(std::size_t steps);

struct EnsembleResult {
    std::vector<double> times;
    std::vector<double> msd;         // (1/P) sum_j |X_n^j - Y_n^j|^2
    std::vector<double> msd_stderr;  // standard error of msd across paths
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    MethodConfig config;
    double fitted_slope = 0.0;  // NaN when no fit was possible
    FitWindow fit_window;
    std::string fit_note;
    double theoretical_exponent = 0.0;  // NaN when undefined or no constants supplied
};

// Coupled pairs sharing one Wiener path each; pair j uses substream j of the seed.
std::vector<TrajectoryPair> simulate_pairs(const SdeProblem& problem, const MethodConfig& config, const Vector& x0,
                                           const Vector& y0, const EnsembleOptions& options);

EnsembleResult run_ensemble(const SdeProblem& problem, const MethodConfig& config, const Vector& x0, const Vector& y0,
                            const EnsembleOptions& options,
                            const std::optional<ProblemConstants>& constants = std::nullopt);

// Refits the default window of an existing result.
double fit_slope(const EnsembleResult& result);

// Indices n in the fit window where msd[n] - sigmas * stderr[n] exceeds
// msd[0] * exp(exponent * t_n).
std::vector<std::size_t> bound_violations(const EnsembleResult& result, double exponent, double sigmas = 3.0);

// True when msd[n+1] <= msd[n] + sigmas * sqrt(se_n^2 + se_{n+1}^2) for every
// n from the default fit start to the end of the series.
bool decreasing_within_margin(const EnsembleResult& result, double sigmas = 3.0);

struct ExperimentRow {
    double dt = 0.0;
    bool inside_region = false;
    double theoretical_exponent = 0.0;
    std::optional<EnsembleResult> result;
    std::string error;
};

struct ExperimentTable {
    std::string problem;
    Scheme scheme = Scheme::maruyama;
    double theta = 0.0;
    ProblemConstants constants;
    Region region;
    std::vector<ExperimentRow> rows;
};

// One ensemble per stepsize. Errors are recorded per row and do not stop the
// remaining rows.
ExperimentTable contractivity_experiment(const SdeProblem& problem, const ProblemConstants& constants, Scheme scheme,
                                         double theta, std::span<const double> dt_list, const Vector& x0,
                                         const Vector& y0, const EnsembleOptions& options);

}  // namespace msc
