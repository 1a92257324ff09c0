#pragma once

#include "msc/integrators.hpp"
#include "msc/sde_model.hpp"

#include <nlohmann/json.hpp>

#include <complex>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace msc {

// Mean-square contraction factor of the theta-Maruyama method:
//   beta = 1 + (alpha + (1-theta)^2 M dt) dt / (1 - 2 theta mu dt).
// Throws DomainError when 1 - 2 theta mu dt <= 0.
double beta_maruyama(const ProblemConstants& c, double theta, double dt);

// beta plus the Milstein correction 3 M_tilde dt^2 / (4 (1 - 2 theta mu dt)).
double gamma_milstein(const ProblemConstants& c, double theta, double dt);

// ln(beta)/dt and ln(gamma)/dt. Throw DomainError when the factor is not positive.
double nu_maruyama(const ProblemConstants& c, double theta, double dt);
double eps_milstein(const ProblemConstants& c, double theta, double dt);

double contraction_factor(Scheme scheme, const ProblemConstants& c, double theta, double dt);
double contraction_exponent(Scheme scheme, const ProblemConstants& c, double theta, double dt);

// Stepsize interval (0, sup) on which the contraction factor lies in (0, 1).
struct Region {
    bool empty = false;
    double sup = 0.0;  // +inf when unconditional
    std::string diagnostic;

    bool unconditional() const noexcept { return !empty && sup == std::numeric_limits<double>::infinity(); }
    bool contains(double dt) const noexcept { return !empty && dt > 0.0 && dt < sup; }
};

Region region(Scheme scheme, const ProblemConstants& c, double theta);

// First-order coefficient c1 in exponent(dt) = alpha + c1 dt + O(dt^2).
double expansion_coefficient(Scheme scheme, const ProblemConstants& c, double theta);

struct LinearStability {
    double factor = 0.0;
    bool stable = false;
};

// Mean-square amplification of the method on dX = lambda X dt + mu X dW.
// Throws DomainError if 1 - theta dt lambda vanishes.
LinearStability linear_ms_stable(Scheme scheme, double theta, double dt, std::complex<double> lambda,
                                 std::complex<double> mu_diff);

struct CompatibilityEntry {
    double dt = 0.0;
    double factor = 0.0;
    bool stable = false;
};

struct CompatibilityReport {
    std::vector<CompatibilityEntry> entries;   // samples inside the region
    std::vector<CompatibilityEntry> violations;
    std::vector<double> skipped;               // samples outside the region

    bool compatible() const noexcept { return violations.empty(); }
};

CompatibilityReport compatibility_check(Scheme scheme, const ProblemConstants& c, double theta,
                                        std::span<const double> dt_samples, std::complex<double> lambda,
                                        std::complex<double> mu_diff);

// count equally spaced stepsizes strictly inside a finite region.
std::vector<double> region_samples(const Region& r, std::size_t count);

struct LinearSurrogate {
    std::complex<double> lambda;
    std::complex<double> mu_diff;
};

struct ContractivityReport {
    Scheme scheme = Scheme::maruyama;
    double theta = 0.0;
    double dt = 0.0;
    ProblemConstants constants;
    double factor = 0.0;    // beta or gamma
    double exponent = 0.0;  // nu or eps, NaN when factor <= 0
    Region region;
    bool contractive = false;
    bool unconditional = false;
    std::optional<bool> linear_compatible;
    std::optional<LinearSurrogate> surrogate;
    double expansion = 0.0;
};

ContractivityReport analyze(Scheme scheme, const ProblemConstants& c, double theta, double dt,
                            std::optional<LinearSurrogate> surrogate = std::nullopt);

nlohmann::json to_json(const ProblemConstants& c);
nlohmann::json to_json(const Region& r);
nlohmann::json to_json(const ContractivityReport& r);

}  // namespace msc
