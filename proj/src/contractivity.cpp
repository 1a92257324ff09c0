#include "msc/contractivity.hpp"

#include "msc/errors.hpp"

#include <fmt/format.h>

#include <cmath>

namespace msc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double implicit_denominator(const ProblemConstants& c, double theta, double dt) {
    const double den = 1.0 - 2.0 * theta * c.mu * dt;
    if (!(den > 0.0)) {
        throw DomainError(fmt::format("1 - 2 theta mu dt = {} is not positive (theta={}, mu={}, dt={})", den, theta,
                                      c.mu, dt));
    }
    return den;
}

void check_inputs(double theta, double dt) {
    if (!(theta >= 0.0 && theta <= 1.0)) throw UsageError(fmt::format("theta must lie in [0,1], got {}", theta));
    if (!(dt >= 0.0)) throw UsageError(fmt::format("dt must be nonnegative, got {}", dt));
}

double log_rate(double factor, double dt, const char* name) {
    if (!(factor > 0.0)) {
        throw DomainError(fmt::format("{} = {} is not positive: non-contractive, exponent undefined", name, factor));
    }
    return std::log(factor) / dt;
}

}  // namespace

double beta_maruyama(const ProblemConstants& c, double theta, double dt) {
    check_inputs(theta, dt);
    const double one_minus = 1.0 - theta;
    return 1.0 + (c.alpha() + one_minus * one_minus * c.M * dt) / implicit_denominator(c, theta, dt) * dt;
}

double gamma_milstein(const ProblemConstants& c, double theta, double dt) {
    const double beta = beta_maruyama(c, theta, dt);
    return beta + 3.0 * c.M_tilde * dt * dt / (4.0 * implicit_denominator(c, theta, dt));
}

double nu_maruyama(const ProblemConstants& c, double theta, double dt) {
    return log_rate(beta_maruyama(c, theta, dt), dt, "beta");
}

double eps_milstein(const ProblemConstants& c, double theta, double dt) {
    return log_rate(gamma_milstein(c, theta, dt), dt, "gamma");
}

double contraction_factor(Scheme scheme, const ProblemConstants& c, double theta, double dt) {
    return scheme == Scheme::milstein ? gamma_milstein(c, theta, dt) : beta_maruyama(c, theta, dt);
}

double contraction_exponent(Scheme scheme, const ProblemConstants& c, double theta, double dt) {
    return scheme == Scheme::milstein ? eps_milstein(c, theta, dt) : nu_maruyama(c, theta, dt);
}

Region region(Scheme scheme, const ProblemConstants& c, double theta) {
    check_inputs(theta, 0.0);
    const double alpha = c.alpha();
    Region r;
    if (!(alpha < 0.0)) {
        r.empty = true;
        r.diagnostic = fmt::format("alpha = 2 mu + L = {} >= 0: the problem is not mean-square contractive", alpha);
        return r;
    }
    const double one_minus = 1.0 - theta;
    const double mterm = one_minus * one_minus * c.M;
    double den = 0.0;
    double num = std::abs(alpha);
    if (scheme == Scheme::maruyama) {
        den = theta == 1.0 ? 0.0 : mterm;
    } else {
        num = 4.0 * std::abs(alpha);
        den = theta == 1.0 ? 3.0 * c.M_tilde : 4.0 * mterm + 3.0 * c.M_tilde;
    }
    r.sup = den > 0.0 ? num / den : kInf;
    return r;
}

double expansion_coefficient(Scheme scheme, const ProblemConstants& c, double theta) {
    const double alpha = c.alpha();
    const double one_minus = 1.0 - theta;
    double c1 = 2.0 * alpha * c.mu * theta + one_minus * one_minus * c.M - 0.5 * alpha * alpha;
    if (scheme == Scheme::milstein) c1 += 0.75 * c.M_tilde;
    return c1;
}

LinearStability linear_ms_stable(Scheme scheme, double theta, double dt, std::complex<double> lambda,
                                 std::complex<double> mu_diff) {
    check_inputs(theta, dt);
    const std::complex<double> den = 1.0 - theta * dt * lambda;
    if (std::abs(den) == 0.0) throw DomainError("1 - theta dt lambda vanishes");
    const std::complex<double> explicit_part = 1.0 + (1.0 - theta) * dt * lambda;

    LinearStability out;
    if (scheme == Scheme::maruyama) {
        out.factor = (std::norm(explicit_part) + dt * std::norm(mu_diff)) / std::norm(den);
    } else {
        const std::complex<double> mu2 = mu_diff * mu_diff;
        const std::complex<double> beta = (explicit_part - 0.5 * mu2 * dt) / den;
        const std::complex<double> value =
            beta * beta + beta * mu2 * dt / den + (mu2 * dt + 0.75 * mu2 * mu2 * dt * dt) / (den * den);
        out.factor = std::abs(value);
    }
    out.stable = out.factor < 1.0;
    return out;
}

CompatibilityReport compatibility_check(Scheme scheme, const ProblemConstants& c, double theta,
                                        std::span<const double> dt_samples, std::complex<double> lambda,
                                        std::complex<double> mu_diff) {
    CompatibilityReport report;
    const Region r = region(scheme, c, theta);
    if (r.empty) return report;
    for (double dt : dt_samples) {
        if (!r.contains(dt)) {
            report.skipped.push_back(dt);
            continue;
        }
        const auto ls = linear_ms_stable(scheme, theta, dt, lambda, mu_diff);
        CompatibilityEntry e{dt, ls.factor, ls.stable};
        report.entries.push_back(e);
        if (!ls.stable) report.violations.push_back(e);
    }
    return report;
}

std::vector<double> region_samples(const Region& r, std::size_t count) {
    std::vector<double> out;
    if (r.empty || !std::isfinite(r.sup)) return out;
    out.reserve(count);
    for (std::size_t k = 1; k <= count; ++k) {
        out.push_back(r.sup * static_cast<double>(k) / static_cast<double>(count + 1));
    }
    return out;
}

ContractivityReport analyze(Scheme scheme, const ProblemConstants& c, double theta, double dt,
                            std::optional<LinearSurrogate> surrogate) {
    c.validate();
    ContractivityReport rep;
    rep.scheme = scheme;
    rep.theta = theta;
    rep.dt = dt;
    rep.constants = c;
    rep.factor = contraction_factor(scheme, c, theta, dt);
    rep.exponent = rep.factor > 0.0 ? std::log(rep.factor) / dt : std::numeric_limits<double>::quiet_NaN();
    rep.region = region(scheme, c, theta);
    rep.contractive = rep.factor > 0.0 && rep.factor < 1.0;
    rep.unconditional = rep.region.unconditional();
    rep.expansion = expansion_coefficient(scheme, c, theta);
    if (surrogate) {
        rep.surrogate = surrogate;
        rep.linear_compatible = linear_ms_stable(scheme, theta, dt, surrogate->lambda, surrogate->mu_diff).stable;
    }
    return rep;
}

namespace {

nlohmann::json number_or_null(double v) {
    if (std::isfinite(v)) return v;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return nullptr;
}

nlohmann::json complex_json(std::complex<double> z) { return nlohmann::json::array({z.real(), z.imag()}); }

}  // namespace

nlohmann::json to_json(const ProblemConstants& c) {
    return {
        {"L", c.L},
        {"mu", c.mu},
        {"M", c.M},
        {"M_tilde", c.M_tilde},
        {"alpha", c.alpha()},
        {"provenance",
         {{"L", to_string(c.L_source)},
          {"mu", to_string(c.mu_source)},
          {"M", to_string(c.M_source)},
          {"M_tilde", to_string(c.M_tilde_source)}}},
    };
}

nlohmann::json to_json(const Region& r) {
    nlohmann::json j = {{"empty", r.empty}, {"sup", number_or_null(r.empty ? 0.0 : r.sup)},
                        {"unconditional", r.unconditional()}};
    if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
    return j;
}

nlohmann::json to_json(const ContractivityReport& r) {
    nlohmann::json j = {
        {"scheme", to_string(r.scheme)},
        {"theta", r.theta},
        {"dt", r.dt},
        {"constants", to_json(r.constants)},
        {r.scheme == Scheme::milstein ? "gamma" : "beta", number_or_null(r.factor)},
        {r.scheme == Scheme::milstein ? "eps" : "nu", number_or_null(r.exponent)},
        {"region", to_json(r.region)},
        {"contractive", r.contractive},
        {"unconditional", r.unconditional},
        {"expansion_coefficient", r.expansion},
    };
    if (r.linear_compatible) j["linear_compatible"] = *r.linear_compatible;
    if (r.surrogate) {
        j["linear_surrogate"] = {{"lambda", complex_json(r.surrogate->lambda)},
                                 {"mu_diff", complex_json(r.surrogate->mu_diff)}};
    }
    return j;
}

}  // namespace msc
