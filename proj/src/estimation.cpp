#include "msc/estimation.hpp"

#include "msc/errors.hpp"
#include "msc/summation.hpp"
#include "msc/wiener.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace msc {

namespace {

// Stream tag separating pair sampling from the Wiener path substreams.
constexpr std::uint64_t kPairStream = 0x5a17'e5d1'0c0f'fee5ULL;

void check_box(const SdeProblem& problem, const SampleBox& box) {
    if (box.lower.size() != problem.n() || box.upper.size() != problem.n()) {
        throw UsageError(fmt::format("sample box has dimension {}, problem expects {}", box.lower.size(), problem.n()));
    }
    bool any_width = false;
    for (Eigen::Index i = 0; i < box.lower.size(); ++i) {
        if (!(box.lower[i] <= box.upper[i])) throw UsageError("sample box: lower bound exceeds upper bound");
        any_width = any_width || box.upper[i] > box.lower[i];
    }
    if (!any_width) throw EstimationError("sample box is degenerate in every component");
}

// Draws Q pairs (x, y) uniformly from box x box, resampling pairs closer than
// degeneracy_eps, and folds quotient(x, y) with the reducer.
template <class Quotient, class Reduce>
double sample_quotients(const SampleBox& box, const EstimationConfig& config, Quotient quotient, Reduce reduce,
                        double init) {
    auto engine = substream_engine(config.seed, kPairStream);
    const auto n = box.lower.size();
    std::vector<std::uniform_real_distribution<double>> dists;
    dists.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) dists.emplace_back(box.lower[i], box.upper[i]);

    Vector x(n);
    Vector y(n);
    double acc = init;
    for (std::size_t q = 0; q < config.pairs; ++q) {
        int attempts = 0;
        do {
            if (++attempts > 1000) throw EstimationError("could not draw a nondegenerate pair from the sample box");
            for (Eigen::Index i = 0; i < n; ++i) {
                auto& d = dists[static_cast<std::size_t>(i)];
                x[i] = d(engine);
                y[i] = d(engine);
            }
        } while ((x - y).norm() < config.degeneracy_eps);
        acc = reduce(acc, quotient(x, y));
    }
    return acc;
}

}  // namespace

void EstimationConfig::validate() const {
    if (paths < 1) throw UsageError("estimation: path count P must be at least 1");
    if (pairs < 1) throw UsageError("estimation: pair count Q must be at least 1");
    if (!(degeneracy_eps > 0.0)) throw UsageError("estimation: degeneracy_eps must be positive");
}

SampleBox sample_box(std::span<const Trajectory> trajectories) {
    if (trajectories.empty()) throw UsageError("sample_box needs at least one trajectory");
    const auto n = trajectories.front().states.front().size();
    SampleBox box{Vector::Constant(n, std::numeric_limits<double>::infinity()),
                  Vector::Constant(n, -std::numeric_limits<double>::infinity())};
    for (const auto& traj : trajectories) {
        for (const auto& s : traj.states) {
            if (s.size() != n) throw UsageError("sample_box: trajectories have inconsistent dimensions");
            box.lower = box.lower.cwiseMin(s);
            box.upper = box.upper.cwiseMax(s);
        }
    }
    return box;
}

double estimate_L(const SdeProblem& problem, const SampleBox& box, const EstimationConfig& config) {
    config.validate();
    check_box(problem, box);
    return sample_quotients(
        box, config,
        [&](const Vector& x, const Vector& y) {
            return (problem.diffusion(x) - problem.diffusion(y)).squaredNorm() / (x - y).squaredNorm();
        },
        [](double a, double b) { return std::max(a, b); }, 0.0);
}

double estimate_mu(const SdeProblem& problem, const SampleBox& box, const EstimationConfig& config) {
    config.validate();
    check_box(problem, box);
    auto quotient = [&](const Vector& x, const Vector& y) {
        const Vector d = x - y;
        return d.dot(problem.drift(x) - problem.drift(y)) / d.squaredNorm();
    };
    if (config.mu_rule == MuRule::min) {
        return sample_quotients(box, config, quotient, [](double a, double b) { return std::min(a, b); },
                                std::numeric_limits<double>::infinity());
    }
    return sample_quotients(box, config, quotient, [](double a, double b) { return std::max(a, b); },
                            -std::numeric_limits<double>::infinity());
}

double estimate_M(const SdeProblem& problem, std::span<const Trajectory> trajectories) {
    if (trajectories.empty()) throw UsageError("estimate_M needs at least one trajectory");
    const std::size_t len = trajectories.front().states.size();
    for (const auto& t : trajectories) {
        if (t.states.size() != len) throw UsageError("estimate_M: trajectories must share one time grid");
    }
    double best = 0.0;
    for (std::size_t n = 0; n < len; ++n) {
        CompensatedSum sum;
        for (const auto& t : trajectories) sum.add(problem.drift_jacobian(t.states[n]).squaredNorm());
        best = std::max(best, sum.value() / static_cast<double>(trajectories.size()));
    }
    return best;
}

namespace {

// v[(i*m + j)*n + k] = g^{k,i}(x) * d g^j / d x^k, an n-vector.
std::vector<Vector> operator_terms(const SdeProblem& problem, const Vector& x) {
    const int n = problem.n();
    const int m = problem.m();
    const Matrix g = problem.diffusion(x);
    std::vector<Matrix> derivs;
    derivs.reserve(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) derivs.push_back(problem.diffusion_column_derivative(x, j));
    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>(m * m * n));
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            for (int k = 0; k < n; ++k) out.emplace_back(g(k, i) * derivs[static_cast<std::size_t>(j)].col(k));
        }
    }
    return out;
}

}  // namespace

double estimate_M_tilde(const SdeProblem& problem, std::span<const TrajectoryPair> pairs) {
    if (pairs.empty()) throw UsageError("estimate_M_tilde needs at least one coupled pair");
    const std::size_t len = pairs.front().first.states.size();
    for (const auto& [x, y] : pairs) {
        if (x.states.size() != len || y.states.size() != len) {
            throw UsageError("estimate_M_tilde: coupled pairs must share one time grid");
        }
    }
    const int n = problem.n();
    const int m = problem.m();
    const std::size_t blocks = static_cast<std::size_t>(m * m);
    const std::size_t terms = blocks * static_cast<std::size_t>(n * n);
    std::vector<double> sup(terms, -std::numeric_limits<double>::infinity());
    bool any_time = false;
    const double count = static_cast<double>(pairs.size());

    for (std::size_t t = 0; t < len; ++t) {
        std::vector<CompensatedSum> h_sum(terms);
        CompensatedSum dev_sum;
        for (const auto& [xs, ys] : pairs) {
            const Vector& x = xs.states[t];
            const Vector& y = ys.states[t];
            dev_sum.add((x - y).squaredNorm());
            const auto vx = operator_terms(problem, x);
            const auto vy = operator_terms(problem, y);
            for (std::size_t b = 0; b < blocks; ++b) {
                for (int k = 0; k < n; ++k) {
                    const Vector dk = vx[b * n + k] - vy[b * n + k];
                    for (int l = 0; l < n; ++l) {
                        const Vector dl = vx[b * n + l] - vy[b * n + l];
                        h_sum[(b * n + k) * n + l].add(dk.dot(dl));
                    }
                }
            }
        }
        const double denom = dev_sum.value() / count;
        if (denom < 1e-300) continue;
        any_time = true;
        for (std::size_t idx = 0; idx < terms; ++idx) {
            sup[idx] = std::max(sup[idx], (h_sum[idx].value() / count) / denom);
        }
    }
    if (!any_time) throw EstimationError("mean-square deviation vanished at every grid time");
    CompensatedSum total;
    for (double s : sup) total.add(s);
    return std::max(0.0, total.value());
}

}  // namespace msc
