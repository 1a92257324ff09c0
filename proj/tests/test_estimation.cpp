#include "msc/ensemble.hpp"
#include "msc/errors.hpp"
#include "msc/estimation.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace {

using msc::Vector;

msc::EstimationConfig pairs(std::size_t q, std::uint64_t seed = 42) {
    msc::EstimationConfig c;
    c.pairs = q;
    c.seed = seed;
    return c;
}

TEST(Estimation, LinearDiffusionGivesExactL) {
    // |x - y|^2 / |x - y|^2 for g(x) = x.
    const auto p = msc::builtin_problem("problem1");
    EXPECT_NEAR(msc::estimate_L(p, msc::SampleBox::unit(1), pairs(1000)), 1.0, 1e-12);
}

TEST(Estimation, LinearDriftGivesExactMu) {
    const auto p = msc::builtin_problem("problem2");
    EXPECT_NEAR(msc::estimate_mu(p, msc::SampleBox::unit(1), pairs(1000)), -5.0, 1e-12);
}

TEST(Estimation, Problem1MuApproachesSupFromBelow) {
    // <x-y, f(x)-f(y)>/|x-y|^2 = -4 - (x^2 + xy + y^2), sup -4 at the origin.
    const auto p = msc::builtin_problem("problem1");
    const double mu = msc::estimate_mu(p, msc::SampleBox::unit(1), pairs(10000));
    EXPECT_LE(mu, -4.0);
    EXPECT_GE(mu, -4.05);
    auto c = pairs(10000);
    c.mu_rule = msc::MuRule::min;
    const double lo = msc::estimate_mu(p, msc::SampleBox::unit(1), c);
    EXPECT_GE(lo, -7.0);
    EXPECT_LE(lo, -6.8);
}

TEST(Estimation, Problem3LBoundedByAnalyticSup) {
    // |G d|_F^2 = (7.25 d1^2 + 2.5 d2^2)/49 for the constant coefficient matrix G.
    const auto p = msc::builtin_problem("problem3");
    const double L = msc::estimate_L(p, msc::SampleBox::unit(2), pairs(20000));
    EXPECT_LE(L, 7.25 / 49.0 + 1e-15);
    EXPECT_GE(L, 0.13);
}

TEST(Estimation, EstimatesGrowWithPairCount) {
    const auto p = msc::builtin_problem("problem3");
    const auto box = msc::SampleBox::unit(2);
    double prev_L = -1.0, prev_mu = -1e300;
    for (std::size_t q : {10u, 100u, 1000u, 5000u}) {
        const double L = msc::estimate_L(p, box, pairs(q));
        const double mu = msc::estimate_mu(p, box, pairs(q));
        EXPECT_GE(L, prev_L);
        EXPECT_GE(mu, prev_mu);
        prev_L = L;
        prev_mu = mu;
    }
}

TEST(Estimation, SeedDeterminism) {
    const auto p = msc::builtin_problem("problem1");
    const auto box = msc::SampleBox::unit(1);
    EXPECT_EQ(msc::estimate_mu(p, box, pairs(500, 1)), msc::estimate_mu(p, box, pairs(500, 1)));
    EXPECT_NE(msc::estimate_mu(p, box, pairs(500, 1)), msc::estimate_mu(p, box, pairs(500, 2)));
}

TEST(Estimation, DegenerateAndMismatchedBoxes) {
    const auto p = msc::builtin_problem("problem1");
    const msc::SampleBox point{Vector::Constant(1, 0.5), Vector::Constant(1, 0.5)};
    EXPECT_THROW(msc::estimate_L(p, point, pairs(10)), msc::EstimationError);
    EXPECT_THROW(msc::estimate_L(p, msc::SampleBox::unit(2), pairs(10)), msc::UsageError);
    const msc::SampleBox inverted{Vector::Constant(1, 1.0), Vector::Constant(1, 0.0)};
    EXPECT_THROW(msc::estimate_mu(p, inverted, pairs(10)), msc::UsageError);
    EXPECT_THROW(msc::estimate_mu(p, msc::SampleBox::unit(1), pairs(0)), msc::UsageError);
}

TEST(Estimation, BoxDegenerateInOneComponentStillWorks) {
    const auto p = msc::builtin_problem("problem3");
    msc::SampleBox box{Vector::Zero(2), Vector::Ones(2)};
    box.upper[1] = 0.0;
    // Only d1 varies, so every quotient equals 7.25/49.
    EXPECT_NEAR(msc::estimate_L(p, box, pairs(100)), 7.25 / 49.0, 1e-14);
}

msc::Trajectory constant_trajectory(const Vector& x, std::size_t len) {
    msc::Trajectory t;
    for (std::size_t n = 0; n < len; ++n) {
        t.times.push_back(static_cast<double>(n));
        t.states.push_back(x);
    }
    return t;
}

TEST(Estimation, SampleBoxCoversStates) {
    std::vector<msc::Trajectory> ts = {constant_trajectory(Vector::Constant(1, -2.0), 3),
                                       constant_trajectory(Vector::Constant(1, 5.0), 3)};
    ts[0].states[1][0] = -3.0;
    const auto box = msc::sample_box(ts);
    EXPECT_DOUBLE_EQ(box.lower[0], -3.0);
    EXPECT_DOUBLE_EQ(box.upper[0], 5.0);
    EXPECT_THROW(msc::sample_box(std::span<const msc::Trajectory>{}), msc::UsageError);
}

TEST(Estimation, MIsLargestMeanSquaredJacobian) {
    const auto p = msc::builtin_problem("problem1");
    // f'(x) = -4 - 3x^2: f'(0)^2 = 16, f'(1)^2 = 49.
    std::vector<msc::Trajectory> ts = {constant_trajectory(Vector::Zero(1), 2),
                                       constant_trajectory(Vector::Zero(1), 2)};
    ts[0].states[1][0] = 1.0;
    EXPECT_DOUBLE_EQ(msc::estimate_M(p, ts), (49.0 + 16.0) / 2.0);
    ts[1].states.pop_back();
    EXPECT_THROW(msc::estimate_M(p, ts), msc::UsageError);
}

TEST(Estimation, MTildeExactForGeometricNoise) {
    // v = sigma^2 x, so every ratio equals sigma^4.
    const double sigma = 0.8;
    const auto p = msc::linear_problem(-4.0, sigma).with_horizon(2.0);
    msc::MethodConfig cfg;
    cfg.dt = 0.1;
    const auto pr = msc::simulate_pairs(p, cfg, Vector::Constant(1, 1.0), Vector::Constant(1, 0.2), {50, 42, 1});
    EXPECT_NEAR(msc::estimate_M_tilde(p, pr), std::pow(sigma, 4), 1e-12);
}

TEST(Estimation, MTildeVanishesForAdditiveNoise) {
    msc::SdeDefinition d;
    d.drift = [](const Vector& x) { return Vector(-x); };
    d.diffusion = [](const Vector&) { return msc::Matrix::Constant(1, 1, 0.5); };
    d.drift_jacobian = [](const Vector&) { return msc::Matrix::Constant(1, 1, -1.0); };
    d.diffusion_column_derivative = [](const Vector&, int) { return msc::Matrix::Zero(1, 1).eval(); };
    const msc::SdeProblem p(d);
    msc::MethodConfig cfg;
    const auto pr = msc::simulate_pairs(p.with_horizon(1.0), cfg, Vector::Constant(1, 1.0), Vector::Zero(1), {10, 42, 1});
    EXPECT_EQ(msc::estimate_M_tilde(p, pr), 0.0);
}

TEST(Estimation, MTildeNeedsSeparatedPairs) {
    const auto p = msc::builtin_problem("problem1").with_horizon(1.0);
    msc::MethodConfig cfg;
    const auto pr = msc::simulate_pairs(p, cfg, Vector::Zero(1), Vector::Zero(1), {5, 42, 1});
    EXPECT_THROW(msc::estimate_M_tilde(p, pr), msc::EstimationError);
}

TEST(EstimationConfig, Validation) {
    msc::EstimationConfig c;
    c.paths = 0;
    EXPECT_THROW(c.validate(), msc::UsageError);
    c.paths = 1;
    c.degeneracy_eps = 0.0;
    EXPECT_THROW(c.validate(), msc::UsageError);
}

TEST(Estimation, SampleBoxHandExamples) {
    msc::Trajectory t;
    t.states = {Vector(2), Vector(2)};
    t.states[0] << 1.0, 2.0;
    t.states[1] << 1.0, 2.0;
    const std::vector<msc::Trajectory> one = {t};
    const auto box = msc::sample_box(one);
    EXPECT_EQ(box.lower, t.states[0]);
    EXPECT_EQ(box.upper, t.states[0]);

    msc::Trajectory a, b;
    for (double v : {0.0, 1.0, -0.5}) a.states.push_back(Vector::Constant(1, v));
    for (double v : {2.0, 0.25}) b.states.push_back(Vector::Constant(1, v));
    const std::vector<msc::Trajectory> two = {a, b};
    const auto box2 = msc::sample_box(two);
    EXPECT_EQ(box2.lower[0], -0.5);
    EXPECT_EQ(box2.upper[0], 2.0);
}

TEST(Estimation, ImplicitEulerEnsembleBoxCoversDecay) {
    const auto p = msc::builtin_problem("problem1");
    msc::MethodConfig cfg;
    cfg.theta = 1.0;
    cfg.dt = 0.25;
    const auto pairs = msc::simulate_pairs(p, cfg, p.default_x0(), p.default_y0(), {100, 42, 1});
    std::vector<msc::Trajectory> xs;
    for (const auto& pr : pairs) xs.push_back(pr.first);
    const auto box = msc::sample_box(xs);
    EXPECT_LE(box.lower[0], 0.0);
    EXPECT_GE(box.upper[0], 1.0);
}

TEST(Estimation, SineDiffusionL) {
    const auto p = msc::builtin_problem("problem2");
    const msc::SampleBox box{Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)};
    const double L = msc::estimate_L(p, box, pairs(100000));
    EXPECT_LE(L, 1.0 + 1e-12);
    EXPECT_GE(L, 0.95);
}

TEST(Estimation, Problem1MuOnSymmetricBox) {
    const auto p = msc::builtin_problem("problem1");
    const msc::SampleBox box{Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)};
    const double mu = msc::estimate_mu(p, box, pairs(100000));
    EXPECT_GE(mu, -4.01);
    EXPECT_LE(mu, -4.0);
}

msc::SdeProblem scalar_drift(msc::DriftFn f, msc::JacobianFn jac) {
    msc::SdeDefinition d;
    d.drift = std::move(f);
    d.diffusion = [](const Vector& x) { return msc::Matrix(x); };
    d.drift_jacobian = std::move(jac);
    d.diffusion_column_derivative = [](const Vector&, int) { return msc::Matrix::Ones(1, 1).eval(); };
    return msc::SdeProblem(d);
}

TEST(Estimation, ExpansiveLinearDrift) {
    const auto p = scalar_drift([](const Vector& x) { return x; }, [](const Vector&) { return msc::Matrix::Ones(1, 1).eval(); });
    EXPECT_NEAR(msc::estimate_mu(p, msc::SampleBox::unit(1), pairs(1000)), 1.0, 1e-12);
}

TEST(Estimation, MForLinearAndConstantDrift) {
    const auto lin = msc::builtin_problem("problem2");
    std::vector<msc::Trajectory> ts = {constant_trajectory(Vector::Constant(1, 0.3), 4),
                                       constant_trajectory(Vector::Constant(1, -2.0), 4)};
    EXPECT_DOUBLE_EQ(msc::estimate_M(lin, ts), 25.0);
    const auto flat = scalar_drift([](const Vector&) { return Vector::Constant(1, 3.0); },
                                   [](const Vector&) { return msc::Matrix::Zero(1, 1).eval(); });
    EXPECT_EQ(msc::estimate_M(flat, ts), 0.0);
}

TEST(Estimation, MExceedsPresetForProblem1) {
    // f'(1) = -7 at the deterministic initial state.
    const auto p = msc::builtin_problem("problem1");
    msc::MethodConfig cfg;
    cfg.dt = 0.25;
    const auto pairs = msc::simulate_pairs(p, cfg, p.default_x0(), p.default_y0(), {50, 42, 1});
    std::vector<msc::Trajectory> xs;
    for (const auto& pr : pairs) xs.push_back(pr.first);
    EXPECT_GE(msc::estimate_M(p, xs), 49.0 - 1e-12);
}

TEST(Estimation, MTildeProblem1IsOne) {
    const auto p = msc::builtin_problem("problem1");
    msc::MethodConfig cfg;
    cfg.dt = 0.25;
    const auto pr = msc::simulate_pairs(p.with_horizon(2.0), cfg, p.default_x0(), p.default_y0(), {50, 42, 1});
    EXPECT_NEAR(msc::estimate_M_tilde(p, pr), 1.0, 1e-12);
}

TEST(Estimation, MTildeProblem2BoundedByOne) {
    const auto p = msc::builtin_problem("problem2");
    msc::MethodConfig cfg;
    cfg.dt = 0.25;
    const auto pr = msc::simulate_pairs(p.with_horizon(2.0), cfg, p.default_x0(), p.default_y0(), {200, 42, 1});
    const double mt = msc::estimate_M_tilde(p, pr);
    EXPECT_LE(mt, 1.0 + 1e-12);
    EXPECT_GT(mt, 0.0);
}

}  // namespace
