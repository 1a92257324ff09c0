#include "msc/errors.hpp"
#include "msc/sde_model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace {

using msc::Matrix;
using msc::Vector;

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

TEST(SdeModel, Problem1DriftAndDiffusion) {
    const auto p = msc::builtin_problem("problem1");
    EXPECT_EQ(p.n(), 1);
    EXPECT_EQ(p.m(), 1);
    EXPECT_DOUBLE_EQ(p.drift(vec({2.0}))[0], -16.0);
    EXPECT_DOUBLE_EQ(p.diffusion(vec({-1.5}))(0, 0), -1.5);
    EXPECT_DOUBLE_EQ(p.drift_jacobian(vec({2.0}))(0, 0), -16.0);
    EXPECT_TRUE(p.commutative_noise());
    EXPECT_DOUBLE_EQ(p.horizon(), 10.0);
}

TEST(SdeModel, Problem2DriftAndDiffusion) {
    const auto p = msc::builtin_problem("problem2");
    EXPECT_DOUBLE_EQ(p.drift(vec({0.3}))[0], -1.5);
    EXPECT_DOUBLE_EQ(p.diffusion(vec({0.3}))(0, 0), std::sin(0.3));
    EXPECT_DOUBLE_EQ(p.diffusion_column_derivative(vec({0.3}), 0)(0, 0), std::cos(0.3));
}

TEST(SdeModel, Problem3Shapes) {
    const auto p = msc::builtin_problem("problem3");
    EXPECT_EQ(p.n(), 2);
    EXPECT_EQ(p.m(), 2);
    const Matrix g = p.diffusion(vec({1.0, 2.0}));
    EXPECT_NEAR(g(0, 0), 1.0 / 7.0, 1e-15);
    EXPECT_NEAR(g(0, 1), 3.0 / 7.0, 1e-15);
    EXPECT_NEAR(g(1, 0), 2.5 / 7.0, 1e-15);
    EXPECT_NEAR(g(1, 1), -1.0 / 7.0, 1e-15);
    const Vector f = p.drift(vec({1.0, 2.0}));
    EXPECT_NEAR(f[0], -4.0 * std::sin(1.0), 1e-15);
    EXPECT_NEAR(f[1], -4.0 * std::sin(2.0), 1e-15);
}

TEST(SdeModel, PresetConstants) {
    const auto& c1 = msc::builtin_problem("problem1").preset_constants();
    EXPECT_DOUBLE_EQ(c1.L, 1.0);
    EXPECT_DOUBLE_EQ(c1.mu, -4.0);
    EXPECT_DOUBLE_EQ(c1.M, 16.0);
    EXPECT_DOUBLE_EQ(c1.alpha(), -7.0);
    EXPECT_EQ(c1.mu_source, msc::Provenance::paper_preset);
    const auto& c2 = msc::builtin_problem("problem2").preset_constants();
    EXPECT_DOUBLE_EQ(c2.alpha(), -9.0);
    const auto& c3 = msc::builtin_problem("problem3").preset_constants();
    EXPECT_DOUBLE_EQ(c3.L, 0.148);
    EXPECT_DOUBLE_EQ(c3.mu, -3.56);
}

TEST(SdeModel, ValidateRejectsNegativeConstants) {
    auto c = msc::ProblemConstants::uniform(-1.0, -4.0, 16.0, 1.0, msc::Provenance::user_supplied);
    EXPECT_THROW(c.validate(), msc::DomainError);
    c.L = 1.0;
    c.M = -1.0;
    EXPECT_THROW(c.validate(), msc::DomainError);
    c.M = 1.0;
    c.M_tilde = -0.1;
    EXPECT_THROW(c.validate(), msc::DomainError);
}

TEST(SdeModel, UnknownProblemListsNames) {
    try {
        msc::builtin_problem("problem9");
        FAIL() << "expected LookupError";
    } catch (const msc::LookupError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("problem1"), std::string::npos);
        EXPECT_NE(msg.find("linear"), std::string::npos);
    }
}

TEST(SdeModel, AnalyticDerivativesMatchFiniteDifferences) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (const auto& name : msc::builtin_problem_names()) {
        const auto p = msc::builtin_problem(name);
        msc::DriftFn f = [&p](const Vector& x) { return p.drift(x); };
        msc::DiffusionFn g = [&p](const Vector& x) { return p.diffusion(x); };
        for (int trial = 0; trial < 100; ++trial) {
            Vector x(p.n());
            for (int i = 0; i < p.n(); ++i) x[i] = u(rng);
            const Matrix fd = msc::finite_difference_jacobian(f, x);
            EXPECT_LE((p.drift_jacobian(x) - fd).norm(), 1e-6 * (1.0 + fd.norm())) << name;
            for (int j = 0; j < p.m(); ++j) {
                const Matrix fdg = msc::finite_difference_column_derivative(g, x, j);
                EXPECT_LE((p.diffusion_column_derivative(x, j) - fdg).norm(), 1e-6 * (1.0 + fdg.norm())) << name;
            }
        }
    }
}

TEST(SdeModel, MissingDerivativeWithoutFiniteDifferences) {
    msc::SdeDefinition d;
    d.label = "bare";
    d.drift = [](const Vector& x) { return Vector(-x); };
    d.diffusion = [](const Vector& x) { return Matrix(x); };
    EXPECT_THROW(msc::SdeProblem{d}, msc::UnsupportedProblemError);
    d.allow_finite_differences = true;
    const msc::SdeProblem p(d);
    EXPECT_FALSE(p.derivatives_are_analytic());
    EXPECT_NEAR(p.drift_jacobian(vec({0.7}))(0, 0), -1.0, 1e-8);
    EXPECT_NEAR(p.diffusion_column_derivative(vec({0.7}), 0)(0, 0), 1.0, 1e-8);
}

TEST(SdeModel, RejectsMalformedDefinitions) {
    msc::SdeDefinition d;
    d.label = "bad";
    EXPECT_THROW(msc::SdeProblem{d}, msc::UsageError);
    d.drift = [](const Vector& x) { return x; };
    d.diffusion = [](const Vector& x) { return Matrix(x); };
    d.allow_finite_differences = true;
    d.n = 0;
    EXPECT_THROW(msc::SdeProblem{d}, msc::UsageError);
    d.n = 1;
    d.horizon = 0.0;
    EXPECT_THROW(msc::SdeProblem{d}, msc::UsageError);
}

TEST(SdeModel, ScalarNoiseIsAlwaysCommutative) {
    msc::SdeDefinition d;
    d.drift = [](const Vector& x) { return x; };
    d.diffusion = [](const Vector& x) { return Matrix(x); };
    d.allow_finite_differences = true;
    d.commutative_noise = false;
    EXPECT_TRUE(msc::SdeProblem(d).commutative_noise());
}

TEST(SdeModel, MissingPresetThrowsLookup) {
    msc::SdeDefinition d;
    d.drift = [](const Vector& x) { return x; };
    d.diffusion = [](const Vector& x) { return Matrix(x); };
    d.allow_finite_differences = true;
    const msc::SdeProblem p(d);
    EXPECT_FALSE(p.has_preset_constants());
    EXPECT_THROW(p.preset_constants(), msc::LookupError);
}

TEST(SdeModel, WithHorizonKeepsEverythingElse) {
    const auto p = msc::builtin_problem("problem2");
    const auto q = p.with_horizon(3.0);
    EXPECT_DOUBLE_EQ(q.horizon(), 3.0);
    EXPECT_EQ(q.label(), p.label());
    EXPECT_DOUBLE_EQ(q.drift(vec({1.0}))[0], -5.0);
    EXPECT_THROW(p.with_horizon(-1.0), msc::UsageError);
}

TEST(SdeModel, OperatorTableProblem1) {
    // L^1 g^1 = g g' = x for g(x) = x.
    const auto p = msc::builtin_problem("problem1");
    const auto t = msc::evaluate_levy_free_correction(p, vec({1.7}));
    EXPECT_DOUBLE_EQ(t(0, 0)[0], 1.7);
}

TEST(SdeModel, OperatorTableProblem2) {
    // L^1 g^1 = sin(x) cos(x).
    const auto p = msc::builtin_problem("problem2");
    const auto t = msc::evaluate_levy_free_correction(p, vec({0.4}));
    EXPECT_NEAR(t(0, 0)[0], std::sin(0.4) * std::cos(0.4), 1e-15);
}

TEST(SdeModel, OperatorTableProblem3AtOnes) {
    const auto p = msc::builtin_problem("problem3");
    const auto t = msc::evaluate_operator_table(p, vec({1.0, 1.0}));
    EXPECT_NEAR(t(0, 0)[0], 1.0 / 49.0, 1e-15);
    EXPECT_NEAR(t(0, 0)[1], 2.5 / 49.0, 1e-15);
    // L^1 g^2 = (3.75 x1, -1.25 x1)/49 and L^2 g^1 = (1.5 x2, 3.75 x2)/49.
    EXPECT_NEAR(t(0, 1)[0], 3.75 / 49.0, 1e-15);
    EXPECT_NEAR(t(0, 1)[1], -1.25 / 49.0, 1e-15);
    EXPECT_NEAR(t(1, 0)[0], 1.5 / 49.0, 1e-15);
    EXPECT_NEAR(t(1, 0)[1], 3.75 / 49.0, 1e-15);
}

TEST(SdeModel, OperatorTableAgreesWithFiniteDifferenceOracle) {
    const auto p = msc::builtin_problem("problem3");
    const Vector x = vec({0.3, -1.2});
    const auto t = msc::evaluate_operator_table(p, x);
    const double h = 1e-6;
    for (int j1 = 0; j1 < 2; ++j1) {
        for (int j2 = 0; j2 < 2; ++j2) {
            // Directional derivative of g^{j2} along g^{j1}.
            const Vector dir = p.diffusion(x).col(j1);
            const Vector oracle =
                (p.diffusion(x + h * dir).col(j2) - p.diffusion(x - h * dir).col(j2)) / (2.0 * h);
            EXPECT_NEAR((t(j1, j2) - oracle).norm(), 0.0, 1e-9);
        }
    }
}

TEST(SdeModel, Problem3IsNotCommutative) {
    const auto p = msc::builtin_problem("problem3");
    EXPECT_FALSE(p.commutative_noise());
    EXPECT_GT(msc::commutativity_defect(p, vec({1.0, 1.0})), 0.0);
    EXPECT_THROW(msc::evaluate_levy_free_correction(p, vec({1.0, 1.0})), msc::UnsupportedProblemError);
    EXPECT_DOUBLE_EQ(msc::commutativity_defect(msc::builtin_problem("problem1"), vec({2.0})), 0.0);
}

TEST(SdeModel, LinearProblemConstants) {
    const auto p = msc::linear_problem(-3.0, 0.5);
    const auto& c = p.preset_constants();
    EXPECT_DOUBLE_EQ(c.L, 0.25);
    EXPECT_DOUBLE_EQ(c.mu, -3.0);
    EXPECT_DOUBLE_EQ(c.M, 9.0);
    EXPECT_DOUBLE_EQ(c.M_tilde, 0.0625);
}

TEST(SdeModel, DefaultInitialData) {
    const auto p = msc::builtin_problem("problem3");
    EXPECT_EQ(p.default_x0(), Vector::Ones(2));
    EXPECT_EQ(p.default_y0(), Vector::Zero(2));
}

TEST(SdeModel, ProvenanceNames) {
    EXPECT_EQ(msc::to_string(msc::Provenance::estimated), "estimated");
    EXPECT_EQ(msc::to_string(msc::Provenance::user_supplied), "user-supplied");
    EXPECT_EQ(msc::to_string(msc::Provenance::paper_preset), "paper-preset");
}

}  // namespace
