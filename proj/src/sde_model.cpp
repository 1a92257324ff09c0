#include "msc/sde_model.hpp"

#include "msc/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numbers>

namespace msc {

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::user_supplied: return "user-supplied";
        case Provenance::estimated: return "estimated";
        case Provenance::paper_preset: return "paper-preset";
    }
    return "unknown";
}

void ProblemConstants::validate() const {
    if (!(L >= 0.0)) throw DomainError(fmt::format("Lipschitz constant L must be nonnegative, got {}", L));
    if (!(M >= 0.0)) throw DomainError(fmt::format("constant M must be nonnegative, got {}", M));
    if (!(M_tilde >= 0.0)) throw DomainError(fmt::format("constant M_tilde must be nonnegative, got {}", M_tilde));
    if (!std::isfinite(mu)) throw DomainError("one-sided Lipschitz constant mu must be finite");
}

ProblemConstants ProblemConstants::uniform(double L, double mu, double M, double M_tilde, Provenance source) {
    ProblemConstants c;
    c.L = L;
    c.mu = mu;
    c.M = M;
    c.M_tilde = M_tilde;
    c.L_source = c.mu_source = c.M_source = c.M_tilde_source = source;
    return c;
}

Matrix finite_difference_jacobian(const DriftFn& f, const Vector& x) {
    const auto n = x.size();
    Matrix jac(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double h = 1e-6 * (1.0 + std::abs(x[k]));
        Vector xp = x;
        Vector xm = x;
        xp[k] += h;
        xm[k] -= h;
        jac.col(k) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return jac;
}

Matrix finite_difference_column_derivative(const DiffusionFn& g, const Vector& x, int j) {
    const auto n = x.size();
    Matrix d(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double h = 1e-6 * (1.0 + std::abs(x[k]));
        Vector xp = x;
        Vector xm = x;
        xp[k] += h;
        xm[k] -= h;
        d.col(k) = (g(xp).col(j) - g(xm).col(j)) / (2.0 * h);
    }
    return d;
}

SdeProblem::SdeProblem(SdeDefinition def) : def_(std::move(def)) {
    if (def_.n < 1 || def_.m < 1) {
        throw UsageError(fmt::format("problem '{}': dimensions must be positive (n={}, m={})", def_.label, def_.n, def_.m));
    }
    if (!def_.drift || !def_.diffusion) {
        throw UsageError(fmt::format("problem '{}': drift and diffusion are required", def_.label));
    }
    if (!(def_.horizon > 0.0)) {
        throw UsageError(fmt::format("problem '{}': horizon must be positive", def_.label));
    }
    if (!def_.drift_jacobian) {
        if (!def_.allow_finite_differences) {
            throw UnsupportedProblemError(
                fmt::format("problem '{}': drift Jacobian missing and finite differences not allowed", def_.label));
        }
        analytic_jacobian_ = false;
        def_.drift_jacobian = [f = def_.drift](const Vector& x) { return finite_difference_jacobian(f, x); };
    }
    if (!def_.diffusion_column_derivative) {
        if (!def_.allow_finite_differences) {
            throw UnsupportedProblemError(fmt::format(
                "problem '{}': diffusion derivative missing and finite differences not allowed", def_.label));
        }
        analytic_column_derivative_ = false;
        def_.diffusion_column_derivative = [g = def_.diffusion](const Vector& x, int j) {
            return finite_difference_column_derivative(g, x, j);
        };
    }
    if (def_.preset_constants) def_.preset_constants->validate();
    if (def_.m == 1) def_.commutative_noise = true;
}

Vector SdeProblem::drift(const Vector& x) const { return def_.drift(x); }

Matrix SdeProblem::diffusion(const Vector& x) const {
    Matrix g = def_.diffusion(x);
    if (g.rows() != def_.n || g.cols() != def_.m) {
        throw UsageError(fmt::format("problem '{}': diffusion returned {}x{}, expected {}x{}", def_.label, g.rows(),
                                     g.cols(), def_.n, def_.m));
    }
    return g;
}

Matrix SdeProblem::drift_jacobian(const Vector& x) const { return def_.drift_jacobian(x); }

Matrix SdeProblem::diffusion_column_derivative(const Vector& x, int j) const {
    return def_.diffusion_column_derivative(x, j);
}

const ProblemConstants& SdeProblem::preset_constants() const {
    if (!def_.preset_constants) throw LookupError(fmt::format("problem '{}' has no preset constants", def_.label));
    return *def_.preset_constants;
}

Vector SdeProblem::default_x0() const { return def_.default_x0 ? *def_.default_x0 : Vector::Ones(def_.n); }

Vector SdeProblem::default_y0() const { return def_.default_y0 ? *def_.default_y0 : Vector::Zero(def_.n); }

SdeProblem SdeProblem::with_horizon(double horizon) const {
    SdeProblem copy = *this;
    if (!(horizon > 0.0)) throw UsageError("horizon must be positive");
    copy.def_.horizon = horizon;
    return copy;
}

CorrectionTable evaluate_operator_table(const SdeProblem& problem, const Vector& x) {
    const int m = problem.m();
    const Matrix g = problem.diffusion(x);
    std::vector<Vector> entries;
    entries.reserve(static_cast<std::size_t>(m * m));
    std::vector<Matrix> derivs;
    derivs.reserve(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) derivs.push_back(problem.diffusion_column_derivative(x, j));
    for (int j1 = 0; j1 < m; ++j1) {
        for (int j2 = 0; j2 < m; ++j2) {
            // L^{j1} g^{j2} = (d g^{j2} / dx) * g^{j1}
            entries.emplace_back(derivs[static_cast<std::size_t>(j2)] * g.col(j1));
        }
    }
    return CorrectionTable(m, std::move(entries));
}

CorrectionTable evaluate_levy_free_correction(const SdeProblem& problem, const Vector& x) {
    if (!problem.commutative_noise()) {
        throw UnsupportedProblemError(fmt::format(
            "problem '{}' does not have commutative noise; Levy-area terms are not supported", problem.label()));
    }
    return evaluate_operator_table(problem, x);
}

double commutativity_defect(const SdeProblem& problem, const Vector& x) {
    const auto table = evaluate_operator_table(problem, x);
    double worst = 0.0;
    for (int j1 = 0; j1 < table.m(); ++j1) {
        for (int j2 = j1 + 1; j2 < table.m(); ++j2) {
            worst = std::max(worst, (table(j1, j2) - table(j2, j1)).norm());
        }
    }
    return worst;
}

namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

Matrix scalar_matrix(double v) { return Matrix::Constant(1, 1, v); }

SdeProblem make_problem1() {
    SdeDefinition d;
    d.label = "problem1";
    d.drift = [](const Vector& x) { return scalar(-4.0 * x[0] - x[0] * x[0] * x[0]); };
    d.diffusion = [](const Vector& x) { return scalar_matrix(x[0]); };
    d.drift_jacobian = [](const Vector& x) { return scalar_matrix(-4.0 - 3.0 * x[0] * x[0]); };
    d.diffusion_column_derivative = [](const Vector&, int) { return scalar_matrix(1.0); };
    d.preset_constants = ProblemConstants::uniform(1.0, -4.0, 16.0, 1.0, Provenance::paper_preset);
    d.default_x0 = scalar(1.0);
    d.default_y0 = scalar(0.0);
    return SdeProblem(std::move(d));
}

SdeProblem make_problem2() {
    SdeDefinition d;
    d.label = "problem2";
    d.drift = [](const Vector& x) { return scalar(-5.0 * x[0]); };
    d.diffusion = [](const Vector& x) { return scalar_matrix(std::sin(x[0])); };
    d.drift_jacobian = [](const Vector&) { return scalar_matrix(-5.0); };
    d.diffusion_column_derivative = [](const Vector& x, int) { return scalar_matrix(std::cos(x[0])); };
    d.preset_constants = ProblemConstants::uniform(1.0, -5.0, 25.0, 1.0, Provenance::paper_preset);
    d.default_x0 = scalar(1.0);
    d.default_y0 = scalar(0.0);
    return SdeProblem(std::move(d));
}

// The two noise columns act on different state components, so
// L^1 g^2 != L^2 g^1 away from the axes and the problem is flagged
// non-commutative. Only the Maruyama family applies to it.
SdeProblem make_problem3() {
    SdeDefinition d;
    d.label = "problem3";
    d.n = 2;
    d.m = 2;
    d.drift = [](const Vector& x) {
        Vector f(2);
        f << -4.0 * std::sin(x[0]), -4.0 * std::sin(x[1]);
        return f;
    };
    d.diffusion = [](const Vector& x) {
        Matrix g(2, 2);
        g << x[0], 1.5 * x[1], 2.5 * x[0], -0.5 * x[1];
        return Matrix(g / 7.0);
    };
    d.drift_jacobian = [](const Vector& x) {
        Matrix j = Matrix::Zero(2, 2);
        j(0, 0) = -4.0 * std::cos(x[0]);
        j(1, 1) = -4.0 * std::cos(x[1]);
        return j;
    };
    d.diffusion_column_derivative = [](const Vector&, int col) {
        Matrix dg = Matrix::Zero(2, 2);
        if (col == 0) {
            dg(0, 0) = 1.0;
            dg(1, 0) = 2.5;
        } else {
            dg(0, 1) = 1.5;
            dg(1, 1) = -0.5;
        }
        return Matrix(dg / 7.0);
    };
    d.commutative_noise = false;
    // No M_tilde is published for this problem; Milstein does not apply to it.
    d.preset_constants = ProblemConstants::uniform(0.148, -3.56, 16.0, 0.0, Provenance::paper_preset);
    d.default_x0 = Vector::Ones(2);
    d.default_y0 = Vector::Zero(2);
    return SdeProblem(std::move(d));
}

}  // namespace

SdeProblem linear_problem(double lambda, double sigma) {
    SdeDefinition d;
    d.label = "linear";
    d.drift = [lambda](const Vector& x) { return Vector(lambda * x); };
    d.diffusion = [sigma](const Vector& x) { return scalar_matrix(sigma * x[0]); };
    d.drift_jacobian = [lambda](const Vector&) { return scalar_matrix(lambda); };
    d.diffusion_column_derivative = [sigma](const Vector&, int) { return scalar_matrix(sigma); };
    // Exact constants: |g(x)-g(y)|^2 = sigma^2 |x-y|^2, f' = lambda, L^1 g^1 = sigma^2 x.
    d.preset_constants =
        ProblemConstants::uniform(sigma * sigma, lambda, lambda * lambda, std::pow(sigma, 4), Provenance::paper_preset);
    d.default_x0 = scalar(1.0);
    d.default_y0 = scalar(0.0);
    return SdeProblem(std::move(d));
}

std::vector<std::string> builtin_problem_names() { return {"problem1", "problem2", "problem3", "linear"}; }

SdeProblem builtin_problem(std::string_view name) {
    if (name == "problem1") return make_problem1();
    if (name == "problem2") return make_problem2();
    if (name == "problem3") return make_problem3();
    if (name == "linear") return linear_problem(-4.0, 1.0);
    throw LookupError(fmt::format("unknown problem '{}'; valid names: {}", name,
                                  fmt::join(builtin_problem_names(), ", ")));
}

}  // namespace msc
