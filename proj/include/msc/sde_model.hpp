#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace msc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Provenance { user_supplied, estimated, paper_preset };

std::string_view to_string(Provenance p);

// Constants that drive the contractivity analysis. alpha is always derived
// from mu and L so the two can never drift apart.
struct ProblemConstants {
    double L = 0.0;
    double mu = 0.0;
    double M = 0.0;
    double M_tilde = 0.0;

    Provenance L_source = Provenance::user_supplied;
    Provenance mu_source = Provenance::user_supplied;
    Provenance M_source = Provenance::user_supplied;
    Provenance M_tilde_source = Provenance::user_supplied;

    double alpha() const noexcept { return 2.0 * mu + L; }

    // Throws DomainError on negative L, M or M_tilde.
    void validate() const;

    static ProblemConstants uniform(double L, double mu, double M, double M_tilde,
                                    Provenance source);
};

using DriftFn = std::function<Vector(const Vector&)>;
using DiffusionFn = std::function<Matrix(const Vector&)>;
using JacobianFn = std::function<Matrix(const Vector&)>;
// (x, j) -> n x n matrix whose (r, k) entry is d g^{r,j} / d x^k.
using ColumnDerivativeFn = std::function<Matrix(const Vector&, int)>;

// Everything needed to build an SdeProblem. Derivative callbacks may be left
// empty when allow_finite_differences is set.
struct SdeDefinition {
    std::string label;
    int n = 1;
    int m = 1;
    DriftFn drift;
    DiffusionFn diffusion;
    JacobianFn drift_jacobian;
    ColumnDerivativeFn diffusion_column_derivative;
    bool commutative_noise = true;
    double horizon = 10.0;
    bool allow_finite_differences = false;
    std::optional<ProblemConstants> preset_constants;
    std::optional<Vector> default_x0;
    std::optional<Vector> default_y0;
};

// Autonomous Ito SDE dX = f(X) dt + g(X) dW with X in R^n and W in R^m.
// Immutable after construction; the callbacks must be re-entrant so one
// instance can be shared by concurrent ensemble workers.
class SdeProblem {
public:
    explicit SdeProblem(SdeDefinition def);

    const std::string& label() const noexcept { return def_.label; }
    int n() const noexcept { return def_.n; }
    int m() const noexcept { return def_.m; }
    bool commutative_noise() const noexcept { return def_.commutative_noise; }
    double horizon() const noexcept { return def_.horizon; }
    bool derivatives_are_analytic() const noexcept { return analytic_jacobian_ && analytic_column_derivative_; }

    Vector drift(const Vector& x) const;
    Matrix diffusion(const Vector& x) const;
    Matrix drift_jacobian(const Vector& x) const;
    Matrix diffusion_column_derivative(const Vector& x, int j) const;

    bool has_preset_constants() const noexcept { return def_.preset_constants.has_value(); }
    // Throws LookupError when the problem carries no preset.
    const ProblemConstants& preset_constants() const;

    Vector default_x0() const;
    Vector default_y0() const;

    SdeProblem with_horizon(double horizon) const;

private:
    SdeDefinition def_;
    bool analytic_jacobian_ = true;
    bool analytic_column_derivative_ = true;
};

// Central finite differences with step 1e-6 * (1 + |x_k|).
Matrix finite_difference_jacobian(const DriftFn& f, const Vector& x);
Matrix finite_difference_column_derivative(const DiffusionFn& g, const Vector& x, int j);

// Table of L^{j1} g^{j2}(x) = sum_k g^{k,j1}(x) d g^{j2}/d x^k for all pairs.
class CorrectionTable {
public:
    CorrectionTable(int m, std::vector<Vector> entries) : m_(m), entries_(std::move(entries)) {}

    int m() const noexcept { return m_; }
    const Vector& operator()(int j1, int j2) const { return entries_.at(static_cast<std::size_t>(j1 * m_ + j2)); }

private:
    int m_;
    std::vector<Vector> entries_;
};

// Throws UnsupportedProblemError for problems flagged non-commutative with m > 1.
CorrectionTable evaluate_levy_free_correction(const SdeProblem& problem, const Vector& x);

// Same table without the commutativity gate, for diagnostics.
CorrectionTable evaluate_operator_table(const SdeProblem& problem, const Vector& x);

// max_{j1 != j2} |L^{j1} g^{j2}(x) - L^{j2} g^{j1}(x)|; zero for commutative noise.
double commutativity_defect(const SdeProblem& problem, const Vector& x);

// Registered names: problem1, problem2, problem3, linear.
SdeProblem builtin_problem(std::string_view name);
std::vector<std::string> builtin_problem_names();

// Scalar geometric test equation dX = lambda X dt + sigma X dW.
SdeProblem linear_problem(double lambda, double sigma);

}  // namespace msc
