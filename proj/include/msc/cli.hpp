#pragma once

#include "msc/ensemble.hpp"
#include "msc/estimation.hpp"
#include "msc/integrators.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace msc::cli {

// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "MSC_OUTPUT_DIR";

enum class ConstantsSource { paper_preset, estimated, file };

struct ExperimentConfig {
    std::string problem = "problem1";
    Scheme scheme = Scheme::maruyama;
    double theta = 0.5;
    std::vector<double> dt;  // empty: command default (preset sweep or 0.25)
    std::size_t paths = 2000;
    std::size_t pairs = 10000;
    std::uint64_t seed = 42;
    std::optional<double> horizon;
    ConstantsSource constants_source = ConstantsSource::paper_preset;
    std::string constants_file;
    std::optional<double> L;
    std::optional<double> mu;
    std::optional<double> M;
    std::optional<double> M_tilde;
    std::string output_dir;
    std::vector<std::string> formats = {"csv", "json"};
    std::string preset;
    MuRule mu_rule = MuRule::max;
    std::optional<std::vector<double>> x0;
    std::optional<std::vector<double>> y0;
    unsigned workers = 1;

    // Throws UsageError naming the violated constraint.
    void validate() const;
    bool wants(std::string_view format) const;
};

// Keys accepted in a configuration file; anything else is rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);

// Result-affecting fields only: workers and output_dir are omitted so files
// written with different worker counts or destinations stay byte-identical.
nlohmann::json to_json(const ExperimentConfig& c);

struct FigurePreset {
    std::string name;
    std::string problem;
    Scheme scheme;
    double theta;
    std::string description;
};

const std::vector<FigurePreset>& figure_presets();

// Applies a named preset (problem, scheme, theta). Throws LookupError.
void apply_preset(ExperimentConfig& config, std::string_view name);

// Default sweep {2, 1, 0.5, 0.25, 0.125}, keeping values <= 2 * region sup.
std::vector<double> default_dt_sweep(const Region& r);

// Constants selected by the config: source, then per-field overrides tagged user-supplied.
ProblemConstants resolve_constants(const ExperimentConfig& config, const SdeProblem& problem);

struct EstimateOutcome {
    ProblemConstants constants;
    SampleBox box;
    bool M_tilde_estimated = false;
};

// Simulates P coupled pairs and estimates L, mu, M (and M_tilde for Milstein).
EstimateOutcome run_estimation(const ExperimentConfig& config, const SdeProblem& problem);

// Entry point shared by the executable and the tests. Returns the exit code:
// 0 success (including negative verdicts), 1 runtime error, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace msc::cli
