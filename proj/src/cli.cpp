#include "msc/cli.hpp"

#include "msc/contractivity.hpp"
#include "msc/errors.hpp"
#include "msc/rational.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

namespace msc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string_view to_string(ConstantsSource s) {
    switch (s) {
        case ConstantsSource::paper_preset: return "paper-preset";
        case ConstantsSource::estimated: return "estimated";
        case ConstantsSource::file: return "file";
    }
    return "unknown";
}

ConstantsSource parse_constants_source(std::string_view s) {
    if (s == "paper-preset" || s == "preset") return ConstantsSource::paper_preset;
    if (s == "estimated") return ConstantsSource::estimated;
    if (s == "file") return ConstantsSource::file;
    throw UsageError(fmt::format("unknown constants source '{}'; expected paper-preset, estimated or file", s));
}

MuRule parse_mu_rule(std::string_view s) {
    if (s == "max") return MuRule::max;
    if (s == "min") return MuRule::min;
    throw UsageError(fmt::format("unknown mu rule '{}'; expected min or max", s));
}

std::string_view to_string(MuRule r) { return r == MuRule::max ? "max" : "min"; }

// Accepts a JSON number or a string such as "13/20".
double number_from_json(const json& v, std::string_view key) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return parse_number(v.get<std::string>());
    throw UsageError(fmt::format("config key '{}' must be a number", key));
}

std::vector<double> numbers_from_json(const json& v, std::string_view key) {
    std::vector<double> out;
    if (v.is_array()) {
        for (const auto& e : v) out.push_back(number_from_json(e, key));
    } else {
        out.push_back(number_from_json(v, key));
    }
    return out;
}

std::vector<double> parse_number_list(const std::vector<std::string>& items) {
    std::vector<double> out;
    out.reserve(items.size());
    for (const auto& s : items) out.push_back(parse_number(s));
    return out;
}

// Short, file-name friendly rendering of a stepsize or theta.
std::string tag(double v) { return fmt::format("{:g}", v); }

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return fmt::format("{:.17g}", v);
}

json json_number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return nullptr;
}

fs::path output_dir(const ExperimentConfig& c) {
    if (!c.output_dir.empty()) return c.output_dir;
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
    return ".";
}

std::ofstream open_output(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(fmt::format("cannot open '{}' for writing", path.string()));
    return f;
}

Vector to_vector(const std::vector<double>& v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
    return out;
}

std::vector<double> from_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

SdeProblem load_problem(const ExperimentConfig& c) {
    auto problem = builtin_problem(c.problem);
    if (c.horizon) problem = problem.with_horizon(*c.horizon);
    return problem;
}

Vector initial(const std::optional<std::vector<double>>& given, const Vector& fallback, int n, const char* name) {
    if (!given) return fallback;
    if (static_cast<int>(given->size()) != n) {
        throw UsageError(fmt::format("{} must have {} components, got {}", name, n, given->size()));
    }
    return to_vector(*given);
}

MethodConfig method_for(const ExperimentConfig& c, double dt) {
    MethodConfig m;
    m.scheme = c.scheme;
    m.theta = c.theta;
    m.dt = dt;
    m.validate();
    return m;
}

std::string comment_header(const ExperimentConfig& c, const ProblemConstants* constants) {
    std::string s = "# config: " + to_json(c).dump() + "\n";
    if (constants) s += "# constants: " + msc::to_json(*constants).dump() + "\n";
    return s;
}

void write_file(const fs::path& path, const std::string& content) {
    auto f = open_output(path);
    f << content;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (!(theta >= 0.0 && theta <= 1.0)) throw UsageError(fmt::format("theta must lie in [0,1], got {}", theta));
    for (double d : dt) {
        if (!(d > 0.0) || !std::isfinite(d)) throw UsageError(fmt::format("dt must be positive, got {}", d));
    }
    if (paths < 1) throw UsageError("paths must be at least 1");
    if (pairs < 1) throw UsageError("pairs must be at least 1");
    if (horizon && !(*horizon > 0.0)) throw UsageError("horizon must be positive");
    if (constants_source == ConstantsSource::file && constants_file.empty()) {
        throw UsageError("constants source 'file' needs constants_file");
    }
    for (const auto& f : formats) {
        if (f != "csv" && f != "json") throw UsageError(fmt::format("unknown output format '{}'", f));
    }
    if (L && *L < 0.0) throw UsageError("L override must be nonnegative");
    if (M && *M < 0.0) throw UsageError("M override must be nonnegative");
    if (M_tilde && *M_tilde < 0.0) throw UsageError("M_tilde override must be nonnegative");
    if (workers < 1) throw UsageError("workers must be at least 1");
    const auto names = builtin_problem_names();
    if (std::find(names.begin(), names.end(), problem) == names.end()) {
        throw UsageError(fmt::format("unknown problem '{}'; valid names: {}", problem, fmt::join(names, ", ")));
    }
}

bool ExperimentConfig::wants(std::string_view format) const {
    return std::find(formats.begin(), formats.end(), format) != formats.end();
}

ExperimentConfig config_from_json(const json& j) {
    if (!j.is_object()) throw UsageError("configuration must be a JSON object");
    ExperimentConfig c;
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "problem") c.problem = v.get<std::string>();
            else if (key == "scheme") c.scheme = parse_scheme(v.get<std::string>());
            else if (key == "theta") c.theta = number_from_json(v, key);
            else if (key == "dt") c.dt = numbers_from_json(v, key);
            else if (key == "paths" || key == "P") c.paths = v.get<std::size_t>();
            else if (key == "pairs" || key == "Q") c.pairs = v.get<std::size_t>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "horizon") c.horizon = v.is_null() ? std::nullopt : std::optional(number_from_json(v, key));
            else if (key == "constants_source") c.constants_source = parse_constants_source(v.get<std::string>());
            else if (key == "constants_file") c.constants_file = v.get<std::string>();
            else if (key == "L") c.L = number_from_json(v, key);
            else if (key == "mu") c.mu = number_from_json(v, key);
            else if (key == "M") c.M = number_from_json(v, key);
            else if (key == "M_tilde") c.M_tilde = number_from_json(v, key);
            else if (key == "output_dir") c.output_dir = v.get<std::string>();
            else if (key == "formats") c.formats = v.get<std::vector<std::string>>();
            else if (key == "preset") c.preset = v.get<std::string>();
            else if (key == "mu_rule") c.mu_rule = parse_mu_rule(v.get<std::string>());
            else if (key == "x0") c.x0 = numbers_from_json(v, key);
            else if (key == "y0") c.y0 = numbers_from_json(v, key);
            else if (key == "workers") c.workers = v.get<unsigned>();
            else throw UsageError(fmt::format("unknown configuration key '{}'", key));
        } catch (const json::exception& e) {
            throw UsageError(fmt::format("configuration key '{}': {}", key, e.what()));
        }
    }
    return c;
}

json to_json(const ExperimentConfig& c) {
    json j = {
        {"problem", c.problem},
        {"scheme", msc::to_string(c.scheme)},
        {"theta", c.theta},
        {"dt", c.dt},
        {"paths", c.paths},
        {"pairs", c.pairs},
        {"seed", c.seed},
        {"constants_source", to_string(c.constants_source)},
        {"formats", c.formats},
        {"mu_rule", to_string(c.mu_rule)},
    };
    if (c.horizon) j["horizon"] = *c.horizon;
    if (!c.constants_file.empty()) j["constants_file"] = c.constants_file;
    if (c.L) j["L"] = *c.L;
    if (c.mu) j["mu"] = *c.mu;
    if (c.M) j["M"] = *c.M;
    if (c.M_tilde) j["M_tilde"] = *c.M_tilde;
    if (!c.preset.empty()) j["preset"] = c.preset;
    if (c.x0) j["x0"] = *c.x0;
    if (c.y0) j["y0"] = *c.y0;
    return j;
}

const std::vector<FigurePreset>& figure_presets() {
    static const std::vector<FigurePreset> presets = {
        {"fig1", "problem1", Scheme::maruyama, 0.5, "Problem 1, stochastic trapezoidal method"},
        {"fig2", "problem1", Scheme::maruyama, 1.0, "Problem 1, implicit Euler-Maruyama"},
        {"fig3", "problem1", Scheme::milstein, 0.5, "Problem 1, theta-Milstein with theta = 1/2"},
        {"fig4", "problem2", Scheme::maruyama, 0.5, "Problem 2, stochastic trapezoidal method"},
        {"fig5", "problem2", Scheme::maruyama, 0.65, "Problem 2, theta-Maruyama with theta = 13/20"},
        {"fig5b", "problem2", Scheme::milstein, 0.65, "Problem 2, theta-Milstein with theta = 13/20"},
        {"fig6", "problem3", Scheme::maruyama, 0.5, "Problem 3, stochastic trapezoidal method"},
        {"fig7", "problem3", Scheme::maruyama, 1.0, "Problem 3, implicit Euler-Maruyama"},
    };
    return presets;
}

void apply_preset(ExperimentConfig& config, std::string_view name) {
    for (const auto& p : figure_presets()) {
        if (p.name == name) {
            config.preset = p.name;
            config.problem = p.problem;
            config.scheme = p.scheme;
            config.theta = p.theta;
            return;
        }
    }
    std::vector<std::string> names;
    for (const auto& p : figure_presets()) names.push_back(p.name);
    throw LookupError(fmt::format("unknown preset '{}'; valid presets: {}", name, fmt::join(names, ", ")));
}

std::vector<double> default_dt_sweep(const Region& r) {
    std::vector<double> out;
    for (double dt : {2.0, 1.0, 0.5, 0.25, 0.125}) {
        if (r.empty || dt <= 2.0 * r.sup) out.push_back(dt);
    }
    if (out.empty()) out.push_back(0.125);
    return out;
}

EstimateOutcome run_estimation(const ExperimentConfig& config, const SdeProblem& problem) {
    EstimationConfig ec;
    ec.paths = config.paths;
    ec.pairs = config.pairs;
    ec.seed = config.seed;
    ec.mu_rule = config.mu_rule;
    ec.validate();

    const double dt = config.dt.empty() ? 0.25 : config.dt.front();
    const MethodConfig method = method_for(config, dt);
    const Vector x0 = initial(config.x0, problem.default_x0(), problem.n(), "x0");
    const Vector y0 = initial(config.y0, problem.default_y0(), problem.n(), "y0");
    EnsembleOptions opts{config.paths, config.seed, config.workers};
    const auto pairs = simulate_pairs(problem, method, x0, y0, opts);

    std::vector<Trajectory> solutions;
    solutions.reserve(pairs.size() * 2);
    for (const auto& [x, y] : pairs) {
        solutions.push_back(x);
        solutions.push_back(y);
    }
    EstimateOutcome out;
    out.box = sample_box(solutions);

    std::vector<Trajectory> from_x0;
    from_x0.reserve(pairs.size());
    for (const auto& pr : pairs) from_x0.push_back(pr.first);

    ProblemConstants& c = out.constants;
    c.L = estimate_L(problem, out.box, ec);
    c.mu = estimate_mu(problem, out.box, ec);
    c.M = estimate_M(problem, from_x0);
    c.L_source = c.mu_source = c.M_source = Provenance::estimated;
    if (config.scheme == Scheme::milstein) {
        c.M_tilde = estimate_M_tilde(problem, pairs);
        c.M_tilde_source = Provenance::estimated;
        out.M_tilde_estimated = true;
    } else if (problem.has_preset_constants()) {
        c.M_tilde = problem.preset_constants().M_tilde;
        c.M_tilde_source = problem.preset_constants().M_tilde_source;
    }
    return out;
}

ProblemConstants resolve_constants(const ExperimentConfig& config, const SdeProblem& problem) {
    ProblemConstants c;
    switch (config.constants_source) {
        case ConstantsSource::paper_preset: c = problem.preset_constants(); break;
        case ConstantsSource::estimated: c = run_estimation(config, problem).constants; break;
        case ConstantsSource::file: {
            std::ifstream f(config.constants_file);
            if (!f) throw UsageError(fmt::format("cannot read constants file '{}'", config.constants_file));
            json j;
            try {
                f >> j;
            } catch (const json::exception& e) {
                throw UsageError(fmt::format("constants file '{}': {}", config.constants_file, e.what()));
            }
            for (const char* key : {"L", "mu", "M"}) {
                if (!j.contains(key)) {
                    throw UsageError(fmt::format("constants file '{}' lacks key '{}'", config.constants_file, key));
                }
            }
            c = ProblemConstants::uniform(number_from_json(j["L"], "L"), number_from_json(j["mu"], "mu"),
                                          number_from_json(j["M"], "M"),
                                          j.contains("M_tilde") ? number_from_json(j["M_tilde"], "M_tilde") : 0.0,
                                          Provenance::user_supplied);
            break;
        }
    }
    if (config.L) {
        c.L = *config.L;
        c.L_source = Provenance::user_supplied;
    }
    if (config.mu) {
        c.mu = *config.mu;
        c.mu_source = Provenance::user_supplied;
    }
    if (config.M) {
        c.M = *config.M;
        c.M_source = Provenance::user_supplied;
    }
    if (config.M_tilde) {
        c.M_tilde = *config.M_tilde;
        c.M_tilde_source = Provenance::user_supplied;
    }
    c.validate();
    return c;
}

namespace {

// --- subcommands -----------------------------------------------------------

int cmd_simulate(const ExperimentConfig& config, std::uint64_t path_index, std::ostream& out) {
    const auto problem = load_problem(config);
    if (config.dt.size() > 1) throw UsageError("simulate takes a single dt");
    const double dt = config.dt.empty() ? 0.25 : config.dt.front();
    const MethodConfig method = method_for(config, dt);
    const Vector x0 = initial(config.x0, problem.default_x0(), problem.n(), "x0");
    const Vector y0 = initial(config.y0, problem.default_y0(), problem.n(), "y0");
    const NoiseGrid grid{dt, step_count(problem.horizon(), dt), problem.m(), config.seed, path_index};
    const auto [xs, ys] = integrate_pair(problem, method, x0, y0, grid);

    std::ostringstream csv;
    csv << comment_header(config, nullptr);
    csv << "# path_index: " << path_index << "\n";
    csv << "t";
    for (int i = 0; i < problem.n(); ++i) csv << ",x" << i + 1;
    for (int i = 0; i < problem.n(); ++i) csv << ",y" << i + 1;
    csv << ",sq_dev\n";
    for (std::size_t n = 0; n < xs.states.size(); ++n) {
        csv << num(xs.times[n]);
        for (int i = 0; i < problem.n(); ++i) csv << ',' << num(xs.states[n][i]);
        for (int i = 0; i < problem.n(); ++i) csv << ',' << num(ys.states[n][i]);
        csv << ',' << num((xs.states[n] - ys.states[n]).squaredNorm()) << '\n';
    }
    const auto path = output_dir(config) / fmt::format("simulate_{}_{}_theta{}_dt{}_path{}.csv", problem.label(),
                                                        msc::to_string(config.scheme), tag(config.theta), tag(dt),
                                                        path_index);
    write_file(path, csv.str());
    out << "wrote " << path.string() << " (" << xs.states.size() << " rows)\n";
    return 0;
}

int cmd_region(const ExperimentConfig& config, bool as_json, std::ostream& out) {
    const auto problem = load_problem(config);
    const auto constants = resolve_constants(config, problem);
    const Region r = region(config.scheme, constants, config.theta);
    const auto exact = exact_region_sup(config.scheme, constants, config.theta);

    std::string verdict;
    if (r.empty) {
        verdict = "not mean-square contractive";
    } else if (r.unconditional()) {
        verdict = "R = (0, ∞), unconditional";
    } else if (exact) {
        verdict = fmt::format("R = (0, {})", format_fraction(*exact));
    } else {
        verdict = fmt::format("R = (0, {})", num(r.sup));
    }

    json report = {
        {"problem", problem.label()},
        {"scheme", msc::to_string(config.scheme)},
        {"theta", config.theta},
        {"constants", msc::to_json(constants)},
        {"region", msc::to_json(r)},
        {"verdict", verdict},
    };
    if (exact && !r.empty && !r.unconditional()) report["region"]["sup_exact"] = format_fraction(*exact);
    for (double dt : config.dt) report["stepsizes"].push_back(msc::to_json(analyze(config.scheme, constants, config.theta, dt)));

    if (as_json) {
        out << report.dump(2) << '\n';
        return 0;
    }
    out << verdict << '\n';
    if (r.empty) {
        out << r.diagnostic << '\n';
    } else if (!r.unconditional()) {
        out << "sup = " << num(r.sup) << '\n';
    }
    out << "alpha = " << num(constants.alpha()) << '\n';
    out << fmt::format("constants: L={} ({}), mu={} ({}), M={} ({}), M_tilde={} ({})\n", num(constants.L),
                       msc::to_string(constants.L_source), num(constants.mu), msc::to_string(constants.mu_source),
                       num(constants.M), msc::to_string(constants.M_source), num(constants.M_tilde),
                       msc::to_string(constants.M_tilde_source));
    for (double dt : config.dt) {
        const auto rep = analyze(config.scheme, constants, config.theta, dt);
        out << fmt::format("dt = {}: {} = {}, {} = {}, {}\n", num(dt), config.scheme == Scheme::milstein ? "gamma" : "beta",
                           num(rep.factor), config.scheme == Scheme::milstein ? "eps" : "nu", num(rep.exponent),
                           rep.contractive ? "contractive" : "non-contractive");
    }
    return 0;
}

std::string experiment_csv(const ExperimentConfig& config, const ProblemConstants& constants,
                           const EnsembleResult& r, double exponent) {
    std::ostringstream csv;
    csv << comment_header(config, &constants);
    csv << "# dt: " << num(r.config.dt) << ", paths: " << r.paths << ", seed: " << r.seed << "\n";
    csv << "t,msd,log_msd,theoretical_bound\n";
    const double d0 = r.msd.front();
    for (std::size_t n = 0; n < r.msd.size(); ++n) {
        const double log_msd = r.msd[n] > 0.0 ? std::log(r.msd[n]) : -std::numeric_limits<double>::infinity();
        const double bound = std::isnan(exponent) ? exponent : d0 * std::exp(exponent * r.times[n]);
        csv << num(r.times[n]) << ',' << num(r.msd[n]) << ',' << num(log_msd) << ',' << num(bound) << '\n';
    }
    return csv.str();
}

int cmd_experiment(ExperimentConfig config, std::ostream& out) {
    const auto problem = load_problem(config);
    const auto constants = resolve_constants(config, problem);
    const Region r = region(config.scheme, constants, config.theta);
    if (config.dt.empty()) config.dt = default_dt_sweep(r);
    config.validate();
    const Vector x0 = initial(config.x0, problem.default_x0(), problem.n(), "x0");
    const Vector y0 = initial(config.y0, problem.default_y0(), problem.n(), "y0");
    EnsembleOptions opts{config.paths, config.seed, config.workers};
    const auto table = contractivity_experiment(problem, constants, config.scheme, config.theta, config.dt, x0, y0, opts);

    const fs::path dir = output_dir(config);
    const std::string stem = config.preset.empty()
                                 ? fmt::format("{}_{}_theta{}", problem.label(), msc::to_string(config.scheme),
                                               tag(config.theta))
                                 : config.preset;
    json manifest = {
        {"config", to_json(config)},
        {"problem", problem.label()},
        {"constants", msc::to_json(constants)},
        {"region", msc::to_json(r)},
        {"fit_method", fmt::format("least-squares slope of ln(msd) vs t; skips the first {}% of steps and stops "
                                   "below {:g} * msd(0)",
                                   kFitSkipFraction * 100.0, kFitFloor)},
    };
    json rows = json::array();
    int failures = 0;
    for (const auto& row : table.rows) {
        json jr = {{"dt", row.dt},
                   {"inside_region", row.inside_region},
                   {"theoretical_exponent", json_number(row.theoretical_exponent)}};
        if (row.result) {
            const auto& res = *row.result;
            jr["fitted_slope"] = json_number(res.fitted_slope);
            jr["fit_window"] = {res.fit_window.first, res.fit_window.last};
            jr["fit_note"] = res.fit_note;
            jr["steps"] = res.msd.size() - 1;
            if (config.wants("csv")) {
                const std::string name = fmt::format("{}_dt{}.csv", stem, tag(row.dt));
                write_file(dir / name, experiment_csv(config, constants, res, row.theoretical_exponent));
                jr["csv"] = name;
            }
            out << fmt::format("dt = {:<8g} inside R: {:<5}  exponent = {:<12.6g} fitted slope = {:.6g}\n", row.dt,
                               row.inside_region ? "yes" : "no", row.theoretical_exponent, res.fitted_slope);
        } else {
            ++failures;
            jr["error"] = row.error;
            out << fmt::format("dt = {:<8g} error: {}\n", row.dt, row.error);
        }
        rows.push_back(std::move(jr));
    }
    manifest["rows"] = std::move(rows);
    if (config.wants("json")) {
        const auto path = dir / (stem + "_manifest.json");
        write_file(path, manifest.dump(2) + "\n");
        out << "wrote " << path.string() << '\n';
    }
    return failures == static_cast<int>(table.rows.size()) ? 1 : 0;
}

int cmd_estimate(const ExperimentConfig& config, std::ostream& out) {
    const auto problem = load_problem(config);
    const auto outcome = run_estimation(config, problem);
    const auto& c = outcome.constants;
    json j = {
        {"L", c.L},
        {"mu", c.mu},
        {"M", c.M},
        {"M_tilde", c.M_tilde},
        {"alpha", c.alpha()},
        {"box", {{"lower", from_vector(outcome.box.lower)}, {"upper", from_vector(outcome.box.upper)}}},
        {"config", to_json(config)},
        {"provenance", "estimated"},
        {"field_provenance", msc::to_json(c)["provenance"]},
    };
    const std::string text = j.dump(2) + "\n";
    out << text;
    if (config.wants("json") && !config.output_dir.empty()) {
        write_file(output_dir(config) / fmt::format("estimate_{}.json", problem.label()), text);
    }
    return 0;
}

struct RasterOptions {
    double x_min = -6.0;
    double x_max = 2.0;
    std::size_t nx = 81;
    double y_min = 0.0;
    double y_max = 4.0;
    std::size_t ny = 41;
};

int cmd_linear_stability(const ExperimentConfig& config, const RasterOptions& ro, std::ostream& out) {
    if (ro.nx < 2 || ro.ny < 2) throw UsageError("raster needs at least 2 points per axis");
    if (!(ro.x_max > ro.x_min) || !(ro.y_max > ro.y_min)) throw UsageError("raster bounds must be increasing");
    if (ro.y_min < 0.0) throw UsageError("dt*mu^2 must be nonnegative");
    std::ostringstream csv;
    csv << comment_header(config, nullptr);
    csv << "dt_lambda,dt_mu2,factor,stable\n";
    std::size_t stable = 0;
    for (std::size_t iy = 0; iy < ro.ny; ++iy) {
        const double y = ro.y_min + (ro.y_max - ro.y_min) * static_cast<double>(iy) / static_cast<double>(ro.ny - 1);
        for (std::size_t ix = 0; ix < ro.nx; ++ix) {
            const double x =
                ro.x_min + (ro.x_max - ro.x_min) * static_cast<double>(ix) / static_cast<double>(ro.nx - 1);
            // With dt = 1 the amplification depends on (dt lambda, dt mu^2) only.
            double factor = std::numeric_limits<double>::infinity();
            bool ok = false;
            try {
                const auto ls = linear_ms_stable(config.scheme, config.theta, 1.0, x, std::sqrt(y));
                factor = ls.factor;
                ok = ls.stable;
            } catch (const DomainError&) {
            }
            stable += ok ? 1 : 0;
            csv << num(x) << ',' << num(y) << ',' << num(factor) << ',' << (ok ? 1 : 0) << '\n';
        }
    }
    const auto path = output_dir(config) /
                      fmt::format("linear_stability_{}_theta{}.csv", msc::to_string(config.scheme), tag(config.theta));
    write_file(path, csv.str());
    out << "wrote " << path.string() << " (" << stable << " of " << ro.nx * ro.ny << " points stable)\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mean-square contractivity analysis of stochastic theta-methods", "msc"};
    app.require_subcommand(1);

    // Values collected from flags; applied on top of the config file.
    std::string config_path;
    std::string problem, scheme, theta, horizon, constants_source, constants_file, output_dir_flag, preset, mu_rule;
    std::string L, mu, M, M_tilde;
    std::vector<std::string> dt, x0, y0, formats;
    std::size_t paths = 0, pairs = 0;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::uint64_t path_index = 0;
    bool as_json = false;
    RasterOptions raster;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON configuration file");
        sub->add_option("--problem", problem, "problem1 | problem2 | problem3 | linear");
        sub->add_option("--scheme", scheme, "maruyama | milstein");
        sub->add_option("--theta", theta, "implicitness parameter in [0,1] (decimal or p/q)");
        sub->add_option("--dt", dt, "stepsize(s)")->delimiter(',');
        sub->add_option("--seed", seed, "master seed (default 42)");
        sub->add_option("--horizon", horizon, "time horizon T");
        sub->add_option("--out", output_dir_flag, fmt::format("output directory (default ${} or .)", kOutputDirEnv));
        sub->add_option("--workers", workers, "worker threads; never changes results");
        sub->add_option("--x0", x0, "initial state X0")->delimiter(',');
        sub->add_option("--y0", y0, "initial state Y0")->delimiter(',');
        sub->add_option("--format", formats, "csv and/or json")->delimiter(',');
    };
    auto add_constants = [&](CLI::App* sub) {
        sub->add_option("--constants", constants_source, "paper-preset | estimated | file");
        sub->add_option("--constants-file", constants_file, "JSON file with L, mu, M, M_tilde");
        sub->add_option("--L", L, "override L");
        sub->add_option("--mu", mu, "override mu");
        sub->add_option("--M", M, "override M");
        sub->add_option("--mtilde", M_tilde, "override M_tilde");
    };
    auto add_estimation = [&](CLI::App* sub) {
        sub->add_option("--paths,-P", paths, "number of coupled path pairs (default 2000)");
        sub->add_option("--pairs,-Q", pairs, "pair samples for L and mu (default 10000)");
        sub->add_option("--mu-rule", mu_rule, "max | min");
    };

    auto* simulate = app.add_subcommand("simulate", "integrate one coupled pair and write a CSV trajectory");
    add_common(simulate);
    simulate->add_option("--path", path_index, "path index of the Wiener substream");

    auto* region_cmd = app.add_subcommand("region", "contractivity region and exponents");
    add_common(region_cmd);
    add_constants(region_cmd);
    add_estimation(region_cmd);
    region_cmd->add_flag("--json", as_json, "print a JSON report");

    auto* experiment = app.add_subcommand("experiment", "mean-square deviation experiment over a dt sweep");
    add_common(experiment);
    add_constants(experiment);
    add_estimation(experiment);
    experiment->add_option("--preset", preset, "fig1 ... fig7, fig5b");

    auto* estimate = app.add_subcommand("estimate", "estimate L, mu, M (and M_tilde for Milstein)");
    add_common(estimate);
    add_estimation(estimate);

    auto* linear = app.add_subcommand("linear-stability", "mean-square stability raster for the linear test equation");
    add_common(linear);
    linear->add_option("--x-min", raster.x_min, "lower dt*lambda");
    linear->add_option("--x-max", raster.x_max, "upper dt*lambda");
    linear->add_option("--nx", raster.nx, "points along dt*lambda");
    linear->add_option("--y-min", raster.y_min, "lower dt*mu^2");
    linear->add_option("--y-max", raster.y_max, "upper dt*mu^2");
    linear->add_option("--ny", raster.ny, "points along dt*mu^2");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    auto given = [&](const char* name) { return sub->get_option_no_throw(name) && sub->count(name) > 0; };

    try {
        ExperimentConfig config;
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            if (!f) throw UsageError(fmt::format("cannot read configuration file '{}'", config_path));
            json j;
            try {
                f >> j;
            } catch (const json::exception& e) {
                throw UsageError(fmt::format("configuration file '{}': {}", config_path, e.what()));
            }
            config = config_from_json(j);
        }
        if (given("--preset")) config.preset = preset;
        if (!config.preset.empty()) apply_preset(config, config.preset);
        if (given("--problem")) config.problem = problem;
        if (given("--scheme")) config.scheme = parse_scheme(scheme);
        if (given("--theta")) config.theta = parse_number(theta);
        if (given("--dt")) config.dt = parse_number_list(dt);
        if (given("--seed")) config.seed = seed;
        if (given("--horizon")) config.horizon = parse_number(horizon);
        if (given("--out")) config.output_dir = output_dir_flag;
        if (given("--workers")) config.workers = workers;
        if (given("--x0")) config.x0 = parse_number_list(x0);
        if (given("--y0")) config.y0 = parse_number_list(y0);
        if (given("--format")) config.formats = formats;
        if (given("--constants")) config.constants_source = parse_constants_source(constants_source);
        if (given("--constants-file")) {
            config.constants_file = constants_file;
            if (!given("--constants")) config.constants_source = ConstantsSource::file;
        }
        if (given("--L")) config.L = parse_number(L);
        if (given("--mu")) config.mu = parse_number(mu);
        if (given("--M")) config.M = parse_number(M);
        if (given("--mtilde")) config.M_tilde = parse_number(M_tilde);
        if (given("--paths")) config.paths = paths;
        if (given("--pairs")) config.pairs = pairs;
        if (given("--mu-rule")) config.mu_rule = parse_mu_rule(mu_rule);
        config.validate();

        const std::string name = sub->get_name();
        if (name == "simulate") return cmd_simulate(config, path_index, out);
        if (name == "region") return cmd_region(config, as_json, out);
        if (name == "experiment") return cmd_experiment(config, out);
        if (name == "estimate") return cmd_estimate(config, out);
        if (name == "linear-stability") return cmd_linear_stability(config, raster, out);
        throw UsageError(fmt::format("unknown subcommand '{}'", name));
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const LookupError& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace msc::cli
