/**
 * @file config.hpp
 * @brief Experiment configuration: INI-style `[section]` / `key = value`
 *        files with `#` comments, validated against the module preconditions.
 */
#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdcontrol/control.hpp"
#include "rdcontrol/grid.hpp"
#include "rdcontrol/species.hpp"
#include "rdcontrol/state.hpp"
#include "rdcontrol/structure.hpp"

namespace rdcontrol {

/// Bad or inconsistent configuration; `key()` is the offending `section.key`.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& msg)
        : std::runtime_error(key.empty() ? msg : key + ": " + msg), key_(std::move(key)) {}
    [[nodiscard]] const std::string& key() const { return key_; }

private:
    std::string key_;
};

enum class ExperimentKind { simulate, invariants, kalman, weights, control_linear, control_local, control_global, observability };

inline std::string to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::simulate: return "simulate";
        case ExperimentKind::invariants: return "invariants";
        case ExperimentKind::kalman: return "kalman";
        case ExperimentKind::weights: return "weights";
        case ExperimentKind::control_linear: return "control-linear";
        case ExperimentKind::control_local: return "control-local";
        case ExperimentKind::control_global: return "control-global";
        case ExperimentKind::observability: return "observability";
    }
    return "?";
}

inline ExperimentKind parse_kind(const std::string& s) {
    for (auto k : {ExperimentKind::simulate, ExperimentKind::invariants, ExperimentKind::kalman, ExperimentKind::weights,
                   ExperimentKind::control_linear, ExperimentKind::control_local, ExperimentKind::control_global,
                   ExperimentKind::observability})
        if (to_string(k) == s) return k;
    throw ConfigError("experiment.kind", "unknown experiment kind '" + s + "'");
}

enum class InitialType { constant, bump, file };
enum class BumpShape { cosine, gaussian };

struct InitialSpec {
    InitialType type = InitialType::constant;
    Vec4 value{1.0, 1.0, 1.0, 1.0};
    double amplitude = 0.0;
    BumpShape shape = BumpShape::cosine;
    std::vector<int> components{1, 2, 3, 4};  ///< 1-based species receiving the bump
    std::string file;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::simulate;
    std::string output = "out";
    std::uint64_t seed = 1;

    double length = 1.0;
    std::size_t points = 61;
    Interval omega{0.3, 0.7}, omega0{0.35, 0.65}, omega_inner{0.4, 0.6};

    double horizon = 1.0;
    std::size_t steps = 200;

    Vec4 d{1.0, 1.0, 1.0, 1.0};
    Vec4 target{1.0, 1.0, 1.0, 1.0};
    int j = 3;
    /// simulate/invariants: apply zero controls on the first j species (only affects bookkeeping).
    bool controlled = false;

    InitialSpec initial;
    LocalControlOptions local;
    StaircaseConfig staircase;
    int kalman_k_max = 64;
    int observability_trials = 20;
    bool three_phase = false;

    std::vector<std::string> plot_fields;
    std::vector<double> plot_times;

    [[nodiscard]] Domain1D domain() const { return Domain1D(length, points, omega, omega0, omega_inner); }
    [[nodiscard]] TimeGrid timegrid() const { return TimeGrid(horizon, steps); }
    [[nodiscard]] DiffusionVector diffusion() const { return DiffusionVector(d); }
    [[nodiscard]] StationaryState ustar() const { return StationaryState(target); }
};

namespace detail {

inline std::vector<double> parse_numbers(const std::string& key, const std::string& text) {
    std::string s = text;
    for (char& c : s)
        if (c == ',' || c == ';') c = ' ';
    std::istringstream in(s);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) {
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError(key, "not a number: '" + tok + "'");
        }
    }
    return out;
}

class Reader {
public:
    explicit Reader(boost::property_tree::ptree tree) : tree_(std::move(tree)) {}

    [[nodiscard]] std::optional<std::string> raw(const std::string& key) {
        used_.insert(key);
        auto v = tree_.get_optional<std::string>(boost::property_tree::ptree::path_type(key, '.'));
        if (!v) return std::nullopt;
        return *v;
    }
    std::string text(const std::string& key, const std::string& def) {
        auto v = raw(key);
        return v ? trim(*v) : def;
    }
    double number(const std::string& key, double def) {
        auto v = raw(key);
        if (!v) return def;
        const auto xs = parse_numbers(key, *v);
        if (xs.size() != 1) throw ConfigError(key, "expected one number");
        if (!std::isfinite(xs[0])) throw ConfigError(key, "must be finite");
        return xs[0];
    }
    long integer(const std::string& key, long def) {
        const double x = number(key, static_cast<double>(def));
        if (x != std::floor(x)) throw ConfigError(key, "expected an integer");
        return static_cast<long>(x);
    }
    std::size_t count(const std::string& key, std::size_t def) {
        const long v = integer(key, static_cast<long>(def));
        if (v < 0) throw ConfigError(key, "must be nonnegative");
        return static_cast<std::size_t>(v);
    }
    std::vector<double> numbers(const std::string& key, std::vector<double> def, std::size_t want = 0) {
        auto v = raw(key);
        if (!v) return def;
        auto xs = parse_numbers(key, *v);
        if (want != 0 && xs.size() != want) throw ConfigError(key, "expected " + std::to_string(want) + " numbers");
        return xs;
    }
    Vec4 vec4(const std::string& key, const Vec4& def) {
        const auto xs = numbers(key, {def.begin(), def.end()}, 4);
        return {xs[0], xs[1], xs[2], xs[3]};
    }
    Interval interval(const std::string& key, const Interval& def) {
        const auto xs = numbers(key, {def.a, def.b}, 2);
        return {xs[0], xs[1]};
    }
    bool flag(const std::string& key, bool def) {
        auto v = raw(key);
        if (!v) return def;
        const std::string s = trim(*v);
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw ConfigError(key, "expected true or false");
    }
    std::vector<std::string> words(const std::string& key) {
        auto v = raw(key);
        std::vector<std::string> out;
        if (!v) return out;
        std::string s = *v;
        for (char& c : s)
            if (c == ',') c = ' ';
        std::istringstream in(s);
        std::string w;
        while (in >> w) out.push_back(w);
        return out;
    }

    /// Every key present in the file but never asked for.
    void reject_unknown() const {
        for (const auto& [section, body] : tree_) {
            if (body.empty()) throw ConfigError(section, "keys must live inside a [section]");
            for (const auto& kv : body) {
                const std::string key = section + "." + kv.first;
                if (!used_.count(key)) throw ConfigError(key, "unknown key");
            }
        }
    }

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

private:
    boost::property_tree::ptree tree_;
    std::set<std::string> used_;
};

template <class F>
void check(const std::string& key, F&& f) {
    try {
        f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(key, e.what());
    }
}

}  // namespace detail

/// Parses configuration text; throws ConfigError naming the offending key.
inline ExperimentConfig parse_config(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("", std::string("malformed configuration: ") + e.message() + " (line " +
                                  std::to_string(e.line()) + ")");
    }
    detail::Reader r(std::move(tree));
    ExperimentConfig c;

    const auto kind = r.raw("experiment.kind");
    if (!kind) throw ConfigError("experiment.kind", "missing");
    c.kind = parse_kind(detail::Reader::trim(*kind));
    c.output = r.text("experiment.output", c.output);
    {
        const long seed = r.integer("experiment.seed", 1);
        if (seed < 0) throw ConfigError("experiment.seed", "must be nonnegative");
        c.seed = static_cast<std::uint64_t>(seed);
    }

    c.length = r.number("domain.length", c.length);
    c.points = r.count("domain.n", c.points);
    c.omega = r.interval("domain.omega", c.omega);
    c.omega0 = r.interval("domain.omega0", c.omega0);
    c.omega_inner = r.interval("domain.omega_inner", c.omega_inner);

    c.horizon = r.number("time.horizon", c.horizon);
    c.steps = r.count("time.steps", c.steps);

    c.d = r.vec4("system.d", c.d);
    c.target = r.vec4("system.target", c.target);
    c.j = static_cast<int>(r.integer("system.j", c.j));
    c.controlled = r.flag("system.controlled", c.controlled);

    {
        const std::string t = r.text("initial.type", "constant");
        if (t == "constant") c.initial.type = InitialType::constant;
        else if (t == "bump") c.initial.type = InitialType::bump;
        else if (t == "file") c.initial.type = InitialType::file;
        else throw ConfigError("initial.type", "expected constant, bump or file");
        c.initial.value = r.vec4("initial.value", c.target);
        c.initial.amplitude = r.number("initial.amplitude", c.initial.amplitude);
        const std::string shape = r.text("initial.shape", "cosine");
        if (shape == "cosine") c.initial.shape = BumpShape::cosine;
        else if (shape == "gaussian") c.initial.shape = BumpShape::gaussian;
        else throw ConfigError("initial.shape", "expected cosine or gaussian");
        const auto comps = r.numbers("initial.components", {1, 2, 3, 4});
        c.initial.components.clear();
        for (double v : comps) {
            if (v != std::floor(v) || v < 1 || v > 4) throw ConfigError("initial.components", "species are 1..4");
            c.initial.components.push_back(static_cast<int>(v));
        }
        c.initial.file = r.text("initial.file", "");
        if (c.initial.type == InitialType::file && c.initial.file.empty())
            throw ConfigError("initial.file", "required when initial.type = file");
    }

    auto& hum = c.local.hum;
    hum.epsilon = r.number("hum.epsilon", hum.epsilon);
    hum.carleman.lambda = r.number("hum.lambda", hum.carleman.lambda);
    hum.carleman.s = r.number("hum.s", hum.carleman.s);
    hum.window.a = r.number("hum.t1", hum.window.a);
    hum.window.b = r.number("hum.t2", hum.window.b);
    hum.cg.tolerance = r.number("hum.cg_tolerance", hum.cg.tolerance);
    hum.cg.max_iterations = static_cast<int>(r.integer("hum.cg_max_iterations", hum.cg.max_iterations));
    c.three_phase = r.flag("hum.three_phase", c.three_phase);

    auto& fp = c.local.fixed_point;
    fp.max_outer_iterations = static_cast<int>(r.integer("fixed_point.max_iterations", fp.max_outer_iterations));
    fp.contraction_tol = r.number("fixed_point.contraction_tol", fp.contraction_tol);
    fp.nu = r.number("fixed_point.nu", fp.nu);
    fp.delta0 = r.number("fixed_point.delta0", fp.delta0);
    c.local.terminal_tol = r.number("fixed_point.terminal_tol", c.local.terminal_tol);
    c.local.return_amplitude = r.number("fixed_point.return_amplitude", c.local.return_amplitude);
    c.local.return_window = r.interval("fixed_point.return_window", c.local.return_window);

    auto& st = c.staircase;
    st.settle_tol = r.number("staircase.settle_tol", st.settle_tol);
    st.settle_max_time = r.number("staircase.settle_max_time", st.settle_max_time);
    st.initial_theta_step = r.number("staircase.initial_theta_step", st.initial_theta_step);
    st.min_theta_step = r.number("staircase.min_theta_step", st.min_theta_step);
    st.leg_tol = r.number("staircase.leg_tol", st.leg_tol);
    st.leg_horizon = r.number("staircase.leg_horizon", st.leg_horizon);
    st.leg_steps = r.count("staircase.leg_steps", st.leg_steps);
    st.detour_radius = r.number("staircase.detour_radius", st.detour_radius);

    c.kalman_k_max = static_cast<int>(r.integer("kalman.k_max", c.kalman_k_max));
    c.observability_trials = static_cast<int>(r.integer("observability.trials", c.observability_trials));

    c.plot_fields = r.words("plot.fields");
    c.plot_times = r.numbers("plot.times", {});

    r.reject_unknown();
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open configuration file '" + path + "'");
    return parse_config(in);
}

/// Initial state of the configuration on its domain.
inline StateField initial_state(const ExperimentConfig& c, const Domain1D& dom) {
    const auto& ini = c.initial;
    if (ini.type == InitialType::file) {
        std::ifstream in(ini.file);
        if (!in) throw ConfigError("initial.file", "cannot open '" + ini.file + "'");
        StateField u(dom.size());
        std::string line;
        std::size_t row = 0;
        bool header = true;
        while (std::getline(in, line)) {
            if (detail::Reader::trim(line).empty()) continue;
            if (header) {
                header = false;
                if (line.find_first_of("abcdefghijklmnopqrstuvwxyz") != std::string::npos) continue;
            }
            const auto xs = detail::parse_numbers("initial.file", line);
            if (xs.size() != 5) throw ConfigError("initial.file", "rows must be x,u1,u2,u3,u4");
            if (row >= dom.size()) throw ConfigError("initial.file", "more rows than grid points");
            if (std::abs(xs[0] - dom.x(row)) > 1e-9 * (1.0 + dom.length()))
                throw ConfigError("initial.file", "row " + std::to_string(row + 1) + " is not at grid point x = " +
                                                      std::to_string(dom.x(row)));
            for (std::size_t k = 0; k < 4; ++k) u[k][row] = xs[k + 1];
            ++row;
        }
        if (row != dom.size()) throw ConfigError("initial.file", "expected one row per grid point");
        return u;
    }
    StateField u = StateField::constant(dom.size(), ini.value);
    if (ini.type == InitialType::bump) {
        const double L = dom.length();
        const GridFunction b = dom.sample([&](double x) {
            if (ini.shape == BumpShape::cosine) return std::cos(std::numbers::pi * x / L);
            const double y = (x - 0.5 * L) / (0.1 * L);
            return std::exp(-y * y);
        });
        for (int k : ini.components)
            for (std::size_t i = 0; i < dom.size(); ++i) u[static_cast<std::size_t>(k - 1)][i] += ini.amplitude * b[i];
    }
    return u;
}

/// Precondition checks of everything the experiment will touch.
inline void validate_config(const ExperimentConfig& c) {
    std::optional<Domain1D> dom;
    detail::check("domain", [&] { dom.emplace(c.domain()); });
    detail::check("time", [&] { (void)c.timegrid(); });
    detail::check("system.d", [&] { (void)c.diffusion(); });
    detail::check("system.j", [&] { check_control_count(c.j); });
    const StateField u0 = initial_state(c, *dom);
    if (!u0.finite()) throw ConfigError("initial", "initial state is not finite");

    const bool needs_target = c.kind != ExperimentKind::simulate && c.kind != ExperimentKind::invariants;
    if (needs_target) detail::check("system.target", [&] { (void)c.ustar(); });

    const auto& hum = c.local.hum;
    if (!(hum.epsilon > 0.0)) throw ConfigError("hum.epsilon", "must be positive");
    if (!(hum.carleman.lambda >= 1.0)) throw ConfigError("hum.lambda", "must be >= 1");
    if (hum.carleman.s < 0.0) throw ConfigError("hum.s", "must be nonnegative (0 selects the automatic value)");
    if ((hum.window.a < 0.0) != (hum.window.b < 0.0)) throw ConfigError("hum.t1", "give both t1 and t2 or neither");
    if (hum.window.a >= 0.0 && !(hum.window.a < hum.window.b && hum.window.b <= c.horizon))
        throw ConfigError("hum.t2", "need 0 <= t1 < t2 <= T");
    if (!(hum.cg.tolerance > 0.0)) throw ConfigError("hum.cg_tolerance", "must be positive");
    if (hum.cg.max_iterations < 1) throw ConfigError("hum.cg_max_iterations", "must be at least 1");

    const auto& fp = c.local.fixed_point;
    if (fp.max_outer_iterations < 1) throw ConfigError("fixed_point.max_iterations", "must be at least 1");
    if (!(fp.contraction_tol > 0.0)) throw ConfigError("fixed_point.contraction_tol", "must be positive");
    if (fp.nu < 0.0) throw ConfigError("fixed_point.nu", "must be nonnegative (0 selects the default)");
    if (!(c.local.terminal_tol > 0.0)) throw ConfigError("fixed_point.terminal_tol", "must be positive");

    const auto& st = c.staircase;
    if (!(0.0 < st.min_theta_step && st.min_theta_step <= st.initial_theta_step && st.initial_theta_step <= 1.0))
        throw ConfigError("staircase.min_theta_step", "need 0 < min_theta_step <= initial_theta_step <= 1");
    if (!(st.settle_tol > 0.0)) throw ConfigError("staircase.settle_tol", "must be positive");
    if (!(st.leg_tol > 0.0)) throw ConfigError("staircase.leg_tol", "must be positive");
    if (!(st.detour_radius > 0.0)) throw ConfigError("staircase.detour_radius", "must be positive");
    detail::check("staircase.leg_horizon", [&] { (void)TimeGrid(st.leg_horizon, st.leg_steps); });

    if (c.kalman_k_max < 1) throw ConfigError("kalman.k_max", "must be at least 1");
    if (c.observability_trials < 1) throw ConfigError("observability.trials", "must be at least 1");

    switch (c.kind) {
        case ExperimentKind::control_local: {
            const AdmissibilityVerdict v = admissible(*dom, u0, c.j, c.diffusion(), c.ustar());
            if (!v.admissible) throw ConfigError("initial", "not admissible: " + v.describe());
            break;
        }
        case ExperimentKind::control_global:
            if (c.j != 3) throw ConfigError("system.j", "control-global is implemented for j = 3");
            for (const auto& comp : u0.u)
                for (double v : comp)
                    if (v < 0.0) throw ConfigError("initial", "control-global needs nonnegative initial data");
            detail::check("initial", [&] { (void)asymptotic_state(*dom, u0); });
            break;
        case ExperimentKind::control_linear: {
            const AdmissibilityVerdict v = admissible(*dom, u0, c.j, c.diffusion(), c.ustar());
            if (!v.admissible) throw ConfigError("initial", "not admissible: " + v.describe());
            if (classify_target(c.ustar(), c.j) != TargetCase::generic)
                throw ConfigError("system.target", "control-linear needs a target of the generic case");
            break;
        }
        default: break;
    }

    for (double t : c.plot_times)
        if (t < 0.0) throw ConfigError("plot.times", "times must be nonnegative");
    const int hmax = c.kind == ExperimentKind::control_linear || c.kind == ExperimentKind::control_local ||
                             c.kind == ExperimentKind::control_global
                         ? c.j
                         : 0;
    for (const auto& f : c.plot_fields) {
        const bool ok_u = f.size() == 2 && f[0] == 'u' && f[1] >= '1' && f[1] <= '4';
        const bool ok_h = f.size() == 2 && f[0] == 'h' && f[1] >= '1' && f[1] - '0' <= hmax;
        if (!ok_u && !ok_h) throw ConfigError("plot.fields", "unknown field '" + f + "'");
    }
}

}  // namespace rdcontrol
