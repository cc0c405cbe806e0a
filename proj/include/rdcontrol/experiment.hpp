/**
 * @file experiment.hpp
 * @brief Batch execution of an ExperimentConfig: trajectory.csv,
 *        diagnostics.csv, summary and optional snapshot files.
 */
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rdcontrol/carleman.hpp"
#include "rdcontrol/config.hpp"
#include "rdcontrol/control.hpp"
#include "rdcontrol/hum.hpp"
#include "rdcontrol/kalman.hpp"
#include "rdcontrol/simulate.hpp"
#include "rdcontrol/structure.hpp"
#include "rdcontrol/transform.hpp"

namespace rdcontrol {

/// 17 significant digits, locale independent.
inline std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Physical states on a sequence of times, with the controls acting on [t_n, t_{n+1}).
struct TrajectoryTable {
    std::size_t control_count = 0;
    std::vector<double> t;
    std::vector<StateField> u;
    std::vector<std::vector<GridFunction>> h;  ///< per row, control_count fields (zero on the last row)

    /// Appends a run starting at time t0; the first state is skipped when it repeats the last row.
    void append(double t0, const Trajectory& traj, std::size_t points) {
        const std::size_t m = traj.states.size() - 1;
        const bool skip_first = !t.empty();
        if (skip_first) {
            for (std::size_t c = 0; c < control_count; ++c) h.back()[c] = control_field(traj, 0, c, points);
        }
        for (std::size_t n = skip_first ? 1 : 0; n <= m; ++n) {
            t.push_back(t0 + traj.timegrid.t(n));
            u.push_back(traj.states[n]);
            std::vector<GridFunction> row(control_count);
            for (std::size_t c = 0; c < control_count; ++c)
                row[c] = n < m ? control_field(traj, n, c, points) : GridFunction(points, 0.0);
            h.push_back(std::move(row));
        }
    }

private:
    static GridFunction control_field(const Trajectory& traj, std::size_t n, std::size_t c, std::size_t points) {
        if (c >= traj.controls.count()) return GridFunction(points, 0.0);
        const auto f = traj.controls.field(n, c);
        return {f.begin(), f.end()};
    }
};

class Summary {
public:
    void add(const std::string& key, const std::string& value) { rows_.emplace_back(key, value); }
    void add(const std::string& key, double value) { add(key, fmt_num(value)); }
    void add(const std::string& key, bool value) { add(key, std::string(value ? "true" : "false")); }
    void add(const std::string& key, int value) { add(key, std::to_string(value)); }
    void add(const std::string& key, std::size_t value) { add(key, std::to_string(value)); }
    void add(const std::string& key, const char* value) { add(key, std::string(value)); }
    [[nodiscard]] const std::vector<std::pair<std::string, std::string>>& rows() const { return rows_; }
    [[nodiscard]] std::string get(const std::string& key) const {
        for (const auto& [k, v] : rows_)
            if (k == key) return v;
        throw std::out_of_range("summary has no key " + key);
    }
    void write(const std::filesystem::path& p) const {
        std::ofstream out(p, std::ios::binary);
        for (const auto& [k, v] : rows_) {
            std::string flat = v;
            for (char& c : flat)
                if (c == '\n' || c == '\r') c = ' ';
            out << k << " = " << flat << '\n';
        }
    }

private:
    std::vector<std::pair<std::string, std::string>> rows_;
};

/// Column table written as CSV with a header row and LF endings.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void row(std::vector<std::string> r) { rows.push_back(std::move(r)); }
    void write(const std::filesystem::path& p) const {
        std::ofstream out(p, std::ios::binary);
        auto emit = [&](const std::vector<std::string>& r) {
            for (std::size_t k = 0; k < r.size(); ++k) {
                if (k) out << ',';
                const bool quote = r[k].find_first_of(",\"\n") != std::string::npos;
                if (!quote) {
                    out << r[k];
                    continue;
                }
                out << '"';
                for (char c : r[k]) out << (c == '"' ? std::string("\"\"") : std::string(1, c));
                out << '"';
            }
            out << '\n';
        };
        emit(header);
        for (const auto& r : rows) emit(r);
    }
};

inline void write_trajectory_csv(const std::filesystem::path& p, const Domain1D& dom, const TrajectoryTable& tab) {
    std::ofstream out(p, std::ios::binary);
    out << "t,x,u1,u2,u3,u4";
    for (std::size_t c = 0; c < tab.control_count; ++c) out << ",h" << c + 1;
    out << '\n';
    for (std::size_t r = 0; r < tab.t.size(); ++r)
        for (std::size_t i = 0; i < dom.size(); ++i) {
            out << fmt_num(tab.t[r]) << ',' << fmt_num(dom.x(i));
            for (std::size_t k = 0; k < 4; ++k) out << ',' << fmt_num(tab.u[r][k][i]);
            for (std::size_t c = 0; c < tab.control_count; ++c) out << ',' << fmt_num(tab.h[r][c][i]);
            out << '\n';
        }
}

/**
 * One file per requested time, `snapshot_<k>.csv`, columns t, x and the fields.
 * Times snap to the nearest stored time. Returns the written paths.
 */
inline std::vector<std::filesystem::path> emit_plotdata(const Domain1D& dom, const TrajectoryTable& tab,
                                                        const std::vector<std::string>& fields,
                                                        const std::vector<double>& times,
                                                        const std::filesystem::path& dir) {
    if (tab.t.empty()) throw std::invalid_argument("no trajectory to plot");
    struct Col { bool control; std::size_t index; };
    std::vector<Col> cols;
    for (const auto& f : fields) {
        if (f.size() == 2 && f[0] == 'u' && f[1] >= '1' && f[1] <= '4') {
            cols.push_back({false, static_cast<std::size_t>(f[1] - '1')});
        } else if (f.size() == 2 && f[0] == 'h' && f[1] >= '1' && static_cast<std::size_t>(f[1] - '0') <= tab.control_count) {
            cols.push_back({true, static_cast<std::size_t>(f[1] - '1')});
        } else {
            throw std::invalid_argument("unknown field '" + f + "' (available: u1..u4, h1..h" +
                                        std::to_string(tab.control_count) + ")");
        }
    }
    const double tmax = tab.t.back();
    std::vector<std::filesystem::path> written;
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double want = times[k];
        if (want < 0.0 || want > tmax * (1.0 + 1e-12)) throw std::invalid_argument("snapshot time outside [0, T]");
        std::size_t best = 0;
        for (std::size_t r = 1; r < tab.t.size(); ++r)
            if (std::abs(tab.t[r] - want) < std::abs(tab.t[best] - want)) best = r;
        const auto path = dir / ("snapshot_" + std::to_string(k) + ".csv");
        std::ofstream out(path, std::ios::binary);
        out << "t,x";
        for (const auto& f : fields) out << ',' << f;
        out << '\n';
        for (std::size_t i = 0; i < dom.size(); ++i) {
            out << fmt_num(tab.t[best]) << ',' << fmt_num(dom.x(i));
            for (const auto& c : cols) out << ',' << fmt_num(c.control ? tab.h[best][c.index][i] : tab.u[best][c.index][i]);
            out << '\n';
        }
        written.push_back(path);
    }
    return written;
}

struct RunOutcome {
    int exit_code = 0;
    Summary summary;
};

namespace detail {

inline CsvTable mass_table(const Trajectory& traj, const InvariantReport& rep) {
    CsvTable t;
    t.header = {"t"};
    for (const auto& m : rep.masses) t.header.push_back("Q(" + m.name + ")");
    t.header.push_back("sup_norm");
    for (std::size_t n = 0; n < traj.states.size(); ++n) {
        std::vector<std::string> r{fmt_num(traj.timegrid.t(n))};
        for (const auto& m : rep.masses) r.push_back(fmt_num(m.values[n]));
        r.push_back(fmt_num(traj.states[n].sup_norm()));
        t.row(std::move(r));
    }
    return t;
}

inline std::string mass_key(const std::string& name) {
    std::string k = "mass_drift_";
    for (char c : name)
        if (c != '+') k += c;
    return k;
}

inline void summarize_invariants(Summary& s, const InvariantReport& rep) {
    for (const auto& m : rep.masses) {
        s.add(mass_key(m.name), m.max_relative_drift);
        if (m.controlled) s.add(mass_key(m.name) + "_corrected", m.max_relative_drift_corrected);
    }
}

inline double oscillation(const StateField& u) {
    double o = 0.0;
    for (const auto& c : u.u) {
        const auto [lo, hi] = std::minmax_element(c.begin(), c.end());
        o = std::max(o, *hi - *lo);
    }
    return o;
}

inline void add_vec(Summary& s, const std::string& prefix, const Vec4& v) {
    for (std::size_t k = 0; k < 4; ++k) s.add(prefix + std::to_string(k + 1), v[k]);
}

/// Physical trajectory of a linear run: u = ubar + P^{-1} zeta.
inline Trajectory physical(const TransformedSystem& sys, const Trajectory& lin) {
    Trajectory out;
    out.timegrid = lin.timegrid;
    out.controls = lin.controls;
    for (std::size_t n = 0; n < lin.states.size(); ++n) out.states.push_back(sys.inverse_map(lin.states[n], n));
    return out;
}

}  // namespace detail

/**
 * Executes a validated configuration, writing its outputs into `c.output`.
 * Runtime failures are caught and reported in the summary with exit code 1.
 */
inline RunOutcome run_experiment(const ExperimentConfig& c) {
    namespace fs = std::filesystem;
    const fs::path dir(c.output);
    fs::create_directories(dir);

    RunOutcome res;
    Summary& s = res.summary;
    s.add("kind", to_string(c.kind));
    s.add("seed", static_cast<std::size_t>(c.seed));
    const Domain1D dom = c.domain();
    const TimeGrid tg = c.timegrid();
    const DiffusionVector d = c.diffusion();
    TrajectoryTable tab;
    CsvTable diag;
    bool ok = true;

    try {
        const StateField u0 = initial_state(c, dom);
        switch (c.kind) {
            case ExperimentKind::simulate:
            case ExperimentKind::invariants: {
                Controls h;
                if (c.controlled) h = Controls(tg.steps, static_cast<std::size_t>(c.j), dom.size());
                const Trajectory traj = simulate_nonlinear(dom, u0, tg, d, h);
                const InvariantReport rep = invariant_report(dom, traj, c.controlled ? c.j : 0, d);
                tab.control_count = h.count();
                tab.append(0.0, traj, dom.size());
                diag = detail::mass_table(traj, rep);
                detail::summarize_invariants(s, rep);
                s.add("final_oscillation", detail::oscillation(traj.terminal()));
                s.add("final_sup_norm", traj.terminal().sup_norm());
                if (c.kind == ExperimentKind::invariants) {
                    for (const auto& p : rep.pointwise) s.add("pointwise_drift_" + detail::mass_key(p.name).substr(11), p.max_drift);
                    try {
                        const StationaryState z = asymptotic_state(dom, u0);
                        detail::add_vec(s, "z", z.values());
                        s.add("final_distance_to_z", detail::terminal_error(traj.terminal(), z.values()));
                    } catch (const std::invalid_argument& e) {
                        s.add("z", std::string("undefined: ") + e.what());
                    }
                }
                break;
            }
            case ExperimentKind::kalman: {
                const KalmanReport rep = kalman_rank(d, c.ustar(), c.j, c.kalman_k_max, c.length);
                diag.header = {"k", "lambda", "rank", "sigma_max", "sigma_min"};
                int lo = 4, hi = 0;
                for (const auto& m : rep.modes) {
                    diag.row({std::to_string(m.k), fmt_num(m.lambda), std::to_string(m.rank),
                              fmt_num(m.singular_values.front()), fmt_num(m.singular_values.back())});
                    lo = std::min(lo, m.rank);
                    hi = std::max(hi, m.rank);
                }
                s.add("controllable", rep.controllable);
                s.add("min_rank", lo);
                s.add("max_rank", hi);
                s.add("modes", rep.modes.size());
                s.add("target_case", to_string(classify_target(c.ustar(), c.j)));
                break;
            }
            case ExperimentKind::weights: {
                const Interval win = c.local.hum.window.a < 0.0 ? default_window(tg) : c.local.hum.window;
                const CarlemanWeights w = make_weights(dom, c.j, win, tg, c.local.hum.carleman);
                diag.header = {"t", "x", "phi", "alpha", "log_rho", "rho"};
                double peak = -std::numeric_limits<double>::infinity(), first = peak, last = peak;
                const auto steps = window_steps(tg, win);
                for (std::size_t n : steps) {
                    const double t = (static_cast<double>(n) + 0.5) * tg.dt();
                    for (std::size_t i = 0; i < dom.size(); ++i) {
                        const auto v = w.eval(t, i);
                        const double l = w.log_multiplier(t, i);
                        peak = std::max(peak, l);
                        if (n == steps.front()) first = std::max(first, l);
                        if (n == steps.back()) last = std::max(last, l);
                        diag.row({fmt_num(t), fmt_num(dom.x(i)), fmt_num(v.phi), fmt_num(v.alpha), fmt_num(l),
                                  fmt_num(w.multiplier(t, i))});
                    }
                }
                s.add("lambda", w.lambda());
                s.add("s", w.s());
                s.add("exponent", w.exponent());
                s.add("t1", win.a);
                s.add("t2", win.b);
                s.add("window_steps", steps.size());
                s.add("max_log_rho", peak);
                s.add("max_log_rho_first_step", first);
                s.add("max_log_rho_last_step", last);
                break;
            }
            case ExperimentKind::control_linear: {
                const TransformedSystem sys = build_transformed_system(c.j, d, c.ustar());
                StateField z0 = sys.forward_map(u0);
                const double removed = detail::project_hj(dom, sys, z0);
                const CouplingField A = sys.linearization(tg.steps, dom.size());
                const ControlProblem p = make_control_problem(dom, tg, sys, A, z0, c.local.hum);
                ControlResult r;
                Trajectory lin;
                if (c.three_phase) {
                    ThreePhaseResult tp = three_phase_control(z0, p);
                    r = std::move(tp.sub);
                    lin = std::move(tp.trajectory);
                    s.add("three_phase_terminal_norm", l2_norm(dom, lin.terminal()));
                } else {
                    r = solve_penalized_hum(p);
                    lin = simulate_linear(dom, z0, tg, sys, A, r.controls);
                }
                tab.control_count = static_cast<std::size_t>(c.j);
                tab.append(0.0, detail::physical(sys, lin), dom.size());
                diag.header = {"cg_iteration", "relative_residual"};
                for (std::size_t k = 0; k < r.residual_history.size(); ++k)
                    diag.row({std::to_string(k), fmt_num(r.residual_history[k])});
                double mean_drift = 0.0;
                for (std::size_t k = 0; k < 4; ++k) {
                    if (!sys.mean_constrained[k]) continue;
                    for (const auto& st : lin.states) mean_drift = std::max(mean_drift, std::abs(mean(dom, st[k])));
                }
                s.add("cg_status", to_string(r.status));
                s.add("cg_iterations", r.cg_iterations);
                s.add("terminal_norm", r.terminal_norm);
                s.add("weighted_control_norm2", r.weighted_control_norm2);
                s.add("functional", r.functional);
                s.add("functional_at_zero", r.functional_at_zero);
                s.add("optimality_residual", r.optimality_residual);
                s.add("max_duality_defect", r.max_duality_defect);
                s.add("linf_control_norm", r.linf_control_norm);
                s.add("hj_projection_removed", removed);
                s.add("hj_mean_drift", mean_drift);
                s.add("carleman_s", p.weights.s());
                s.add("epsilon", p.epsilon);
                ok = r.status == CgStatus::converged || r.status == CgStatus::zero_data;
                if (!ok) s.add("error", "conjugate gradient: " + to_string(r.status));
                break;
            }
            case ExperimentKind::control_local: {
                const LocalControlResult r = local_control(dom, u0, c.ustar(), c.j, d, tg, c.local);
                tab.control_count = static_cast<std::size_t>(c.j);
                tab.append(0.0, r.nonlinear, dom.size());
                diag.header = {"iteration", "increment", "state_sup", "coupling_bound", "linear_terminal_norm",
                               "cg_iterations", "cg_status"};
                for (const auto& it : r.log)
                    diag.row({std::to_string(it.iteration), fmt_num(it.increment), fmt_num(it.state_sup),
                              fmt_num(it.coupling_bound), fmt_num(it.linear_terminal_norm),
                              std::to_string(it.cg_iterations), to_string(it.cg_status)});
                s.add("target_case", to_string(r.target_case));
                s.add("fixed_point_status", to_string(r.status));
                s.add("outer_iterations", r.outer_iterations);
                s.add("terminal_linf_error", r.terminal_linf_error);
                s.add("terminal_tol", c.local.terminal_tol);
                s.add("hj_projection_removed", r.hj_residual);
                s.add("linf_control_norm", r.controls.sup_norm());
                if (r.target_case == TargetCase::j1_degenerate || r.target_case == TargetCase::j2_degenerate)
                    s.add("untouched_drift", r.untouched_drift);
                ok = r.ok(c.local.terminal_tol);
                if (!ok) s.add("error", r.message + (r.status == LocalStatus::converged ? ": terminal error above tolerance" : ""));
                break;
            }
            case ExperimentKind::control_global: {
                const GlobalControlResult r = global_control(dom, u0, c.ustar(), c.j, d, c.staircase, c.local);
                tab.control_count = static_cast<std::size_t>(c.j);
                double t0 = 0.0;
                for (const auto& seg : r.segments) {
                    tab.append(t0, seg, dom.size());
                    t0 += seg.timegrid.horizon;
                }
                if (r.segments.empty()) {
                    Trajectory still;
                    still.timegrid = TimeGrid(c.staircase.leg_horizon, 2);
                    still.states.assign(3, u0);
                    tab.append(0.0, still, dom.size());
                }
                diag.header = {"leg", "theta_from", "theta_to", "theta_step", "anchor1", "anchor2", "anchor3",
                               "anchor4", "stationarity_residual", "success", "terminal_error", "outer_iterations",
                               "detour", "message"};
                for (const auto& l : r.legs)
                    diag.row({std::to_string(l.index), fmt_num(l.theta_from), fmt_num(l.theta_to),
                              fmt_num(l.theta_step), fmt_num(l.anchor[0]), fmt_num(l.anchor[1]), fmt_num(l.anchor[2]),
                              fmt_num(l.anchor[3]),
                              fmt_num(std::abs(l.anchor[0] * l.anchor[2] - l.anchor[1] * l.anchor[3])),
                              l.success ? "true" : "false", fmt_num(l.terminal_error),
                              std::to_string(l.outer_iterations), l.detour ? "true" : "false", l.message});
                detail::add_vec(s, "z", r.z.values());
                s.add("settle_time", r.settle_time);
                s.add("legs_attempted", r.legs.size());
                std::size_t accepted = 0;
                for (const auto& l : r.legs) accepted += l.success ? 1 : 0;
                s.add("legs_accepted", accepted);
                s.add("total_time", t0);
                s.add("terminal_linf_error", r.terminal_error);
                s.add("success", r.success);
                s.add("message", r.message);
                ok = r.success;
                if (!ok) s.add("error", r.message);
                break;
            }
            case ExperimentKind::observability: {
                const TransformedSystem sys = build_transformed_system(c.j, d, c.ustar());
                const CouplingField A = sys.linearization(tg.steps, dom.size());
                const ControlProblem p = make_control_problem(dom, tg, sys, A, StateField(dom.size()), c.local.hum);
                const ObservabilityStats st = observability_probe(p, c.observability_trials, c.seed);
                diag.header = {"trial", "ratio"};
                for (std::size_t k = 0; k < st.ratios.size(); ++k) diag.row({std::to_string(k), fmt_num(st.ratios[k])});
                s.add("trials", c.observability_trials);
                s.add("skipped", st.skipped);
                s.add("max_ratio", st.max_ratio);
                break;
            }
        }
    } catch (const std::exception& e) {
        ok = false;
        s.add("error", e.what());
    }

    if (tab.t.empty()) {
        std::ofstream(dir / "trajectory.csv", std::ios::binary) << "t,x,u1,u2,u3,u4\n";
    } else {
        write_trajectory_csv(dir / "trajectory.csv", dom, tab);
    }
    if (diag.header.empty()) diag.header = {"note"};
    diag.write(dir / "diagnostics.csv");
    if (!c.plot_times.empty() && !tab.t.empty()) {
        try {
            const auto files = emit_plotdata(dom, tab, c.plot_fields.empty() ? std::vector<std::string>{"u1", "u2", "u3", "u4"}
                                                                            : c.plot_fields,
                                             c.plot_times, dir);
            s.add("snapshots", files.size());
        } catch (const std::exception& e) {
            ok = false;
            s.add("error", std::string("plot: ") + e.what());
        }
    }
    s.add("status", std::string(ok ? "ok" : "failed"));
    s.write(dir / "summary");
    res.exit_code = ok ? 0 : 1;
    return res;
}

}  // namespace rdcontrol
