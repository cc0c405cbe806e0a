/**
 * @file control.hpp
 * @brief Nonlinear control: Picard iteration on the frozen-coupling linear
 *        problem, vanishing-target shortcuts, and the large-time staircase
 *        between equilibria.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdcontrol/grid.hpp"
#include "rdcontrol/hum.hpp"
#include "rdcontrol/return_trajectory.hpp"
#include "rdcontrol/simulate.hpp"
#include "rdcontrol/species.hpp"
#include "rdcontrol/state.hpp"
#include "rdcontrol/structure.hpp"
#include "rdcontrol/transform.hpp"

namespace rdcontrol {

struct FixedPointConfig {
    int max_outer_iterations = 30;
    double contraction_tol = 1e-9;
    double nu = 0.0;  ///< 0: 10 |u*|_inf + 1
    double delta0 = 0.05;
};

struct LocalControlOptions {
    FixedPointConfig fixed_point;
    HumOptions hum;
    double terminal_tol = 1e-3;
    double return_amplitude = 5.0;
    Interval return_window{-1.0, -1.0};  ///< negative: (0.1 T, 0.9 T)
};

/// Inadmissible initial data; the message lists the violated conditions.
class InadmissibleError : public std::invalid_argument {
public:
    explicit InadmissibleError(const AdmissibilityVerdict& v)
        : std::invalid_argument("initial data not admissible: " + v.describe()), verdict(v) {}
    AdmissibilityVerdict verdict;
};

enum class LocalStatus { converged, outside_ball, no_contraction, blow_up };

inline std::string to_string(LocalStatus s) {
    switch (s) {
        case LocalStatus::converged: return "converged";
        case LocalStatus::outside_ball: return "outside fixed-point ball";
        case LocalStatus::no_contraction: return "iteration cap without contraction";
        case LocalStatus::blow_up: return "blow-up in nonlinear verification";
    }
    return "?";
}

struct FixedPointIterate {
    int iteration = 0;
    double increment = 0.0;     ///< sup |z^{k+1} - z^k|
    double state_sup = 0.0;     ///< sup |z^{k+1}|
    double coupling_bound = 0.0;
    double linear_terminal_norm = 0.0;
    int cg_iterations = 0;
    CgStatus cg_status = CgStatus::converged;
};

struct LocalControlResult {
    LocalStatus status = LocalStatus::converged;
    TargetCase target_case = TargetCase::generic;
    std::string message;
    int outer_iterations = 0;
    std::vector<FixedPointIterate> log;
    Trajectory linear;        ///< final zeta iterate
    Trajectory nonlinear;     ///< fresh simulation with the physical controls
    Controls controls;        ///< physical controls h_1..h_j
    ControlResult hum;        ///< last linear solve
    double terminal_linf_error = 0.0;
    double hj_residual = 0.0;
    double untouched_drift = 0.0;  ///< degenerate targets: drift of the forced components

    [[nodiscard]] bool ok(double tol) const { return status == LocalStatus::converged && terminal_linf_error <= tol; }
};

namespace detail {

inline double terminal_error(const StateField& u, const Vec4& ustar) {
    double e = 0.0;
    for (std::size_t k = 0; k < 4; ++k)
        for (double v : u[k]) e = std::max(e, std::abs(v - ustar[k]));
    return e;
}

inline double history_sup(const std::vector<StateField>& s) {
    double m = 0.0;
    for (const auto& f : s) m = std::max(m, f.sup_norm());
    return m;
}

inline double history_gap(const std::vector<StateField>& a, const std::vector<StateField>& b) {
    double m = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n)
        for (std::size_t k = 0; k < 4; ++k)
            for (std::size_t i = 0; i < a[n].points(); ++i) m = std::max(m, std::abs(a[n][k][i] - b[n][k][i]));
    return m;
}

/// Removes the (tiny) components of z0 outside H_j and returns the amount removed.
inline double project_hj(const Domain1D& dom, const TransformedSystem& sys, StateField& z0) {
    double removed = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
        if (sys.frozen[k]) {
            removed = std::max(removed, sup_norm(z0[k]));
            std::fill(z0[k].begin(), z0[k].end(), 0.0);
        } else if (sys.mean_constrained[k]) {
            const double m = mean(dom, z0[k]);
            removed = std::max(removed, std::abs(m));
            for (double& v : z0[k]) v -= m;
        }
    }
    return removed;
}

inline LocalControlResult degenerate_impl(const Domain1D& dom, const StateField& u0, const StationaryState& ustar,
                                          int j, const DiffusionVector& d, const TimeGrid& tg,
                                          const LocalControlOptions& opt);

}  // namespace detail

/**
 * Vanishing targets: (u3*, u4*) = 0 with j = 2, or u3* = 0 with j = 1. The
 * uncontrolled species must already sit at their target values; the reaction
 * then vanishes identically and each controlled species is a heat equation
 * steered by penalized HUM.
 */
inline LocalControlResult degenerate_control(const Domain1D& dom, const StateField& u0, const StationaryState& ustar,
                                             int j, const DiffusionVector& d, const TimeGrid& tg,
                                             const LocalControlOptions& opt = {}) {
    return detail::degenerate_impl(dom, u0, ustar, j, d, tg, opt);
}

/**
 * Picard realization of the fixed-point map z -> zeta(G(z)) followed by a
 * fresh nonlinear simulation with the resulting physical controls.
 */
inline LocalControlResult local_control(const Domain1D& dom, const StateField& u0, const StationaryState& ustar, int j,
                                        const DiffusionVector& d, const TimeGrid& tg,
                                        const LocalControlOptions& opt = {}) {
    const TargetCase tc = classify_target(ustar, j);
    if (tc == TargetCase::j2_degenerate || tc == TargetCase::j1_degenerate)
        return degenerate_control(dom, u0, ustar, j, d, tg, opt);
    const AdmissibilityVerdict verdict = admissible(dom, u0, j, d, ustar);
    if (!verdict.admissible) throw InadmissibleError(verdict);

    LocalControlResult res;
    res.target_case = tc;
    HumOptions hum = opt.hum;
    std::shared_ptr<const ReturnTrajectory> loop;
    if (tc == TargetCase::j3_return_method) {
        const Interval rw = opt.return_window.a < 0.0 ? Interval{0.1 * tg.horizon, 0.9 * tg.horizon} : opt.return_window;
        loop = std::make_shared<const ReturnTrajectory>(build_return_trajectory(tg, dom, d[2], opt.return_amplitude, rw));
        hum.window = rw;  // the control window must cover the loop's support
    }
    const TransformedSystem sys = build_transformed_system(j, d, ustar, loop);
    StateField z0 = sys.forward_map(u0, 0);
    res.hj_residual = detail::project_hj(dom, sys, z0);

    const double nu = opt.fixed_point.nu > 0.0 ? opt.fixed_point.nu : 10.0 * sup_norm(ustar.values()) + 1.0;
    std::vector<StateField> z(tg.steps + 1, StateField(dom.size()));
    res.status = LocalStatus::no_contraction;
    for (int k = 0; k < opt.fixed_point.max_outer_iterations; ++k) {
        CouplingField A = sys.coupling(z);
        FixedPointIterate it;
        it.iteration = k + 1;
        it.coupling_bound = A.max_abs();
        const ControlProblem p = make_control_problem(dom, tg, sys, A, z0, hum);
        res.hum = solve_penalized_hum(p);
        res.linear = simulate_linear(dom, z0, tg, sys, A, res.hum.controls);
        it.increment = detail::history_gap(res.linear.states, z);
        it.state_sup = detail::history_sup(res.linear.states);
        it.linear_terminal_norm = res.hum.terminal_norm;
        it.cg_iterations = res.hum.cg_iterations;
        it.cg_status = res.hum.status;
        res.log.push_back(it);
        res.outer_iterations = k + 1;
        z = res.linear.states;
        if (it.state_sup > nu) {
            res.status = LocalStatus::outside_ball;
            break;
        }
        if (it.increment <= opt.fixed_point.contraction_tol) {
            res.status = LocalStatus::converged;
            break;
        }
    }

    res.controls = res.hum.controls;
    if (loop) {
        const auto& w = dom.omega();
        for (std::size_t n = 0; n < tg.steps; ++n)
            for (std::size_t i = w.first; i <= w.last; ++i) res.controls(n, 2, i) += loop->h3bar(n, 0, i);
    }
    try {
        res.nonlinear = simulate_nonlinear(dom, u0, tg, d, res.controls);
        res.terminal_linf_error = detail::terminal_error(res.nonlinear.terminal(), ustar.values());
    } catch (const BlowUpError& e) {
        res.status = LocalStatus::blow_up;
        res.message = e.what();
        res.terminal_linf_error = std::numeric_limits<double>::infinity();
        return res;
    }
    res.message = to_string(res.status);
    return res;
}

namespace detail {

inline LocalControlResult degenerate_impl(const Domain1D& dom, const StateField& u0, const StationaryState& ustar,
                                          int j, const DiffusionVector& d, const TimeGrid& tg,
                                          const LocalControlOptions& opt) {
    const TargetCase tc = classify_target(ustar, j);
    if (tc != TargetCase::j2_degenerate && tc != TargetCase::j1_degenerate)
        throw std::invalid_argument("degenerate_control: target is not a vanishing-target case for this j");
    const AdmissibilityVerdict verdict = admissible(dom, u0, j, d, ustar);
    if (!verdict.admissible) throw InadmissibleError(verdict);

    LocalControlResult res;
    res.target_case = tc;
    const Vec4& us = ustar.values();
    TransformedSystem sys;
    sys.j = j;
    sys.d = d;
    sys.ustar = ustar;
    sys.D = Mat4::diag(d.values());
    for (std::size_t k = static_cast<std::size_t>(j); k < 4; ++k) sys.frozen[k] = true;

    StateField z0(dom.size());
    for (std::size_t k = 0; k < static_cast<std::size_t>(j); ++k)
        for (std::size_t i = 0; i < dom.size(); ++i) z0[k][i] = u0[k][i] - us[k];
    const CouplingField none;
    const ControlProblem p = make_control_problem(dom, tg, sys, none, z0, opt.hum);
    res.hum = solve_penalized_hum(p);
    res.linear = simulate_linear(dom, z0, tg, sys, none, res.hum.controls);
    res.controls = res.hum.controls;
    res.outer_iterations = 1;
    res.status = LocalStatus::converged;
    try {
        res.nonlinear = simulate_nonlinear(dom, u0, tg, d, res.controls);
    } catch (const BlowUpError& e) {
        res.status = LocalStatus::blow_up;
        res.message = e.what();
        res.terminal_linf_error = std::numeric_limits<double>::infinity();
        return res;
    }
    res.terminal_linf_error = terminal_error(res.nonlinear.terminal(), us);
    for (const auto& s : res.nonlinear.states)
        for (std::size_t k = static_cast<std::size_t>(j); k < 4; ++k)
            for (double v : s[k]) res.untouched_drift = std::max(res.untouched_drift, std::abs(v - us[k]));
    res.message = "vanishing target: decoupled heat control";
    return res;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Staircase
// ---------------------------------------------------------------------------

struct StaircaseConfig {
    double settle_tol = 1e-2;
    double settle_max_time = 200.0;
    double initial_theta_step = 0.25;
    double min_theta_step = 1.0 / 1024.0;
    double leg_tol = 1e-3;
    double leg_horizon = 1.0;
    std::size_t leg_steps = 200;
    double detour_radius = 0.2;  ///< r of the vanishing-u3* detour
};

/// Equilibrium path from z to u*: v2..v4 interpolated linearly, v1 = v2 v4 / v3.
inline Vec4 staircase_path(const Vec4& z, const Vec4& ustar, double theta) {
    Vec4 v{};
    for (std::size_t k = 1; k < 4; ++k) v[k] = (1.0 - theta) * z[k] + theta * ustar[k];
    if (!(v[2] > 0.0)) throw std::invalid_argument("path needs a positive third component");
    v[0] = v[1] * v[3] / v[2];
    return v;
}

/// Intermediate equilibrium with positive u3 near a target with u3* = 0.
inline Vec4 detour_target(const Vec4& ustar, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("detour radius must be positive");
    const double h = 0.5 * r;
    if (ustar[1] == 0.0) {
        const double beta = 0.5 * std::min(h, h * (ustar[0] + h) / (ustar[3] + h));
        return {ustar[0] + h, beta, beta * (ustar[3] + h) / (ustar[0] + h), ustar[3] + h};
    }
    const double beta = 0.5 * std::min(h, h * (ustar[0] + h) / (ustar[1] + h));
    return {ustar[0] + h, ustar[1] + h, beta * (ustar[1] + h) / (ustar[0] + h), beta};
}

struct LegRecord {
    int index = 0;
    double theta_from = 0.0, theta_to = 0.0, theta_step = 0.0;
    Vec4 anchor{};
    bool success = false;
    double terminal_error = 0.0;
    int outer_iterations = 0;
    std::string message;
    bool detour = false;
};

struct GlobalControlResult {
    bool success = false;
    std::string message;
    StationaryState z;
    double settle_time = 0.0;
    std::vector<LegRecord> legs;           ///< attempted legs in order, failures included
    std::vector<Trajectory> segments;      ///< settling run, then every accepted leg
    double terminal_error = 0.0;
    [[nodiscard]] std::vector<double> theta_log() const {
        std::vector<double> t;
        for (const auto& l : legs)
            if (l.success && !l.detour) t.push_back(l.theta_to);
        return t;
    }
};

/**
 * Free settling towards the asymptotic equilibrium z, then legs of local
 * control along the equilibrium path, halving the theta step on failure.
 * Implemented for three controls.
 */
inline GlobalControlResult global_control(const Domain1D& dom, const StateField& u0, const StationaryState& ustar,
                                          int j, const DiffusionVector& d, const StaircaseConfig& cfg,
                                          const LocalControlOptions& local = {}) {
    if (j != 3) throw std::invalid_argument("global staircase control is implemented for j = 3");
    if (!(0.0 < cfg.min_theta_step && cfg.min_theta_step <= cfg.initial_theta_step && cfg.initial_theta_step <= 1.0))
        throw std::invalid_argument("need 0 < min_theta_step <= initial_theta_step <= 1");
    for (const auto& c : u0.u)
        for (double v : c)
            if (v < 0.0) throw std::invalid_argument("global control needs nonnegative initial data");

    GlobalControlResult res;
    res.z = asymptotic_state(dom, u0);
    const Vec4 z = res.z.values();
    const TimeGrid leg_tg(cfg.leg_horizon, cfg.leg_steps);

    // Phase 1: free settling
    StateField cur = u0;
    {
        Trajectory settle;
        settle.states.push_back(cur);
        while (detail::terminal_error(cur, z) > cfg.settle_tol) {
            if (res.settle_time >= cfg.settle_max_time) {
                res.message = "settling cap exceeded";
                return res;
            }
            const Trajectory t = simulate_nonlinear(dom, cur, leg_tg, d, Controls());
            settle.states.insert(settle.states.end(), t.states.begin() + 1, t.states.end());
            cur = t.terminal();
            res.settle_time += cfg.leg_horizon;
        }
        if (res.settle_time > 0.0) {
            settle.timegrid = TimeGrid(res.settle_time, settle.states.size() - 1);
            res.segments.push_back(std::move(settle));
        }
    }
    const Vec4 goal = ustar.values();
    if (detail::terminal_error(cur, goal) <= cfg.leg_tol) {
        res.success = true;
        res.terminal_error = detail::terminal_error(cur, goal);
        res.message = "settled at the target";
        return res;
    }

    int leg_index = 0;
    auto run_leg = [&](const Vec4& anchor, LegRecord rec) {
        rec.index = ++leg_index;
        rec.anchor = anchor;
        try {
            const LocalControlResult lc = local_control(dom, cur, StationaryState(anchor), j, d, leg_tg, local);
            rec.outer_iterations = lc.outer_iterations;
            rec.terminal_error = lc.terminal_linf_error;
            rec.success = lc.ok(cfg.leg_tol);
            rec.message = lc.message;
            if (lc.status == LocalStatus::converged && !rec.success)
                rec.message += "; terminal error " + std::to_string(lc.terminal_linf_error) + " above leg_tol";
            if (rec.success) {
                cur = lc.nonlinear.terminal();
                res.segments.push_back(lc.nonlinear);
            }
        } catch (const std::exception& e) {
            rec.success = false;
            rec.message = e.what();
        }
        res.legs.push_back(rec);
        return rec.success;
    };

    // Phase 2: detour when the target has no u3
    const bool detour = goal[2] == 0.0;
    const Vec4 path_end = detour ? detour_target(goal, cfg.detour_radius) : goal;

    // Phase 3: staircase along the path z -> path_end
    double theta = 0.0, step = cfg.initial_theta_step;
    const bool trivial_path = detail::terminal_error(StateField::constant(1, z), path_end) <= 1e-14;
    if (trivial_path) step = 1.0;
    while (theta < 1.0) {
        const double next = std::min(1.0, theta + step);
        LegRecord rec;
        rec.theta_from = theta;
        rec.theta_to = next;
        rec.theta_step = step;
        if (run_leg(staircase_path(z, path_end, next), rec)) {
            theta = next;
            continue;
        }
        step *= 0.5;
        // on a trivial path every theta names the same anchor, so shrinking cannot help
        if (trivial_path || step < cfg.min_theta_step) {
            res.message = "theta step underflow at theta = " + std::to_string(theta) + " (leg " +
                          std::to_string(leg_index) + ": " + res.legs.back().message + ")";
            res.terminal_error = detail::terminal_error(cur, goal);
            return res;
        }
    }
    if (detour) {
        LegRecord rec;
        rec.theta_from = rec.theta_to = 1.0;
        rec.detour = true;
        if (!run_leg(goal, rec)) {
            res.message = "final leg from the detour target failed: " + res.legs.back().message;
            res.terminal_error = detail::terminal_error(cur, goal);
            return res;
        }
    }
    res.terminal_error = detail::terminal_error(cur, goal);
    res.success = res.terminal_error <= cfg.leg_tol;
    res.message = res.success ? "reached target" : "terminal error above tolerance";
    return res;
}

}  // namespace rdcontrol
