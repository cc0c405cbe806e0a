/**
 * @file structure.hpp
 * @brief Conserved quantities, admissible initial data and the asymptotic
 *        equilibrium of the uncontrolled system.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdcontrol/grid.hpp"
#include "rdcontrol/simulate.hpp"
#include "rdcontrol/species.hpp"
#include "rdcontrol/state.hpp"

namespace rdcontrol {

// ---------------------------------------------------------------------------
// Admissibility
// ---------------------------------------------------------------------------

struct Violation {
    std::string condition;  // human readable, e.g. "pointwise u3+u4 = u3*+u4*"
    double residual = 0.0;
};

struct AdmissibilityVerdict {
    bool admissible = true;
    std::vector<Violation> violations;

    [[nodiscard]] std::string describe() const {
        if (admissible) return "admissible";
        std::string s = "inadmissible:";
        for (const auto& v : violations) s += " [" + v.condition + ", residual " + std::to_string(v.residual) + "]";
        return s;
    }
};

namespace detail {

/// Signed combination u_k + sign * u_l (0-based species indices).
inline GridFunction combination(const StateField& u, std::size_t k, std::size_t l, double sign) {
    GridFunction c(u.points());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = u[k][i] + sign * u[l][i];
    return c;
}

inline std::string combo_name(std::size_t k, std::size_t l, double sign) {
    return "u" + std::to_string(k + 1) + (sign > 0 ? "+" : "-") + "u" + std::to_string(l + 1);
}

/// Sign making u_k + sign u_l free of reaction: the (-1)^{k-l} rule.
inline double cancel_sign(std::size_t k, std::size_t l) { return ((k + l) % 2 == 1) ? 1.0 : -1.0; }

class VerdictBuilder {
public:
    VerdictBuilder(const Domain1D& dom, const StateField& u0, const Vec4& ustar, double tol)
        : dom_(dom), u0_(u0), ustar_(ustar), tol_(tol) {}

    void require_pointwise(std::size_t k, std::size_t l) {
        const double s = cancel_sign(k, l);
        const double target = ustar_[k] + s * ustar_[l];
        const GridFunction c = combination(u0_, k, l, s);
        double r = 0.0;
        for (double v : c) r = std::max(r, std::abs(v - target));
        check(r, scale(target), "pointwise " + combo_name(k, l, s) + " = const (equal diffusions)");
    }
    void require_mean(std::size_t k, std::size_t l) {
        const double s = cancel_sign(k, l);
        const double target = ustar_[k] + s * ustar_[l];
        const double r = std::abs(mean(dom_, combination(u0_, k, l, s)) - target);
        check(r, scale(target), "mean of " + combo_name(k, l, s) + " = target value");
    }
    void require_value(std::size_t k, double value, const std::string& why) {
        double r = 0.0;
        for (double v : u0_[k]) r = std::max(r, std::abs(v - value));
        check(r, scale(value), "u" + std::to_string(k + 1) + " = " + std::to_string(value) + " pointwise (" + why + ")");
    }
    AdmissibilityVerdict take() { return std::move(v_); }

private:
    [[nodiscard]] double scale(double target) const { return 1.0 + std::abs(target); }
    void check(double residual, double scale, std::string what) {
        if (residual > tol_ * scale) {
            v_.admissible = false;
            v_.violations.push_back({std::move(what), residual});
        }
    }

    const Domain1D& dom_;
    const StateField& u0_;
    Vec4 ustar_;
    double tol_;
    AdmissibilityVerdict v_;
};

}  // namespace detail

/**
 * Necessary conditions on u0 for reaching u* with j controls: the conserved
 * combinations must already match, pointwise when the two diffusion
 * coefficients agree and in mean otherwise. Vanishing-target cases add the
 * conditions forced by backward uniqueness.
 */
inline AdmissibilityVerdict admissible(const Domain1D& dom, const StateField& u0, int j, const DiffusionVector& d,
                                       const StationaryState& ustar, double tol = 1e-9) {
    check_control_count(j);
    const Vec4& us = ustar.values();
    detail::VerdictBuilder b(dom, u0, us, tol);
    if (j == 3) return b.take();

    if (j == 2) {
        if (us[2] == 0.0 && us[3] == 0.0) {
            b.require_value(2, 0.0, "vanishing target (u3*, u4*) = 0");
            b.require_value(3, 0.0, "vanishing target (u3*, u4*) = 0");
            return b.take();
        }
        if (d[2] == d[3]) b.require_pointwise(2, 3);
        else b.require_mean(2, 3);
        return b.take();
    }

    if (us[2] == 0.0) {
        if (us[1] == 0.0) {
            b.require_value(1, 0.0, "vanishing target (u3*, u2*) = 0");
            b.require_value(2, 0.0, "vanishing target (u3*, u2*) = 0");
            b.require_value(3, us[3], "vanishing target (u3*, u2*) = 0");
        }
        if (us[3] == 0.0) {
            b.require_value(1, us[1], "vanishing target (u3*, u4*) = 0");
            b.require_value(2, 0.0, "vanishing target (u3*, u4*) = 0");
            b.require_value(3, 0.0, "vanishing target (u3*, u4*) = 0");
        }
        return b.take();
    }
    const bool e23 = d[1] == d[2], e34 = d[2] == d[3], e24 = d[1] == d[3];
    if (e23 && e34) {
        b.require_pointwise(1, 2);
        b.require_pointwise(2, 3);
    } else if (e34) {
        b.require_mean(1, 2);
        b.require_pointwise(2, 3);
    } else if (e23) {
        b.require_pointwise(1, 2);
        b.require_mean(2, 3);
    } else if (e24) {
        b.require_pointwise(1, 3);
        b.require_mean(2, 3);
    } else {
        b.require_mean(1, 2);
        b.require_mean(2, 3);
    }
    return b.take();
}

// ---------------------------------------------------------------------------
// Invariant report
// ---------------------------------------------------------------------------

struct MassSeries {
    std::string name;                 // e.g. "u3+u4"
    bool controlled = false;          // a control enters one of the two species
    std::vector<double> values;       // quadrature at every time index
    double max_relative_drift = 0.0;  // max |Q(t) - Q(0)| / (1 + |Q(0)|)
    /// Same, after subtracting the accumulated control input.
    double max_relative_drift_corrected = 0.0;
};

struct PointwiseCombination {
    std::string name;
    double max_drift = 0.0;  // sup over (t, x) of the gap to a scalar heat solve
};

struct InvariantReport {
    std::vector<MassSeries> masses;
    std::vector<PointwiseCombination> pointwise;

    [[nodiscard]] const MassSeries& mass(const std::string& name) const {
        for (const auto& m : masses)
            if (m.name == name) return m;
        throw std::out_of_range("no mass series " + name);
    }
};

/**
 * Quadratures of u1+u2, u1+u4, u2+u3, u3+u4 along the run, and for every pair
 * with equal diffusion coefficients the gap between the reaction-free
 * combination and an independently stepped scalar heat equation.
 */
inline InvariantReport invariant_report(const Domain1D& dom, const Trajectory& traj, int j, const DiffusionVector& d) {
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(std::max(j, 0)), traj.controls.count());
    const std::size_t steps = traj.states.size() - 1;
    const double dt = traj.timegrid.dt();
    const auto& w = dom.omega();
    auto control_mass = [&](std::size_t n, std::size_t k) {
        if (k >= count) return 0.0;
        double s = 0.0;
        for (std::size_t i = w.first; i <= w.last; ++i) s += dom.weight(i) * traj.controls(n, k, i);
        return s;
    };

    InvariantReport rep;
    const std::size_t pairs[4][2] = {{0, 1}, {0, 3}, {1, 2}, {2, 3}};
    for (const auto& p : pairs) {
        MassSeries ms;
        ms.name = detail::combo_name(p[0], p[1], 1.0);
        ms.controlled = p[0] < count || p[1] < count;
        ms.values.reserve(steps + 1);
        for (const auto& s : traj.states) ms.values.push_back(quadrature(dom, detail::combination(s, p[0], p[1], 1.0)));
        const double q0 = ms.values.front(), scale = 1.0 + std::abs(q0);
        double injected = 0.0;
        for (std::size_t n = 0; n <= steps; ++n) {
            if (n > 0) injected += dt * (control_mass(n - 1, p[0]) + control_mass(n - 1, p[1]));
            ms.max_relative_drift = std::max(ms.max_relative_drift, std::abs(ms.values[n] - q0) / scale);
            ms.max_relative_drift_corrected =
                std::max(ms.max_relative_drift_corrected, std::abs(ms.values[n] - q0 - injected) / scale);
        }
        rep.masses.push_back(std::move(ms));
    }

    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t l = k + 1; l < 4; ++l) {
            if (d[k] != d[l]) continue;
            const double sign = detail::cancel_sign(k, l);
            ImplicitDiffusion heat(dom, dt * d[k]);
            GridFunction c = detail::combination(traj.states.front(), k, l, sign);
            PointwiseCombination pc{detail::combo_name(k, l, sign), 0.0};
            for (std::size_t n = 0; n < steps; ++n) {
                for (std::size_t i = w.first; i <= w.last; ++i) {
                    if (k < count) c[i] += dt * traj.controls(n, k, i);
                    if (l < count) c[i] += dt * sign * traj.controls(n, l, i);
                }
                heat.solve(c);
                const GridFunction actual = detail::combination(traj.states[n + 1], k, l, sign);
                for (std::size_t i = 0; i < c.size(); ++i) pc.max_drift = std::max(pc.max_drift, std::abs(actual[i] - c[i]));
            }
            rep.pointwise.push_back(std::move(pc));
        }
    return rep;
}

// ---------------------------------------------------------------------------
// Asymptotic equilibrium
// ---------------------------------------------------------------------------

/**
 * The equilibrium z with the same four conserved means as u0 and
 * z1 z3 = z2 z4. With M12 = mean(u1+u2) etc. and S the total mean,
 *   z1 = M12 M14 / S, z2 = M12 M23 / S, z3 = M23 M34 / S, z4 = M14 M34 / S.
 */
inline StationaryState asymptotic_state(const Domain1D& dom, const StateField& u0) {
    Vec4 m{};
    for (std::size_t k = 0; k < 4; ++k) m[k] = mean(dom, u0[k]);
    const double m12 = m[0] + m[1], m14 = m[0] + m[3], m23 = m[1] + m[2], m34 = m[2] + m[3];
    if (!(m12 > 0.0 && m14 > 0.0 && m23 > 0.0 && m34 > 0.0))
        throw std::invalid_argument("asymptotic state needs positive means of u1+u2, u1+u4, u2+u3 and u3+u4");
    const double S = m12 + m34;
    const Vec4 z{m12 * m14 / S, m12 * m23 / S, m23 * m34 / S, m14 * m34 / S};

    const double scale = 1.0 + S;
    const double res[5] = {z[0] + z[1] - m12, z[0] + z[3] - m14, z[1] + z[2] - m23, z[2] + z[3] - m34,
                           (z[0] * z[2] - z[1] * z[3]) / scale};
    for (double r : res)
        if (std::abs(r) > 1e-12 * scale) throw std::runtime_error("asymptotic state residual check failed");
    return StationaryState(z);
}

}  // namespace rdcontrol
