/**
 * @file simulate.hpp
 * @brief IMEX time stepping of the nonlinear system, the linearized systems
 *        and their exact discrete adjoints.
 *
 * One step of the linear system is
 *   zeta^{n+1} = S^{-1} ((I + dt A^n) zeta^n + dt B h^n 1_omega),
 *   S = I - dt (D (x) Lap),
 * with D lower triangular, so S is inverted by forward substitution over the
 * components. The adjoint step is the transpose of that map in the
 * quadrature-weighted inner product:
 *   psi^{n+1} = S^{-*} phi^{n+1},  phi^n = (I + dt A^{nT}) psi^{n+1},
 * and psi^{n+1} is the field paired with the control of step n.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdcontrol/grid.hpp"
#include "rdcontrol/state.hpp"
#include "rdcontrol/transform.hpp"

namespace rdcontrol {

/// Raised when a run leaves the representable range.
class BlowUpError : public std::runtime_error {
public:
    BlowUpError(std::size_t step, double value)
        : std::runtime_error("blow-up detected at time index " + std::to_string(step) + " (|u| = " +
                             std::to_string(value) + ")"),
          step_(step) {}
    [[nodiscard]] std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

inline constexpr double kBlowUpGuard = 1e12;

/// (-1)^i (u1 u3 - u2 u4) for i = 1..4.
inline Vec4 reaction(const Vec4& u) {
    const double r = u[0] * u[2] - u[1] * u[3];
    return {-r, r, -r, r};
}

inline StateField reaction_rhs(const StateField& s) {
    StateField out(s.points());
    for (std::size_t i = 0; i < s.points(); ++i) out.set(i, reaction(s.at(i)));
    return out;
}

/**
 * Factorized (I - dt D (x) Lap) for a lower-triangular D.
 */
class DiffusionStepper {
public:
    DiffusionStepper(const Domain1D& dom, const Mat4& D, double dt) : dom_(&dom), D_(D), dt_(dt), lap_(dom.size()) {
        if (!D.lower_triangular()) throw std::invalid_argument("diffusion matrix must be lower triangular");
        for (std::size_t k = 0; k < 4; ++k) {
            if (!(D(k, k) > 0.0)) throw std::invalid_argument("diffusion matrix needs a positive diagonal");
            diag_[k] = ImplicitDiffusion(dom, dt * D(k, k));
        }
    }

    [[nodiscard]] double dt() const { return dt_; }
    [[nodiscard]] const Mat4& matrix() const { return D_; }

    /// b <- S^{-1} b, rows solved top to bottom.
    void solve(StateField& b) const {
        for (std::size_t k = 0; k < 4; ++k) {
            for (std::size_t l = 0; l < k; ++l) add_cross(D_(k, l), b[l], b[k]);
            diag_[k].solve(b[k]);
        }
    }

    /// b <- S^{-*} b, rows solved bottom to top with D transposed.
    void solve_adjoint(StateField& b) const {
        for (std::size_t k = 4; k-- > 0;) {
            for (std::size_t l = k + 1; l < 4; ++l) add_cross(D_(l, k), b[l], b[k]);
            diag_[k].solve(b[k]);
        }
    }

private:
    void add_cross(double coeff, const GridFunction& from, GridFunction& into) const {
        if (coeff == 0.0) return;
        apply_laplacian(*dom_, from, lap_);
        const double c = dt_ * coeff;
        for (std::size_t i = 0; i < into.size(); ++i) into[i] += c * lap_[i];
    }

    const Domain1D* dom_;
    Mat4 D_;
    double dt_;
    std::array<ImplicitDiffusion, 4> diag_;
    mutable GridFunction lap_;
};

/// One IMEX step: solves (I - dt D Lap) s' = s + dt source.
inline StateField step_imex(const Domain1D& dom, const StateField& s, double dt, const Mat4& D,
                            const StateField& source) {
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    DiffusionStepper stepper(dom, D, dt);
    StateField next = s;
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t i = 0; i < s.points(); ++i) next[k][i] += dt * source[k][i];
    stepper.solve(next);
    return next;
}

namespace detail {

inline void check_controls(const Controls& h, const TimeGrid& tg, const Domain1D& dom, std::size_t max_count) {
    if (h.empty()) return;
    if (h.steps() != tg.steps || h.points() != dom.size())
        throw std::invalid_argument("control history does not match the time grid / domain");
    if (h.count() > max_count) throw std::invalid_argument("too many control components");
}

/// b += dt * h^n * 1_omega on the first h.count() components.
inline void add_controls(const Domain1D& dom, const Controls& h, std::size_t n, double dt, StateField& b) {
    if (h.empty()) return;
    const auto& w = dom.omega();
    for (std::size_t c = 0; c < h.count(); ++c) {
        const auto f = h.field(n, c);
        for (std::size_t i = w.first; i <= w.last; ++i) b[c][i] += dt * f[i];
    }
}

inline void check_blowup(const StateField& s, std::size_t step, double guard) {
    for (const auto& c : s.u)
        for (double v : c)
            if (!std::isfinite(v) || std::abs(v) > guard) throw BlowUpError(step, v);
}

}  // namespace detail

struct NonlinearOptions {
    double blowup_guard = kBlowUpGuard;
    /// Extra source added to u3 (the return-method loop control), optional.
    const Controls* extra_h3 = nullptr;
};

/**
 * March of the reaction-diffusion system with diagonal diffusion d. Controls
 * act on the first controls.count() species and are restricted to omega.
 */
inline Trajectory simulate_nonlinear(const Domain1D& dom, const StateField& u0, const TimeGrid& tg,
                                     const DiffusionVector& d, const Controls& controls,
                                     const NonlinearOptions& opt = {}) {
    if (u0.points() != dom.size()) throw std::invalid_argument("initial state does not match the domain");
    if (!u0.finite()) throw std::invalid_argument("initial state is not finite");
    detail::check_controls(controls, tg, dom, 3);
    const double dt = tg.dt();
    DiffusionStepper stepper(dom, Mat4::diag(d.values()), dt);

    Trajectory traj;
    traj.timegrid = tg;
    traj.controls = controls;
    traj.states.reserve(tg.steps + 1);
    traj.states.push_back(u0);
    for (std::size_t n = 0; n < tg.steps; ++n) {
        const StateField& cur = traj.states.back();
        StateField next = cur;
        for (std::size_t i = 0; i < dom.size(); ++i) {
            const Vec4 r = reaction(cur.at(i));
            for (std::size_t k = 0; k < 4; ++k) next[k][i] += dt * r[k];
        }
        detail::add_controls(dom, controls, n, dt, next);
        if (opt.extra_h3 != nullptr) {
            const auto f = opt.extra_h3->field(n, 0);
            for (std::size_t i = dom.omega().first; i <= dom.omega().last; ++i) next[2][i] += dt * f[i];
        }
        stepper.solve(next);
        detail::check_blowup(next, n + 1, opt.blowup_guard);
        traj.states.push_back(std::move(next));
    }
    return traj;
}

/// One forward step of the linear system, in place.
inline void linear_step(const Domain1D& dom, const DiffusionStepper& stepper, const CouplingField& A,
                        const Controls& h, std::size_t n, StateField& z, bool coupled = true) {
    const double dt = stepper.dt();
    StateField next = z;
    if (coupled) {
        for (std::size_t i = 0; i < dom.size(); ++i) {
            const Vec4 az = A.at(n, i) * z.at(i);
            for (std::size_t k = 0; k < 4; ++k) next[k][i] += dt * az[k];
        }
    }
    detail::add_controls(dom, h, n, dt, next);
    stepper.solve(next);
    z = std::move(next);
}

/// Forward march of d/dt zeta - D_j Lap zeta = A zeta + B_j h 1_omega.
inline Trajectory simulate_linear(const Domain1D& dom, const StateField& z0, const TimeGrid& tg,
                                  const TransformedSystem& sys, const CouplingField& A, const Controls& controls) {
    if (z0.points() != dom.size()) throw std::invalid_argument("initial state does not match the domain");
    detail::check_controls(controls, tg, dom, static_cast<std::size_t>(sys.j));
    DiffusionStepper stepper(dom, sys.D, tg.dt());
    Trajectory traj;
    traj.timegrid = tg;
    traj.controls = controls;
    traj.states.reserve(tg.steps + 1);
    traj.states.push_back(z0);
    StateField z = z0;
    const bool coupled = !A.zero();
    for (std::size_t n = 0; n < tg.steps; ++n) {
        linear_step(dom, stepper, A, controls, n, z, coupled);
        traj.states.push_back(z);
    }
    return traj;
}

/// Terminal state only; the workhorse of the conjugate gradient.
inline StateField linear_terminal(const Domain1D& dom, const StateField& z0, const TimeGrid& tg,
                                  const DiffusionStepper& stepper, const CouplingField& A, const Controls& controls) {
    StateField z = z0;
    const bool coupled = !A.zero();
    for (std::size_t n = 0; n < tg.steps; ++n) linear_step(dom, stepper, A, controls, n, z, coupled);
    return z;
}

/// Adjoint history: phi[n] for n = 0..m, psi[n] = psi^{n+1} paired with control step n.
struct AdjointTrajectory {
    TimeGrid timegrid;
    std::vector<StateField> phi;
    std::vector<StateField> psi;
};

inline AdjointTrajectory adjoint_sweep(const Domain1D& dom, const StateField& phiT, const TimeGrid& tg,
                                       const DiffusionStepper& stepper, const CouplingField& A) {
    const double dt = stepper.dt();
    AdjointTrajectory adj;
    adj.timegrid = tg;
    adj.phi.resize(tg.steps + 1);
    adj.psi.resize(tg.steps);
    adj.phi[tg.steps] = phiT;
    const bool coupled = !A.zero();
    for (std::size_t n = tg.steps; n-- > 0;) {
        StateField psi = adj.phi[n + 1];
        stepper.solve_adjoint(psi);
        StateField phi = psi;
        if (coupled) {
            for (std::size_t i = 0; i < dom.size(); ++i) {
                const Vec4 ap = A.at(n, i).transpose() * psi.at(i);
                for (std::size_t k = 0; k < 4; ++k) phi[k][i] += dt * ap[k];
            }
        }
        adj.psi[n] = std::move(psi);
        adj.phi[n] = std::move(phi);
    }
    return adj;
}

/// Backward march of the exact discrete adjoint of simulate_linear.
inline AdjointTrajectory simulate_adjoint(const Domain1D& dom, const StateField& phiT, const TimeGrid& tg,
                                          const TransformedSystem& sys, const CouplingField& A) {
    if (phiT.points() != dom.size()) throw std::invalid_argument("terminal state does not match the domain");
    DiffusionStepper stepper(dom, sys.D, tg.dt());
    return adjoint_sweep(dom, phiT, tg, stepper, A);
}

/// sum_n dt <h^n 1_omega, psi^{n+1}>_W over the controlled components.
inline double control_pairing(const Domain1D& dom, const Controls& h, const AdjointTrajectory& adj) {
    if (h.empty()) return 0.0;
    const double dt = adj.timegrid.dt();
    const auto& w = dom.omega();
    double s = 0.0;
    for (std::size_t n = 0; n < h.steps(); ++n)
        for (std::size_t c = 0; c < h.count(); ++c) {
            const auto f = h.field(n, c);
            for (std::size_t i = w.first; i <= w.last; ++i) s += dt * dom.weight(i) * f[i] * adj.psi[n][c][i];
        }
    return s;
}

struct DualityReport {
    double absolute = 0.0;
    double relative = 0.0;
};

/**
 * |<zeta_h(T), phi_T> - sum <h, psi>| for zeta_h started from 0, relative to
 * max(|zeta_h(T)| |phi_T|, |h| |psi|).
 */
inline DualityReport duality_check(const Domain1D& dom, const TransformedSystem& sys, const CouplingField& A,
                                   const TimeGrid& tg, const Controls& h, const StateField& phiT) {
    DiffusionStepper stepper(dom, sys.D, tg.dt());
    const StateField zT = linear_terminal(dom, StateField(dom.size()), tg, stepper, A, h);
    const AdjointTrajectory adj = adjoint_sweep(dom, phiT, tg, stepper, A);
    const double lhs = inner(dom, zT, phiT);
    const double rhs = control_pairing(dom, h, adj);

    double psi_norm2 = 0.0;
    for (std::size_t n = 0; n < tg.steps; ++n)
        for (std::size_t c = 0; c < h.count(); ++c)
            for (std::size_t i = dom.omega().first; i <= dom.omega().last; ++i)
                psi_norm2 += tg.dt() * dom.weight(i) * adj.psi[n][c][i] * adj.psi[n][c][i];
    const double scale = std::max(l2_norm(dom, zT) * l2_norm(dom, phiT), h.empty() ? 0.0 : h.l2_norm(dom, tg.dt()) * std::sqrt(psi_norm2));

    DualityReport rep;
    rep.absolute = std::abs(lhs - rhs);
    rep.relative = scale > 0.0 ? rep.absolute / scale : 0.0;
    return rep;
}

}  // namespace rdcontrol
