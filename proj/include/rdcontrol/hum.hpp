/**
 * @file hum.hpp
 * @brief Penalized HUM: minimize
 *          J(h) = 1/2 <rho^{-1} h, h> + 1/(2 eps) |zeta_h(T)|^2
 *        over controls h = rho q supported in window x omega, by conjugate
 *        gradient on q in the rho-weighted inner product.
 *
 * With F the control-to-terminal-state map and F* its discrete adjoint,
 * the gradient in that inner product is q - phi with phi = F*(-zeta_h(T)/eps),
 * and the Hessian is q -> q + F*(F(rho q))/eps.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdcontrol/carleman.hpp"
#include "rdcontrol/grid.hpp"
#include "rdcontrol/simulate.hpp"
#include "rdcontrol/state.hpp"
#include "rdcontrol/transform.hpp"

namespace rdcontrol {

struct CgOptions {
    int max_iterations = 500;
    double tolerance = 1e-8;
    int stagnation_window = 20;
    int max_restarts = 3;
};

struct HumOptions {
    Interval window{-1.0, -1.0};  ///< negative: (0.2 T, 0.8 T)
    double epsilon = 1e-6;
    CarlemanParams carleman;
    CgOptions cg;
};

inline Interval default_window(const TimeGrid& tg) { return {0.2 * tg.horizon, 0.8 * tg.horizon}; }

struct ControlProblem {
    Domain1D domain;
    TimeGrid timegrid;
    Interval window;
    double epsilon;
    CarlemanWeights weights;
    TransformedSystem system;
    CouplingField coupling;
    StateField z0;
    CgOptions cg;
};

inline ControlProblem make_control_problem(const Domain1D& dom, const TimeGrid& tg, const TransformedSystem& sys,
                                           CouplingField coupling, StateField z0, const HumOptions& opt = {}) {
    if (!(opt.epsilon > 0.0)) throw std::invalid_argument("HUM epsilon must be positive");
    const Interval w = opt.window.a < 0.0 ? default_window(tg) : opt.window;
    if (!(0.0 <= w.a && w.a < w.b && w.b <= tg.horizon)) throw std::invalid_argument("HUM window must lie in [0, T]");
    CarlemanWeights weights = make_weights(dom, sys.j, w, tg, opt.carleman);
    return ControlProblem{dom, tg, w, opt.epsilon, std::move(weights), sys, std::move(coupling), std::move(z0), opt.cg};
}

enum class CgStatus { converged, zero_data, stagnated, max_iterations };

inline std::string to_string(CgStatus s) {
    switch (s) {
        case CgStatus::converged: return "converged";
        case CgStatus::zero_data: return "zero-data";
        case CgStatus::stagnated: return "stagnated";
        case CgStatus::max_iterations: return "max-iterations";
    }
    return "?";
}

struct ControlResult {
    Controls controls;               ///< j components, zero outside window x omega
    StateField terminal_state;
    double terminal_norm = 0.0;
    double weighted_control_norm2 = 0.0;  ///< <rho^{-1} h, h>
    double linf_control_norm = 0.0;
    double functional = 0.0;
    double functional_at_zero = 0.0;
    double optimality_residual = 0.0;  ///< |h - rho phi| / |h| on window x omega
    double max_duality_defect = 0.0;   ///< relative, over all CG products
    double hj_residual = 0.0;          ///< worst constraint residual of z0
    int cg_iterations = 0;
    CgStatus status = CgStatus::converged;
    std::vector<double> residual_history;  ///< |r|_rho / |r0|_rho
};

/// z0 outside H_j: a frozen component is nonzero, or a constrained mean is.
class MembershipError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Worst H_j residual of z0 (relative to max(1, |z0|_inf)); throws above tol.
inline double check_membership(const Domain1D& dom, const TransformedSystem& sys, const StateField& z0,
                               double tol = 1e-9) {
    const double scale = std::max(1.0, z0.sup_norm());
    double worst = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
        double r = 0.0;
        if (sys.frozen[k]) r = sup_norm(z0[k]);
        else if (sys.mean_constrained[k]) r = std::abs(mean(dom, z0[k]));
        else continue;
        worst = std::max(worst, r / scale);
        if (r > tol * scale)
            throw MembershipError("initial perturbation outside H_j: component " + std::to_string(k + 1) +
                                  (sys.frozen[k] ? " must vanish pointwise" : " must have zero mean") +
                                  " (residual " + std::to_string(r) + ")");
    }
    return worst;
}

namespace detail {

/**
 * Dense vectors over (window step, control component, point of omega) and the
 * forward / adjoint products needed by the conjugate gradient.
 */
class HumOperator {
public:
    explicit HumOperator(const ControlProblem& p)
        : p_(p), stepper_(p.domain, p.system.D, p.timegrid.dt()), steps_(window_steps(p.timegrid, p.window)),
          j_(static_cast<std::size_t>(p.system.j)), first_(p.domain.omega().first), np_(p.domain.omega().size()),
          coupled_(!p.coupling.zero()) {
        if (steps_.empty()) throw std::invalid_argument("HUM window contains no time step");
        const double dt = p.timegrid.dt();
        rho_.resize(steps_.size() * np_);
        wgt_.resize(rho_.size());
        for (std::size_t k = 0; k < steps_.size(); ++k) {
            const double t = (static_cast<double>(steps_[k]) + 0.5) * dt;
            for (std::size_t ii = 0; ii < np_; ++ii) {
                rho_[k * np_ + ii] = p.weights.multiplier(t, first_ + ii);
                wgt_[k * np_ + ii] = dt * p.domain.weight(first_ + ii);
            }
        }
    }

    [[nodiscard]] std::size_t size() const { return steps_.size() * j_ * np_; }
    [[nodiscard]] double rho(std::size_t idx) const { return rho_[point(idx)]; }
    [[nodiscard]] double weight(std::size_t idx) const { return wgt_[point(idx)]; }

    /// sum dt w rho a b
    [[nodiscard]] double inner_rho(const std::vector<double>& a, const std::vector<double>& b) const {
        double s = 0.0;
        for (std::size_t x = 0; x < a.size(); ++x) s += wgt_[point(x)] * rho_[point(x)] * a[x] * b[x];
        return s;
    }
    /// sum dt w a b
    [[nodiscard]] double inner_plain(const std::vector<double>& a, const std::vector<double>& b) const {
        double s = 0.0;
        for (std::size_t x = 0; x < a.size(); ++x) s += wgt_[point(x)] * a[x] * b[x];
        return s;
    }
    [[nodiscard]] std::vector<double> times_rho(const std::vector<double>& a) const {
        std::vector<double> out(a.size());
        for (std::size_t x = 0; x < a.size(); ++x) out[x] = rho_[point(x)] * a[x];
        return out;
    }
    /// Zeroes entries where rho vanishes, so they never enter the iteration.
    void restrict(std::vector<double>& a) const {
        for (std::size_t x = 0; x < a.size(); ++x)
            if (rho_[point(x)] == 0.0) a[x] = 0.0;
    }

    [[nodiscard]] Controls to_controls(const std::vector<double>& h) const {
        Controls c(p_.timegrid.steps, j_, p_.domain.size());
        for (std::size_t k = 0; k < steps_.size(); ++k)
            for (std::size_t comp = 0; comp < j_; ++comp)
                for (std::size_t ii = 0; ii < np_; ++ii) c(steps_[k], comp, first_ + ii) = h[(k * j_ + comp) * np_ + ii];
        return c;
    }

    /// zeta(T) from z0 under the control h (a vector over the active set).
    [[nodiscard]] StateField terminal(const StateField& z0, const std::vector<double>& h) const {
        const Controls c = to_controls(h);
        StateField z = z0;
        for (std::size_t n = 0; n < p_.timegrid.steps; ++n) linear_step(p_.domain, stepper_, p_.coupling, c, n, z, coupled_);
        return z;
    }
    [[nodiscard]] StateField free_terminal(const StateField& z0) const {
        const Controls none;
        StateField z = z0;
        for (std::size_t n = 0; n < p_.timegrid.steps; ++n) linear_step(p_.domain, stepper_, p_.coupling, none, n, z, coupled_);
        return z;
    }

    /// F* phiT: the adjoint fields psi^{n+1} gathered on the active set.
    [[nodiscard]] std::vector<double> adjoint(const StateField& phiT) const {
        std::vector<double> out(size(), 0.0);
        const double dt = p_.timegrid.dt();
        StateField phi = phiT;
        std::size_t k = steps_.size();
        for (std::size_t n = p_.timegrid.steps; n-- > steps_.front();) {
            StateField psi = std::move(phi);
            stepper_.solve_adjoint(psi);
            if (k > 0 && steps_[k - 1] == n) {
                --k;
                for (std::size_t comp = 0; comp < j_; ++comp)
                    for (std::size_t ii = 0; ii < np_; ++ii) out[(k * j_ + comp) * np_ + ii] = psi[comp][first_ + ii];
            }
            phi = psi;
            if (coupled_) {
                for (std::size_t i = 0; i < p_.domain.size(); ++i) {
                    const Vec4 ap = p_.coupling.at(n, i).transpose() * psi.at(i);
                    for (std::size_t c = 0; c < 4; ++c) phi[c][i] += dt * ap[c];
                }
            }
        }
        restrict(out);
        return out;
    }

private:
    [[nodiscard]] std::size_t point(std::size_t idx) const { return (idx / (j_ * np_)) * np_ + idx % np_; }

    const ControlProblem& p_;
    DiffusionStepper stepper_;
    std::vector<std::size_t> steps_;
    std::size_t j_, first_, np_;
    bool coupled_;
    std::vector<double> rho_, wgt_;
};

inline double norm_plain(const HumOperator& op, const std::vector<double>& a) { return std::sqrt(op.inner_plain(a, a)); }

}  // namespace detail

/**
 * Conjugate gradient for (I + F* F rho / eps) q = F*(-zeta_free(T) / eps) in
 * the rho-weighted inner product. Stops when both the rho-norm of the
 * residual and |rho r| / |rho q| fall below the tolerance; the final residual
 * is recomputed from scratch and the iteration restarted if it disagrees.
 */
inline ControlResult solve_penalized_hum(const ControlProblem& p) {
    ControlResult res;
    res.hj_residual = check_membership(p.domain, p.system, p.z0);
    const detail::HumOperator op(p);
    const double eps = p.epsilon, tol = p.cg.tolerance;

    const StateField zfree = op.free_terminal(p.z0);
    res.functional_at_zero = 0.5 * inner(p.domain, zfree, zfree) / eps;
    std::vector<double> q(op.size(), 0.0);

    auto gradient_rhs = [&](const StateField& zT) {
        StateField phiT = zT;
        phiT *= -1.0 / eps;
        return op.adjoint(phiT);
    };
    auto hessian = [&](const std::vector<double>& v) {
        const StateField zT = op.terminal(StateField(p.domain.size()), op.times_rho(v));
        StateField y = zT;
        y *= 1.0 / eps;
        std::vector<double> g = op.adjoint(y);
        // <F rho v, y>_W against <rho v, F* y>
        const double lhs = inner(p.domain, zT, y), rhs = op.inner_plain(op.times_rho(v), g);
        const double scale = std::max(l2_norm(p.domain, zT) * l2_norm(p.domain, y),
                                      detail::norm_plain(op, op.times_rho(v)) * detail::norm_plain(op, g));
        if (scale > 0.0) res.max_duality_defect = std::max(res.max_duality_defect, std::abs(lhs - rhs) / scale);
        for (std::size_t x = 0; x < g.size(); ++x) g[x] += v[x];
        return g;
    };

    std::vector<double> r = gradient_rhs(zfree);  // b - H*0
    const double r0 = std::sqrt(op.inner_rho(r, r));
    if (r0 == 0.0) {
        res.status = CgStatus::zero_data;
        res.controls = op.to_controls(q);
        res.terminal_state = zfree;
        res.terminal_norm = l2_norm(p.domain, zfree);
        res.functional = res.functional_at_zero;
        return res;
    }

    auto converged = [&](const std::vector<double>& rr, const std::vector<double>& qq) {
        const double rn = std::sqrt(op.inner_rho(rr, rr));
        const double hq = detail::norm_plain(op, op.times_rho(qq));
        const double hr = detail::norm_plain(op, op.times_rho(rr));
        return rn <= tol * r0 && hr <= tol * hq;
    };

    res.status = CgStatus::max_iterations;
    int restarts = 0;
    while (true) {
        std::vector<double> d = r;
        double rr = op.inner_rho(r, r);
        double best = std::sqrt(rr);
        int since_best = 0;
        bool done = converged(r, q);
        while (!done && res.cg_iterations < p.cg.max_iterations) {
            const std::vector<double> hd = hessian(d);
            const double curv = op.inner_rho(d, hd);
            if (!(curv > 0.0)) break;
            const double a = rr / curv;
            for (std::size_t x = 0; x < q.size(); ++x) {
                q[x] += a * d[x];
                r[x] -= a * hd[x];
            }
            ++res.cg_iterations;
            const double rr_new = op.inner_rho(r, r);
            res.residual_history.push_back(std::sqrt(rr_new) / r0);
            if (converged(r, q)) {
                done = true;
                break;
            }
            if (std::sqrt(rr_new) < best) {
                best = std::sqrt(rr_new);
                since_best = 0;
            } else if (++since_best >= p.cg.stagnation_window) {
                res.status = CgStatus::stagnated;
                break;
            }
            const double beta = rr_new / rr;
            rr = rr_new;
            for (std::size_t x = 0; x < d.size(); ++x) d[x] = r[x] + beta * d[x];
        }
        // recompute the true gradient
        const StateField zT = op.terminal(p.z0, op.times_rho(q));
        const std::vector<double> phi = gradient_rhs(zT);
        for (std::size_t x = 0; x < r.size(); ++x) r[x] = phi[x] - q[x];
        if (done && converged(r, q)) {
            res.status = CgStatus::converged;
            break;
        }
        if (res.status == CgStatus::stagnated || res.cg_iterations >= p.cg.max_iterations || restarts >= p.cg.max_restarts)
            break;
        ++restarts;
    }

    const std::vector<double> h = op.times_rho(q);
    res.controls = op.to_controls(h);
    res.terminal_state = op.terminal(p.z0, h);
    res.terminal_norm = l2_norm(p.domain, res.terminal_state);
    res.weighted_control_norm2 = op.inner_rho(q, q);
    res.linf_control_norm = sup_norm(h);
    res.functional = 0.5 * res.weighted_control_norm2 + 0.5 * inner(p.domain, res.terminal_state, res.terminal_state) / eps;
    const std::vector<double> phi = gradient_rhs(res.terminal_state);
    std::vector<double> gap(h.size());
    for (std::size_t x = 0; x < h.size(); ++x) gap[x] = h[x] - op.rho(x) * phi[x];
    const double hn = detail::norm_plain(op, h);
    res.optimality_residual = hn > 0.0 ? detail::norm_plain(op, gap) / hn : 0.0;
    return res;
}

struct ThreePhaseResult {
    Trajectory trajectory;  ///< linear system over (0, T)
    ControlResult sub;      ///< HUM solve on (t1, t2)
    std::size_t first_step = 0, last_step = 0;
};

/**
 * Free evolution on (0, t1), HUM on (t1, t2) driving zeta(t2) towards 0,
 * free evolution on (t2, T). t1 and t2 are snapped to the time grid.
 */
inline ThreePhaseResult three_phase_control(const StateField& z0, const ControlProblem& p) {
    const TimeGrid& tg = p.timegrid;
    const double dt = tg.dt();
    const auto n1 = static_cast<std::size_t>(std::lround(p.window.a / dt));
    const auto n2 = static_cast<std::size_t>(std::lround(p.window.b / dt));
    if (n2 < n1 + 2 || n2 > tg.steps) throw std::invalid_argument("three-phase window needs at least two steps");

    ThreePhaseResult out;
    out.first_step = n1;
    out.last_step = n2;
    const Controls none;
    const DiffusionStepper stepper(p.domain, p.system.D, dt);
    StateField z = z0;
    const bool coupled = !p.coupling.zero();
    for (std::size_t n = 0; n < n1; ++n) linear_step(p.domain, stepper, p.coupling, none, n, z, coupled);

    const TimeGrid sub_tg(static_cast<double>(n2 - n1) * dt, n2 - n1);
    const double shift = static_cast<double>(n1) * dt;
    const auto& w = p.weights;
    CarlemanWeights sub_w(w.eta0(), w.lambda(), w.s(), w.exponent(), {w.window().a - shift, w.window().b - shift});
    ControlProblem sub{p.domain, sub_tg, {0.0, sub_tg.horizon}, p.epsilon, std::move(sub_w), p.system,
                       p.coupling.slice(n1, n2 - n1), z, p.cg};
    out.sub = solve_penalized_hum(sub);

    Controls full(tg.steps, static_cast<std::size_t>(p.system.j), p.domain.size());
    for (std::size_t n = 0; n < sub_tg.steps; ++n)
        for (std::size_t c = 0; c < full.count(); ++c) {
            const auto src = out.sub.controls.field(n, c);
            std::copy(src.begin(), src.end(), full.field(n1 + n, c).begin());
        }
    out.trajectory = simulate_linear(p.domain, z0, tg, p.system, p.coupling, full);
    return out;
}

struct ObservabilityStats {
    double max_ratio = 0.0;
    std::vector<double> ratios;
    int skipped = 0;
};

/**
 * |phi(0)|^2 / sum_{i <= j} int int_{(0,T) x omega} |psi_i|^2 for one terminal
 * datum. Frozen components are dropped and mean-constrained ones are taken
 * mean-free on the left. Returns nothing when both sides vanish.
 */
inline std::optional<double> observability_ratio(const ControlProblem& p, const StateField& phiT) {
    const AdjointTrajectory adj = simulate_adjoint(p.domain, phiT, p.timegrid, p.system, p.coupling);
    const StateField& phi0 = adj.phi.front();
    double lhs = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
        if (p.system.frozen[k]) continue;
        GridFunction c = phi0[k];
        if (p.system.mean_constrained[k]) {
            const double m = mean(p.domain, c);
            for (double& v : c) v -= m;
        }
        lhs += inner(p.domain, c, c);
    }
    double rhs = 0.0;
    const auto& w = p.domain.omega();
    for (std::size_t n = 0; n < p.timegrid.steps; ++n)
        for (std::size_t c = 0; c < static_cast<std::size_t>(p.system.j); ++c)
            for (std::size_t i = w.first; i <= w.last; ++i)
                rhs += p.timegrid.dt() * p.domain.weight(i) * adj.psi[n][c][i] * adj.psi[n][c][i];
    if (lhs == 0.0 && rhs == 0.0) return std::nullopt;
    return lhs / rhs;
}

inline ObservabilityStats observability_probe(const ControlProblem& p, int trials, std::uint64_t seed = 1) {
    if (trials < 1) throw std::invalid_argument("observability probe needs at least one trial");
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal;
    ObservabilityStats st;
    for (int t = 0; t < trials; ++t) {
        StateField phiT(p.domain.size());
        for (auto& c : phiT.u)
            for (double& v : c) v = normal(gen);
        const auto r = observability_ratio(p, phiT);
        if (!r) {
            ++st.skipped;
            continue;
        }
        st.ratios.push_back(*r);
        st.max_ratio = std::max(st.max_ratio, *r);
    }
    return st;
}

}  // namespace rdcontrol
