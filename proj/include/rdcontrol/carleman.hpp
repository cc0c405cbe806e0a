/**
 * @file carleman.hpp
 * @brief Carleman weight functions on a control window (ta, tb) and the
 *        multiplier rho = exp(2 s alpha) (s phi)^M of the penalized HUM.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "rdcontrol/grid.hpp"
#include "rdcontrol/state.hpp"

namespace rdcontrol {

/// Exponent M_j of the weight for j controls.
inline int hum_exponent(int j) {
    switch (j) {
        case 3: return 7;
        case 2: return 13;
        case 1: return 166;
        default: throw std::invalid_argument("control count j must be 1, 2 or 3");
    }
}

inline constexpr double kLogUnderflow = -700.0;
/// ln(1e-200): target level of the multiplier at the first and last control samples.
inline constexpr double kLogEndpoint = -460.51701859880916;

/**
 * eta0(x) = x^p (L - x)^q, p = 2, q = p (L - c) / c, whose only interior
 * critical point is the centre c of omega_inner. Normalized to max 1.
 */
inline GridFunction build_eta0(const Domain1D& dom) {
    const auto& w = dom.omega_inner();
    const double L = dom.length();
    const double c = 0.5 * (dom.x(w.first) + dom.x(w.last));
    if (!(c > 0.0 && c < L)) throw std::invalid_argument("eta0: centre of omega_inner must be interior");
    const double p = 2.0, q = p * (L - c) / c;
    auto raw = [&](double x) { return std::pow(x, p) * std::pow(L - x, q); };
    const double peak = raw(c);
    GridFunction eta(dom.size());
    for (std::size_t i = 0; i < dom.size(); ++i) eta[i] = raw(dom.x(i)) / peak;
    eta.front() = 0.0;
    eta.back() = 0.0;
    return eta;
}

/// One-sided differences at the ends, centred differences inside.
inline GridFunction discrete_gradient(const Domain1D& dom, const GridFunction& f) {
    const std::size_t n = dom.size();
    GridFunction g(n);
    g[0] = (f[1] - f[0]) / dom.dx();
    for (std::size_t i = 1; i + 1 < n; ++i) g[i] = (f[i + 1] - f[i - 1]) / (2.0 * dom.dx());
    g[n - 1] = (f[n - 1] - f[n - 2]) / dom.dx();
    return g;
}

struct CarlemanParams {
    double lambda = 1.0;
    double s = 0.0;  ///< 0 selects the automatic value
};

struct WeightValues {
    double phi;
    double alpha;
};

class CarlemanWeights {
public:
    CarlemanWeights() = default;
    CarlemanWeights(GridFunction eta0, double lambda, double s, int M, Interval window)
        : eta0_(std::move(eta0)), lambda_(lambda), s_(s), M_(M), window_(window) {
        if (!(lambda >= 1.0)) throw std::invalid_argument("Carleman lambda must be >= 1");
        if (!(s > 0.0)) throw std::invalid_argument("Carleman s must be positive");
        if (M < 0) throw std::invalid_argument("weight exponent must be nonnegative");
        if (!(window.a < window.b)) throw std::invalid_argument("weight window must have ta < tb");
        eta_max_ = *std::max_element(eta0_.begin(), eta0_.end());
        big_ = std::exp(2.0 * lambda_ * eta_max_);
    }

    [[nodiscard]] const GridFunction& eta0() const { return eta0_; }
    [[nodiscard]] double lambda() const { return lambda_; }
    [[nodiscard]] double s() const { return s_; }
    [[nodiscard]] int exponent() const { return M_; }
    [[nodiscard]] const Interval& window() const { return window_; }
    [[nodiscard]] bool inside(double t) const { return t > window_.a && t < window_.b; }

    /// 1 / ((t - ta)(tb - t)); this is also phi_hat(t) = min_x phi(t, x).
    [[nodiscard]] double tau(double t) const {
        if (!inside(t)) throw std::domain_error("Carleman weight evaluated outside its time window");
        return 1.0 / ((t - window_.a) * (window_.b - t));
    }
    [[nodiscard]] double phi_hat(double t) const { return tau(t); }
    /// min_x alpha(t, x), attained where eta0 = 0.
    [[nodiscard]] double alpha_hat(double t) const { return (1.0 - big_) * tau(t); }

    [[nodiscard]] WeightValues eval(double t, std::size_t i) const {
        const double tt = tau(t), e = std::exp(lambda_ * eta0_[i]);
        return {e * tt, (e - big_) * tt};
    }

    [[nodiscard]] double log_multiplier(double t, std::size_t i) const {
        const auto w = eval(t, i);
        return 2.0 * s_ * w.alpha + M_ * std::log(s_ * w.phi);
    }
    /// rho(t, x_i), exactly 0 once the log drops below -700.
    [[nodiscard]] double multiplier(double t, std::size_t i) const {
        const double l = log_multiplier(t, i);
        return l < kLogUnderflow ? 0.0 : std::exp(l);
    }

private:
    GridFunction eta0_;
    double lambda_ = 1.0, s_ = 1.0;
    int M_ = 7;
    Interval window_{0.0, 1.0};
    double eta_max_ = 1.0, big_ = 1.0;
};

inline WeightValues eval_weights(const CarlemanWeights& w, double t, std::size_t i) { return w.eval(t, i); }
inline double hum_multiplier(const CarlemanWeights& w, double t, std::size_t i) { return w.multiplier(t, i); }

/// Midpoints (n + 1/2) dt of the steps lying strictly inside the window.
inline std::vector<std::size_t> window_steps(const TimeGrid& tg, const Interval& window) {
    std::vector<std::size_t> steps;
    for (std::size_t n = 0; n < tg.steps; ++n) {
        const double t = (static_cast<double>(n) + 0.5) * tg.dt();
        if (t > window.a && t < window.b) steps.push_back(n);
    }
    return steps;
}

namespace detail {
/// Smallest root above lo of a function decreasing on [lo, inf).
template <class F>
double decreasing_root(F&& f, double lo) {
    double hi = std::max(2.0 * lo, 1e-12);
    while (f(hi) > 0.0) {
        hi *= 2.0;
        if (hi > 1e300) throw std::runtime_error("automatic Carleman s: no root");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0.0 ? lo : hi) = mid;
        if (hi - lo <= 1e-14 * hi) break;
    }
    return hi;
}
}  // namespace detail

/**
 * Automatic s for a window sampled at the step midpoints of tg: the largest of
 *  - the s maximizing the peak of rho (eta0 = max, t at the window centre),
 *  - the s bringing that peak down to 1 when it would exceed 1,
 *  - the s pushing rho at the first and last samples below 1e-200.
 */
inline double automatic_s(const GridFunction& eta0, double lambda, int M, const Interval& window,
                          const TimeGrid& tg) {
    const auto steps = window_steps(tg, window);
    if (steps.empty()) throw std::invalid_argument("control window contains no time step");
    const double eta_max = *std::max_element(eta0.begin(), eta0.end());
    const double e1 = std::exp(lambda * eta_max);
    const double a = std::abs(e1 - std::exp(2.0 * lambda * eta_max));
    const double len = window.b - window.a;
    const double tau0 = 4.0 / (len * len);
    auto tau = [&](double t) { return 1.0 / ((t - window.a) * (window.b - t)); };
    auto logpeak = [&](double s, double tt) { return -2.0 * s * a * tt + M * std::log(s * e1 * tt); };

    double s = M > 0 ? M / (2.0 * a * tau0) : 1.0 / (a * tau0);
    if (logpeak(s, tau0) > 0.0) s = detail::decreasing_root([&](double x) { return logpeak(x, tau0); }, s);
    const double t_first = (static_cast<double>(steps.front()) + 0.5) * tg.dt();
    const double t_last = (static_cast<double>(steps.back()) + 0.5) * tg.dt();
    const double tau_end = std::min(tau(t_first), tau(t_last));
    if (logpeak(s, tau_end) > kLogEndpoint)
        s = detail::decreasing_root([&](double x) { return logpeak(x, tau_end) - kLogEndpoint; }, s);
    return s;
}

/// Weights for j controls on `window`, with automatic s unless params.s > 0.
inline CarlemanWeights make_weights(const Domain1D& dom, int j, const Interval& window, const TimeGrid& tg,
                                    const CarlemanParams& params = {}) {
    GridFunction eta = build_eta0(dom);
    const int M = hum_exponent(j);
    const double s = params.s > 0.0 ? params.s : automatic_s(eta, params.lambda, M, window, tg);
    return CarlemanWeights(std::move(eta), params.lambda, s, M, window);
}

}  // namespace rdcontrol
