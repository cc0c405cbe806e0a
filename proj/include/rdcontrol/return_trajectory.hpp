/**
 * @file return_trajectory.hpp
 * @brief Loop trajectory (0, u2*, g, 0) with source (0, 0, dt g - d3 Lap g)
 *        used to linearize around a non-equilibrium path.
 */
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rdcontrol/grid.hpp"
#include "rdcontrol/state.hpp"

namespace rdcontrol {

struct ReturnTrajectory {
    TimeGrid timegrid;
    std::vector<GridFunction> g;  // m + 1 snapshots, g >= 0
    Controls h3bar;               // one component, m steps
    Interval time_window;
    IndexWindow support;          // spatial support of g
    double amplitude = 0.0;
};

namespace detail {
/// (1 - s^2)^4 on [-1, 1], zero outside.
inline double poly_bump(double s) {
    if (s <= -1.0 || s >= 1.0) return 0.0;
    const double w = 1.0 - s * s;
    return w * w * w * w;
}
}  // namespace detail

/**
 * g(t, x) = amplitude * b((t - tc) / th) * b((x - xc) / xh) with b the
 * polynomial bump, time support `window` (default (0.1T, 0.9T)) and space
 * support omega0 (strictly inside omega so that the discrete Laplacian of g
 * is supported in omega too). The source is defined from the backward Euler
 * step itself, so (g, h3bar) is a discrete trajectory of the d3 heat
 * equation from 0 to 0.
 */
inline ReturnTrajectory build_return_trajectory(const TimeGrid& tg, const Domain1D& dom, double d3,
                                                double amplitude, Interval window = {-1.0, -1.0}) {
    if (!(amplitude > 0.0)) throw std::invalid_argument("return trajectory amplitude must be positive");
    if (window.a < 0.0) window = {0.1 * tg.horizon, 0.9 * tg.horizon};
    if (!(0.0 < window.a && window.a < window.b && window.b < tg.horizon))
        throw std::invalid_argument("return trajectory time window must lie in (0, T)");
    const IndexWindow sup = dom.omega0();
    if (sup.size() < 5) throw std::invalid_argument("return trajectory: spatial window has fewer than 5 grid points");
    std::size_t time_points = 0;
    for (std::size_t n = 0; n <= tg.steps; ++n)
        if (tg.t(n) > window.a && tg.t(n) < window.b) ++time_points;
    if (time_points < 5) throw std::invalid_argument("return trajectory: time window has fewer than 5 grid points");

    ReturnTrajectory r;
    r.timegrid = tg;
    r.time_window = window;
    r.support = sup;
    r.amplitude = amplitude;

    const double xa = dom.x(sup.first), xb = dom.x(sup.last);
    const double xc = 0.5 * (xa + xb), xh = 0.5 * (xb - xa);
    const double tc = 0.5 * (window.a + window.b), th = 0.5 * (window.b - window.a);
    GridFunction profile(dom.size(), 0.0);
    // endpoints stay exactly zero so the discrete Laplacian cannot leak outside the support
    for (std::size_t i = sup.first + 1; i < sup.last; ++i) profile[i] = detail::poly_bump((dom.x(i) - xc) / xh);

    r.g.resize(tg.steps + 1);
    for (std::size_t n = 0; n <= tg.steps; ++n) {
        const double b = detail::poly_bump((tg.t(n) - tc) / th);
        r.g[n].resize(dom.size());
        for (std::size_t i = 0; i < dom.size(); ++i) r.g[n][i] = amplitude * b * profile[i];
    }

    const double dt = tg.dt();
    r.h3bar = Controls(tg.steps, 1, dom.size());
    GridFunction lap(dom.size());
    for (std::size_t n = 0; n < tg.steps; ++n) {
        apply_laplacian(dom, r.g[n + 1], lap);
        auto h = r.h3bar.field(n, 0);
        for (std::size_t i = 0; i < dom.size(); ++i) h[i] = (r.g[n + 1][i] - dt * d3 * lap[i] - r.g[n][i]) / dt;
    }
    return r;
}

}  // namespace rdcontrol
