// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls the library's solvers; the only shared inputs are grids,
// problem data and the Carleman parameters (s, eta0), which are inputs.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "rdcontrol/grid.hpp"
#include "rdcontrol/state.hpp"

namespace oracle {

/// Dense Neumann Laplacian with mirror ghosts at both ends.
inline Eigen::MatrixXd laplacian(std::size_t n, double dx) {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const auto N = static_cast<Eigen::Index>(n);
    for (Eigen::Index i = 0; i < N; ++i) {
        L(i, i) = -2.0;
        if (i > 0) L(i, i - 1) = 1.0;
        if (i + 1 < N) L(i, i + 1) = 1.0;
    }
    L(0, 1) = 2.0;
    L(N - 1, N - 2) = 2.0;
    return L / (dx * dx);
}

/// Trapezoidal weights.
inline Eigen::VectorXd trapezoid(std::size_t n, double dx) {
    Eigen::VectorXd w = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), dx);
    w(0) = w(static_cast<Eigen::Index>(n) - 1) = 0.5 * dx;
    return w;
}

/**
 * Minimizer of 1/2 sum dt w_i h^2 / rho + 1/(2 eps) |y(T)|_W^2 for the scalar
 * heat equation y^{n+1} = (I - dt d L)^{-1}(y^n + dt 1_omega h^n), controls
 * living on the steps in `steps` and on the omega points [first, last].
 * rho(k, i) is the multiplier of window step k at point first + i.
 * Solves (I + R Wc^{-1} F^T Wx F / eps) h = -R Wc^{-1} F^T Wx y_free / eps.
 * Returns h indexed (k, i) -> k * np + i.
 */
inline Eigen::VectorXd dense_heat_hum(std::size_t n, double dx, double dt, std::size_t m, double d, double eps,
                                      const std::vector<std::size_t>& steps, std::size_t first, std::size_t last,
                                      const Eigen::MatrixXd& rho, const Eigen::VectorXd& y0) {
    const auto N = static_cast<Eigen::Index>(n);
    const Eigen::MatrixXd S = Eigen::MatrixXd::Identity(N, N) - dt * d * laplacian(n, dx);
    const Eigen::MatrixXd Sinv = S.inverse();
    const std::size_t np = last - first + 1;
    const auto K = static_cast<Eigen::Index>(steps.size() * np);

    // propagator powers Sinv^p
    std::vector<Eigen::MatrixXd> pow(m + 1);
    pow[0] = Eigen::MatrixXd::Identity(N, N);
    for (std::size_t p = 1; p <= m; ++p) pow[p] = Sinv * pow[p - 1];

    // y(T) = Sinv^m y0 + sum_n Sinv^{m-n} dt e_i h^n_i
    Eigen::MatrixXd F(N, K);
    for (std::size_t k = 0; k < steps.size(); ++k)
        for (std::size_t ii = 0; ii < np; ++ii)
            F.col(static_cast<Eigen::Index>(k * np + ii)) = dt * pow[m - steps[k]].col(static_cast<Eigen::Index>(first + ii));
    const Eigen::VectorXd yfree = pow[m] * y0;

    const Eigen::VectorXd wx = trapezoid(n, dx);
    Eigen::VectorXd wc(K), r(K);
    for (std::size_t k = 0; k < steps.size(); ++k)
        for (std::size_t ii = 0; ii < np; ++ii) {
            const auto idx = static_cast<Eigen::Index>(k * np + ii);
            wc(idx) = dt * wx(static_cast<Eigen::Index>(first + ii));
            r(idx) = rho(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(ii));
        }
    const Eigen::MatrixXd FtW = F.transpose() * wx.asDiagonal();
    const Eigen::VectorXd scale = r.cwiseQuotient(wc) / eps;
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(K, K) + scale.asDiagonal() * (FtW * F);
    const Eigen::VectorXd b = -(scale.asDiagonal() * (FtW * yfree));
    return A.fullPivLu().solve(b);
}

/**
 * Closed-form multiplier rho = exp(2 s alpha) (s phi)^M at the midpoints of
 * `steps`, restricted to points [first, last]. alpha, phi use
 * tau = 1 / ((t - a)(b - t)) and exp(lambda eta0) against exp(2 lambda max eta0).
 */
inline Eigen::MatrixXd closed_form_rho(const std::vector<double>& eta0, double lambda, double s, int M, double a,
                                       double b, double dt, const std::vector<std::size_t>& steps, std::size_t first,
                                       std::size_t last) {
    double emax = eta0.front();
    for (double e : eta0) emax = std::max(emax, e);
    const double big = std::exp(2.0 * lambda * emax);
    Eigen::MatrixXd rho(static_cast<Eigen::Index>(steps.size()), static_cast<Eigen::Index>(last - first + 1));
    for (std::size_t k = 0; k < steps.size(); ++k) {
        const double t = (static_cast<double>(steps[k]) + 0.5) * dt;
        const double tau = 1.0 / ((t - a) * (b - t));
        for (std::size_t ii = 0; ii + first <= last; ++ii) {
            const double e = std::exp(lambda * eta0[first + ii]);
            rho(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(ii)) =
                std::exp(2.0 * s * (e - big) * tau) * std::pow(s * e * tau, M);
        }
    }
    return rho;
}

/**
 * Equilibrium with prescribed species means (m1..m4) reached by the single
 * reaction U1 + U3 -> U2 + U4 with extent x: (m1 - x, m2 + x, m3 - x, m4 + x)
 * and (m1 - x)(m3 - x) = (m2 + x)(m4 + x), which is linear in x.
 */
inline rdcontrol::Vec4 reaction_extent_equilibrium(const rdcontrol::Vec4& m) {
    const double x = (m[0] * m[2] - m[1] * m[3]) / (m[0] + m[1] + m[2] + m[3]);
    return {m[0] - x, m[1] + x, m[2] - x, m[3] + x};
}

/// Reaction term of the four-species system, written out by species.
inline rdcontrol::Vec4 reaction(const rdcontrol::Vec4& u) {
    const double r = u[0] * u[2] - u[1] * u[3];
    return {-r, r, -r, r};
}

/// Random stationary state: half of them with a vanishing component pattern.
inline rdcontrol::Vec4 random_stationary(std::mt19937_64& gen, bool degenerate) {
    std::uniform_real_distribution<double> U(0.2, 2.0);
    if (degenerate) return {0.0, U(gen), 0.0, 0.0};
    const double a = U(gen), b = U(gen), c = U(gen);
    return {a, b, b * c / a, c};  // u1 u3 = b c = u2 u4
}

}  // namespace oracle
