/**
 * @file grid.hpp
 * @brief Uniform 1D grid on (0, L): Neumann Laplacian, trapezoidal quadrature,
 *        nested control windows and the implicit diffusion solve.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdcontrol {

using GridFunction = std::vector<double>;

/// Closed index range [first, last] of grid points.
struct IndexWindow {
    std::size_t first = 0;
    std::size_t last = 0;

    [[nodiscard]] std::size_t size() const { return last - first + 1; }
    [[nodiscard]] bool contains(std::size_t i) const { return i >= first && i <= last; }
    /// Strict interior: both endpoints differ.
    [[nodiscard]] bool strictly_inside(const IndexWindow& outer) const {
        return first > outer.first && last < outer.last;
    }
};

enum class WindowId { omega, omega0, omega_inner, full };

inline std::string to_string(WindowId w) {
    switch (w) {
        case WindowId::omega: return "omega";
        case WindowId::omega0: return "omega0";
        case WindowId::omega_inner: return "omega_inner";
        case WindowId::full: return "full";
    }
    return "?";
}

inline WindowId parse_window_id(const std::string& s) {
    if (s == "omega") return WindowId::omega;
    if (s == "omega0") return WindowId::omega0;
    if (s == "omega_inner") return WindowId::omega_inner;
    if (s == "full") return WindowId::full;
    throw std::invalid_argument("unknown window id '" + s + "'");
}

/// Interval (a, b) in physical units.
struct Interval {
    double a = 0.0;
    double b = 0.0;
};

/**
 * The interval (0, L) sampled at n equispaced points, together with the
 * control support omega and the nested windows omega0 and omega_inner used
 * by the weight construction. Windows are snapped to the nearest grid points
 * so that masks are exact indicators.
 */
class Domain1D {
public:
    Domain1D(double length, std::size_t n, Interval omega, Interval omega0, Interval omega_inner)
        : length_(length), n_(n) {
        if (!(length > 0.0) || !std::isfinite(length))
            throw std::invalid_argument("domain length must be positive");
        if (n < 3) throw std::invalid_argument("domain needs at least 3 grid points");
        dx_ = length / static_cast<double>(n - 1);
        full_ = {0, n - 1};
        omega_ = snap(omega, "omega");
        omega0_ = snap(omega0, "omega0");
        inner_ = snap(omega_inner, "omega_inner");
        if (omega_.first == 0 || omega_.last == n_ - 1)
            throw std::invalid_argument("omega must be strictly inside (0, L)");
        if (!omega0_.strictly_inside(omega_))
            throw std::invalid_argument("omega0 must lie strictly inside omega");
        if (!inner_.strictly_inside(omega0_))
            throw std::invalid_argument("omega_inner must lie strictly inside omega0");
        for (const auto* w : {&omega_, &omega0_, &inner_})
            if (w->size() < 3) throw std::invalid_argument("each window needs at least 3 grid points");
    }

    /// Unit interval with omega = (0.3, 0.7), omega0 = (0.35, 0.65), omega_inner = (0.4, 0.6).
    static Domain1D unit(std::size_t n) {
        return Domain1D(1.0, n, {0.3, 0.7}, {0.35, 0.65}, {0.4, 0.6});
    }

    [[nodiscard]] double length() const { return length_; }
    [[nodiscard]] std::size_t size() const { return n_; }
    [[nodiscard]] double dx() const { return dx_; }
    [[nodiscard]] double x(std::size_t i) const {
        return i + 1 == n_ ? length_ : static_cast<double>(i) * dx_;
    }
    [[nodiscard]] const IndexWindow& window(WindowId w) const {
        switch (w) {
            case WindowId::omega: return omega_;
            case WindowId::omega0: return omega0_;
            case WindowId::omega_inner: return inner_;
            case WindowId::full: return full_;
        }
        throw std::invalid_argument("unknown window id");
    }
    [[nodiscard]] const IndexWindow& omega() const { return omega_; }
    [[nodiscard]] const IndexWindow& omega0() const { return omega0_; }
    [[nodiscard]] const IndexWindow& omega_inner() const { return inner_; }

    /// Trapezoidal weight of grid point i.
    [[nodiscard]] double weight(std::size_t i) const {
        return (i == 0 || i + 1 == n_) ? 0.5 * dx_ : dx_;
    }

    [[nodiscard]] GridFunction zeros() const { return GridFunction(n_, 0.0); }
    [[nodiscard]] GridFunction constant(double c) const { return GridFunction(n_, c); }

    template <class F>
    [[nodiscard]] GridFunction sample(F&& f) const {
        GridFunction u(n_);
        for (std::size_t i = 0; i < n_; ++i) u[i] = f(x(i));
        return u;
    }

private:
    IndexWindow snap(Interval iv, const char* name) const {
        if (!(iv.a < iv.b)) throw std::invalid_argument(std::string(name) + ": need a < b");
        const auto first = static_cast<std::size_t>(std::lround(std::max(iv.a, 0.0) / dx_));
        const auto last = static_cast<std::size_t>(std::lround(std::min(iv.b, length_) / dx_));
        if (last >= n_ || first >= last)
            throw std::invalid_argument(std::string(name) + ": window does not fit the grid");
        return {first, last};
    }

    double length_;
    std::size_t n_;
    double dx_;
    IndexWindow omega_, omega0_, inner_;
    IndexWindow full_;
};

/// Mirror-ghost Neumann Laplacian, written into `out`.
inline void apply_laplacian(const Domain1D& d, std::span<const double> u, std::span<double> out) {
    const std::size_t n = d.size();
    const double inv = 1.0 / (d.dx() * d.dx());
    out[0] = 2.0 * (u[1] - u[0]) * inv;
    for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (u[i - 1] - 2.0 * u[i] + u[i + 1]) * inv;
    out[n - 1] = 2.0 * (u[n - 2] - u[n - 1]) * inv;
}

inline GridFunction neumann_laplacian(const Domain1D& d, const GridFunction& u) {
    if (u.size() != d.size()) throw std::invalid_argument("grid function length mismatch");
    GridFunction out(u.size());
    apply_laplacian(d, u, out);
    return out;
}

inline double quadrature(const Domain1D& d, std::span<const double> u) {
    const std::size_t n = d.size();
    double s = 0.5 * (u[0] + u[n - 1]);
    for (std::size_t i = 1; i + 1 < n; ++i) s += u[i];
    return s * d.dx();
}

inline double mean(const Domain1D& d, std::span<const double> u) { return quadrature(d, u) / d.length(); }

/// Quadrature-weighted inner product.
inline double inner(const Domain1D& d, std::span<const double> u, std::span<const double> v) {
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) s += d.weight(i) * u[i] * v[i];
    return s;
}

inline double l2_norm(const Domain1D& d, std::span<const double> u) { return std::sqrt(inner(d, u, u)); }

inline double sup_norm(std::span<const double> u) {
    double m = 0.0;
    for (double v : u) m = std::max(m, std::abs(v));
    return m;
}

inline GridFunction window_mask(const Domain1D& d, WindowId which) {
    const auto& w = d.window(which);
    GridFunction m(d.size(), 0.0);
    for (std::size_t i = w.first; i <= w.last; ++i) m[i] = 1.0;
    return m;
}

/**
 * Factorization of (I - c L) for the Neumann Laplacian L, c >= 0.
 * Thomas algorithm with precomputed multipliers; the matrix is strictly
 * diagonally dominant by rows for c > 0.
 */
class ImplicitDiffusion {
public:
    ImplicitDiffusion() = default;
    ImplicitDiffusion(const Domain1D& d, double c) : n_(d.size()), c_(c) {
        if (!(c >= 0.0)) throw std::invalid_argument("implicit diffusion needs c >= 0");
        const double r = c / (d.dx() * d.dx());
        lower_.assign(n_, -r);
        upper_.assign(n_, -r);
        diag_.assign(n_, 1.0 + 2.0 * r);
        upper_[0] = -2.0 * r;
        lower_[n_ - 1] = -2.0 * r;
        // forward elimination coefficients
        cprime_.resize(n_);
        denom_.resize(n_);
        denom_[0] = diag_[0];
        cprime_[0] = upper_[0] / denom_[0];
        for (std::size_t i = 1; i < n_; ++i) {
            denom_[i] = diag_[i] - lower_[i] * cprime_[i - 1];
            if (denom_[i] == 0.0) throw std::runtime_error("singular tridiagonal system");
            cprime_[i] = (i + 1 < n_) ? upper_[i] / denom_[i] : 0.0;
        }
    }

    [[nodiscard]] double coefficient() const { return c_; }

    /// Solves (I - cL) x = b in place.
    void solve(std::span<double> b) const {
        b[0] /= denom_[0];
        for (std::size_t i = 1; i < n_; ++i) b[i] = (b[i] - lower_[i] * b[i - 1]) / denom_[i];
        for (std::size_t i = n_ - 1; i-- > 0;) b[i] -= cprime_[i] * b[i + 1];
    }

private:
    std::size_t n_ = 0;
    double c_ = 0.0;
    std::vector<double> lower_, diag_, upper_, cprime_, denom_;
};

}  // namespace rdcontrol
