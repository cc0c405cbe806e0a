/**
 * @file state.hpp
 * @brief Four-component state fields, time grids, control histories,
 *        trajectories and space-time coupling matrices.
 */
#pragma once

#include <array>
#include <cmath>
#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "rdcontrol/grid.hpp"

namespace rdcontrol {

inline constexpr std::size_t kSpecies = 4;

using Vec4 = std::array<double, 4>;

/// Dense 4x4 matrix, row-major.
struct Mat4 {
    std::array<double, 16> a{};

    double& operator()(std::size_t r, std::size_t c) { return a[4 * r + c]; }
    double operator()(std::size_t r, std::size_t c) const { return a[4 * r + c]; }

    static Mat4 identity() {
        Mat4 m;
        for (std::size_t i = 0; i < 4; ++i) m(i, i) = 1.0;
        return m;
    }
    static Mat4 diag(const Vec4& d) {
        Mat4 m;
        for (std::size_t i = 0; i < 4; ++i) m(i, i) = d[i];
        return m;
    }
    [[nodiscard]] Mat4 transpose() const {
        Mat4 t;
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t c = 0; c < 4; ++c) t(c, r) = (*this)(r, c);
        return t;
    }
    [[nodiscard]] double max_abs() const {
        double m = 0.0;
        for (double v : a) m = std::max(m, std::abs(v));
        return m;
    }
    [[nodiscard]] Vec4 operator*(const Vec4& v) const {
        Vec4 out{};
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t c = 0; c < 4; ++c) out[r] += (*this)(r, c) * v[c];
        return out;
    }
    friend Mat4 operator*(const Mat4& x, const Mat4& y) {
        Mat4 out;
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t k = 0; k < 4; ++k)
                for (std::size_t c = 0; c < 4; ++c) out(r, c) += x(r, k) * y(k, c);
        return out;
    }
    [[nodiscard]] bool lower_triangular() const {
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t c = r + 1; c < 4; ++c)
                if ((*this)(r, c) != 0.0) return false;
        return true;
    }
};

/// Concentrations (or perturbations, or adjoint states) of the four species.
struct StateField {
    std::array<GridFunction, 4> u;

    StateField() = default;
    explicit StateField(std::size_t n) { for (auto& c : u) c.assign(n, 0.0); }
    StateField(GridFunction u1, GridFunction u2, GridFunction u3, GridFunction u4)
        : u{std::move(u1), std::move(u2), std::move(u3), std::move(u4)} {
        for (const auto& c : u)
            if (c.size() != u[0].size()) throw std::invalid_argument("state components differ in length");
    }
    static StateField constant(std::size_t n, const Vec4& c) {
        StateField s(n);
        for (std::size_t k = 0; k < 4; ++k) s.u[k].assign(n, c[k]);
        return s;
    }

    [[nodiscard]] std::size_t points() const { return u[0].size(); }
    GridFunction& operator[](std::size_t k) { return u[k]; }
    const GridFunction& operator[](std::size_t k) const { return u[k]; }

    [[nodiscard]] Vec4 at(std::size_t i) const { return {u[0][i], u[1][i], u[2][i], u[3][i]}; }
    void set(std::size_t i, const Vec4& v) { for (std::size_t k = 0; k < 4; ++k) u[k][i] = v[k]; }

    StateField& operator+=(const StateField& o) {
        for (std::size_t k = 0; k < 4; ++k)
            for (std::size_t i = 0; i < points(); ++i) u[k][i] += o.u[k][i];
        return *this;
    }
    StateField& operator-=(const StateField& o) {
        for (std::size_t k = 0; k < 4; ++k)
            for (std::size_t i = 0; i < points(); ++i) u[k][i] -= o.u[k][i];
        return *this;
    }
    StateField& operator*=(double s) {
        for (auto& c : u)
            for (double& v : c) v *= s;
        return *this;
    }
    friend StateField operator+(StateField a, const StateField& b) { return a += b; }
    friend StateField operator-(StateField a, const StateField& b) { return a -= b; }
    friend StateField operator*(double s, StateField a) { return a *= s; }

    [[nodiscard]] double sup_norm() const {
        double m = 0.0;
        for (const auto& c : u) m = std::max(m, rdcontrol::sup_norm(c));
        return m;
    }
    [[nodiscard]] bool finite() const {
        for (const auto& c : u)
            for (double v : c)
                if (!std::isfinite(v)) return false;
        return true;
    }
};

inline double inner(const Domain1D& d, const StateField& a, const StateField& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < 4; ++k) s += inner(d, a[k], b[k]);
    return s;
}
inline double l2_norm(const Domain1D& d, const StateField& a) { return std::sqrt(inner(d, a, a)); }

/// Uniform time grid on [0, T] with m steps.
struct TimeGrid {
    double horizon = 1.0;
    std::size_t steps = 2;

    TimeGrid() = default;
    TimeGrid(double T, std::size_t m) : horizon(T), steps(m) {
        if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("time horizon must be positive");
        if (m < 2) throw std::invalid_argument("time grid needs at least 2 steps");
    }
    [[nodiscard]] double dt() const { return horizon / static_cast<double>(steps); }
    [[nodiscard]] double t(std::size_t n) const {
        return n == steps ? horizon : static_cast<double>(n) * dt();
    }
};

/**
 * Control history: `count` components on every time step, each a grid
 * function. Step n drives the update from t_n to t_{n+1}.
 */
class Controls {
public:
    Controls() = default;
    Controls(std::size_t steps, std::size_t count, std::size_t points)
        : steps_(steps), count_(count), points_(points), data_(steps * count * points, 0.0) {}

    [[nodiscard]] std::size_t steps() const { return steps_; }
    [[nodiscard]] std::size_t count() const { return count_; }
    [[nodiscard]] std::size_t points() const { return points_; }
    [[nodiscard]] bool empty() const { return count_ == 0; }

    double& operator()(std::size_t n, std::size_t c, std::size_t i) { return data_[(n * count_ + c) * points_ + i]; }
    double operator()(std::size_t n, std::size_t c, std::size_t i) const {
        return data_[(n * count_ + c) * points_ + i];
    }
    [[nodiscard]] std::span<const double> field(std::size_t n, std::size_t c) const {
        return {data_.data() + (n * count_ + c) * points_, points_};
    }
    std::span<double> field(std::size_t n, std::size_t c) {
        return {data_.data() + (n * count_ + c) * points_, points_};
    }
    [[nodiscard]] const std::vector<double>& raw() const { return data_; }
    std::vector<double>& raw() { return data_; }

    [[nodiscard]] double sup_norm() const { return rdcontrol::sup_norm(data_); }

    /// Space-time L2 norm with trapezoidal space weights and step length dt.
    [[nodiscard]] double l2_norm(const Domain1D& d, double dt) const {
        double s = 0.0;
        for (std::size_t n = 0; n < steps_; ++n)
            for (std::size_t c = 0; c < count_; ++c)
                for (std::size_t i = 0; i < points_; ++i) s += dt * d.weight(i) * std::pow((*this)(n, c, i), 2);
        return std::sqrt(s);
    }

    Controls& operator+=(const Controls& o) {
        if (o.data_.size() != data_.size()) throw std::invalid_argument("control shapes differ");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
        return *this;
    }

private:
    std::size_t steps_ = 0, count_ = 0, points_ = 0;
    std::vector<double> data_;
};

/// Time history of a 4-component field together with the controls that produced it.
struct Trajectory {
    TimeGrid timegrid;
    std::vector<StateField> states;  // m + 1 entries
    Controls controls;               // m steps, possibly with zero components

    [[nodiscard]] const StateField& initial() const { return states.front(); }
    [[nodiscard]] const StateField& terminal() const { return states.back(); }
};

/**
 * Space-time 4x4 coupling A(t_n, x_i). Either one constant matrix or one
 * matrix per (step, point).
 */
class CouplingField {
public:
    CouplingField() : constant_(Mat4{}), is_constant_(true) {}
    explicit CouplingField(const Mat4& a) : constant_(a), is_constant_(true) {}
    CouplingField(std::size_t steps, std::size_t points)
        : is_constant_(false), steps_(steps), points_(points), field_(steps * points) {}

    [[nodiscard]] bool is_constant() const { return is_constant_; }
    [[nodiscard]] const Mat4& constant() const { return constant_; }
    [[nodiscard]] const Mat4& at(std::size_t n, std::size_t i) const {
        return is_constant_ ? constant_ : field_[n * points_ + i];
    }
    Mat4& at(std::size_t n, std::size_t i) { return field_[n * points_ + i]; }
    [[nodiscard]] std::size_t steps() const { return steps_; }

    /// The bound M of the coupling: max over (t, x) of the largest entry.
    [[nodiscard]] double max_abs() const {
        if (is_constant_) return constant_.max_abs();
        double m = 0.0;
        for (const auto& a : field_) m = std::max(m, a.max_abs());
        return m;
    }
    [[nodiscard]] bool zero() const { return max_abs() == 0.0; }

    /// Steps [first, first + count) as a field of its own.
    [[nodiscard]] CouplingField slice(std::size_t first, std::size_t count) const {
        if (is_constant_) return *this;
        if (first + count > steps_) throw std::out_of_range("coupling slice beyond the time grid");
        CouplingField out(count, points_);
        std::copy(field_.begin() + static_cast<std::ptrdiff_t>(first * points_),
                  field_.begin() + static_cast<std::ptrdiff_t>((first + count) * points_), out.field_.begin());
        return out;
    }

private:
    Mat4 constant_;
    bool is_constant_;
    std::size_t steps_ = 0, points_ = 0;
    std::vector<Mat4> field_;
};

}  // namespace rdcontrol
