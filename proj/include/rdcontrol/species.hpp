/**
 * @file species.hpp
 * @brief Constant stationary states of U1 + U3 <=> U2 + U4, diffusion
 *        vectors and the classification of control targets.
 */
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "rdcontrol/state.hpp"

namespace rdcontrol {

/// Checks u1*u3* == u2*u4* within `tol`. Throws on negative entries.
inline bool is_stationary(const Vec4& u, double tol) {
    for (double v : u)
        if (v < 0.0 || !std::isfinite(v)) throw std::invalid_argument("stationary state entries must be nonnegative");
    return std::abs(u[0] * u[2] - u[1] * u[3]) <= tol;
}

/// Nonnegative constant state with u1* u3* = u2* u4*.
class StationaryState {
public:
    StationaryState() = default;
    explicit StationaryState(const Vec4& u) : u_(u) {
        const double tol = 1e-12 * (1.0 + std::abs(u[0] * u[2]));
        if (!is_stationary(u, tol))
            throw std::invalid_argument("not a stationary state: u1*u3* != u2*u4*");
    }
    [[nodiscard]] const Vec4& values() const { return u_; }
    double operator[](std::size_t k) const { return u_[k]; }

private:
    Vec4 u_{};
};

class DiffusionVector {
public:
    DiffusionVector() : d_{1.0, 1.0, 1.0, 1.0} {}
    explicit DiffusionVector(const Vec4& d) : d_(d) {
        for (double v : d)
            if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("diffusion coefficients must be positive");
    }
    [[nodiscard]] const Vec4& values() const { return d_; }
    double operator[](std::size_t k) const { return d_[k]; }

private:
    Vec4 d_;
};

enum class TargetCase { generic, j2_degenerate, j1_degenerate, j3_return_method };

inline std::string to_string(TargetCase c) {
    switch (c) {
        case TargetCase::generic: return "generic";
        case TargetCase::j2_degenerate: return "j2-degenerate";
        case TargetCase::j1_degenerate: return "j1-degenerate";
        case TargetCase::j3_return_method: return "j3-return-method";
    }
    return "?";
}

inline void check_control_count(int j) {
    if (j < 1 || j > 3) throw std::invalid_argument("control count j must be 1, 2 or 3");
}

/// Which construction the controller must use for the target u* with j controls.
inline TargetCase classify_target(const StationaryState& ustar, int j) {
    check_control_count(j);
    const auto& u = ustar.values();
    switch (j) {
        case 3:
            return (u[0] == 0.0 && u[2] == 0.0 && u[3] == 0.0) ? TargetCase::j3_return_method : TargetCase::generic;
        case 2:
            return (u[2] == 0.0 && u[3] == 0.0) ? TargetCase::j2_degenerate : TargetCase::generic;
        default:
            return u[2] == 0.0 ? TargetCase::j1_degenerate : TargetCase::generic;
    }
}

}  // namespace rdcontrol
