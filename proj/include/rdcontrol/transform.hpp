/**
 * @file transform.hpp
 * @brief Changes of variables u -> v -> zeta that make the linearized system
 *        controllable with j controls, with the matching diffusion matrices
 *        D_j and the state-dependent coupling G(zeta).
 */
#pragma once

#include <array>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdcontrol/grid.hpp"
#include "rdcontrol/return_trajectory.hpp"
#include "rdcontrol/species.hpp"
#include "rdcontrol/state.hpp"

namespace rdcontrol {

/// Branch of the change of variables actually used.
enum class TransformBranch {
    j3,
    j2,                ///< d3 != d4, v4 = u3 + u4 has a mean constraint
    j2_equal_d34,      ///< d3 == d4, v4 is frozen pointwise
    j1,                ///< d2, d3, d4 pairwise distinct
    j1_equal_d23,      ///< d2 == d3 != d4
    j1_equal_d24,      ///< d2 == d4 != d3
    j1_equal_d34,      ///< d3 == d4 != d2
    j1_all_equal       ///< d2 == d3 == d4
};

inline std::string to_string(TransformBranch b) {
    switch (b) {
        case TransformBranch::j3: return "j3";
        case TransformBranch::j2: return "j2";
        case TransformBranch::j2_equal_d34: return "j2-reduced(d3=d4)";
        case TransformBranch::j1: return "j1";
        case TransformBranch::j1_equal_d23: return "j1-reduced(d2=d3)";
        case TransformBranch::j1_equal_d24: return "j1-reduced(d2=d4)";
        case TransformBranch::j1_equal_d34: return "j1-reduced(d3=d4)";
        case TransformBranch::j1_all_equal: return "j1-reduced(d2=d3=d4)";
    }
    return "?";
}

struct AlphaBetaGamma {
    double alpha, beta, gamma;
};

/**
 * v = P u, zeta = v - P ubar with ubar the reference state (the target, or
 * the return-method loop). The first two rows of P (and of its inverse) are
 * e1 and e2, which is what makes the generic coupling formula below valid.
 */
class TransformedSystem {
public:
    int j = 3;
    TransformBranch branch = TransformBranch::j3;
    DiffusionVector d;
    StationaryState ustar;
    Mat4 D;
    Mat4 P = Mat4::identity();
    Mat4 Pinv = Mat4::identity();
    std::optional<AlphaBetaGamma> abg;
    /// Components with no dynamics of their own: zero pointwise when zeta0 is.
    std::array<bool, 4> frozen{};
    /// Components whose mean is conserved and must vanish initially.
    std::array<bool, 4> mean_constrained{};
    /// Present only for the return method.
    std::shared_ptr<const ReturnTrajectory> reference;

    /// Sign pattern sigma_k = sum_i P_ki (-1)^i of the reaction in v-coordinates.
    [[nodiscard]] Vec4 reaction_signs() const {
        Vec4 s{};
        for (std::size_t k = 0; k < 4; ++k)
            for (std::size_t i = 0; i < 4; ++i) s[k] += P(k, i) * (i % 2 == 0 ? -1.0 : 1.0);
        return s;
    }

    /// Reference state at time index n and grid point i.
    [[nodiscard]] Vec4 reference_at(std::size_t n, std::size_t i) const {
        Vec4 u = ustar.values();
        if (reference) u[2] += reference->g[n][i];
        return u;
    }

    [[nodiscard]] Vec4 forward_point(const Vec4& u, const Vec4& ubar) const {
        Vec4 diff{};
        for (std::size_t k = 0; k < 4; ++k) diff[k] = u[k] - ubar[k];
        return P * diff;
    }
    [[nodiscard]] Vec4 inverse_point(const Vec4& zeta, const Vec4& ubar) const {
        Vec4 u = Pinv * zeta;
        for (std::size_t k = 0; k < 4; ++k) u[k] += ubar[k];
        return u;
    }

    /// u -> zeta at time index n (n only matters with a return trajectory).
    [[nodiscard]] StateField forward_map(const StateField& u, std::size_t n = 0) const {
        StateField z(u.points());
        for (std::size_t i = 0; i < u.points(); ++i) z.set(i, forward_point(u.at(i), reference_at(n, i)));
        return z;
    }
    [[nodiscard]] StateField inverse_map(const StateField& zeta, std::size_t n = 0) const {
        StateField u(zeta.points());
        for (std::size_t i = 0; i < zeta.points(); ++i) u.set(i, inverse_point(zeta.at(i), reference_at(n, i)));
        return u;
    }

    /**
     * G(zeta) with G(zeta) zeta equal to the reaction of u = ubar + Pinv zeta,
     * written in v-coordinates. Row k is sigma_k times
     *   [ubar3 + a3.zeta, -(ubar4 + a4.zeta), 0, 0] + ubar1 a3 - ubar2 a4
     * where a3, a4 are rows 3 and 4 of Pinv.
     */
    [[nodiscard]] Mat4 coupling_matrix(const Vec4& zeta, const Vec4& ubar) const {
        double a3z = 0.0, a4z = 0.0;
        for (std::size_t c = 0; c < 4; ++c) {
            a3z += Pinv(2, c) * zeta[c];
            a4z += Pinv(3, c) * zeta[c];
        }
        std::array<double, 4> row{};
        for (std::size_t c = 0; c < 4; ++c) row[c] = ubar[0] * Pinv(2, c) - ubar[1] * Pinv(3, c);
        row[0] += ubar[2] + a3z;
        row[1] -= ubar[3] + a4z;
        const Vec4 sigma = reaction_signs();
        Mat4 G;
        for (std::size_t k = 0; k < 4; ++k)
            for (std::size_t c = 0; c < 4; ++c) G(k, c) = sigma[k] * row[c];
        return G;
    }

    /// Coupling of the linearization (zeta = 0); constant unless a return trajectory is set.
    [[nodiscard]] CouplingField linearization(std::size_t steps, std::size_t points) const {
        if (!reference) return CouplingField(coupling_matrix(Vec4{}, ustar.values()));
        CouplingField a(steps, points);
        for (std::size_t n = 0; n < steps; ++n)
            for (std::size_t i = 0; i < points; ++i) a.at(n, i) = coupling_matrix(Vec4{}, reference_at(n, i));
        return a;
    }

    /// Frozen coupling G(z(t_n, x_i)) for the fixed-point map; z holds m + 1 states.
    [[nodiscard]] CouplingField coupling(const std::vector<StateField>& z) const {
        if (z.size() < 2) throw std::invalid_argument("coupling needs a state history");
        const std::size_t steps = z.size() - 1, points = z.front().points();
        CouplingField a(steps, points);
        for (std::size_t n = 0; n < steps; ++n)
            for (std::size_t i = 0; i < points; ++i) a.at(n, i) = coupling_matrix(z[n].at(i), reference_at(n, i));
        return a;
    }
};

namespace detail {

inline Mat4 rows(const std::array<Vec4, 4>& r) {
    Mat4 m;
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t c = 0; c < 4; ++c) m(k, c) = r[k][c];
    return m;
}

inline TransformedSystem base_system(int j, TransformBranch b, const DiffusionVector& d, const StationaryState& ustar) {
    TransformedSystem s;
    s.j = j;
    s.branch = b;
    s.d = d;
    s.ustar = ustar;
    return s;
}

}  // namespace detail

/// Generic j = 1 change of variables; requires d2, d3, d4 pairwise distinct.
inline TransformedSystem build_j1_generic(const DiffusionVector& d, const StationaryState& ustar) {
    const double d2 = d[1], d3 = d[2], d4 = d[3];
    if (d2 == d3) throw std::invalid_argument("j=1 generic branch needs d2 != d3; use branch j1-reduced(d2=d3)");
    if (d2 == d4) throw std::invalid_argument("j=1 generic branch needs d2 != d4; use branch j1-reduced(d2=d4)");
    if (d3 == d4) throw std::invalid_argument("j=1 generic branch needs d3 != d4; use branch j1-reduced(d3=d4)");
    const double alpha = 1.0 / (d2 - d4), beta = 1.0 / (d3 - d4), gamma = beta - alpha;
    auto s = detail::base_system(1, TransformBranch::j1, d, ustar);
    s.abg = AlphaBetaGamma{alpha, beta, gamma};
    s.P = detail::rows({Vec4{1, 0, 0, 0}, Vec4{0, 1, 0, 0}, Vec4{0, 1, 1, 0}, Vec4{0, alpha, beta, gamma}});
    s.Pinv = detail::rows({Vec4{1, 0, 0, 0}, Vec4{0, 1, 0, 0}, Vec4{0, -1, 1, 0},
                           Vec4{0, (beta - alpha) / gamma, -beta / gamma, 1.0 / gamma}});
    s.D = detail::rows({Vec4{d[0], 0, 0, 0}, Vec4{0, d2, 0, 0}, Vec4{0, d2 - d3, d3, 0}, Vec4{0, 0, 1, d4}});
    s.mean_constrained = {false, false, true, true};
    return s;
}

/**
 * Builds the transformed system for j controls. j = 1 and j = 2 with repeated
 * diffusion coefficients dispatch to reduced branches in which some combination
 * is conserved pointwise. A non-null `reference` switches to the return method
 * (j = 3 and (u1*, u3*, u4*) = 0 only).
 */
inline TransformedSystem build_transformed_system(int j, const DiffusionVector& d, const StationaryState& ustar,
                                                  std::shared_ptr<const ReturnTrajectory> reference = nullptr) {
    check_control_count(j);
    if (reference && classify_target(ustar, j) != TargetCase::j3_return_method)
        throw std::invalid_argument("return trajectory requires j = 3 and (u1*, u3*, u4*) = (0, 0, 0)");
    const double d1 = d[0], d2 = d[1], d3 = d[2], d4 = d[3];
    using detail::rows;

    if (j == 3) {
        auto s = detail::base_system(3, TransformBranch::j3, d, ustar);
        s.D = Mat4::diag(d.values());
        s.reference = std::move(reference);
        return s;
    }
    if (j == 2) {
        const bool eq = d3 == d4;
        auto s = detail::base_system(2, eq ? TransformBranch::j2_equal_d34 : TransformBranch::j2, d, ustar);
        s.P = rows({Vec4{1, 0, 0, 0}, Vec4{0, 1, 0, 0}, Vec4{0, 0, 1, 0}, Vec4{0, 0, 1, 1}});
        s.Pinv = rows({Vec4{1, 0, 0, 0}, Vec4{0, 1, 0, 0}, Vec4{0, 0, 1, 0}, Vec4{0, 0, -1, 1}});
        s.D = rows({Vec4{d1, 0, 0, 0}, Vec4{0, d2, 0, 0}, Vec4{0, 0, d3, 0}, Vec4{0, 0, d3 - d4, d4}});
        s.frozen[3] = eq;
        s.mean_constrained[3] = !eq;
        return s;
    }

    if (d2 != d3 && d2 != d4 && d3 != d4) return build_j1_generic(d, ustar);

    // Reduced j = 1: v3 = u2 + u3 always; v4 = u2 - u4 unless d3 == d4, then u3 + u4.
    TransformBranch b = TransformBranch::j1_all_equal;
    if (d2 == d3 && d3 != d4) b = TransformBranch::j1_equal_d23;
    else if (d2 == d4 && d3 != d4) b = TransformBranch::j1_equal_d24;
    else if (d3 == d4 && d2 != d3) b = TransformBranch::j1_equal_d34;
    auto s = detail::base_system(1, b, d, ustar);
    const Vec4 row3{0, d2 - d3, d3, 0};
    if (d3 != d4) {
        s.P = rows({Vec4{1, 0, 0, 0}, Vec4{0, 1, 0, 0}, Vec4{0, 1, 1, 0}, Vec4{0, 1, 0, -1}});
        s.Pinv = rows({Vec4{1, 0, 0, 0}, Vec4{0, 1, 0, 0}, Vec4{0, -1, 1, 0}, Vec4{0, 1, 0, -1}});
        s.D = rows({Vec4{d1, 0, 0, 0}, Vec4{0, d2, 0, 0}, row3, Vec4{0, d2 - d4, 0, d4}});
        s.frozen = {false, false, d2 == d3, d2 == d4};
    } else {
        s.P = rows({Vec4{1, 0, 0, 0}, Vec4{0, 1, 0, 0}, Vec4{0, 1, 1, 0}, Vec4{0, 0, 1, 1}});
        s.Pinv = rows({Vec4{1, 0, 0, 0}, Vec4{0, 1, 0, 0}, Vec4{0, -1, 1, 0}, Vec4{0, 1, -1, 1}});
        s.D = rows({Vec4{d1, 0, 0, 0}, Vec4{0, d2, 0, 0}, row3, Vec4{0, 0, 0, d4}});
        s.frozen = {false, false, d2 == d3, true};
    }
    s.mean_constrained = {false, false, !s.frozen[2], !s.frozen[3]};
    return s;
}

}  // namespace rdcontrol
