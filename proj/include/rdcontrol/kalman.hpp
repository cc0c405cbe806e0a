/**
 * @file kalman.hpp
 * @brief Kalman rank test of the constant-coefficient linearization, mode by
 *        mode over the Neumann eigenvalues of -Lap on (0, L).
 */
#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "rdcontrol/species.hpp"
#include "rdcontrol/state.hpp"

namespace rdcontrol {

/// Jacobian of the reaction term at u*.
inline Mat4 reaction_jacobian(const Vec4& u) {
    const Vec4 grad{u[2], -u[3], u[0], -u[1]};
    Mat4 A;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t c = 0; c < 4; ++c) A(i, c) = (i % 2 == 0 ? -1.0 : 1.0) * grad[c];
    return A;
}

struct ModeRank {
    int k = 0;
    double lambda = 0.0;
    int rank = 0;
    std::vector<double> singular_values;
};

struct KalmanReport {
    std::vector<ModeRank> modes;
    bool controllable = false;  // rank 4 for every tested mode
};

/**
 * For each k = 0..k_max, the rank of [B | M B | M^2 B | M^3 B] with
 * M = -lambda_k D + A, lambda_k = (k pi / L)^2, B the first j unit vectors.
 * M is scaled to unit norm first; this does not change the rank.
 * `column_scale` rescales the columns of B (for invariance checks).
 */
inline KalmanReport kalman_rank(const DiffusionVector& d, const StationaryState& ustar, int j, int k_max,
                                double length = 1.0, std::vector<double> column_scale = {},
                                double rel_threshold = 1e-10) {
    check_control_count(j);
    if (k_max < 1) throw std::invalid_argument("k_max must be at least 1");
    if (column_scale.empty()) column_scale.assign(static_cast<std::size_t>(j), 1.0);
    if (column_scale.size() != static_cast<std::size_t>(j)) throw std::invalid_argument("one scale per control column");

    const Mat4 A = reaction_jacobian(ustar.values());
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(4, j);
    for (int c = 0; c < j; ++c) B(c, c) = column_scale[static_cast<std::size_t>(c)];

    KalmanReport rep;
    rep.controllable = true;
    for (int k = 0; k <= k_max; ++k) {
        const double lambda = std::pow(k * std::numbers::pi / length, 2);
        Eigen::Matrix4d M;
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c)
                M(r, c) = A(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) - (r == c ? lambda * d[static_cast<std::size_t>(r)] : 0.0);
        const double nm = M.norm();
        if (nm > 1.0) M /= nm;

        Eigen::MatrixXd K(4, 4 * j);
        Eigen::MatrixXd block = B;
        for (int p = 0; p < 4; ++p) {
            K.middleCols(p * j, j) = block;
            block = M * block;
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(K);
        const auto& sv = svd.singularValues();
        ModeRank mr;
        mr.k = k;
        mr.lambda = lambda;
        const double smax = sv.size() > 0 ? sv(0) : 0.0;
        for (Eigen::Index i = 0; i < sv.size(); ++i) {
            mr.singular_values.push_back(sv(i));
            if (sv(i) > rel_threshold * smax) ++mr.rank;
        }
        if (mr.rank < 4) rep.controllable = false;
        rep.modes.push_back(std::move(mr));
    }
    return rep;
}

}  // namespace rdcontrol
