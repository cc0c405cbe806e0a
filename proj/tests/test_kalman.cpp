#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "rdcontrol/kalman.hpp"

using namespace rdcontrol;

TEST(Kalman, JacobianSignPattern) {
    const Mat4 J = reaction_jacobian({1.0, 2.0, 4.0, 2.0});
    // d/du of r = u1 u3 - u2 u4 is (u3, -u4, u1, -u2); species 1, 3 lose r, species 2, 4 gain it
    EXPECT_DOUBLE_EQ(J(0, 0), -4.0);
    EXPECT_DOUBLE_EQ(J(1, 0), 4.0);
    EXPECT_DOUBLE_EQ(J(2, 1), 2.0);
    EXPECT_DOUBLE_EQ(J(3, 3), -2.0);
}

TEST(Kalman, ThreeControlsAtReturnTargetFails) {
    const KalmanReport r = kalman_rank(DiffusionVector({1, 2, 3, 4}), StationaryState({0, 1, 0, 0}), 3, 64);
    EXPECT_FALSE(r.controllable);
    EXPECT_EQ(r.modes.size(), 65u);
    for (const auto& m : r.modes) EXPECT_LE(m.rank, 3);
}

TEST(Kalman, ThreeControlsAtPositiveTargetSucceeds) {
    const KalmanReport r = kalman_rank(DiffusionVector({1, 2, 3, 4}), StationaryState({1, 1, 1, 1}), 3, 64);
    EXPECT_TRUE(r.controllable);
    for (const auto& m : r.modes) EXPECT_EQ(m.rank, 4);
}

TEST(Kalman, TwoControlsLoseTheMeanMode) {
    const KalmanReport r = kalman_rank(DiffusionVector({1, 2, 3, 4}), StationaryState({1, 1, 1, 1}), 2, 8);
    EXPECT_LT(r.modes.front().rank, 4);
    EXPECT_FALSE(r.controllable);
    // non-constant modes are fine when d3 != d4
    for (std::size_t k = 1; k < r.modes.size(); ++k) EXPECT_EQ(r.modes[k].rank, 4) << k;
}

TEST(Kalman, RankInvariantUnderColumnScaling) {
    std::mt19937_64 gen(4);
    for (int t = 0; t < 5; ++t) {
        const Vec4 us = oracle::random_stationary(gen, t % 2 == 0);
        const auto a = kalman_rank(DiffusionVector({1, 2, 3, 4}), StationaryState(us), 3, 16);
        const auto b = kalman_rank(DiffusionVector({1, 2, 3, 4}), StationaryState(us), 3, 16, 1.0, {3.0, 0.5, 7.0});
        for (std::size_t k = 0; k < a.modes.size(); ++k) EXPECT_EQ(a.modes[k].rank, b.modes[k].rank);
    }
}

TEST(Kalman, EigenvaluesScaleWithLength) {
    const auto r = kalman_rank(DiffusionVector(), StationaryState({1, 1, 1, 1}), 3, 2, 2.0);
    EXPECT_NEAR(r.modes[1].lambda, std::pow(3.14159265358979323846 / 2.0, 2), 1e-14);
    EXPECT_THROW(kalman_rank(DiffusionVector(), StationaryState({1, 1, 1, 1}), 3, 0), std::invalid_argument);
    EXPECT_THROW(kalman_rank(DiffusionVector(), StationaryState({1, 1, 1, 1}), 3, 4, 1.0, {1.0}), std::invalid_argument);
}
