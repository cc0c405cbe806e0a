#include <gtest/gtest.h>

#include <cmath>

#include "rdcontrol/control.hpp"

using namespace rdcontrol;

namespace {

GridFunction cosine(const Domain1D& d) {
    return d.sample([](double x) { return std::cos(3.14159265358979323846 * x); });
}

StateField perturbed(const Domain1D& d, const Vec4& base, const Vec4& amp) {
    StateField u = StateField::constant(d.size(), base);
    const GridFunction b = cosine(d);
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t i = 0; i < d.size(); ++i) u[k][i] += amp[k] * b[i];
    return u;
}

}  // namespace

TEST(LocalControl, TargetAlreadyReached) {
    const Domain1D d = Domain1D::unit(31);
    const StationaryState us({1, 1, 1, 1});
    const LocalControlResult r = local_control(d, StateField::constant(d.size(), us.values()), us, 3,
                                               DiffusionVector({1, 2, 3, 4}), TimeGrid(1.0, 60));
    EXPECT_EQ(r.status, LocalStatus::converged);
    EXPECT_EQ(r.outer_iterations, 1);
    EXPECT_EQ(r.controls.sup_norm(), 0.0);
    EXPECT_LT(r.terminal_linf_error, 1e-12);  // roundoff of the implicit solves only
}

TEST(LocalControl, ConvergesForEachControlCount) {
    const Domain1D d = Domain1D::unit(41);
    const TimeGrid tg(1.0, 100);
    const DiffusionVector dv({1, 2, 3, 4});
    const StationaryState us({1, 1, 1, 1});
    for (int j : {3, 2, 1}) {
        // perturb only where admissibility allows (cosine has zero mean)
        const StateField u0 = perturbed(d, us.values(), {0.01, 0.01, 0.01, 0.01});
        const LocalControlResult r = local_control(d, u0, us, j, dv, tg);
        EXPECT_EQ(r.status, LocalStatus::converged) << "j = " << j;
        EXPECT_LE(r.outer_iterations, 10);
        EXPECT_LT(r.terminal_linf_error, 1e-3) << "j = " << j;
        EXPECT_EQ(r.controls.count(), static_cast<std::size_t>(j));
    }
}

TEST(LocalControl, FixedPointIsSelfConsistent) {
    const Domain1D d = Domain1D::unit(31);
    const TimeGrid tg(1.0, 80);
    const DiffusionVector dv({1, 2, 3, 4});
    const StationaryState us({1, 1, 1, 1});
    LocalControlOptions opt;
    const LocalControlResult r = local_control(d, perturbed(d, us.values(), {0.02, -0.01, 0.01, 0.02}), us, 3, dv, tg, opt);
    ASSERT_EQ(r.status, LocalStatus::converged);
    // one more linear solve with the coupling frozen at the final iterate
    const TransformedSystem sys = build_transformed_system(3, dv, us);
    const ControlProblem p = make_control_problem(d, tg, sys, sys.coupling(r.linear.states), r.linear.initial(), opt.hum);
    const ControlResult again = solve_penalized_hum(p);
    double diff = 0.0;
    for (std::size_t k = 0; k < again.controls.raw().size(); ++k)
        diff = std::max(diff, std::abs(again.controls.raw()[k] - r.hum.controls.raw()[k]));
    EXPECT_LE(diff, 10.0 * opt.fixed_point.contraction_tol);
}

TEST(LocalControl, NonlinearErrorComesFromFreshSimulation) {
    const Domain1D d = Domain1D::unit(31);
    const TimeGrid tg(1.0, 60);
    const DiffusionVector dv({1, 2, 3, 4});
    const StationaryState us({1, 1, 1, 1});
    const StateField u0 = perturbed(d, us.values(), {0.01, 0.0, 0.0, 0.01});
    const LocalControlResult r = local_control(d, u0, us, 3, dv, tg);
    const Trajectory again = simulate_nonlinear(d, u0, tg, dv, r.controls);
    double e = 0.0;
    for (std::size_t k = 0; k < 4; ++k)
        for (double v : again.terminal()[k]) e = std::max(e, std::abs(v - 1.0));
    EXPECT_DOUBLE_EQ(e, r.terminal_linf_error);
}

TEST(LocalControl, InadmissibleDataRejected) {
    const Domain1D d = Domain1D::unit(31);
    const StateField u0 = StateField::constant(d.size(), {1, 1, 1.3, 1});
    try {
        (void)local_control(d, u0, StationaryState({1, 1, 1, 1}), 2, DiffusionVector({1, 2, 3, 4}), TimeGrid(1.0, 40));
        FAIL() << "expected InadmissibleError";
    } catch (const InadmissibleError& e) {
        EXPECT_NE(std::string(e.what()).find("u3+u4"), std::string::npos);
    }
}

TEST(LocalControl, BallEscapeReported) {
    const Domain1D d = Domain1D::unit(31);
    const StationaryState us({1, 1, 1, 1});
    LocalControlOptions opt;
    opt.fixed_point.nu = 1e-4;
    const LocalControlResult r = local_control(d, perturbed(d, us.values(), {0.1, 0.1, 0.1, 0.1}), us, 3,
                                               DiffusionVector({1, 2, 3, 4}), TimeGrid(1.0, 40), opt);
    EXPECT_EQ(r.status, LocalStatus::outside_ball);
    EXPECT_EQ(to_string(r.status), "outside fixed-point ball");
}

TEST(LocalControl, ReturnMethodDispatch) {
    const Domain1D d = Domain1D::unit(41);
    const TimeGrid tg(1.0, 200);
    const StationaryState us({0, 1, 0, 0});
    const LocalControlResult r = local_control(d, StateField::constant(d.size(), {0, 1, 0, 0.01}), us, 3, DiffusionVector(), tg);
    EXPECT_EQ(r.target_case, TargetCase::j3_return_method);
    EXPECT_EQ(r.status, LocalStatus::converged);
    EXPECT_LT(r.terminal_linf_error, 1e-3);
}

TEST(DegenerateControl, TwoControlsKeepThirdAndFourthAtZero) {
    const Domain1D d = Domain1D::unit(41);
    const StationaryState us({1, 1, 0, 0});
    StateField u0 = perturbed(d, {1, 1, 0, 0}, {0.2, 0.0, 0.0, 0.0});
    const LocalControlResult r = degenerate_control(d, u0, us, 2, DiffusionVector({1, 2, 3, 4}), TimeGrid(1.0, 100));
    EXPECT_EQ(r.target_case, TargetCase::j2_degenerate);
    EXPECT_EQ(r.untouched_drift, 0.0);
    for (const auto& s : r.nonlinear.states) {
        EXPECT_EQ(sup_norm(s[2]), 0.0);
        EXPECT_EQ(sup_norm(s[3]), 0.0);
    }
    EXPECT_LT(r.terminal_linf_error, 1e-3);
}

TEST(DegenerateControl, OneControlKeepsFourthAtTarget) {
    const Domain1D d = Domain1D::unit(41);
    const StationaryState us({0.5, 0, 0, 2});
    const StateField u0 = perturbed(d, {0.5, 0, 0, 2}, {0.3, 0, 0, 0});
    const LocalControlResult r = local_control(d, u0, us, 1, DiffusionVector({1, 2, 3, 4}), TimeGrid(1.0, 100));
    EXPECT_EQ(r.target_case, TargetCase::j1_degenerate);
    EXPECT_LE(r.untouched_drift, 1e-12);
    EXPECT_LT(r.terminal_linf_error, 1e-3);
}

TEST(DegenerateControl, ViolatedConditionNamesTheVanishingTarget) {
    const Domain1D d = Domain1D::unit(31);
    const StateField u0 = StateField::constant(d.size(), {1, 1, 0.1, 0});
    try {
        (void)degenerate_control(d, u0, StationaryState({1, 1, 0, 0}), 2, DiffusionVector(), TimeGrid(1.0, 40));
        FAIL() << "expected InadmissibleError";
    } catch (const InadmissibleError& e) {
        EXPECT_NE(std::string(e.what()).find("vanishing target"), std::string::npos);
    }
    EXPECT_THROW(degenerate_control(d, u0, StationaryState({1, 1, 1, 1}), 2, DiffusionVector(), TimeGrid(1.0, 40)),
                 std::invalid_argument);
}

TEST(Staircase, PathStaysOnEquilibria) {
    const Vec4 z{1.5, 1.5, 1.5, 1.5}, us{1.0, 2.0, 4.0, 2.0};
    for (int k = 0; k <= 16; ++k) {
        const Vec4 v = staircase_path(z, us, k / 16.0);
        EXPECT_NEAR(v[0] * v[2], v[1] * v[3], 1e-12);
    }
    const Vec4 a = staircase_path(z, us, 0.0), b = staircase_path(z, us, 1.0);
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_NEAR(a[k], z[k], 1e-15);
        EXPECT_NEAR(b[k], us[k], 1e-15);
    }
}

TEST(Staircase, DetourTargetSatisfiesTheInequalities) {
    for (const Vec4& us : {Vec4{1, 0, 0, 2}, Vec4{0.5, 3, 0, 0}, Vec4{0, 0, 0, 1}}) {
        const double r = 0.2;
        const Vec4 t = detour_target(us, r);
        EXPECT_NEAR(t[0] * t[2], t[1] * t[3], 1e-14);
        EXPECT_GT(t[2], 0.0);
        double dist = 0.0;
        for (std::size_t k = 0; k < 4; ++k) dist = std::max(dist, std::abs(t[k] - us[k]));
        EXPECT_LE(dist, r / 2 + 1e-15);
    }
    EXPECT_THROW(detour_target({1, 0, 0, 2}, 0.0), std::invalid_argument);
}

TEST(GlobalControl, AlreadyAtTargetNeedsNoLegs) {
    const Domain1D d = Domain1D::unit(31);
    const StationaryState us({1, 1, 1, 1});
    const GlobalControlResult r = global_control(d, StateField::constant(d.size(), us.values()), us, 3, DiffusionVector(), StaircaseConfig{});
    EXPECT_TRUE(r.success);
    EXPECT_TRUE(r.legs.empty());
    EXPECT_EQ(r.settle_time, 0.0);
}

TEST(GlobalControl, SettleThenOneConfirmingLeg) {
    const Domain1D d = Domain1D::unit(31);
    const StationaryState us({0.5, 0.5, 0.5, 0.5});
    const StaircaseConfig cfg;
    const GlobalControlResult r = global_control(d, StateField::constant(d.size(), {1, 0, 1, 0}), us, 3, DiffusionVector(), cfg);
    EXPECT_TRUE(r.success) << r.message;
    EXPECT_GT(r.settle_time, 0.0);
    EXPECT_EQ(r.legs.size(), 1u);
    EXPECT_LE(r.terminal_error, cfg.leg_tol);
}

TEST(GlobalControl, Preconditions) {
    const Domain1D d = Domain1D::unit(31);
    const StateField u0 = StateField::constant(d.size(), {1, 1, 1, 1});
    EXPECT_THROW(global_control(d, u0, StationaryState({1, 1, 1, 1}), 2, DiffusionVector(), StaircaseConfig{}), std::invalid_argument);
    StaircaseConfig bad;
    bad.min_theta_step = 0.5;
    bad.initial_theta_step = 0.25;
    EXPECT_THROW(global_control(d, u0, StationaryState({1, 1, 1, 1}), 3, DiffusionVector(), bad), std::invalid_argument);
    // a coarse leg grid misses the tolerance on a trivial path: reported once, no theta halving
    StaircaseConfig coarse;
    coarse.leg_steps = 100;
    const GlobalControlResult miss = global_control(d, StateField::constant(d.size(), {1, 0, 1, 0}),
                                                    StationaryState({0.5, 0.5, 0.5, 0.5}), 3, DiffusionVector(), coarse);
    EXPECT_FALSE(miss.success);
    EXPECT_EQ(miss.legs.size(), 1u);
    EXPECT_NE(miss.legs[0].message.find("above leg_tol"), std::string::npos);
    EXPECT_THROW(global_control(d, StateField::constant(d.size(), {1, -1, 1, 1}), StationaryState({1, 1, 1, 1}), 3,
                                DiffusionVector(), StaircaseConfig{}),
                 std::invalid_argument);
}
