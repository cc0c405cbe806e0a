#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rdcontrol/grid.hpp"

using namespace rdcontrol;

TEST(Domain, UnitWindowsSnapToGridPoints) {
    const Domain1D d = Domain1D::unit(101);
    EXPECT_DOUBLE_EQ(d.dx(), 0.01);
    EXPECT_EQ(d.omega().first, 30u);
    EXPECT_EQ(d.omega().last, 70u);
    EXPECT_EQ(d.omega0().first, 35u);
    EXPECT_EQ(d.omega_inner().last, 60u);
    EXPECT_DOUBLE_EQ(d.x(100), 1.0);
    EXPECT_EQ(parse_window_id(to_string(WindowId::omega0)), WindowId::omega0);
    EXPECT_THROW(parse_window_id("nowhere"), std::invalid_argument);
}

TEST(Domain, RejectsBadWindows) {
    EXPECT_THROW(Domain1D(1.0, 2, {0.3, 0.7}, {0.35, 0.65}, {0.4, 0.6}), std::invalid_argument);
    EXPECT_THROW(Domain1D(-1.0, 21, {0.3, 0.7}, {0.35, 0.65}, {0.4, 0.6}), std::invalid_argument);
    // omega touching the boundary
    EXPECT_THROW(Domain1D(1.0, 21, {0.0, 0.7}, {0.35, 0.65}, {0.4, 0.6}), std::invalid_argument);
    // omega0 not strictly inside omega
    EXPECT_THROW(Domain1D(1.0, 21, {0.3, 0.7}, {0.3, 0.65}, {0.4, 0.6}), std::invalid_argument);
    // too coarse for a 3-point inner window
    EXPECT_THROW(Domain1D(1.0, 11, {0.3, 0.7}, {0.35, 0.65}, {0.4, 0.6}), std::invalid_argument);
}

TEST(Laplacian, MatchesDenseMirrorGhostMatrix) {
    const Domain1D d = Domain1D::unit(31);
    std::mt19937_64 gen(3);
    std::normal_distribution<double> N;
    GridFunction u(d.size());
    for (double& v : u) v = N(gen);
    const GridFunction Lu = neumann_laplacian(d, u);
    const Eigen::VectorXd ref = oracle::laplacian(d.size(), d.dx()) * Eigen::Map<const Eigen::VectorXd>(u.data(), 31);
    for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(Lu[i], ref(static_cast<Eigen::Index>(i)), 1e-9 * std::abs(ref(static_cast<Eigen::Index>(i))) + 1e-9);
}

TEST(Laplacian, ConstantsInKernelAndSelfAdjointInTrapezoidProduct) {
    const Domain1D d = Domain1D::unit(41);
    for (double v : neumann_laplacian(d, d.constant(2.5))) EXPECT_EQ(v, 0.0);
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> U(-1, 1);
    GridFunction u(d.size()), w(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        u[i] = U(gen);
        w[i] = U(gen);
    }
    const double a = inner(d, neumann_laplacian(d, u), w), b = inner(d, u, neumann_laplacian(d, w));
    EXPECT_NEAR(a, b, 1e-10 * std::abs(a));
    // integral of L u vanishes: no flux through the boundary
    EXPECT_NEAR(quadrature(d, neumann_laplacian(d, u)), 0.0, 1e-9);
}

TEST(Quadrature, ExactForLinearFunctions) {
    const Domain1D d(2.0, 17, {0.5, 1.5}, {0.6, 1.4}, {0.8, 1.2});
    const GridFunction f = d.sample([](double x) { return 3.0 * x - 1.0; });
    EXPECT_NEAR(quadrature(d, f), 3.0 * 2.0 - 2.0, 1e-13);  // int_0^2 (3x - 1) = 6 - 2
    EXPECT_NEAR(mean(d, f), 2.0, 1e-13);
    EXPECT_NEAR(l2_norm(d, d.constant(1.0)), std::sqrt(2.0), 1e-14);
    EXPECT_EQ(sup_norm(GridFunction{1.0, -4.0, 2.0}), 4.0);
}

TEST(ImplicitDiffusion, SolvesAgainstDenseMatrix) {
    const Domain1D d = Domain1D::unit(25);
    const double c = 0.013;
    ImplicitDiffusion solver(d, c);
    std::mt19937_64 gen(9);
    std::normal_distribution<double> N;
    GridFunction b(d.size());
    for (double& v : b) v = N(gen);
    GridFunction x = b;
    solver.solve(x);
    const auto n = static_cast<Eigen::Index>(d.size());
    const Eigen::MatrixXd S = Eigen::MatrixXd::Identity(n, n) - c * oracle::laplacian(d.size(), d.dx());
    const Eigen::VectorXd res = S * Eigen::Map<const Eigen::VectorXd>(x.data(), n) - Eigen::Map<const Eigen::VectorXd>(b.data(), n);
    EXPECT_LT(res.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_THROW(ImplicitDiffusion(d, -1.0), std::invalid_argument);
}

TEST(ImplicitDiffusion, PreservesQuadrature) {
    const Domain1D d = Domain1D::unit(51);
    GridFunction u = d.sample([](double x) { return std::exp(-40.0 * (x - 0.3) * (x - 0.3)); });
    const double q0 = quadrature(d, u);
    ImplicitDiffusion solver(d, 0.05);
    for (int k = 0; k < 20; ++k) solver.solve(u);
    EXPECT_NEAR(quadrature(d, u), q0, 1e-14);
}

TEST(WindowMask, IsExactIndicator) {
    const Domain1D d = Domain1D::unit(21);
    const GridFunction m = window_mask(d, WindowId::omega);
    for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(m[i], d.omega().contains(i) ? 1.0 : 0.0);
}
