#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace fc = flatcert;
using fc::grid::GridFunction;
using fc::grid::Point;
using namespace testing_support;

namespace {

GridFunction scherk_on(int nodes) { return fc::mse::exact_solution(fc::mse::Scherk{1.0}, unit_grid(nodes)); }

double scherk_error(int nodes) {
    const auto exact = scherk_on(nodes);
    GridFunction start = exact;
    for (std::size_t k = 0; k < start.size(); ++k)
        if (start.is_interior(k)) start[k] = 0.0;
    const auto sol = fc::mse::solve_mse(start);
    double e = 0.0;
    for (std::size_t k = 0; k < exact.size(); ++k)
        if (exact.in_ball(k)) e = std::max(e, std::abs(sol.u[k] - exact[k]));
    return e;
}

GridFunction boundary_data(int nodes, double a) {
    auto g = unit_grid(nodes);
    g.fill([a](const Point& p) { return a * (p[0] * p[0] - p[1] * p[1]) + 0.1 * std::sin(3 * p[0] + p[1]); });
    return g;
}

}  // namespace

TEST(MseOperator, AffineHasZeroResidual) {
    const auto u = fc::mse::exact_solution(fc::mse::Affine{{0.7, -1.3}, 2.0}, unit_grid(33));
    EXPECT_LT(fc::mse::max_abs_residual(u), 1e-10);
}

TEST(MseOperator, ParaboloidAtOrigin) {
    auto u = unit_grid(33);
    u.fill([](const Point& p) { return p[0] * p[0] + p[1] * p[1]; });
    EXPECT_NEAR(fc::mse::mse_operator_at(u, u.origin()), 4.0, 1e-10);
    // At x, (1 + 4|x|^2) * 4 - 2x^T (2I) 2x = 4 + 8|x|^2.
    const std::size_t k = u.flat(4, -3);
    const auto p = u.position(k);
    EXPECT_NEAR(fc::mse::mse_operator_at(u, k), 4 + 8 * (p[0] * p[0] + p[1] * p[1]), 1e-9);
}

TEST(MseOperator, ScherkTruncationIsSecondOrder) {
    // Fixed inner ball so the boundary ring does not move with refinement.
    auto res = [](int nodes) {
        const auto u = scherk_on(nodes);
        double m = 0.0;
        for (std::size_t k : u.nodes_in_ball({0, 0}, 0.75)) m = std::max(m, std::abs(fc::mse::mse_operator_at(u, k)));
        return m;
    };
    const double ratio = res(33) / res(65);
    EXPECT_GT(ratio, 3.2);
    EXPECT_LT(ratio, 4.8);
}

TEST(MseSolver, ReproducesAffineData) {
    auto g = fc::mse::exact_solution(fc::mse::Affine{{0.4, 0.9}, -1.0}, unit_grid(33));
    const auto exact = g;
    for (std::size_t k = 0; k < g.size(); ++k)
        if (g.is_interior(k)) g[k] = 5.0;
    const auto sol = fc::mse::solve_mse(g);
    for (std::size_t k = 0; k < g.size(); ++k)
        if (g.in_ball(k)) EXPECT_NEAR(sol.u[k], exact[k], 1e-10);
}

TEST(MseSolver, ScherkErrorIsSecondOrder) {
    const double e33 = scherk_error(33);
    const double e65 = scherk_error(65);
    EXPECT_LT(e65, 5 * std::pow(1.0 / 32, 2));
    EXPECT_GT(e33 / e65, 3.2);
    EXPECT_LT(e33 / e65, 4.8);
}

TEST(MseSolver, MaximumPrinciple) {
    const auto g = boundary_data(33, 0.5);
    const auto sol = fc::mse::solve_mse(g);
    double lo = 1e300, hi = -1e300;
    for (std::size_t k = 0; k < g.size(); ++k)
        if (g.in_ball(k) && !g.is_interior(k)) {
            lo = std::min(lo, g[k]);
            hi = std::max(hi, g[k]);
        }
    for (std::size_t k = 0; k < g.size(); ++k)
        if (g.in_ball(k)) {
            EXPECT_GE(sol.u[k], lo - 1e-12);
            EXPECT_LE(sol.u[k], hi + 1e-12);
        }
}

TEST(MseSolver, ComparisonPrinciple) {
    const auto g1 = boundary_data(33, 0.3);
    auto g2 = g1;
    for (std::size_t k = 0; k < g2.size(); ++k) {
        const auto p = g2.position(k);
        if (g2.in_ball(k)) g2[k] += 0.05 * (1 + p[0]);
    }
    const auto u1 = fc::mse::solve_mse(g1).u;
    const auto u2 = fc::mse::solve_mse(g2).u;
    for (std::size_t k = 0; k < u1.size(); ++k)
        if (u1.in_ball(k)) EXPECT_LE(u1[k], u2[k] + 1e-12);
}

TEST(MseSolver, InvariantUnderVerticalShift) {
    const auto g = boundary_data(33, 0.4);
    auto shifted = g;
    for (std::size_t k = 0; k < g.size(); ++k)
        if (g.in_ball(k)) shifted[k] += 3.0;
    const auto u = fc::mse::solve_mse(g).u;
    const auto v = fc::mse::solve_mse(shifted).u;
    for (std::size_t k = 0; k < u.size(); ++k)
        if (u.in_ball(k)) EXPECT_NEAR(v[k], u[k] + 3.0, 1e-10);
}

TEST(MseSolver, CovariantUnderDilation) {
    // x -> lambda u(x / lambda) maps solutions to solutions on the dilated ball.
    const double lambda = 0.5;
    const auto g = boundary_data(33, 0.4);
    GridFunction gs(2, lambda, lambda * g.h());
    ASSERT_EQ(gs.size(), g.size());
    for (std::size_t k = 0; k < g.size(); ++k) gs[k] = lambda * g[k];
    const auto u = fc::mse::solve_mse(g).u;
    const auto v = fc::mse::solve_mse(gs).u;
    for (std::size_t k = 0; k < u.size(); ++k)
        if (u.in_ball(k)) EXPECT_NEAR(v[k], lambda * u[k], 1e-10);
}

TEST(MseSolver, CovariantUnderReflection) {
    const auto g = boundary_data(33, 0.4);
    auto r = g;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto ix = g.index(k);
        if (g.in_ball(k)) r[k] = g.at(-ix[0], ix[1]);
    }
    const auto u = fc::mse::solve_mse(g).u;
    const auto v = fc::mse::solve_mse(r).u;
    for (std::size_t k = 0; k < u.size(); ++k) {
        const auto ix = u.index(k);
        if (u.in_ball(k)) EXPECT_NEAR(v[k], u.at(-ix[0], ix[1]), 1e-10);
    }
}

TEST(MseSolver, RefineKeepsResidualSmall) {
    const auto coarse = fc::mse::solve_mse(boundary_data(33, 0.4)).u;
    const auto fine = fc::mse::refine_solution(coarse, 0.25, 4);
    EXPECT_LT(fine.residual, 1e-8);
    EXPECT_LT(std::abs(fine.u[fine.u.origin()] - coarse[coarse.origin()]), 1e-3);
}

TEST(ExactSolution, ScherkDomainChecks) {
    EXPECT_THROW(fc::mse::exact_solution(fc::mse::Scherk{0.5}, unit_grid(17)), std::domain_error);
    EXPECT_THROW(fc::mse::exact_solution(fc::mse::Scherk{1.0}, GridFunction::with_nodes(1, 1.0, 17)),
                 std::domain_error);
    EXPECT_NO_THROW(fc::mse::exact_solution(fc::mse::Scherk{1.0}, unit_grid(17)));
}

TEST(Viscosity, ParaboloidBelowPlaneIsSubsolution) {
    auto surface = unit_grid(33);
    auto phi = surface;
    phi.fill([](const Point& p) { return -(p[0] * p[0] + p[1] * p[1]); });
    const auto v = fc::mse::viscosity_touch_check(surface, phi, fc::mse::Side::below, surface.origin());
    EXPECT_TRUE(v.satisfied);
    EXPECT_EQ(v.containment, fc::mse::Containment::E);
    EXPECT_NEAR(v.operatorValue, -4.0, 1e-10);
}

TEST(Viscosity, ParaboloidAbovePlaneIsSupersolution) {
    auto surface = unit_grid(33);
    auto phi = surface;
    phi.fill([](const Point& p) { return p[0] * p[0] + p[1] * p[1]; });
    const auto v = fc::mse::viscosity_touch_check(surface, phi, fc::mse::Side::above, surface.origin());
    EXPECT_TRUE(v.satisfied);
    EXPECT_EQ(v.containment, fc::mse::Containment::Ec);
}

TEST(Viscosity, TouchingSolvedSurfaceFromBothSides) {
    const auto u = fc::mse::solve_mse(boundary_data(33, 0.4)).u;
    const std::size_t x0 = u.flat(3, -2);
    const Point c = u.position(x0);
    for (double s : {-1.0, 1.0}) {
        auto phi = u;
        phi.fill([&](const Point& p) { return s * ((p[0] - c[0]) * (p[0] - c[0]) + (p[1] - c[1]) * (p[1] - c[1])); });
        for (std::size_t k = 0; k < u.size(); ++k)
            if (u.in_ball(k)) phi[k] += u[k];
        const auto side = s < 0 ? fc::mse::Side::below : fc::mse::Side::above;
        EXPECT_TRUE(fc::mse::viscosity_touch_check(u, phi, side, x0).satisfied);
    }
}

TEST(Viscosity, RejectsCrossingTestFunction) {
    auto surface = unit_grid(33);
    auto phi = surface;
    phi.fill([](const Point& p) { return p[0]; });
    EXPECT_THROW(fc::mse::viscosity_touch_check(surface, phi, fc::mse::Side::below, surface.origin()),
                 fc::hypothesis_error);
    phi.fill([](const Point&) { return 0.1; });
    EXPECT_THROW(fc::mse::viscosity_touch_check(surface, phi, fc::mse::Side::below, surface.origin()),
                 fc::hypothesis_error);
}

TEST(Viscosity, WrongSideFails) {
    // A strictly convex test function touching from below has positive operator.
    auto surface = unit_grid(33);
    surface.fill([](const Point& p) { return 2 * (p[0] * p[0] + p[1] * p[1]); });
    auto phi = surface;
    phi.fill([](const Point& p) { return p[0] * p[0] + p[1] * p[1]; });
    EXPECT_FALSE(fc::mse::viscosity_touch_check(surface, phi, fc::mse::Side::below, surface.origin()).satisfied);
}
