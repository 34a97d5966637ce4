/**
 * @brief Minimal surface operator (1 + |Du|^2) Lap(u) - Du^T D^2u Du on grid
 * balls, its damped Newton Dirichlet solver, exact solutions and the
 * one-sided touching test for viscosity solutions.
 */
#pragma once

#include "flatcert/grid.hpp"
#include "flatcert/poisson.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace flatcert {

/// A stated hypothesis of an operation does not hold for the given data.
struct hypothesis_error : std::domain_error {
    using std::domain_error::domain_error;
};

namespace mse {

/// Operator value from a gradient and Hessian.
inline double mse_operator(const grid::Point& p, const grid::Matrix2& H) {
    const double trace = H[0][0] + H[1][1];
    const double pHp = p[0] * (H[0][0] * p[0] + H[0][1] * p[1]) + p[1] * (H[1][0] * p[0] + H[1][1] * p[1]);
    return (1.0 + p[0] * p[0] + p[1] * p[1]) * trace - pHp;
}

inline double mse_operator_at(const grid::GridFunction& u, std::size_t k) {
    return mse_operator(grid::gradient(u, k), grid::hessian(u, k));
}

/// Operator residual at interior nodes, NaN elsewhere.
inline grid::GridFunction mse_residual(const grid::GridFunction& u) {
    grid::GridFunction r = u;
    for (std::size_t k = 0; k < u.size(); ++k)
        r[k] = u.is_interior(k) ? mse_operator_at(u, k) : std::numeric_limits<double>::quiet_NaN();
    return r;
}

inline double max_abs_residual(const grid::GridFunction& u) {
    double m = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k)
        if (u.is_interior(k)) m = std::max(m, std::abs(mse_operator_at(u, k)));
    return m;
}

struct SolveOptions {
    /// Target max |residual|; <= 0 selects 1e-10 (1 + osc of the boundary data).
    double tol = 0.0;
    int max_iter = 50;
};

struct SolveResult {
    grid::GridFunction u;
    int iterations = 0;
    double residual = 0.0;
};

namespace detail {

inline double boundary_oscillation(const grid::GridFunction& b) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t k = 0; k < b.size(); ++k) {
        if (b.kind(k) != grid::NodeKind::boundary) continue;
        if (!std::isfinite(b[k])) throw std::invalid_argument("boundary data must be finite");
        lo = std::min(lo, b[k]);
        hi = std::max(hi, b[k]);
    }
    return hi - lo;
}

struct Unknowns {
    std::vector<long> id;  // per node, -1 when not an unknown
    std::vector<std::size_t> node;
};

inline Unknowns number_interior(const grid::GridFunction& u) {
    Unknowns x;
    x.id.assign(u.size(), -1);
    for (std::size_t k = 0; k < u.size(); ++k)
        if (u.is_interior(k)) {
            x.id[k] = static_cast<long>(x.node.size());
            x.node.push_back(k);
        }
    return x;
}

inline Eigen::VectorXd residual_vector(const grid::GridFunction& u, const Unknowns& x) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(x.node.size()));
    for (std::size_t a = 0; a < x.node.size(); ++a) r[static_cast<Eigen::Index>(a)] = mse_operator_at(u, x.node[a]);
    return r;
}

/// Jacobian of the discrete operator with respect to interior values.
inline Eigen::SparseMatrix<double> jacobian(const grid::GridFunction& u, const Unknowns& x) {
    const double h = u.h();
    const double hh = h * h;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(x.node.size() * 9);
    for (std::size_t a = 0; a < x.node.size(); ++a) {
        const std::size_t k = x.node[a];
        const auto [i, j] = u.index(k);
        const grid::Point p = grid::gradient(u, k);
        const grid::Matrix2 H = grid::hessian(u, k);
        auto add = [&](int di, int dj, double w) {
            const long col = x.id[u.flat(i + di, j + dj)];
            if (col >= 0 && w != 0.0) trip.emplace_back(static_cast<int>(a), static_cast<int>(col), w);
        };
        if (u.base_dim() == 1) {
            // The operator reduces to u'' in one base dimension.
            add(-1, 0, 1 / hh);
            add(0, 0, -2 / hh);
            add(1, 0, 1 / hh);
            continue;
        }
        const double dp0 = 2 * p[0] * H[1][1] - 2 * p[1] * H[0][1];
        const double dp1 = 2 * p[1] * H[0][0] - 2 * p[0] * H[0][1];
        const double dH00 = 1 + p[1] * p[1];
        const double dH11 = 1 + p[0] * p[0];
        const double dH01 = -2 * p[0] * p[1];
        add(1, 0, dp0 / (2 * h) + dH00 / hh);
        add(-1, 0, -dp0 / (2 * h) + dH00 / hh);
        add(0, 1, dp1 / (2 * h) + dH11 / hh);
        add(0, -1, -dp1 / (2 * h) + dH11 / hh);
        add(0, 0, -2 * (dH00 + dH11) / hh);
        add(1, 1, dH01 / (4 * hh));
        add(-1, -1, dH01 / (4 * hh));
        add(1, -1, -dH01 / (4 * hh));
        add(-1, 1, -dH01 / (4 * hh));
    }
    Eigen::SparseMatrix<double> J(static_cast<Eigen::Index>(x.node.size()), static_cast<Eigen::Index>(x.node.size()));
    J.setFromTriplets(trip.begin(), trip.end());
    return J;
}

}  // namespace detail

/**
 * Damped Newton iteration for the Dirichlet problem, starting from `initial`
 * (whose boundary-ring values are the Dirichlet data). Each step halves the
 * update until the residual 2-norm decreases.
 */
inline SolveResult solve_mse_from(const grid::GridFunction& initial, const SolveOptions& opt = {}) {
    const double tol = opt.tol > 0 ? opt.tol : 1e-10 * (1 + detail::boundary_oscillation(initial));
    grid::GridFunction u = initial;
    const detail::Unknowns x = detail::number_interior(u);
    SolveResult out;
    Eigen::VectorXd r = detail::residual_vector(u, x);
    if (x.node.empty()) {
        out.u = std::move(u);
        return out;
    }
    double rmax = r.lpNorm<Eigen::Infinity>();
    int it = 0;
    bool polished = false;
    while (true) {
        if (rmax <= tol) {
            // One extra step pushes the solution to roundoff level when it still helps.
            if (polished || it >= opt.max_iter) break;
            polished = true;
        } else if (it >= opt.max_iter) {
            throw convergence_error("minimal surface Newton iteration did not converge", rmax);
        }
        const Eigen::SparseMatrix<double> J = detail::jacobian(u, x);
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.analyzePattern(J);
        lu.factorize(J);
        if (lu.info() != Eigen::Success) throw convergence_error("singular Newton Jacobian", rmax);
        const Eigen::VectorXd delta = lu.solve(-r);
        const double rnorm = r.norm();
        double t = 1.0;
        grid::GridFunction trial = u;
        Eigen::VectorXd rt;
        bool accepted = false;
        for (int halving = 0; halving < 30; ++halving, t *= 0.5) {
            for (std::size_t a = 0; a < x.node.size(); ++a)
                trial[x.node[a]] = u[x.node[a]] + t * delta[static_cast<Eigen::Index>(a)];
            rt = detail::residual_vector(trial, x);
            if (rt.norm() < rnorm) {
                accepted = true;
                break;
            }
        }
        ++it;
        if (!accepted) {
            if (rmax <= tol) break;
            throw convergence_error("Newton line search failed to reduce the residual", rmax);
        }
        u = std::move(trial);
        r = std::move(rt);
        rmax = r.lpNorm<Eigen::Infinity>();
    }
    out.u = std::move(u);
    out.iterations = it;
    out.residual = rmax;
    return out;
}

/// Solves the Dirichlet problem with the ring values of `boundary`, starting
/// from their discrete harmonic extension.
inline SolveResult solve_mse(const grid::GridFunction& boundary, const SolveOptions& opt = {}) {
    return solve_mse_from(harmonic::harmonic_replacement(boundary), opt);
}

/// Re-solves a solution on B(0, radius) with spacing h/factor; boundary data and
/// initial guess come from interpolating the coarse solution.
inline SolveResult refine_solution(const grid::GridFunction& coarse, double radius, int factor,
                                   const SolveOptions& opt = {}) {
    return solve_mse_from(grid::refine_local(coarse, radius, factor), opt);
}

// ------------------------------------------------------------ exact solutions

struct Affine {
    grid::Point slope{0.0, 0.0};
    double offset = 0.0;
};

struct Scherk {
    double scale = 1.0;
};

/// cos(radius/scale) must stay at least this large on the sampled ball.
inline constexpr double kScherkMinCos = 0.25;

inline double scherk_value(const Scherk& s, const grid::Point& x) {
    return s.scale * std::log(std::cos(x[0] / s.scale) / std::cos(x[1] / s.scale));
}

inline grid::GridFunction exact_solution(const Affine& a, grid::GridFunction layout) {
    return std::move(layout.fill([&](const grid::Point& x) { return a.offset + a.slope[0] * x[0] + a.slope[1] * x[1]; }));
}

inline grid::GridFunction exact_solution(const Scherk& s, grid::GridFunction layout) {
    if (layout.base_dim() != 2) throw std::domain_error("Scherk's surface needs base dimension 2");
    if (!(s.scale > 0) || std::cos(std::min(layout.radius() / s.scale, 1.5707963267948966)) < kScherkMinCos)
        throw std::domain_error("ball leaves the safe Scherk subdomain");
    return std::move(layout.fill([&](const grid::Point& x) { return scherk_value(s, x); }));
}

// ------------------------------------------------------------ viscosity test

enum class Side { above, below };
enum class Containment { E, Ec };

struct ViscosityVerdict {
    Side side = Side::below;
    /// E is the subgraph of the surface; a test function below it has its subgraph in E.
    Containment containment = Containment::E;
    double operatorValue = 0.0;
    bool satisfied = false;
};

/**
 * One-sided touching test: phi must lie below (above) the surface on the
 * nodes within `radius` of the touch node and meet it there, up to
 * `touch_tol`. Returns the operator evaluated on phi with the sign
 * convention of the viscosity definition.
 */
inline ViscosityVerdict viscosity_touch_check(const grid::GridFunction& surface, const grid::GridFunction& phi,
                                              Side side, std::size_t touch, double radius = 0.0,
                                              double tol = 1e-9, double touch_tol = 1e-12) {
    if (!surface.same_layout(phi)) throw std::invalid_argument("surface and phi must share a grid");
    grid::require_interior(phi, touch);
    if (radius <= 0) radius = 4 * surface.h();
    const double scale = std::max(1.0, std::max(grid::sup_abs(surface), grid::sup_abs(phi)));
    const double slack = touch_tol * scale;
    if (std::abs(phi[touch] - surface[touch]) > slack) throw hypothesis_error("phi does not meet the surface at the touch node");
    for (std::size_t k : surface.nodes_in_ball(surface.position(touch), radius)) {
        const double d = phi[k] - surface[k];
        if ((side == Side::below && d > slack) || (side == Side::above && d < -slack))
            throw hypothesis_error("phi - surface changes sign near the touch node");
    }
    ViscosityVerdict v;
    v.side = side;
    v.containment = side == Side::below ? Containment::E : Containment::Ec;
    v.operatorValue = mse_operator_at(phi, touch);
    v.satisfied = side == Side::below ? v.operatorValue <= tol : v.operatorValue >= -tol;
    return v;
}

}  // namespace mse
}  // namespace flatcert
