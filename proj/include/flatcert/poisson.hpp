/**
 * @brief Dirichlet problem  Laplace(w) = c  on a grid ball.
 *
 * The solution is split into the explicit quadratic particular solution
 * c |x|^2 / (2d), on which the stencil is exact, and a discrete harmonic part
 * obtained by red-black successive over-relaxation.
 */
#pragma once

#include "flatcert/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace flatcert {

/// Iterative or Newton solve that did not reach its tolerance.
struct convergence_error : std::runtime_error {
    convergence_error(const std::string& what, double last_residual)
        : std::runtime_error(what + " (last residual " + shortest(last_residual) + ")"), residual(last_residual) {}
    double residual;
};

namespace harmonic {

struct RelaxationOptions {
    /// Stop when max |sum(neighbours) - 2d w| <= tol * scale (residual in h^2 units).
    double tol = 1e-14;
    long max_sweeps = 1'000'000;
};

struct PoissonSolve {
    grid::GridFunction w;
    long sweeps = 0;
    double residual = 0.0;
};

/// c |x|^2 / (2d): the quadratic with constant discrete Laplacian c.
inline double quadratic_particular(double c, const grid::Point& x, int d) {
    return c * (x[0] * x[0] + x[1] * x[1]) / (2.0 * d);
}

namespace detail {

inline double neighbour_sum(const grid::GridFunction& w, int i, int j) {
    double s = w.at(i + 1, j) + w.at(i - 1, j);
    if (w.base_dim() == 2) s += w.at(i, j + 1) + w.at(i, j - 1);
    return s;
}

inline double max_residual(const grid::GridFunction& w) {
    const double diag = 2.0 * w.base_dim();
    double r = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (!w.is_interior(k)) continue;
        const auto [i, j] = w.index(k);
        r = std::max(r, std::abs(neighbour_sum(w, i, j) - diag * w[k]));
    }
    return r;
}

}  // namespace detail

/// Discrete harmonic extension of the boundary-ring values of g (interior values of g are ignored).
inline PoissonSolve relax_harmonic(const grid::GridFunction& g, const RelaxationOptions& opt = {}) {
    grid::GridFunction w = g;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (w.kind(k) != grid::NodeKind::boundary) continue;
        if (!std::isfinite(w[k])) throw std::invalid_argument("boundary trace must be finite on the ring");
        lo = std::min(lo, w[k]);
        hi = std::max(hi, w[k]);
    }
    if (lo > hi) throw std::invalid_argument("grid has no boundary ring");
    const double mean = 0.5 * (lo + hi);
    for (std::size_t k = 0; k < w.size(); ++k)
        if (w.is_interior(k)) w[k] = mean;

    const double scale = std::max({std::abs(lo), std::abs(hi), 1e-300});
    const double diag = 2.0 * w.base_dim();
    const double omega = 2.0 / (1.0 + std::sin(std::numbers::pi * w.h() / (2.0 * w.radius())));
    const double target = opt.tol * scale;

    // Interior node lists per colour, in row-major order.
    std::vector<std::size_t> colour[2];
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (!w.is_interior(k)) continue;
        const auto [i, j] = w.index(k);
        colour[((i + j) % 2 + 2) % 2].push_back(k);
    }

    PoissonSolve out;
    double res = detail::max_residual(w);
    long sweep = 0;
    while (res > target) {
        if (sweep >= opt.max_sweeps) throw convergence_error("harmonic relaxation did not converge", res / scale);
        for (const auto& nodes : colour) {
            for (std::size_t k : nodes) {
                const auto [i, j] = w.index(k);
                const double gs = detail::neighbour_sum(w, i, j) / diag;
                w[k] += omega * (gs - w[k]);
            }
        }
        ++sweep;
        if (sweep % 8 == 0) res = detail::max_residual(w);
    }
    // Maximum principle: the interior stays within the ring values.
    const double slack = 1e-12 * scale;
    for (std::size_t k = 0; k < w.size(); ++k)
        if (w.is_interior(k) && (w[k] < lo - slack || w[k] > hi + slack))
            throw std::logic_error("discrete maximum principle violated by harmonic solve");
    out.w = std::move(w);
    out.sweeps = sweep;
    out.residual = res / scale;
    return out;
}

/**
 * Solves  Laplace(w) = c  in the ball with w equal to the ring values of
 * `boundary`. The returned field is (c |x|^2 / 2d) + (harmonic correction).
 */
inline PoissonSolve solve_poisson_ball_detailed(double c, const grid::GridFunction& boundary,
                                                const RelaxationOptions& opt = {}) {
    const int d = boundary.base_dim();
    grid::GridFunction g = boundary;
    for (std::size_t k = 0; k < g.size(); ++k)
        if (g.in_ball(k)) g[k] = boundary[k] - quadratic_particular(c, g.position(k), d);
    PoissonSolve s = relax_harmonic(g, opt);
    for (std::size_t k = 0; k < s.w.size(); ++k) {
        if (!s.w.in_ball(k)) continue;
        s.w[k] = boundary.kind(k) == grid::NodeKind::boundary
                     ? boundary[k]
                     : s.w[k] + quadratic_particular(c, s.w.position(k), d);
    }
    return s;
}

inline grid::GridFunction solve_poisson_ball(double c, const grid::GridFunction& boundary,
                                             const RelaxationOptions& opt = {}) {
    return solve_poisson_ball_detailed(c, boundary, opt).w;
}

/// Harmonic function agreeing with u on the boundary ring.
inline grid::GridFunction harmonic_replacement(const grid::GridFunction& u, const RelaxationOptions& opt = {}) {
    return relax_harmonic(u, opt).w;
}

}  // namespace harmonic
}  // namespace flatcert
