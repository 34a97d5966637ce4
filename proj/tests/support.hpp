// Shared fixtures and brute-force oracles for the test suites.
#pragma once

#include "flatcert.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace testing_support {

namespace fc = flatcert;
using fc::grid::GridFunction;
using fc::grid::Point;

inline const fc::ledger::ConstantLedger& ledger_n3() {
    static const auto L =
        fc::ledger::derive_ledger(fc::ledger::HarnackParams::with_alpha(3, 0.25, fc::Rational(1, 4)));
    return L;
}

inline const fc::ledger::ConstantLedger& ledger_n2() {
    static const auto L =
        fc::ledger::derive_ledger(fc::ledger::HarnackParams::with_alpha(2, 0.25, fc::Rational(1, 4)));
    return L;
}

inline GridFunction unit_grid(int nodes, int dim = 2) { return GridFunction::with_nodes(dim, 1.0, nodes); }

inline GridFunction random_field(GridFunction f, unsigned seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    for (std::size_t k = 0; k < f.size(); ++k) f[k] = f.in_ball(k) ? u(rng) : 0.0;
    return f;
}

/// Distance between nodes a and b, recomputed from their indices.
inline double pair_distance(const GridFunction& f, std::size_t a, std::size_t b) {
    const auto ia = f.index(a);
    const auto ib = f.index(b);
    const int di = std::abs(ia[0] - ib[0]);
    const int dj = std::abs(ia[1] - ib[1]);
    return f.h() * std::sqrt(static_cast<double>(di * di + dj * dj));
}

inline bool in_closed_ball(const GridFunction& f, std::size_t k, const Point& c, double r) {
    const Point p = f.position(k);
    const double dx = p[0] - c[0];
    const double dy = p[1] - c[1];
    return dx * dx + dy * dy <= r * r * (1 + 1e-12) + 1e-24;
}

/// O(N^2) Hoelder seminorm over every pair of in-ball nodes of B(c, r).
inline double brute_holder(const GridFunction& f, double sigma, const Point& c, double r) {
    double best = 0.0;
    for (std::size_t a = 0; a < f.size(); ++a) {
        if (!f.in_ball(a) || !in_closed_ball(f, a, c, r) || std::isnan(f[a])) continue;
        for (std::size_t b = a + 1; b < f.size(); ++b) {
            if (!f.in_ball(b) || !in_closed_ball(f, b, c, r) || std::isnan(f[b])) continue;
            const double q = std::abs(f[a] - f[b]) / std::pow(pair_distance(f, a, b), sigma);
            if (q > best) best = q;
        }
    }
    return best;
}

inline double brute_oscillation(const GridFunction& f, const Point& c, double r) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t k = 0; k < f.size(); ++k) {
        if (!f.in_ball(k) || !in_closed_ball(f, k, c, r)) continue;
        lo = std::min(lo, f[k]);
        hi = std::max(hi, f[k]);
    }
    return hi - lo;
}

/// Exhaustive double loop for the inf-convolution of u-/eps on B'_{3/4}.
inline GridFunction brute_inf_convolution(const fc::envelope::MultiGraph& mg, const fc::ledger::ConstantLedger& L) {
    const GridFunction& lo = mg.lower;
    GridFunction u(lo.base_dim(), 0.75 * lo.radius(), lo.h());
    const double alpha = L.alpha_d();
    const double K = std::exp2(alpha) * L.C1.value();
    for (std::size_t k = 0; k < u.size(); ++k) {
        if (!u.in_ball(k)) continue;
        const auto [i, j] = u.index(k);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < u.size(); ++s) {
            if (!u.in_ball(s)) continue;
            const auto [si, sj] = u.index(s);
            const std::size_t ks = lo.flat(si, sj);
            if (!mg.covered(ks)) continue;
            const int di = std::abs(si - i);
            const int dj = std::abs(sj - j);
            const double cand =
                lo[ks] / mg.eps + K * std::pow(u.h() * std::sqrt(static_cast<double>(di * di + dj * dj)), alpha);
            if (cand < best) best = cand;
        }
        u[k] = best;
    }
    return u;
}

/// Argmin of eps phi + delta/2 |x - x0|^2 - target over B'_r(x0), ties to the first node.
inline std::size_t brute_touch_argmin(const GridFunction& target, const GridFunction& phi, std::size_t x0,
                                      double eps, double delta, double r, double* value = nullptr) {
    const Point c = phi.position(x0);
    std::size_t best = phi.size();
    double bv = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < phi.size(); ++k) {
        if (!phi.in_ball(k) || !in_closed_ball(phi, k, c, r)) continue;
        const Point x = phi.position(k);
        const double d2 = (x[0] - c[0]) * (x[0] - c[0]) + (x[1] - c[1]) * (x[1] - c[1]);
        const double v = eps * phi[k] + 0.5 * delta * d2 - target[k];
        if (v < bv) {
            bv = v;
            best = k;
        }
    }
    if (value) *value = bv;
    return best;
}

/// max |f(x) - f(y)| - C1 (|x-y| + C2 eps^gamma)^alpha over pairs of covered nodes of B'_{3/4}.
inline double brute_modulus_margin(const fc::envelope::MultiGraph& mg, const fc::ledger::ConstantLedger& L) {
    const GridFunction& g = mg.lower;
    const double alpha = L.alpha_d();
    const double shift = L.C2.value() * std::pow(mg.eps, L.gamma_d());
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < g.size(); ++a) {
        if (!g.in_ball(a) || !mg.covered(a) || !in_closed_ball(g, a, {0, 0}, 0.75 * g.radius())) continue;
        for (std::size_t b = a + 1; b < g.size(); ++b) {
            if (!g.in_ball(b) || !mg.covered(b) || !in_closed_ball(g, b, {0, 0}, 0.75 * g.radius())) continue;
            const double lhs = std::max(mg.heights[a].back() - mg.heights[b].front(),
                                        mg.heights[b].back() - mg.heights[a].front());
            const double rhs = L.C1.value() * std::pow(pair_distance(g, a, b) + shift, alpha);
            margin = std::min(margin, rhs - lhs);
        }
    }
    return margin;
}

/// Cusp profile |theta|^sigma on the ring (theta in (-pi, pi]).
inline double cusp(const Point& x, double sigma) { return std::pow(std::abs(std::atan2(x[1], x[0])), sigma); }

}  // namespace testing_support
