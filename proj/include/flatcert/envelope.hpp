/**
 * @brief Stretched multivalued graph of a flat surface, its lower/upper
 * envelopes, the Hoelder inf-convolution regularizer and the sandwich check.
 */
#pragma once

#include "flatcert/grid.hpp"
#include "flatcert/ledger.hpp"
#include "flatcert/mse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace flatcert {

/// A point (x', x_n) of the surface; base[1] is unused when n = 2.
struct SurfaceSample {
    grid::Point base{0.0, 0.0};
    double height = 0.0;
};

/// Samples at every in-ball node of a graph field.
inline std::vector<SurfaceSample> samples_from_graph(const grid::GridFunction& f) {
    std::vector<SurfaceSample> s;
    for (std::size_t k = 0; k < f.size(); ++k)
        if (f.in_ball(k) && !std::isnan(f[k])) s.push_back({f.position(k), f[k]});
    return s;
}

namespace envelope {

struct MultiGraph {
    /// Stretched heights A(x') per node, sorted; empty for absent columns.
    std::vector<std::vector<double>> heights;
    /// u- = eps inf A and u+ = eps sup A; NaN on absent columns.
    grid::GridFunction lower;
    grid::GridFunction upper;
    /// Flatness used for stretching: eps_input + |shift| (at most 2 eps_input).
    double eps = 0.0;
    double eps_input = 0.0;
    /// Vertical translation applied so that u-(0) = 0.
    double shift = 0.0;

    [[nodiscard]] bool covered(std::size_t k) const { return !heights[k].empty(); }
    [[nodiscard]] double sup_abs_A() const {
        double m = 0.0;
        for (const auto& col : heights)
            for (double a : col) m = std::max(m, std::abs(a));
        return m;
    }
};

/**
 * Bins surface samples to the nodes of `layout` (nearest node), drops samples
 * outside the closed ball of radius layout.radius() in R^n, and normalizes
 * vertically so that the lowest sheet passes through the origin.
 */
inline MultiGraph extract_multigraph(const std::vector<SurfaceSample>& samples, double eps,
                                     const grid::GridFunction& layout) {
    if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
    const double R = layout.radius();
    const double slab = eps * (1 + 1e-12);
    std::vector<std::vector<double>> raw(layout.size());
    for (const SurfaceSample& s : samples) {
        const double r2 = s.base[0] * s.base[0] + s.base[1] * s.base[1] + s.height * s.height;
        if (r2 > R * R * (1 + 1e-12)) continue;
        if (std::abs(s.height) > slab) throw hypothesis_error("sample violates the slab |x_n| <= eps");
        const std::size_t k = layout.nearest_node(s.base);
        if (k >= layout.size() || !layout.in_ball(k)) continue;
        raw[k].push_back(s.height);
    }
    const std::size_t o = layout.origin();
    if (raw[o].empty()) throw hypothesis_error("the origin column holds no surface sample");

    MultiGraph mg;
    mg.eps_input = eps;
    mg.shift = 0.0 - *std::min_element(raw[o].begin(), raw[o].end());
    mg.eps = eps + std::abs(mg.shift);
    mg.lower = layout;
    mg.upper = layout;
    mg.heights.resize(layout.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < layout.size(); ++k) {
        auto& col = mg.heights[k];
        for (double x : raw[k]) col.push_back((x + mg.shift) / mg.eps);
        std::sort(col.begin(), col.end());
        col.erase(std::unique(col.begin(), col.end()), col.end());
        if (col.empty() || !layout.in_ball(k)) {
            mg.lower[k] = mg.upper[k] = layout.in_ball(k) ? nan : 0.0;
            continue;
        }
        mg.lower[k] = mg.eps * col.front();
        mg.upper[k] = mg.eps * col.back();
    }
    mg.lower[o] = 0.0;
    return mg;
}

/// Radius of the regularization domain B'_{3/4}, relative to a unit base ball.
inline constexpr double kRegularizationRadius = 0.75;

struct InfConvolution {
    grid::GridFunction u;
    /// Hoelder constant 2^alpha C1 = 2^(4+5 alpha) of the regularizer.
    double modulus = 0.0;
    grid::HolderMeasurement seminorm;
    bool seminorm_ok = false;
    bool origin_zero = false;
};

/**
 * u(x0) = min over covered x in B'_{3/4} of  u-(x)/eps + 2^alpha C1 |x - x0|^alpha,
 * evaluated exhaustively at every node x0 of B'_{3/4}.
 */
inline InfConvolution inf_convolve(const MultiGraph& mg, const ledger::ConstantLedger& L,
                                   bool measure_seminorm = true) {
    const grid::GridFunction& lower = mg.lower;
    const double alpha = L.alpha_d();
    InfConvolution out;
    out.modulus = std::exp2(alpha) * L.C1.value();
    out.u = grid::GridFunction(lower.base_dim(), kRegularizationRadius * lower.radius(), lower.h());
    grid::GridFunction& u = out.u;

    std::vector<grid::Index> src_idx;
    std::vector<double> src_val;
    for (std::size_t k = 0; k < u.size(); ++k) {
        if (!u.in_ball(k)) continue;
        const auto [i, j] = u.index(k);
        const std::size_t kl = lower.flat(i, j);
        if (!mg.covered(kl)) continue;
        src_idx.push_back({i, j});
        src_val.push_back(lower[kl] / mg.eps);
    }
    if (src_idx.empty()) throw hypothesis_error("no covered columns in the regularization domain");

    // K |offset|^alpha depends only on the index offset.
    const int ext = u.side();
    std::vector<double> kpow(static_cast<std::size_t>((ext + 1) * (ext + 1)));
    for (int a = 0; a <= ext; ++a)
        for (int b = 0; b <= ext; ++b)
            kpow[static_cast<std::size_t>(a * (ext + 1) + b)] =
                out.modulus * std::pow(grid::node_distance(a, b, u.h()), alpha);

    for (std::size_t k = 0; k < u.size(); ++k) {
        if (!u.in_ball(k)) continue;
        const auto [i, j] = u.index(k);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < src_idx.size(); ++s) {
            const int di = std::abs(src_idx[s][0] - i);
            const int dj = std::abs(src_idx[s][1] - j);
            const double cand = src_val[s] + kpow[static_cast<std::size_t>(di * (ext + 1) + dj)];
            if (cand < best) best = cand;
        }
        u[k] = best;
    }
    out.origin_zero = u[u.origin()] == 0.0;
    if (measure_seminorm) {
        out.seminorm = grid::holder_seminorm(u, alpha);
        out.seminorm_ok = out.seminorm.seminorm <= out.modulus * (1 + 1e-12);
    }
    return out;
}

struct SandwichReport {
    /// min (u- - eps u) over covered nodes of B'_{3/4}.
    double lower_margin = 0.0;
    /// min (eps u + C3 eps^(1+gamma alpha) - u+).
    double upper_margin = 0.0;
    double upper_slack = 0.0;  ///< C3 eps^(1+gamma alpha)
    /// sup |A - u| over covered nodes and its bound C3 eps^(gamma alpha).
    double a_minus_u = 0.0;
    double a_minus_u_bound = 0.0;
    /// sup|u| + [u]_alpha on B'_{1/2} and its bound 2^(6+5 alpha).
    double holder_norm = 0.0;
    double holder_norm_bound = 0.0;
    std::size_t worst_node = 0;
    bool verdict = false;
};

inline SandwichReport verify_sandwich(const grid::GridFunction& u, const MultiGraph& mg,
                                      const ledger::ConstantLedger& L) {
    const double eps = mg.eps;
    const double ga = L.gamma_alpha_d();
    const double C3 = L.C3.value();
    SandwichReport r;
    r.upper_slack = C3 * std::pow(eps, 1 + ga);
    r.a_minus_u_bound = C3 * std::pow(eps, ga);
    r.lower_margin = std::numeric_limits<double>::infinity();
    r.upper_margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < u.size(); ++k) {
        if (!u.in_ball(k)) continue;
        const auto [i, j] = u.index(k);
        const std::size_t kl = mg.lower.flat(i, j);
        if (!mg.covered(kl)) continue;
        const double lm = mg.lower[kl] - eps * u[k];
        const double um = eps * u[k] + r.upper_slack - mg.upper[kl];
        if (lm < r.lower_margin) {
            r.lower_margin = lm;
            if (lm < 0) r.worst_node = k;
        }
        if (um < r.upper_margin) {
            r.upper_margin = um;
            if (um < 0) r.worst_node = k;
        }
        for (double a : mg.heights[kl]) r.a_minus_u = std::max(r.a_minus_u, std::abs(a - u[k]));
    }
    const double alpha = L.alpha_d();
    const grid::GridFunction half = grid::restrict_to_ball(u, 0.5 * mg.lower.radius());
    r.holder_norm = grid::sup_abs(half) + grid::holder_seminorm(half, alpha).seminorm;
    r.holder_norm_bound = std::exp2(6 + 5 * alpha);
    r.verdict = r.lower_margin >= 0 && r.upper_margin >= 0 && r.a_minus_u <= r.a_minus_u_bound &&
                r.holder_norm <= r.holder_norm_bound;
    return r;
}

struct ModulusCheck {
    /// min over pairs of C1 (|x-y| + C2 eps^gamma)^alpha - |A(x) - A(y)|.
    double margin = std::numeric_limits<double>::infinity();
    double worst_lhs = 0.0;
    std::size_t worst_a = 0;
    std::size_t worst_b = 0;
    std::size_t pairs = 0;
    bool verdict = true;
};

/**
 * Pair scan of |A(x') - A(y')| <= C1 (|x'-y'| + C2 eps^gamma)^alpha over covered
 * nodes of B'_{3/4}, with the two-sided set difference
 * max(sup A(x) - inf A(y), sup A(y) - inf A(x)).
 */
inline ModulusCheck verify_harnack_modulus(const MultiGraph& mg, const ledger::ConstantLedger& L) {
    const grid::GridFunction& g = mg.lower;
    const double alpha = L.alpha_d();
    const double C1 = L.C1.value();
    const double shift = L.C2.value() * std::pow(mg.eps, L.gamma_d());
    std::vector<grid::Index> idx;
    std::vector<double> lo, hi;
    std::vector<std::size_t> ids;
    const double R = kRegularizationRadius * g.radius();
    for (std::size_t k : g.nodes_in_ball({0.0, 0.0}, R)) {
        if (!mg.covered(k)) continue;
        idx.push_back(g.index(k));
        lo.push_back(mg.heights[k].front());
        hi.push_back(mg.heights[k].back());
        ids.push_back(k);
    }
    const int ext = g.side();
    std::vector<double> rhs(static_cast<std::size_t>((ext + 1) * (ext + 1)));
    for (int a = 0; a <= ext; ++a)
        for (int b = 0; b <= ext; ++b)
            rhs[static_cast<std::size_t>(a * (ext + 1) + b)] =
                C1 * std::pow(grid::node_distance(a, b, g.h()) + shift, alpha);
    ModulusCheck m;
    for (std::size_t a = 0; a < idx.size(); ++a) {
        for (std::size_t b = a + 1; b < idx.size(); ++b) {
            const int di = std::abs(idx[a][0] - idx[b][0]);
            const int dj = std::abs(idx[a][1] - idx[b][1]);
            const double lhs = std::max(hi[a] - lo[b], hi[b] - lo[a]);
            const double mg_ = rhs[static_cast<std::size_t>(di * (ext + 1) + dj)] - lhs;
            ++m.pairs;
            if (mg_ < m.margin) {
                m.margin = mg_;
                m.worst_lhs = lhs;
                m.worst_a = ids[a];
                m.worst_b = ids[b];
            }
        }
    }
    m.verdict = m.margin >= 0;
    return m;
}

}  // namespace envelope
}  // namespace flatcert
