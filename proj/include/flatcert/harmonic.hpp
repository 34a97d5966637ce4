/**
 * @brief Barrier construction, sliding-paraboloid touching, harmonic
 * replacement with its closeness bound, interior derivative estimates and the
 * boundary Hoelder estimate for harmonic functions on B'_{1/2}.
 */
#pragma once

#include "flatcert/grid.hpp"
#include "flatcert/ledger.hpp"
#include "flatcert/mse.hpp"
#include "flatcert/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace flatcert::harmonic {

/// Eps-dependent quantities of the barrier argument, as doubles.
struct Scales {
    double eps = 0.0;
    double alpha = 0.0;
    double gamma_alpha = 0.0;
    int n = 2;
    double C3 = 0.0, C4 = 0.0, C5 = 0.0, C6 = 0.0;
    /// r = eps^(gamma alpha / 4)
    double r = 0.0;
    /// delta = 4 C3 eps^(1 + gamma alpha / 2)
    double delta = 0.0;
    /// C4 eps^(gamma alpha / 2)
    double laplace_cap = 0.0;
    /// 4 C5 r^(alpha/2)
    double barrier_lift = 0.0;
    /// eps^(-1/2)
    double derivative_cap = 0.0;
    /// C6 eps^(gamma alpha^2 / 8)
    double closeness_bound = 0.0;

    static Scales from(const ledger::ConstantLedger& L, double eps) {
        Scales s;
        s.eps = eps;
        s.alpha = L.alpha_d();
        s.gamma_alpha = L.gamma_alpha_d();
        s.n = L.params.n;
        s.C3 = L.C3.value();
        s.C4 = L.C4.value();
        s.C5 = L.C5.value();
        s.C6 = L.C6.value();
        s.r = std::pow(eps, s.gamma_alpha / 4);
        s.delta = 4 * s.C3 * std::pow(eps, 1 + s.gamma_alpha / 2);
        s.laplace_cap = s.C4 * std::pow(eps, s.gamma_alpha / 2);
        s.barrier_lift = 4 * s.C5 * std::pow(s.r, s.alpha / 2);
        s.derivative_cap = 1 / std::sqrt(eps);
        s.closeness_bound = s.C6 * std::pow(eps, s.gamma_alpha * s.alpha / 8);
        return s;
    }
};

/// True when eps lies below the named ledger threshold (compared in log space).
inline bool below_threshold(const ledger::ConstantLedger& L, std::string_view name, double eps) {
    ledger::PrecisionScope scope(L.digits);
    return ledger::log2_of(Real(eps)) <= L.threshold(name).log2;
}

/// Operator norm of a symmetric 2x2 matrix.
inline double operator_norm(const grid::Matrix2& H) {
    const double m = 0.5 * (H[0][0] + H[1][1]);
    const double d = std::sqrt(0.25 * (H[0][0] - H[1][1]) * (H[0][0] - H[1][1]) + H[0][1] * H[0][1]);
    return std::abs(m) + d;
}

struct DerivativeSizes {
    double max_entry = 0.0;  ///< sup_ij |D_ij f|
    double gradient = 0.0;   ///< |Df|
    double hessian = 0.0;    ///< |D^2 f| (operator norm)
    [[nodiscard]] double max() const { return std::max({max_entry, gradient, hessian}); }
};

inline DerivativeSizes derivative_sizes(const grid::GridFunction& f, std::size_t k) {
    const grid::Point g = grid::gradient(f, k);
    const grid::Matrix2 H = grid::hessian(f, k);
    DerivativeSizes d;
    d.gradient = grid::norm(g);
    d.max_entry = std::max({std::abs(H[0][0]), std::abs(H[0][1]), std::abs(H[1][1])});
    d.hessian = operator_norm(H);
    return d;
}

// ------------------------------------------------ boundary Hoelder estimate

struct BoundaryHolderCheck {
    double measured_norm = 0.0;   ///< ||w||_{C^{sigma/2}} on the closed ball, unit-ball frame
    double boundary_norm = 0.0;   ///< ||g||_{C^{0,sigma}} on the ring, unit-ball frame
    double bound = 0.0;           ///< 2 n 5^sigma ||g||
    double margin = 0.0;
    bool verdict = false;
};

namespace detail {

/// sup over pairs of |v_a - v_b| / (scale |x_a - x_b|)^sigma.
inline double pair_scan(const grid::GridFunction& f, const std::vector<std::size_t>& nodes, double sigma,
                        double scale) {
    const grid::detail::DistancePowTable dpow(f.side(), f.h() * scale, sigma);
    double best = 0.0;
    for (std::size_t a = 0; a < nodes.size(); ++a) {
        const auto ia = f.index(nodes[a]);
        for (std::size_t b = a + 1; b < nodes.size(); ++b) {
            const auto ib = f.index(nodes[b]);
            best = std::max(best, std::abs(f[nodes[a]] - f[nodes[b]]) / dpow(ia[0] - ib[0], ia[1] - ib[1]));
        }
    }
    return best;
}

}  // namespace detail

/**
 * Measures ||w||_{C^{0,sigma/2}} on the closed ball against 2 n 5^sigma
 * ||g||_{C^{0,sigma}} on its ring. Both norms (sup + seminorm) are taken in the
 * frame dilated to the unit ball, so the constant applies verbatim.
 */
inline BoundaryHolderCheck boundary_holder_check(const grid::GridFunction& w, const grid::GridFunction& g,
                                                 double sigma, int n) {
    if (!w.same_layout(g)) throw std::invalid_argument("w and g must share a grid");
    if (!(sigma > 0) || sigma > 1) throw std::invalid_argument("sigma must lie in (0, 1]");
    const double dilation = 1.0 / w.radius();
    std::vector<std::size_t> all, ring;
    double sup_w = 0.0, sup_g = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (!w.in_ball(k)) continue;
        all.push_back(k);
        sup_w = std::max(sup_w, std::abs(w[k]));
        if (w.kind(k) == grid::NodeKind::boundary) {
            ring.push_back(k);
            sup_g = std::max(sup_g, std::abs(g[k]));
        }
    }
    BoundaryHolderCheck c;
    c.measured_norm = sup_w + detail::pair_scan(w, all, sigma / 2, dilation);
    c.boundary_norm = sup_g + detail::pair_scan(g, ring, sigma, dilation);
    c.bound = 2.0 * n * std::pow(5.0, sigma) * c.boundary_norm;
    c.margin = c.bound - c.measured_norm;
    c.verdict = c.margin >= 0;
    return c;
}

// ------------------------------------------------------- sliding paraboloid

struct TouchResult {
    std::size_t x1 = 0;
    double laplacianAtTouch = 0.0;
    /// Value of eps phi + delta/2 |x - x0|^2 - target at x1.
    double minimum = 0.0;
    bool passed = false;
    /// eps <= T_touch (the touching threshold); reported, not required.
    bool threshold_holds = false;
};

/// The minimizer sits on the edge of the scan ball: the contradiction case.
struct touch_contradiction : hypothesis_error {
    touch_contradiction(const std::string& what, TouchResult r) : hypothesis_error(what), result(r) {}
    TouchResult result;
};

/**
 * Slides the paraboloid eps phi + (delta/2)|x - x0|^2 down onto `target` (the
 * upper envelope u+) over the closed ball B'_r(x0) and evaluates Lap(phi) at the
 * touching node. Ties go to the lexicographically smallest node.
 *
 * When `regularized` (u) is given, the hypothesis that phi touches
 * u + C3 eps^(gamma alpha) from above at x0 is checked first.
 */
inline TouchResult sliding_paraboloid_touch(const grid::GridFunction& target, const grid::GridFunction& phi,
                                            std::size_t x0, const ledger::ConstantLedger& L, double eps,
                                            const grid::GridFunction* regularized = nullptr) {
    if (!target.same_layout(phi)) throw std::invalid_argument("target and phi must share a grid");
    const Scales s = Scales::from(L, eps);
    const grid::Point c = phi.position(x0);

    const std::vector<std::size_t> scan_nodes = phi.nodes_in_ball(c, s.r);
    std::vector<char> in_scan(phi.size(), 0);
    for (std::size_t k : scan_nodes)
        if (!std::isnan(target[k])) in_scan[k] = 1;

    if (regularized != nullptr) {
        if (!regularized->same_layout(phi)) throw std::invalid_argument("u must share the grid of phi");
        const double lift = s.C3 * std::pow(eps, s.gamma_alpha);
        const double scale = std::max(1.0, grid::sup_abs(phi));
        const double slack = 1e-12 * scale;
        if (std::abs(phi[x0] - ((*regularized)[x0] + lift)) > slack)
            throw hypothesis_error("phi does not touch u + C3 eps^(gamma alpha) at x0");
        for (std::size_t k : scan_nodes)
            if (phi[k] < (*regularized)[k] + lift - slack)
                throw hypothesis_error("phi dips below u + C3 eps^(gamma alpha) in the scan region");
    }
    for (std::size_t k : scan_nodes) {
        if (!phi.is_interior(k)) continue;
        if (derivative_sizes(phi, k).max() > s.derivative_cap)
            throw hypothesis_error("phi violates the derivative cap eps^(-1/2)");
    }

    TouchResult res;
    res.threshold_holds = below_threshold(L, ledger::kTouch, eps);
    res.minimum = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t k = 0; k < phi.size(); ++k) {
        if (!in_scan[k]) continue;
        const grid::Point x = phi.position(k);
        const double d2 = (x[0] - c[0]) * (x[0] - c[0]) + (x[1] - c[1]) * (x[1] - c[1]);
        const double v = eps * phi[k] + 0.5 * s.delta * d2 - target[k];
        if (v < res.minimum) {
            res.minimum = v;
            res.x1 = k;
            found = true;
        }
    }
    if (!found) throw std::domain_error("scan ball contains no target samples");

    const auto [i, j] = phi.index(res.x1);
    bool edge = !phi.is_interior(res.x1);
    const int jd = phi.base_dim() == 2 ? 1 : 0;
    for (auto [di, dj] : {std::pair{1, 0}, std::pair{-1, 0}, std::pair{0, jd}, std::pair{0, -jd}}) {
        if (di == 0 && dj == 0) continue;
        if (!phi.contains(i + di, j + dj) || !in_scan[phi.flat(i + di, j + dj)]) edge = true;
    }
    if (edge) {
        res.passed = false;
        throw touch_contradiction("minimizer lies on the boundary of B'_r(x0)", res);
    }
    res.laplacianAtTouch = grid::laplacian_at(phi, res.x1);
    res.passed = res.laplacianAtTouch >= -s.laplace_cap;
    return res;
}

// ----------------------------------------------------------------- barriers

struct BarrierOptions {
    /// Reject eps above T_barrier instead of recording it.
    bool enforce_threshold = true;
    /// Reject derivative-cap violations on B'_{1/2 - r} instead of recording them.
    bool enforce_caps = true;
    RelaxationOptions relaxation{};
};

struct DerivativeCapReport {
    std::size_t nodes_checked = 0;
    double max_derivative = 0.0;
    double margin = std::numeric_limits<double>::infinity();
    std::size_t worst_node = 0;
    bool holds = true;
};

struct BarrierPair {
    grid::GridFunction wPlus;
    grid::GridFunction wMinus;
    double r = 0.0;
    double deltaSlide = 0.0;
    double derivativeCap = 0.0;
    double laplacian = 0.0;  ///< 2 C4 eps^(gamma alpha/2): Lap wPlus = -laplacian, Lap wMinus = +laplacian
    double lift = 0.0;       ///< 4 C5 r^(alpha/2)
    bool threshold_holds = false;
    /// Derivative caps for wPlus and wMinus on B'_{1/2 - r}.
    DerivativeCapReport caps_plus;
    DerivativeCapReport caps_minus;
    /// Split bounds: (w+)_1 on B'_{1/2-r}, (w+)_2 on B'_{1/2}, each against eps^(-1/2)/2.
    DerivativeCapReport split_harmonic;
    DerivativeCapReport split_quadratic;
};

/// Thrown by build_barriers when a hypothesis is enforced and fails.
struct barrier_error : hypothesis_error {
    barrier_error(const std::string& what, std::size_t node) : hypothesis_error(what), node(node) {}
    std::size_t node;
};

namespace detail {

inline DerivativeCapReport cap_scan(const grid::GridFunction& f, double radius, double cap) {
    DerivativeCapReport rep;
    for (std::size_t k : f.nodes_in_ball({0.0, 0.0}, radius)) {
        if (!f.is_interior(k)) continue;
        ++rep.nodes_checked;
        const double m = derivative_sizes(f, k).max();
        if (m > rep.max_derivative) rep.max_derivative = m;
        if (cap - m < rep.margin) {
            rep.margin = cap - m;
            rep.worst_node = k;
        }
    }
    rep.holds = rep.margin >= 0;
    return rep;
}

}  // namespace detail

/// Radius of the harmonic-replacement ball B'_{1/2}, relative to a unit base ball.
inline constexpr double kReplacementRadius = 0.5;

/**
 * Solves for w+ (Lap = -2 C4 eps^(ga/2), w+ = u + 4 C5 r^(alpha/2) on the ring)
 * and w- (the mirror problem) on B'_{1/2}. `u` may live on a larger ball.
 */
inline BarrierPair build_barriers(const grid::GridFunction& u, double eps, const ledger::ConstantLedger& L,
                                  const BarrierOptions& opt = {}) {
    const Scales s = Scales::from(L, eps);
    BarrierPair p;
    p.threshold_holds = below_threshold(L, ledger::kBarrier, eps);
    if (opt.enforce_threshold && !p.threshold_holds)
        throw barrier_error("eps exceeds the barrier threshold T_barrier", 0);
    p.r = s.r;
    p.deltaSlide = s.delta;
    p.derivativeCap = s.derivative_cap;
    p.laplacian = 2 * s.laplace_cap;
    p.lift = s.barrier_lift;

    const grid::GridFunction base = grid::restrict_to_ball(u, kReplacementRadius);
    grid::GridFunction up = base, down = base;
    for (std::size_t k = 0; k < base.size(); ++k) {
        if (!base.in_ball(k)) continue;
        up[k] = base[k] + p.lift;
        down[k] = base[k] - p.lift;
    }
    p.wPlus = solve_poisson_ball(-p.laplacian, up, opt.relaxation);
    p.wMinus = solve_poisson_ball(p.laplacian, down, opt.relaxation);

    const double inner = kReplacementRadius - s.r;
    if (inner > 0) {
        p.caps_plus = detail::cap_scan(p.wPlus, inner, s.derivative_cap);
        p.caps_minus = detail::cap_scan(p.wMinus, inner, s.derivative_cap);
    }
    // (w+)_2 = -C4 eps^(ga/2) (|x|^2 - 1/4) / (n-1) is explicit: its first and
    // second derivatives peak on the ring at 2 C4 eps^(ga/2) |x| / (n-1) and 2 C4 eps^(ga/2) / (n-1).
    grid::GridFunction quad = p.wPlus;
    const int d = base.base_dim();
    quad.fill([&](const grid::Point& x) { return -s.laplace_cap * ((x[0] * x[0] + x[1] * x[1]) - 0.25) / d; });
    grid::GridFunction harm = p.wPlus;
    for (std::size_t k = 0; k < harm.size(); ++k)
        if (harm.in_ball(k)) harm[k] = p.wPlus[k] - quad[k];
    const double half_cap = 0.5 * s.derivative_cap;
    {
        const double slope = 2 * s.laplace_cap * kReplacementRadius / d;
        const double curv = 2 * s.laplace_cap / d;
        const double m = std::max({slope, curv, curv});
        p.split_quadratic.nodes_checked = 1;
        p.split_quadratic.max_derivative = m;
        p.split_quadratic.margin = half_cap - m;
        p.split_quadratic.holds = p.split_quadratic.margin >= 0;
    }
    if (inner > 0) p.split_harmonic = detail::cap_scan(harm, inner, half_cap);

    if (opt.enforce_caps) {
        if (!p.caps_plus.holds) throw barrier_error("w+ violates the derivative cap", p.caps_plus.worst_node);
        if (!p.caps_minus.holds) throw barrier_error("w- violates the derivative cap", p.caps_minus.worst_node);
    }
    return p;
}

struct SeparationReport {
    double plus_margin = 0.0;   ///< min (w+ - u)
    double minus_margin = 0.0;  ///< min (u - w-)
    std::size_t offending_node = 0;
    bool verdict = false;
};

inline SeparationReport verify_barrier_separation(const grid::GridFunction& u, const BarrierPair& p) {
    const grid::GridFunction base = grid::restrict_to_ball(u, p.wPlus.radius());
    SeparationReport r;
    r.plus_margin = r.minus_margin = std::numeric_limits<double>::infinity();
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < base.size(); ++k) {
        if (!base.in_ball(k)) continue;
        const double a = p.wPlus[k] - base[k];
        const double b = base[k] - p.wMinus[k];
        r.plus_margin = std::min(r.plus_margin, a);
        r.minus_margin = std::min(r.minus_margin, b);
        if (std::min(a, b) < worst) {
            worst = std::min(a, b);
            r.offending_node = k;
        }
    }
    r.verdict = r.plus_margin > 0 && r.minus_margin > 0;
    return r;
}

// ---------------------------------------------------- harmonic closeness

struct ClosenessReport {
    double measured = 0.0;  ///< max |u - w| on B'_{1/2}
    double bound = 0.0;     ///< C6 eps^(gamma alpha^2 / 8)
    double margin = 0.0;
    /// max (w+ - w-) against the same bound, when barriers are supplied.
    std::optional<double> barrier_gap;
    std::optional<bool> ordering;  ///< w- <= w <= w+
    bool verdict = false;
};

/// Harmonic replacement on B'_{1/2} of u (which may live on a larger ball).
inline grid::GridFunction harmonic_replacement_half(const grid::GridFunction& u, const RelaxationOptions& opt = {}) {
    return harmonic_replacement(grid::restrict_to_ball(u, kReplacementRadius), opt);
}

inline ClosenessReport verify_harmonic_closeness(const grid::GridFunction& u, const grid::GridFunction& w, double eps,
                                                 const ledger::ConstantLedger& L,
                                                 const BarrierPair* barriers = nullptr) {
    const grid::GridFunction base = grid::restrict_to_ball(u, w.radius());
    const Scales s = Scales::from(L, eps);
    ClosenessReport r;
    for (std::size_t k = 0; k < w.size(); ++k)
        if (w.in_ball(k)) r.measured = std::max(r.measured, std::abs(base[k] - w[k]));
    r.bound = s.closeness_bound;
    r.margin = r.bound - r.measured;
    r.verdict = r.margin >= 0;
    if (barriers != nullptr) {
        double gap = 0.0;
        bool ordered = true;
        const double tol = 1e-12 * std::max(1.0, grid::sup_abs(barriers->wPlus));
        for (std::size_t k = 0; k < w.size(); ++k) {
            if (!w.in_ball(k)) continue;
            gap = std::max(gap, barriers->wPlus[k] - barriers->wMinus[k]);
            ordered = ordered && barriers->wMinus[k] <= w[k] + tol && w[k] <= barriers->wPlus[k] + tol;
        }
        r.barrier_gap = gap;
        r.ordering = ordered;
        r.verdict = r.verdict && gap <= r.bound && ordered;
    }
    return r;
}

// ------------------------------------------------------ derivative estimates

struct DerivativeEstimate {
    double gradient_measured = 0.0;  ///< max_i |D_i w(p)|
    double gradient_bound = 0.0;     ///< (2n / rho) sup_{B_rho(p)} |w|
    double hessian_measured = 0.0;   ///< max_ij |D_ij w(p)|
    double hessian_bound = 0.0;      ///< (4n / rho)^2 sup_{B_rho(p)} |w|
    bool verdict = false;
};

inline DerivativeEstimate harmonic_derivative_estimate(const grid::GridFunction& w, std::size_t p, double rho,
                                                       int n) {
    const grid::Point c = w.position(p);
    if (!(rho > 0) || grid::norm(c) + rho > w.radius() * (1 + 1e-12))
        throw std::domain_error("derivative estimate ball exits the domain");
    double sup = 0.0;
    for (std::size_t k : w.nodes_in_ball(c, rho)) sup = std::max(sup, std::abs(w[k]));
    const grid::Point g = grid::gradient(w, p);
    const grid::Matrix2 H = grid::hessian(w, p);
    DerivativeEstimate e;
    e.gradient_measured = std::max(std::abs(g[0]), std::abs(g[1]));
    e.hessian_measured = std::max({std::abs(H[0][0]), std::abs(H[0][1]), std::abs(H[1][1])});
    e.gradient_bound = 2.0 * n / rho * sup;
    e.hessian_bound = (4.0 * n / rho) * (4.0 * n / rho) * sup;
    e.verdict = e.gradient_measured <= e.gradient_bound * (1 + 1e-12) + 1e-15 &&
                e.hessian_measured <= e.hessian_bound * (1 + 1e-12) + 1e-15;
    return e;
}

}  // namespace flatcert::harmonic
