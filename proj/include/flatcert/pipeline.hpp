/**
 * @brief End-to-end orchestration: Harnack decay audit, one improvement-of-
 * flatness step with its certificate, and iteration across scales.
 */
#pragma once

#include "flatcert/envelope.hpp"
#include "flatcert/grid.hpp"
#include "flatcert/harmonic.hpp"
#include "flatcert/ledger.hpp"
#include "flatcert/mse.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace flatcert::pipeline {

/// A point of R^n (n <= 3); the last used component is x_n.
using Vec = std::array<double, 3>;
using Mat = std::array<Vec, 3>;

inline Vec to_vec(const SurfaceSample& s, int base_dim) {
    return base_dim == 2 ? Vec{s.base[0], s.base[1], s.height} : Vec{s.base[0], s.height, 0.0};
}

inline SurfaceSample from_vec(const Vec& v, int base_dim) {
    return base_dim == 2 ? SurfaceSample{{v[0], v[1]}, v[2]} : SurfaceSample{{v[0], 0.0}, v[1]};
}

inline double dot(const Vec& a, const Vec& b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline Mat identity() { return {Vec{1, 0, 0}, Vec{0, 1, 0}, Vec{0, 0, 1}}; }

inline Vec apply(const Mat& M, const Vec& x, int n) {
    Vec y{0, 0, 0};
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) y[i] += M[i][j] * x[j];
    return y;
}

inline Mat multiply(const Mat& A, const Mat& B, int n) {
    Mat C{};
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) C[i][j] += A[i][k] * B[k][j];
    return C;
}

inline Mat transpose(const Mat& A) {
    Mat T{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) T[i][j] = A[j][i];
    return T;
}

/// Rotation taking the unit vector nu to e_n (requires nu_n > -1).
inline Mat rotation_to_en(const Vec& nu, int n) {
    if (!(nu[n - 1] > -1.0)) throw std::domain_error("rotation undefined for nu = -e_n");
    Vec u = nu;
    u[n - 1] += 1.0;
    const double c = 1.0 / (1.0 + nu[n - 1]);
    Mat R{};
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            R[i][j] = (i == j ? 1.0 : 0.0) - c * u[i] * u[j];
            if (i == n - 1) R[i][j] += 2.0 * nu[j];
        }
    }
    return R;
}

// ------------------------------------------------------------------ presets

/// Smooth non-affine boundary profile g(x') = a (x1^2 - x2^2).
inline double bump_profile(const grid::Point& x, double amplitude) {
    return amplitude * (x[0] * x[0] - x[1] * x[1]);
}

inline constexpr double kDefaultBumpAmplitude = 0.25;

/// Minimal graph over the unit base ball with boundary data eps * g, shifted so f(0) = 0.
inline grid::GridFunction manufacture_bump(double eps, int nodes, int base_dim = 2,
                                           double amplitude = kDefaultBumpAmplitude) {
    grid::GridFunction b = grid::GridFunction::with_nodes(base_dim, 1.0, nodes);
    b.fill([&](const grid::Point& x) { return eps * bump_profile(x, amplitude); });
    grid::GridFunction f = mse::solve_mse(b).u;
    const double f0 = f[f.origin()];
    for (std::size_t k = 0; k < f.size(); ++k)
        if (f.in_ball(k)) f[k] -= f0;
    return f;
}

inline std::size_t nearest_sample(const std::vector<SurfaceSample>& s, const Vec& p, int base_dim) {
    if (s.empty()) throw std::domain_error("no surface samples");
    const int n = base_dim + 1;
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.size(); ++i) {
        const Vec v = to_vec(s[i], base_dim);
        double d = 0.0;
        for (int j = 0; j < n; ++j) d += (v[j] - p[j]) * (v[j] - p[j]);
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    return best;
}

// ------------------------------------------------------------------ decay audit

struct DecayRow {
    int m = 0;
    double radius = 0.0;
    double measured = 0.0;
    double bound = 0.0;
    std::size_t count = 0;
    /// The ball holds no sample besides the center, so the row carries no information.
    bool truncated = false;
    [[nodiscard]] bool passes() const { return truncated || measured <= bound; }
};

struct DecayAudit {
    Vec center{0, 0, 0};
    int n = 3;
    double eps = 0.0;
    double M = 0.0;
    long long Mtilde = 0;
    /// eps <= eps1/8, the range of the decay estimate. Rows are audited either way.
    bool hypothesis_holds = false;
    bool scale_bound_holds = false;
    std::vector<DecayRow> rows;
    bool verdict = false;
};

/**
 * For m = 3..max(Mtilde, 3), measures the vertical half-width of the samples in
 * B_{2^-m}(center) about the center and compares it with 2 eps (1-eta)^(m-2).
 */
inline DecayAudit harnack_decay_audit(const std::vector<SurfaceSample>& samples, const SurfaceSample& center,
                                      double eps, const ledger::ConstantLedger& L, int base_dim = 2) {
    const int n = base_dim + 1;
    if (L.params.n != n) throw std::invalid_argument("ledger dimension does not match the samples");
    if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
    DecayAudit a;
    a.n = n;
    a.eps = eps;
    a.center = to_vec(center, base_dim);
    double cn = 0.0;
    for (int j = 0; j < n; ++j) cn += a.center[j] * a.center[j];
    if (cn > 0.75 * 0.75 * (1 + 1e-12)) throw hypothesis_error("audit center lies outside B_{3/4}");
    for (const auto& s : samples) {
        const Vec v = to_vec(s, base_dim);
        if (dot(v, v, n) <= 1.0 && std::abs(v[n - 1]) > eps * (1 + 1e-12))
            throw hypothesis_error("sample violates the slab |x_n| <= eps in B_1");
    }
    {
        ledger::PrecisionScope scope(L.digits);
        const Real e(eps);
        const ledger::HarnackDepth d = ledger::harnack_depth_unchecked(e, L);
        a.M = static_cast<double>(d.M);
        a.Mtilde = d.Mtilde;
        a.scale_bound_holds = d.scale_bound_holds;
        a.hypothesis_holds = ledger::log2_of(e) <= L.threshold(ledger::kHarnack).log2;
    }
    const double alpha = L.alpha_d();
    const long long top = std::max<long long>(a.Mtilde, 3);
    a.verdict = true;
    for (long long m = 3; m <= top; ++m) {
        DecayRow row;
        row.m = static_cast<int>(m);
        row.radius = std::ldexp(1.0, -row.m);
        row.bound = 2.0 * eps * std::exp2(-alpha * static_cast<double>(m - 2));
        const double r2 = row.radius * row.radius * (1 + 1e-12);
        for (const auto& s : samples) {
            const Vec v = to_vec(s, base_dim);
            double d2 = 0.0;
            for (int j = 0; j < n; ++j) d2 += (v[j] - a.center[j]) * (v[j] - a.center[j]);
            if (d2 > r2) continue;
            ++row.count;
            row.measured = std::max(row.measured, std::abs(v[n - 1] - a.center[n - 1]));
        }
        row.truncated = row.count < 2;
        a.verdict = a.verdict && row.passes();
        a.rows.push_back(row);
    }
    return a;
}

/// Default audit centers: the samples nearest to 0 and to the points +-1/2 e_i of the base.
inline std::vector<SurfaceSample> default_audit_centers(const std::vector<SurfaceSample>& samples, int base_dim) {
    std::vector<Vec> targets{{0, 0, 0}, {0.5, 0, 0}, {-0.5, 0, 0}};
    if (base_dim == 2) {
        targets.push_back({0, 0.5, 0});
        targets.push_back({0, -0.5, 0});
    }
    std::vector<SurfaceSample> out;
    std::vector<std::size_t> used;
    for (const Vec& t : targets) {
        const std::size_t k = nearest_sample(samples, t, base_dim);
        if (std::find(used.begin(), used.end(), k) != used.end()) continue;
        used.push_back(k);
        out.push_back(samples[k]);
    }
    return out;
}

struct SurfaceAudit {
    std::vector<DecayAudit> audits;
    envelope::ModulusCheck modulus;
    bool verdict = false;
};

/// Decay audits at several centers plus the pair-scan check of the Hoelder-type modulus on B'_{3/4}.
inline SurfaceAudit audit_surface(const std::vector<SurfaceSample>& samples, double eps,
                                  const ledger::ConstantLedger& L, const grid::GridFunction& layout,
                                  std::vector<SurfaceSample> centers = {}) {
    const int d = layout.base_dim();
    if (centers.empty()) centers = default_audit_centers(samples, d);
    SurfaceAudit s;
    s.verdict = true;
    for (const auto& c : centers) {
        s.audits.push_back(harnack_decay_audit(samples, c, eps, L, d));
        s.verdict = s.verdict && s.audits.back().verdict;
    }
    const envelope::MultiGraph mg = envelope::extract_multigraph(samples, eps, layout);
    s.modulus = envelope::verify_harnack_modulus(mg, L);
    s.verdict = s.verdict && s.modulus.verdict;
    return s;
}

// ------------------------------------------------------------------ certificate

struct Stage {
    std::string name;
    bool verdict = false;
    /// Signed slack of the stage's inequality; absent when the inequality is vacuous.
    std::optional<double> margin;
    std::string detail;
};

struct FlatnessCertificate {
    int n = 3;
    double eps = 0.0;
    /// Flatness after the vertical normalization (eps + |shift|), used for stretching.
    double eps_effective = 0.0;
    double shift = 0.0;
    Vec nu{0, 0, 1};
    grid::Point grad_w0{0.0, 0.0};
    double r0 = 0.0;
    double taylorMargin = std::numeric_limits<double>::quiet_NaN();
    double closenessMargin = std::numeric_limits<double>::quiet_NaN();
    double inclusionAnalyticMargin = std::numeric_limits<double>::quiet_NaN();
    double inclusionEmpiricalMargin = std::numeric_limits<double>::quiet_NaN();
    double empiricalRadius = 0.125;
    /// sup |x . nu| / (eps rho) over samples in B_rho; at most 1/2 when the step passes.
    double empiricalRatio = std::numeric_limits<double>::quiet_NaN();
    std::size_t empiricalSamples = 0;
    /// max |u - w| on B'_{1/2}.
    double closenessMeasured = std::numeric_limits<double>::quiet_NaN();
    /// Whether eps lies below eps0 and below T_barrier; reported only.
    bool eps0_holds = false;
    bool barrier_threshold_holds = false;
    std::string ledgerRef;
    std::vector<Stage> stages;
    std::string failed_stage;
    bool verdict = false;
};

/// Returns surface samples near the origin on a finer grid, in the caller's frame.
using Refiner = std::function<std::vector<SurfaceSample>(double radius)>;

struct StepOptions {
    int nodes = 129;
    int base_dim = 2;
    double empirical_radius = 0.125;
    Refiner refiner;
};

inline std::string ledger_ref(const ledger::ConstantLedger& L) {
    ledger::PrecisionScope scope(L.digits);
    std::ostringstream os;
    os << "n=" << L.params.n << ";eps1=" << L.params.eps1.str(17) << ";alpha=" << L.alpha.str(17)
       << ";log2eps0=" << L.eps0.log2.str(17);
    return os.str();
}

/// Sum of the three terms of the triangle inequality at radius r0 against r0/2.
inline double analytic_inclusion_margin(double r0, double a_minus_u, double closeness, double taylor_remainder) {
    return r0 / 2 - (a_minus_u + 2 * closeness + taylor_remainder);
}

/// Taylor remainder bound on B'_{2 r0}: (1/2)(2 r0)^2 d max_ij |D_ij w| over interior nodes of B'_{1/4}.
inline double taylor_remainder(const grid::GridFunction& w, double r0) {
    double m = 0.0;
    for (std::size_t k : w.nodes_in_ball({0.0, 0.0}, 0.25)) {
        if (!w.is_interior(k)) continue;
        const grid::Matrix2 H = grid::hessian(w, k);
        m = std::max({m, std::abs(H[0][0]), std::abs(H[0][1]), std::abs(H[1][1])});
    }
    return 2.0 * w.base_dim() * r0 * r0 * m;
}

namespace detail {

inline std::string fmt_margin(double v) { return "margin " + shortest(v); }

}  // namespace detail

/**
 * One improvement-of-flatness step. Stages run in order and the first failing
 * one stops the step; the certificate then names it in failed_stage.
 */
inline FlatnessCertificate improvement_step(const std::vector<SurfaceSample>& samples, double eps,
                                            const ledger::ConstantLedger& L, const StepOptions& opt = {}) {
    const int d = opt.base_dim;
    const int n = d + 1;
    if (L.params.n != n) throw std::invalid_argument("ledger dimension does not match the base dimension");
    FlatnessCertificate c;
    c.n = n;
    c.eps = eps;
    c.empiricalRadius = opt.empirical_radius;
    c.ledgerRef = ledger_ref(L);
    c.r0 = L.r0.value();
    {
        ledger::PrecisionScope scope(L.digits);
        c.eps0_holds = ledger::log2_of(Real(eps)) <= L.eps0.log2;
    }

    auto fail = [&](const std::string& name, std::optional<double> margin, const std::string& detail) {
        c.stages.push_back({name, false, margin, detail});
        c.failed_stage = name;
        c.verdict = false;
        return c;
    };
    auto pass = [&](const std::string& name, std::optional<double> margin, const std::string& detail = {}) {
        c.stages.push_back({name, true, margin, detail});
    };

    const grid::GridFunction layout = grid::GridFunction::with_nodes(d, 1.0, opt.nodes);
    envelope::MultiGraph mg;
    try {
        mg = envelope::extract_multigraph(samples, eps, layout);
    } catch (const hypothesis_error& e) {
        return fail("multigraph", std::nullopt, e.what());
    }
    c.shift = mg.shift;
    c.eps_effective = mg.eps;
    pass("multigraph", std::nullopt);
    const double e = mg.eps;

    const envelope::InfConvolution ic = envelope::inf_convolve(mg, L);
    {
        const double m = ic.modulus - ic.seminorm.seminorm;
        if (!ic.origin_zero) return fail("regularization", m, "u(0) = 0 fails");
        if (!ic.seminorm_ok) return fail("regularization", m, "[u]_alpha <= 2^(4+5 alpha) fails, " + detail::fmt_margin(m));
        pass("regularization", m);
    }

    const envelope::SandwichReport sw = envelope::verify_sandwich(ic.u, mg, L);
    {
        const double m = std::min({sw.lower_margin, sw.upper_margin, sw.a_minus_u_bound - sw.a_minus_u,
                                   sw.holder_norm_bound - sw.holder_norm});
        if (!sw.verdict) {
            std::string which = sw.lower_margin < 0   ? "u- >= eps u"
                                : sw.upper_margin < 0 ? "u+ <= eps u + C3 eps^(1+gamma alpha)"
                                : sw.a_minus_u > sw.a_minus_u_bound ? "sup|A - u| <= C3 eps^(gamma alpha)"
                                                                    : "||u||_alpha <= 2^(6+5 alpha)";
            return fail("sandwich", m, which + " fails, " + detail::fmt_margin(m));
        }
        pass("sandwich", m);
    }

    harmonic::BarrierOptions bo;
    bo.enforce_threshold = false;
    bo.enforce_caps = false;
    const harmonic::BarrierPair bp = harmonic::build_barriers(ic.u, e, L, bo);
    c.barrier_threshold_holds = bp.threshold_holds;
    {
        const bool vacuous = bp.caps_plus.nodes_checked == 0 && bp.caps_minus.nodes_checked == 0;
        if (vacuous) {
            pass("barriers", std::nullopt, "derivative caps vacuous: B'_(1/2-r) holds no interior node");
        } else {
            const double m = std::min(bp.caps_plus.margin, bp.caps_minus.margin);
            if (m < 0) return fail("barriers", m, "derivative cap eps^(-1/2) fails, " + detail::fmt_margin(m));
            pass("barriers", m);
        }
    }

    const harmonic::SeparationReport sep = harmonic::verify_barrier_separation(ic.u, bp);
    {
        const double m = std::min(sep.plus_margin, sep.minus_margin);
        if (!sep.verdict) return fail("separation", m, "w- < u < w+ fails, " + detail::fmt_margin(m));
        pass("separation", m);
    }

    const grid::GridFunction w = harmonic::harmonic_replacement_half(ic.u);
    const harmonic::ClosenessReport cl = harmonic::verify_harmonic_closeness(ic.u, w, e, L, &bp);
    c.closenessMeasured = cl.measured;
    c.closenessMargin = cl.margin;
    if (!cl.verdict) {
        std::string which = cl.margin < 0                ? "max|u - w| <= C6 eps^(gamma alpha^2/8)"
                            : !cl.ordering.value_or(true) ? "w- <= w <= w+"
                                                          : "max(w+ - w-) <= C6 eps^(gamma alpha^2/8)";
        return fail("closeness", cl.margin, which + " fails, " + detail::fmt_margin(cl.margin));
    }
    pass("closeness", cl.margin);

    c.grad_w0 = grid::gradient(w, w.origin());
    {
        Vec v{0, 0, 0};
        for (int i = 0; i < d; ++i) v[i] = -e * c.grad_w0[i];
        v[n - 1] = 1.0;
        const double nv = std::sqrt(dot(v, v, n));
        for (int i = 0; i < n; ++i) c.nu[i] = v[i] / nv + 0.0;
    }

    const double rem = taylor_remainder(w, c.r0);
    c.taylorMargin = c.r0 / 8 - rem;
    if (c.taylorMargin < 0)
        return fail("taylor", c.taylorMargin, "Taylor remainder <= r0/8 fails, " + detail::fmt_margin(c.taylorMargin));
    pass("taylor", c.taylorMargin);

    c.inclusionAnalyticMargin = analytic_inclusion_margin(c.r0, sw.a_minus_u, cl.measured, rem);
    if (c.inclusionAnalyticMargin < 0)
        return fail("inclusionAnalytic", c.inclusionAnalyticMargin,
                    "|x . nu| <= (eps/2) r0 on B_r0 fails, " + detail::fmt_margin(c.inclusionAnalyticMargin));
    pass("inclusionAnalytic", c.inclusionAnalyticMargin);

    const double rho = opt.empirical_radius;
    const std::vector<SurfaceSample> fine = opt.refiner ? opt.refiner(rho) : samples;
    double sup = 0.0;
    std::size_t count = 0;
    for (const auto& s : fine) {
        Vec v = to_vec(s, d);
        v[n - 1] += mg.shift;
        if (dot(v, v, n) > rho * rho * (1 + 1e-12)) continue;
        ++count;
        sup = std::max(sup, std::abs(dot(v, c.nu, n)));
    }
    c.empiricalSamples = count;
    if (count < 2) return fail("inclusionEmpirical", std::nullopt, "fewer than two samples in B_rho");
    c.empiricalRatio = sup / (e * rho);
    c.inclusionEmpiricalMargin = 0.5 * e * rho - sup;
    if (c.inclusionEmpiricalMargin < 0)
        return fail("inclusionEmpirical", c.inclusionEmpiricalMargin,
                    "|x . nu| <= (eps/2) rho on B_rho fails, " + detail::fmt_margin(c.inclusionEmpiricalMargin));
    pass("inclusionEmpirical", c.inclusionEmpiricalMargin);
    c.verdict = true;
    return c;
}

// ------------------------------------------------------------------ iteration

/// A surface presented in the current frame.
class SurfaceSource {
public:
    virtual ~SurfaceSource() = default;
    [[nodiscard]] virtual std::vector<SurfaceSample> samples() const = 0;
    /// Finer samples near the origin; the default returns samples().
    [[nodiscard]] virtual std::vector<SurfaceSample> refined(double /*radius*/) const { return samples(); }
    /// The same surface in the frame x -> R (x - center) / scale.
    [[nodiscard]] virtual std::unique_ptr<SurfaceSource> transformed(const Mat& R, const Vec& center,
                                                                     double scale) const = 0;
    [[nodiscard]] virtual int base_dim() const = 0;
};

/// Raw point samples; transforms map the points and keep those in the unit ball.
class SampleSource : public SurfaceSource {
public:
    SampleSource(std::vector<SurfaceSample> s, int base_dim) : s_(std::move(s)), d_(base_dim) {}
    [[nodiscard]] std::vector<SurfaceSample> samples() const override { return s_; }
    [[nodiscard]] int base_dim() const override { return d_; }
    [[nodiscard]] std::unique_ptr<SurfaceSource> transformed(const Mat& R, const Vec& center,
                                                             double scale) const override {
        const int n = d_ + 1;
        std::vector<SurfaceSample> out;
        for (const auto& s : s_) {
            Vec v = to_vec(s, d_);
            for (int i = 0; i < n; ++i) v[i] -= center[i];
            Vec y = apply(R, v, n);
            for (int i = 0; i < n; ++i) y[i] /= scale;
            if (dot(y, y, n) <= 1.0 + 1e-12) out.push_back(from_vec(y, d_));
        }
        return std::make_unique<SampleSource>(std::move(out), d_);
    }

private:
    std::vector<SurfaceSample> s_;
    int d_;
};

/**
 * A minimal graph over the unit base ball. Transforms resample the boundary
 * ring of the new frame from the current field and re-solve the minimal
 * surface equation, which is invariant under rigid motions and dilations.
 */
class GraphSource : public SurfaceSource {
public:
    explicit GraphSource(grid::GridFunction f, int refine_factor = 4) : f_(std::move(f)), factor_(refine_factor) {}
    [[nodiscard]] const grid::GridFunction& field() const { return f_; }
    [[nodiscard]] int base_dim() const override { return f_.base_dim(); }
    [[nodiscard]] std::vector<SurfaceSample> samples() const override { return samples_from_graph(f_); }
    [[nodiscard]] std::vector<SurfaceSample> refined(double radius) const override {
        return samples_from_graph(mse::refine_solution(f_, std::min(2 * radius, f_.radius()), factor_).u);
    }

    /// Height t with center + scale R^T (y, t) on the graph, by a secant iteration.
    [[nodiscard]] double height_in_frame(const grid::Point& y, const Mat& Rt, const Vec& center, double scale) const {
        const int d = f_.base_dim();
        const int n = d + 1;
        auto residual = [&](double t) {
            Vec local{0, 0, 0};
            for (int i = 0; i < d; ++i) local[i] = y[i];
            local[n - 1] = t;
            Vec p = apply(Rt, local, n);
            for (int i = 0; i < n; ++i) p[i] = center[i] + scale * p[i];
            const grid::Point base = d == 2 ? grid::Point{p[0], p[1]} : grid::Point{p[0], 0.0};
            return p[n - 1] - grid::interpolate(f_, base);
        };
        double t0 = 0.0, t1 = 1e-3;
        double r0 = residual(t0), r1 = residual(t1);
        for (int it = 0; it < 60 && r1 != 0.0; ++it) {
            const double t2 = t1 - r1 * (t1 - t0) / (r1 - r0);
            t0 = t1;
            r0 = r1;
            t1 = t2;
            r1 = residual(t1);
            if (std::abs(t1 - t0) <= 1e-15 * std::max(1.0, std::abs(t1))) break;
        }
        if (!std::isfinite(t1)) throw convergence_error("frame resampling did not converge", r1);
        return t1;
    }

    [[nodiscard]] std::unique_ptr<SurfaceSource> transformed(const Mat& R, const Vec& center,
                                                             double scale) const override {
        const Mat Rt = transpose(R);
        grid::GridFunction b(f_.base_dim(), f_.radius(), f_.h());
        for (std::size_t k = 0; k < b.size(); ++k)
            if (b.kind(k) == grid::NodeKind::boundary) b[k] = height_in_frame(b.position(k), Rt, center, scale);
        return std::make_unique<GraphSource>(mse::solve_mse(b).u, factor_);
    }

private:
    grid::GridFunction f_;
    int factor_;
};

struct IterationResult {
    std::vector<FlatnessCertificate> certificates;
    /// Slab parameters eps_k = eps / 2^k fed to each step.
    std::vector<double> eps_sequence;
    /// sup |x_n| over samples in the unit ball of frame k.
    std::vector<double> measured_flatness;
    /// Certificate directions expressed in the original frame.
    std::vector<Vec> nu_global;
    bool completed = false;
};

/**
 * Runs up to `steps` improvement steps, re-centering at the sample nearest the
 * origin and rescaling by the empirical radius after each passing step.
 */
inline IterationResult iterate_flatness(const SurfaceSource& source, double eps, int steps,
                                        const ledger::ConstantLedger& L, StepOptions opt = {}) {
    const int d = source.base_dim();
    const int n = d + 1;
    opt.base_dim = d;
    IterationResult out;
    std::unique_ptr<SurfaceSource> owned;
    const SurfaceSource* cur = &source;
    Mat to_global = identity();  // maps frame-k vectors to original-frame vectors
    double e = eps;
    for (int k = 0; k < steps; ++k) {
        const std::vector<SurfaceSample> s = cur->samples();
        double flat = 0.0;
        for (const auto& p : s) {
            const Vec v = to_vec(p, d);
            if (dot(v, v, n) <= 1.0 + 1e-12) flat = std::max(flat, std::abs(v[n - 1]));
        }
        out.eps_sequence.push_back(e);
        out.measured_flatness.push_back(flat);
        opt.refiner = [cur](double r) { return cur->refined(r); };
        FlatnessCertificate cert = improvement_step(s, e, L, opt);
        const bool ok = cert.verdict;
        if (ok) out.nu_global.push_back(apply(to_global, cert.nu, n));
        const Vec nu = cert.nu;
        out.certificates.push_back(std::move(cert));
        if (!ok) return out;
        if (k + 1 == steps) break;
        const Vec center = to_vec(s[nearest_sample(s, Vec{0, 0, 0}, d)], d);
        const Mat R = rotation_to_en(nu, n);
        to_global = multiply(to_global, transpose(R), n);
        owned = cur->transformed(R, center, opt.empirical_radius);
        cur = owned.get();
        e /= 2;
    }
    out.completed = true;
    return out;
}

}  // namespace flatcert::pipeline
