/**
 * @brief Explicit constant chain of the constructive improvement-of-flatness
 * argument, derived from the Harnack parameters (n, eps1, eta).
 *
 * Every constant is stored by its base-2 logarithm at high precision because
 * eps0 is far below the smallest representable double for any realistic input.
 */
#pragma once

#include "flatcert/format.hpp"

#include <boost/multiprecision/mpfr.hpp>
#include <boost/rational.hpp>

#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace flatcert {

using Real = boost::multiprecision::mpfr_float;
using Rational = boost::rational<long long>;

namespace ledger {

inline constexpr unsigned default_digits = 100;

/// Digit count for ledger arithmetic; FLATCERT_PRECISION overrides the default.
inline unsigned working_digits() {
    if (const char* env = std::getenv("FLATCERT_PRECISION"); env != nullptr && *env != '\0') {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 30 && v <= 100000) return static_cast<unsigned>(v);
        throw std::invalid_argument("FLATCERT_PRECISION must be an integer in [30, 100000]");
    }
    return default_digits;
}

/// Sets the mpfr default precision for the lifetime of the guard.
class PrecisionScope {
public:
    explicit PrecisionScope(unsigned digits) : saved_(Real::default_precision()) {
        Real::default_precision(digits);
    }
    ~PrecisionScope() { Real::default_precision(saved_); }
    PrecisionScope(const PrecisionScope&) = delete;
    PrecisionScope& operator=(const PrecisionScope&) = delete;

private:
    unsigned saved_;
};

inline Real to_real(const Rational& q) { return Real(q.numerator()) / Real(q.denominator()); }

inline Real log2_of(const Real& x) { return log(x) / log(Real(2)); }

/// A positive quantity represented as 2^log2.
struct LogValue {
    Real log2;

    static LogValue from_value(const Real& x) {
        if (x <= 0) throw std::domain_error("LogValue requires a positive value");
        return {log2_of(x)};
    }
    static LogValue from_value(double x) { return from_value(Real(x)); }

    /// Value as a double; nullopt when it underflows or overflows.
    [[nodiscard]] std::optional<double> approx() const {
        const double l = static_cast<double>(log2);
        if (!(l > -1074.0) || !(l < 1024.0)) return std::nullopt;
        const double v = static_cast<double>(boost::multiprecision::pow(Real(2), log2));
        if (v == 0.0 || !std::isfinite(v)) return std::nullopt;
        return v;
    }
    /// Value as a double, flushing underflow to 0.
    [[nodiscard]] double value() const { return approx().value_or(static_cast<double>(log2) < 0 ? 0.0 : std::numeric_limits<double>::infinity()); }

    friend LogValue operator*(const LogValue& a, const LogValue& b) { return {a.log2 + b.log2}; }
    friend LogValue operator/(const LogValue& a, const LogValue& b) { return {a.log2 - b.log2}; }
    [[nodiscard]] LogValue pow(const Real& e) const { return {log2 * e}; }
    friend bool operator<(const LogValue& a, const LogValue& b) { return a.log2 < b.log2; }
    friend bool operator<=(const LogValue& a, const LogValue& b) { return a.log2 <= b.log2; }
};

/// The Harnack parameters consumed by the whole chain.
struct HarnackParams {
    int n = 2;
    Real eps1;
    Real eta;
    /// Set when alpha = -log2(1 - eta) is known to be this rational exactly.
    std::optional<Rational> alpha_exact;

    static void validate(int n, const Real& eps1, const Real& eta) {
        if (n < 2) throw std::invalid_argument("dimension n must be >= 2");
        if (!(eps1 > 0) || eps1 > Real(1) / 4) throw std::invalid_argument("eps1 must lie in (0, 1/4]");
        if (!(eta > 0) || eta > Real(1) / 5) throw std::invalid_argument("eta must lie in (0, 1/5]");
    }

    static HarnackParams make(int n, const Real& eps1, const Real& eta) {
        validate(n, eps1, eta);
        const Real alpha = -log2_of(Real(1) - eta);
        if (alpha >= 1) throw std::invalid_argument("alpha = -log2(1 - eta) must be < 1");
        return HarnackParams{n, eps1, eta, std::nullopt};
    }

    /// Doubles are read through their shortest decimal form, so 0.2 means 1/5.
    static HarnackParams make(int n, double eps1, double eta) {
        PrecisionScope scope(working_digits());
        return make(n, Real(shortest(eps1)), Real(shortest(eta)));
    }

    /// Parameters whose eta is chosen so that alpha is exactly the given rational.
    static HarnackParams with_alpha(int n, const Real& eps1, Rational alpha) {
        if (!(alpha > Rational(0)) || !(alpha < Rational(1))) throw std::invalid_argument("alpha must lie in (0, 1)");
        PrecisionScope scope(working_digits());
        const Real eta = Real(1) - pow(Real(2), -to_real(alpha));
        validate(n, eps1, eta);
        return HarnackParams{n, eps1, eta, alpha};
    }

    static HarnackParams with_alpha(int n, double eps1, Rational alpha) {
        PrecisionScope scope(working_digits());
        return with_alpha(n, Real(shortest(eps1)), alpha);
    }

    [[nodiscard]] Real alpha() const { return alpha_exact ? to_real(*alpha_exact) : -log2_of(Real(1) - eta); }
};

struct NamedThreshold {
    std::string name;
    LogValue value;
};

struct ConstantLedger {
    HarnackParams params;
    unsigned digits = default_digits;

    Real alpha;
    Real gamma;
    std::optional<Rational> alpha_exact;
    std::optional<Rational> gamma_exact;
    /// 8 / (gamma alpha^2), the outer exponent of eps0.
    Real eps0_exponent;
    std::optional<Rational> eps0_exponent_exact;

    LogValue C1, C2, C3, C4, C5, C6;
    LogValue r0;
    LogValue eps0;
    /// eps0 evaluated through its closed form, kept for the identity check.
    LogValue eps0_closed_form;
    std::vector<NamedThreshold> thresholds;

    bool alpha_warning = false;
    /// |log2 eps0 - log2 closed form| / |log2 eps0|.
    Real closed_form_rel_error;
    /// C2 <= eps1^-gamma; guaranteed only when alpha <= 1/4.
    bool c2_bound_holds = false;
    /// gamma alpha / 4 <= 1/12; guaranteed only when alpha <= 1/4.
    bool gamma_alpha_bound_holds = false;

    [[nodiscard]] const LogValue& threshold(std::string_view name) const {
        for (const auto& t : thresholds)
            if (t.name == name) return t.value;
        throw std::out_of_range("unknown threshold: " + std::string(name));
    }
    [[nodiscard]] LogValue& threshold(std::string_view name) {
        return const_cast<LogValue&>(std::as_const(*this).threshold(name));
    }

    // Double shortcuts used by the grid-level pipeline.
    [[nodiscard]] double alpha_d() const { return static_cast<double>(alpha); }
    [[nodiscard]] double gamma_d() const { return static_cast<double>(gamma); }
    [[nodiscard]] double gamma_alpha_d() const { return static_cast<double>(gamma * alpha); }
};

inline constexpr std::string_view kHarnack = "T_harnack";
inline constexpr std::string_view kTouch = "T_touch";
inline constexpr std::string_view kGrad = "T_grad";
inline constexpr std::string_view kBarrier = "T_barrier";
inline constexpr std::string_view kFinal = "T_final";

/// Closed form (eps1^(gamma alpha) / (2^(33+5 alpha) n^3))^(8/(gamma alpha^2)) in log2.
inline Real eps0_closed_form_log2(int n, const Real& log2_eps1, const Real& alpha, const Real& gamma,
                                  const Real& outer) {
    return outer * (gamma * alpha * log2_eps1 - 33 - 5 * alpha - 3 * log2_of(Real(n)));
}

inline ConstantLedger derive_ledger(const HarnackParams& params, unsigned digits = working_digits()) {
    PrecisionScope scope(digits);
    HarnackParams::validate(params.n, params.eps1, params.eta);

    ConstantLedger L;
    L.params = params;
    L.digits = digits;

    if (params.alpha_exact) {
        const Rational a = *params.alpha_exact;
        L.alpha_exact = a;
        L.gamma_exact = Rational(1) / (Rational(1) - a);
        L.eps0_exponent_exact = Rational(8) / (*L.gamma_exact * a * a);
        L.alpha = to_real(a);
        L.gamma = to_real(*L.gamma_exact);
        L.eps0_exponent = to_real(*L.eps0_exponent_exact);
    } else {
        L.alpha = -log2_of(Real(1) - params.eta);
        L.gamma = Real(1) / (Real(1) - L.alpha);
        L.eps0_exponent = Real(8) / (L.gamma * L.alpha * L.alpha);
    }
    if (L.alpha >= 1) throw std::invalid_argument("alpha = -log2(1 - eta) must be < 1");

    const Real& a = L.alpha;
    const Real& g = L.gamma;
    const Real ga = g * a;
    const Real le1 = log2_of(params.eps1);
    const Real ln = log2_of(Real(params.n));

    L.C1 = {4 + 4 * a};
    L.C2 = {3 * a / (1 - a) - 1 - g * le1};
    L.C3 = {4 + 5 * a - ga * le1};
    L.C4 = {8 + 5 * a + ln - ga * le1};
    L.C5 = {10 + 5 * a + ln - ga * le1 / 2};
    L.C6 = {14 + 5 * a + ln - ga * le1};
    L.r0 = {-16 - 2 * ln};
    L.eps0 = {L.eps0_exponent * (L.r0.log2 - 3 - L.C6.log2)};
    L.eps0_closed_form = {eps0_closed_form_log2(params.n, le1, a, g, L.eps0_exponent)};

    const Real touch_inner = -6 - 5 * a + ga * le1;
    L.thresholds = {
        {std::string(kHarnack), {le1 - 3}},
        {std::string(kTouch), {touch_inner * 2 / (1 + ga)}},
        {std::string(kGrad), {touch_inner * 4 / (2 + 3 * ga)}},
        {std::string(kBarrier), {(-18 - 5 * a - 5 * ln + ga * le1) * 2 / (1 - ga)}},
        {std::string(kFinal), {(L.r0.log2 - 3 - L.C3.log2) / ga}},
    };

    // Rounding slack so that eta = 1 - 2^(-1/4) does not trip the warning.
    L.alpha_warning = a > Real(1) / 4 + pow(Real(10), 10 - static_cast<int>(L.digits));
    L.closed_form_rel_error = abs(L.eps0.log2 - L.eps0_closed_form.log2) / abs(L.eps0.log2);
    const Real slack = pow(Real(10), 10 - static_cast<int>(digits));
    L.c2_bound_holds = L.C2.log2 <= -g * le1 + slack * (1 + abs(g * le1));
    L.gamma_alpha_bound_holds = ga / 4 <= Real(1) / 12 + slack;

    const Real identity_tol = pow(Real(10), -static_cast<int>(digits) / 2);
    if (L.closed_form_rel_error > identity_tol)
        throw std::logic_error("eps0 does not match its closed form at working precision");
    if (!L.alpha_warning && (!L.c2_bound_holds || !L.gamma_alpha_bound_holds))
        throw std::logic_error("alpha <= 1/4 but a derived alpha bound fails");
    return L;
}

struct ChainLink {
    std::string name;
    std::string lhs;
    std::string rhs;
    /// log2(rhs) - log2(lhs); the link holds iff margin >= 0.
    Real margin;
    bool holds = false;
};

struct ChainReport {
    std::vector<ChainLink> links;
    bool alpha_warning = false;
    bool verdict = false;
};

/// Evaluates every link of the eps-threshold chain in log space.
inline ChainReport check_threshold_chain(const ConstantLedger& L) {
    PrecisionScope scope(L.digits);
    ChainReport report;
    report.alpha_warning = L.alpha_warning;
    auto link = [&](std::string lhs, const LogValue& lv, std::string rhs, const LogValue& rv) {
        ChainLink c;
        c.name = lhs + " <= " + rhs;
        c.margin = rv.log2 - lv.log2;
        c.holds = c.margin >= 0;
        c.lhs = std::move(lhs);
        c.rhs = std::move(rhs);
        report.links.push_back(std::move(c));
    };
    link("eps0", L.eps0, std::string(kBarrier), L.threshold(kBarrier));
    link(std::string(kBarrier), L.threshold(kBarrier), std::string(kTouch), L.threshold(kTouch));
    link(std::string(kTouch), L.threshold(kTouch), std::string(kGrad), L.threshold(kGrad));
    link("eps0", L.eps0, std::string(kFinal), L.threshold(kFinal));
    link("eps0", L.eps0, std::string(kHarnack), L.threshold(kHarnack));
    report.verdict = true;
    for (const auto& c : report.links) report.verdict = report.verdict && c.holds;
    return report;
}

struct HarnackDepth {
    /// Real solution of 2^M eps (1-eta)^(M-3) = eps1.
    Real M;
    long long Mtilde = 0;
    /// 2^(-Mtilde-1) <= C2 eps^gamma. Since 2^(-M-1) == C2 eps^gamma, this
    /// holds only when M is an integer.
    bool scale_bound_holds = false;
    /// log2(C2 eps^gamma) - (-Mtilde - 1), always in (-1, 0].
    Real scale_bound_margin;
    /// 2^(-Mtilde-1) <= 2 C2 eps^gamma, which holds for every admissible eps.
    bool scale_bound_relaxed_holds = false;
};

/// Depth formula without the eps <= eps1/8 range check; used by audits that
/// also run outside the Harnack regime.
inline HarnackDepth harnack_depth_unchecked(const Real& eps, const ConstantLedger& L) {
    PrecisionScope scope(L.digits);
    HarnackDepth d;
    const Real le = log2_of(eps);
    d.M = L.gamma * (log2_of(L.params.eps1) - le - 3 * L.alpha);
    // Snap to an integer that the working precision cannot distinguish from M.
    const Real nearest = round(d.M);
    const Real snap_tol = pow(Real(10), 10 - static_cast<int>(L.digits));
    const Real fl = abs(d.M - nearest) <= snap_tol * (1 + abs(d.M)) ? nearest : floor(d.M);
    d.Mtilde = fl.convert_to<long long>();
    d.scale_bound_margin = L.C2.log2 + L.gamma * le + Real(d.Mtilde + 1);
    d.scale_bound_holds = d.scale_bound_margin >= -snap_tol * (1 + abs(d.M));
    d.scale_bound_relaxed_holds = d.scale_bound_margin + 1 >= 0;
    return d;
}

inline HarnackDepth max_harnack_depth(const Real& eps, const ConstantLedger& L) {
    if (!(eps > 0) || eps > L.params.eps1 / 8)
        throw std::invalid_argument("eps must lie in (0, eps1/8]");
    return harnack_depth_unchecked(eps, L);
}

inline HarnackDepth max_harnack_depth(double eps, const ConstantLedger& L) {
    PrecisionScope scope(L.digits);
    return max_harnack_depth(Real(eps), L);
}

}  // namespace ledger
}  // namespace flatcert
