#include "support.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <random>

namespace fc = flatcert;
using fc::Real;
using fc::Rational;
using fc::ledger::HarnackParams;
using fc::ledger::derive_ledger;

namespace {

Real rel(const Real& a, const Real& b) { return abs(a - b) / abs(b); }

/// log2 of 2^m eps (1-eta)^(m-3), evaluated directly.
Real log2_iterate(long long m, const Real& eps, const Real& eta) {
    return Real(m) + fc::ledger::log2_of(eps) + Real(m - 3) * fc::ledger::log2_of(Real(1) - eta);
}

}  // namespace

TEST(Ledger, QuarterAlphaExample) {
    const auto L = derive_ledger(HarnackParams::with_alpha(2, 0.25, Rational(1, 4)));
    fc::ledger::PrecisionScope s(L.digits);
    EXPECT_EQ(L.alpha, Real(1) / 4);
    EXPECT_EQ(L.gamma, Real(4) / 3);
    ASSERT_TRUE(L.eps0_exponent_exact);
    EXPECT_EQ(*L.eps0_exponent_exact, Rational(96));
    EXPECT_EQ(L.C1.log2, Real(5));
    EXPECT_EQ(L.C1.approx().value(), 32.0);
    EXPECT_FALSE(L.alpha_warning);
    // log2 eps0 = 96 (1/3 * -2 - 33 - 5/4 - 3) = -3640, frozen from a 110-digit evaluation.
    EXPECT_LT(rel(L.eps0.log2, Real(-3640)), Real("1e-90"));
}

TEST(Ledger, EtaGivingQuarterAlphaWithoutExactHint) {
    fc::ledger::PrecisionScope s(fc::ledger::working_digits());
    const Real eta = Real(1) - pow(Real(2), Real(-1) / 4);
    const auto L = derive_ledger(HarnackParams::make(2, Real(1) / 4, eta));
    EXPECT_LT(abs(L.alpha - Real(1) / 4), Real("1e-90"));
    EXPECT_LT(abs(L.eps0_exponent - 96), Real("1e-85"));
    EXPECT_FALSE(L.alpha_warning);
}

TEST(Ledger, R0ForThreeDimensions) {
    // r0 = 1 / (2^16 n^2) with n = 3.
    for (double eps1 : {0.25, 0.1, 1.0 / 1024}) {
        const auto L = derive_ledger(HarnackParams::make(3, eps1, 0.1));
        EXPECT_DOUBLE_EQ(L.r0.value(), 1.0 / (65536.0 * 9.0));
    }
}

TEST(Ledger, Eps0MatchesExtendedPrecisionOracle) {
    // (n, eps1, eta) = (3, 2^-4, 0.1); 110-digit mpmath evaluation of the closed form.
    const auto L = derive_ledger(HarnackParams::make(3, 1.0 / 16, 0.1));
    fc::ledger::PrecisionScope s(L.digits);
    const Real oracle("-11519.10555849873795750931658821372423718");
    EXPECT_LT(rel(L.eps0.log2, oracle), Real("1e-12"));
    EXPECT_LT(rel(L.eps0.log2, oracle), Real("1e-38"));
    EXPECT_LT(rel(L.eps0_closed_form.log2, oracle), Real("1e-38"));
    EXPECT_LT(abs(L.alpha - Real("0.1520030934450499849628415415937571583452")), Real("1e-39"));
    EXPECT_LT(abs(L.threshold(fc::ledger::kBarrier).log2 - Real("-66.7726163862515879675786776348")), Real("1e-27"));
    EXPECT_FALSE(L.eps0.approx().has_value());
    EXPECT_EQ(L.eps0.value(), 0.0);
}

TEST(Ledger, AlphaWarningAtEtaOneFifth) {
    const auto L = derive_ledger(HarnackParams::make(3, 0.25, 0.2));
    fc::ledger::PrecisionScope s(L.digits);
    EXPECT_TRUE(L.alpha_warning);
    EXPECT_LT(abs(L.alpha - Real("0.3219280948873623478703194294893901758648")), Real("1e-39"));
    EXPECT_LT(rel(L.eps0.log2, Real("-2110.107586176032577123036210416172271895")), Real("1e-38"));
    const auto chain = fc::ledger::check_threshold_chain(L);
    EXPECT_TRUE(chain.alpha_warning);
    EXPECT_EQ(chain.links.size(), 5u);
    EXPECT_TRUE(chain.verdict);
}

TEST(Ledger, ChainHoldsAtQuarterAlpha) {
    const auto L = derive_ledger(HarnackParams::with_alpha(2, 0.25, Rational(1, 4)));
    const auto chain = fc::ledger::check_threshold_chain(L);
    EXPECT_TRUE(chain.verdict);
    EXPECT_FALSE(chain.alpha_warning);
    for (const auto& l : chain.links) EXPECT_TRUE(l.holds) << l.name;
}

TEST(Ledger, ConstructedChainViolation) {
    auto L = derive_ledger(HarnackParams::with_alpha(2, 0.25, Rational(1, 4)));
    fc::ledger::PrecisionScope s(L.digits);
    L.eps0 = L.threshold(fc::ledger::kTouch) * fc::ledger::LogValue{Real(1)};
    const auto chain = fc::ledger::check_threshold_chain(L);
    EXPECT_FALSE(chain.verdict);
    EXPECT_EQ(chain.links.front().name, "eps0 <= T_barrier");
    EXPECT_FALSE(chain.links.front().holds);
    EXPECT_LT(chain.links.front().margin, 0);
}

TEST(Ledger, RejectsOutOfRangeParameters) {
    EXPECT_THROW(HarnackParams::make(1, 0.25, 0.1), std::invalid_argument);
    EXPECT_THROW(HarnackParams::make(3, 0.3, 0.1), std::invalid_argument);
    EXPECT_THROW(HarnackParams::make(3, 0.0, 0.1), std::invalid_argument);
    EXPECT_THROW(HarnackParams::make(3, 0.25, 0.21), std::invalid_argument);
    EXPECT_THROW(HarnackParams::make(3, 0.25, 0.0), std::invalid_argument);
    EXPECT_NO_THROW(HarnackParams::make(3, 0.25, 0.2));
    EXPECT_THROW(HarnackParams::with_alpha(3, 0.25, Rational(1, 2)), std::invalid_argument);
}

TEST(Ledger, DepthAtEps1OverEight) {
    const auto L = derive_ledger(HarnackParams::with_alpha(3, 0.25, Rational(1, 4)));
    const auto d = fc::ledger::max_harnack_depth(0.25 / 8, L);
    fc::ledger::PrecisionScope s(L.digits);
    EXPECT_LT(abs(d.M - 3), Real("1e-90"));
    EXPECT_EQ(d.Mtilde, 3);
    EXPECT_TRUE(d.scale_bound_holds);
}

TEST(Ledger, DepthAtTwoToMinusTenEps1) {
    const auto L = derive_ledger(HarnackParams::with_alpha(3, 0.25, Rational(1, 4)));
    fc::ledger::PrecisionScope s(L.digits);
    const Real eps = Real(1) / 4 / 1024;
    const auto d = fc::ledger::max_harnack_depth(eps, L);
    EXPECT_LT(abs(d.M - Real(37) / 3), Real("1e-90"));
    EXPECT_EQ(d.Mtilde, 12);
    const Real le1 = fc::ledger::log2_of(L.params.eps1);
    EXPECT_LE(log2_iterate(12, eps, L.params.eta), le1);
    EXPECT_GT(log2_iterate(13, eps, L.params.eta), le1);
    EXPECT_TRUE(d.scale_bound_relaxed_holds);
}

TEST(Ledger, DepthRejectsEpsAboveRange) {
    const auto& L = testing_support::ledger_n3();
    EXPECT_THROW(fc::ledger::max_harnack_depth(0.25 / 8 * 1.001, L), std::invalid_argument);
    EXPECT_THROW(fc::ledger::max_harnack_depth(0.0, L), std::invalid_argument);
    EXPECT_THROW(fc::ledger::max_harnack_depth(-1e-3, L), std::invalid_argument);
}

TEST(LedgerProperty, ClosedFormIdentityAndChainOnRandomParameters) {
    std::mt19937_64 rng(20240917);
    std::uniform_int_distribution<int> nd(2, 8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 300; ++i) {
        const double eps1 = 0.25 * (1.0 - u(rng));
        const double eta = 0.2 * (1.0 - u(rng));
        const auto L = derive_ledger(HarnackParams::make(nd(rng), eps1, eta));
        fc::ledger::PrecisionScope s(L.digits);
        EXPECT_LT(L.closed_form_rel_error, Real("1e-12"));
        EXPECT_TRUE(fc::ledger::check_threshold_chain(L).verdict);
        if (L.alpha <= Real(1) / 4) {
            EXPECT_TRUE(L.c2_bound_holds);
            EXPECT_TRUE(L.gamma_alpha_bound_holds);
        }
    }
}

TEST(LedgerProperty, Eps0MonotoneInEps1AndR0MonotoneInN) {
    for (double eta : {0.05, 0.1, 0.2}) {
        for (int n = 2; n <= 8; ++n) {
            Real prev = -1e300;
            for (double eps1 : {1e-6, 1e-4, 1e-3, 0.01, 0.1, 0.2, 0.25}) {
                const auto L = derive_ledger(HarnackParams::make(n, eps1, eta));
                EXPECT_GE(L.eps0.log2, prev);
                prev = L.eps0.log2;
            }
        }
    }
    Real prev = 1e300;
    for (int n = 2; n <= 20; ++n) {
        const auto L = derive_ledger(HarnackParams::make(n, 0.25, 0.1));
        EXPECT_LE(L.r0.log2, prev);
        prev = L.r0.log2;
    }
}

TEST(LedgerProperty, DepthConsistency) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const auto L = derive_ledger(HarnackParams::make(3, 0.25 * (1 - u(rng)), 0.2 * (1 - u(rng))));
        fc::ledger::PrecisionScope s(L.digits);
        const Real eps = L.params.eps1 / 8 * pow(Real(2), -Real(40) * u(rng));
        const auto d = fc::ledger::max_harnack_depth(eps, L);
        const Real le1 = fc::ledger::log2_of(L.params.eps1);
        EXPECT_LE(log2_iterate(d.Mtilde, eps, L.params.eta), le1 + Real("1e-80"));
        EXPECT_GT(log2_iterate(d.Mtilde + 1, eps, L.params.eta), le1);
        EXPECT_TRUE(d.scale_bound_relaxed_holds);
        EXPECT_LE(d.scale_bound_margin, Real("1e-80"));
        EXPECT_GT(d.scale_bound_margin, Real(-1));
    }
}

TEST(LedgerPrecision, EnvironmentOverride) {
    EXPECT_EQ(fc::ledger::working_digits(), fc::ledger::default_digits);
    ::setenv("FLATCERT_PRECISION", "150", 1);
    EXPECT_EQ(fc::ledger::working_digits(), 150u);
    const auto L = derive_ledger(HarnackParams::make(3, 1.0 / 16, 0.1));
    EXPECT_EQ(L.digits, 150u);
    fc::ledger::PrecisionScope s(L.digits);
    EXPECT_LT(L.closed_form_rel_error, Real("1e-70"));
    ::setenv("FLATCERT_PRECISION", "12", 1);
    EXPECT_THROW(fc::ledger::working_digits(), std::invalid_argument);
    ::unsetenv("FLATCERT_PRECISION");
}

TEST(LedgerJson, FieldsAndUnderflowMarker) {
    const auto j = fc::report::ledger_json(testing_support::ledger_n3());
    for (const char* key : {"n", "eps1", "eta", "alpha", "gamma", "alphaWarning", "constants", "thresholds", "chain"})
        EXPECT_TRUE(j.contains(key)) << key;
    EXPECT_EQ(j["constants"]["eps0"]["approx"], "underflow");
    EXPECT_EQ(j["constants"]["C1"]["approx"].get<double>(), 32.0);
    EXPECT_EQ(j["constants"]["C1"]["log2"], "5");
    EXPECT_EQ(j["thresholds"].size(), 5u);
    EXPECT_TRUE(j["chainVerdict"].get<bool>());
}
