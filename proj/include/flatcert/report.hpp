/**
 * @brief JSON and CSV serialization of ledgers, certificates, audits and
 * multigraph sidecars. Doubles are written in shortest round-trip form.
 */
#pragma once

#include "flatcert/envelope.hpp"
#include "flatcert/grid.hpp"
#include "flatcert/ledger.hpp"
#include "flatcert/pipeline.hpp"

#include <json.hpp>

#include <ostream>
#include <sstream>
#include <string>

namespace flatcert::report {

using Json = nlohmann::ordered_json;

inline constexpr int kLog2Digits = 50;

inline std::string decimal(const Real& x, int digits = kLog2Digits) { return x.str(digits); }

inline Json log_value(const ledger::LogValue& v) {
    Json j;
    j["log2"] = decimal(v.log2);
    if (const auto a = v.approx())
        j["approx"] = *a;
    else
        j["approx"] = static_cast<double>(v.log2) < 0 ? "underflow" : "overflow";
    return j;
}

inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json ledger_json(const ledger::ConstantLedger& L) {
    ledger::PrecisionScope scope(L.digits);
    Json j;
    j["n"] = L.params.n;
    j["eps1"] = static_cast<double>(L.params.eps1);
    j["eta"] = static_cast<double>(L.params.eta);
    j["alpha"] = static_cast<double>(L.alpha);
    j["gamma"] = static_cast<double>(L.gamma);
    j["digits"] = L.digits;
    j["alphaWarning"] = L.alpha_warning;
    j["eps0Exponent"] = decimal(L.eps0_exponent);
    Json c;
    c["C1"] = log_value(L.C1);
    c["C2"] = log_value(L.C2);
    c["C3"] = log_value(L.C3);
    c["C4"] = log_value(L.C4);
    c["C5"] = log_value(L.C5);
    c["C6"] = log_value(L.C6);
    c["r0"] = log_value(L.r0);
    c["eps0"] = log_value(L.eps0);
    c["eps0ClosedForm"] = log_value(L.eps0_closed_form);
    j["constants"] = c;
    Json t = Json::array();
    for (const auto& th : L.thresholds) {
        Json e;
        e["name"] = th.name;
        e.update(log_value(th.value));
        t.push_back(e);
    }
    j["thresholds"] = t;
    j["identityRelError"] = static_cast<double>(L.closed_form_rel_error);
    j["c2BoundHolds"] = L.c2_bound_holds;
    j["gammaAlphaBoundHolds"] = L.gamma_alpha_bound_holds;

    const ledger::ChainReport chain = ledger::check_threshold_chain(L);
    Json links = Json::array();
    for (const auto& l : chain.links) {
        Json e;
        e["name"] = l.name;
        e["lhs"] = l.lhs;
        e["rhs"] = l.rhs;
        e["marginLog2"] = decimal(l.margin);
        e["holds"] = l.holds;
        links.push_back(e);
    }
    j["chain"] = links;
    j["chainVerdict"] = chain.verdict;
    return j;
}

inline Json vec_json(const pipeline::Vec& v, int n) {
    Json a = Json::array();
    for (int i = 0; i < n; ++i) a.push_back(v[i]);
    return a;
}

inline Json certificate_json(const pipeline::FlatnessCertificate& c) {
    Json j;
    j["verdict"] = c.verdict;
    if (!c.failed_stage.empty()) j["failedStage"] = c.failed_stage;
    j["n"] = c.n;
    j["eps"] = c.eps;
    j["epsEffective"] = c.eps_effective;
    j["shift"] = c.shift;
    j["nu"] = vec_json(c.nu, c.n);
    j["r0"] = c.r0;
    Json m;
    m["taylor"] = number_or_null(c.taylorMargin);
    m["closeness"] = number_or_null(c.closenessMargin);
    m["inclusionAnalytic"] = number_or_null(c.inclusionAnalyticMargin);
    m["inclusionEmpirical"] = number_or_null(c.inclusionEmpiricalMargin);
    j["margins"] = m;
    j["closenessMeasured"] = number_or_null(c.closenessMeasured);
    j["empiricalRadius"] = c.empiricalRadius;
    j["empiricalRatio"] = number_or_null(c.empiricalRatio);
    j["empiricalSamples"] = c.empiricalSamples;
    j["eps0Holds"] = c.eps0_holds;
    j["barrierThresholdHolds"] = c.barrier_threshold_holds;
    Json st = Json::array();
    for (const auto& s : c.stages) {
        Json e;
        e["name"] = s.name;
        e["verdict"] = s.verdict;
        e["margin"] = s.margin ? number_or_null(*s.margin) : Json(nullptr);
        if (!s.detail.empty()) e["detail"] = s.detail;
        st.push_back(e);
    }
    j["stages"] = st;
    j["ledgerRef"] = c.ledgerRef;
    return j;
}

inline Json iteration_json(const pipeline::IterationResult& r) {
    Json j;
    j["completed"] = r.completed;
    Json steps = Json::array();
    for (std::size_t k = 0; k < r.certificates.size(); ++k) {
        Json s;
        s["k"] = k;
        s["eps"] = r.eps_sequence[k];
        s["measuredFlatness"] = r.measured_flatness[k];
        if (k < r.nu_global.size()) s["nuGlobal"] = vec_json(r.nu_global[k], r.certificates[k].n);
        s["certificate"] = certificate_json(r.certificates[k]);
        steps.push_back(s);
    }
    j["steps"] = steps;
    return j;
}

inline std::string decay_csv(const std::vector<pipeline::DecayAudit>& audits) {
    std::ostringstream os;
    os << "center,m,radius,measured,bound,count,truncated,pass\n";
    for (std::size_t a = 0; a < audits.size(); ++a)
        for (const auto& r : audits[a].rows)
            os << a << ',' << r.m << ',' << shortest(r.radius) << ',' << shortest(r.measured) << ','
               << shortest(r.bound) << ',' << r.count << ',' << (r.truncated ? 1 : 0) << ',' << (r.passes() ? 1 : 0)
               << '\n';
    return os.str();
}

inline Json audit_json(const pipeline::SurfaceAudit& s) {
    Json j;
    j["verdict"] = s.verdict;
    Json a = Json::array();
    for (const auto& d : s.audits) {
        Json e;
        e["center"] = vec_json(d.center, d.n);
        e["eps"] = d.eps;
        e["M"] = d.M;
        e["Mtilde"] = d.Mtilde;
        e["hypothesisHolds"] = d.hypothesis_holds;
        e["scaleBoundHolds"] = d.scale_bound_holds;
        e["verdict"] = d.verdict;
        a.push_back(e);
    }
    j["audits"] = a;
    Json m;
    m["margin"] = number_or_null(s.modulus.margin);
    m["pairs"] = s.modulus.pairs;
    m["verdict"] = s.modulus.verdict;
    j["modulus"] = m;
    return j;
}

/// JSON sidecar of a multigraph whose envelopes are stored as a gf1 pair.
inline Json multigraph_sidecar(const envelope::MultiGraph& mg, const std::string& lower_path,
                               const std::string& upper_path) {
    Json j;
    j["eps"] = mg.eps;
    j["epsInput"] = mg.eps_input;
    j["shift"] = mg.shift;
    j["lower"] = lower_path;
    j["upper"] = upper_path;
    return j;
}

/// One row of the closeness plot data.
struct ClosenessRow {
    double eps = 0.0;
    double measured = 0.0;
    double bound = 0.0;
};

inline std::string closeness_csv(const std::vector<ClosenessRow>& rows) {
    std::ostringstream os;
    os << "eps,measured,bound\n";
    for (const auto& r : rows) os << shortest(r.eps) << ',' << shortest(r.measured) << ',' << shortest(r.bound) << '\n';
    return os.str();
}

}  // namespace flatcert::report
