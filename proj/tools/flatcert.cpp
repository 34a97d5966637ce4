// Command-line front end: ledger emission, surface manufacture, audits,
// certification, iteration and plot-data export.

#include "flatcert.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fc = flatcert;
using fc::report::Json;

namespace {

struct RunConfig {
    int n = 3;
    double eps1 = 0.25;
    double eta = 0.0;  // 0 selects the eta with alpha = 1/4 exactly
    int nodes = 129;
    double eps = 1e-2;
    std::string preset = "bump";
    std::string exact;
    std::string surface;
    std::string out;
    std::vector<double> slope{0.0, 0.0};
    double amplitude = fc::pipeline::kDefaultBumpAmplitude;
    double scherk_scale = 1.0;
    double perturb = 0.0;
    unsigned long long seed = 1;
    int steps = 3;
    double rho = 0.125;
    bool no_refine = false;
    std::vector<std::string> inputs;
};

struct StageFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << text;
}

fc::ledger::ConstantLedger make_ledger(const RunConfig& c) {
    const fc::ledger::HarnackParams p = c.eta > 0 ? fc::ledger::HarnackParams::make(c.n, c.eps1, c.eta)
                                                  : fc::ledger::HarnackParams::with_alpha(c.n, c.eps1,
                                                                                          fc::Rational(1, 4));
    return fc::ledger::derive_ledger(p);
}

int base_dim(const RunConfig& c) {
    if (c.n != 2 && c.n != 3) throw std::invalid_argument("grid commands support n = 2 or n = 3");
    return c.n - 1;
}

fc::grid::Point slope_point(const RunConfig& c) {
    return {c.slope.empty() ? 0.0 : c.slope[0], c.slope.size() > 1 ? c.slope[1] : 0.0};
}

/// Field of an exact catalog surface on the unit ball.
fc::grid::GridFunction exact_field(const RunConfig& c, const std::string& kind) {
    const auto layout = fc::grid::GridFunction::with_nodes(base_dim(c), 1.0, c.nodes);
    if (kind == "affine") return fc::mse::exact_solution(fc::mse::Affine{slope_point(c), 0.0}, layout);
    if (kind == "scherk") return fc::mse::exact_solution(fc::mse::Scherk{c.scherk_scale}, layout);
    throw std::invalid_argument("unknown exact kind: " + kind);
}

/// Minimal graph solved from a boundary preset.
fc::grid::GridFunction solved_field(const RunConfig& c) {
    const int d = base_dim(c);
    auto b = fc::grid::GridFunction::with_nodes(d, 1.0, c.nodes);
    if (c.preset == "bump") {
        b.fill([&](const fc::grid::Point& x) { return c.eps * fc::pipeline::bump_profile(x, c.amplitude); });
    } else if (c.preset == "affine") {
        const auto a = slope_point(c);
        b.fill([&](const fc::grid::Point& x) { return a[0] * x[0] + a[1] * x[1]; });
    } else if (c.preset == "scherk") {
        b = fc::mse::exact_solution(fc::mse::Scherk{c.scherk_scale}, b);
    } else {
        throw std::invalid_argument("unknown preset: " + c.preset);
    }
    if (c.perturb > 0) {
        std::mt19937_64 rng(c.seed);
        std::uniform_real_distribution<double> u(-c.perturb, c.perturb);
        for (std::size_t k = 0; k < b.size(); ++k)
            if (b.kind(k) == fc::grid::NodeKind::boundary) b[k] += c.eps * u(rng);
    }
    auto f = fc::mse::solve_mse(b).u;
    const double f0 = f[f.origin()];
    for (std::size_t k = 0; k < f.size(); ++k)
        if (f.in_ball(k)) f[k] -= f0;
    return f;
}

fc::grid::GridFunction load_field(const RunConfig& c) {
    if (!c.surface.empty()) {
        std::ifstream is(c.surface);
        if (!is) throw std::runtime_error("cannot read " + c.surface);
        auto f = fc::grid::read_gf1(is);
        if (f.base_dim() + 1 != c.n) throw std::invalid_argument("surface base dimension does not match --n");
        if (f.radius() != 1.0) throw std::invalid_argument("surface must be sampled on the unit ball");
        return f;
    }
    if (!c.exact.empty()) return exact_field(c, c.exact);
    return solved_field(c);
}

std::string first_failure(const fc::pipeline::FlatnessCertificate& cert) {
    for (const auto& s : cert.stages)
        if (!s.verdict) return "stage " + s.name + " failed: " + s.detail;
    return "certificate failed";
}

int cmd_ledger(const RunConfig& c) {
    const auto L = make_ledger(c);
    const Json j = fc::report::ledger_json(L);
    write_output(c.out, j.dump(2) + "\n");
    if (!j["chainVerdict"].get<bool>()) {
        for (const auto& l : fc::ledger::check_threshold_chain(L).links)
            if (!l.holds) throw StageFailure("stage ledger failed: " + l.name + ", log2 margin " + l.margin.str(17));
    }
    return 0;
}

int cmd_solve(const RunConfig& c) {
    write_output(c.out, fc::grid::to_gf1(solved_field(c)));
    return 0;
}

int cmd_exact(const RunConfig& c) {
    write_output(c.out, fc::grid::to_gf1(exact_field(c, c.exact.empty() ? "affine" : c.exact)));
    return 0;
}

int cmd_audit(const RunConfig& c) {
    const auto L = make_ledger(c);
    const auto f = load_field(c);
    const auto s = fc::pipeline::audit_surface(fc::samples_from_graph(f), c.eps, L, f);
    write_output(c.out, fc::report::decay_csv(s.audits));
    std::cerr << fc::report::audit_json(s).dump() << "\n";
    if (!s.verdict) {
        for (std::size_t a = 0; a < s.audits.size(); ++a)
            for (const auto& r : s.audits[a].rows)
                if (!r.passes())
                    throw StageFailure("stage decay failed: center " + std::to_string(a) + " m=" + std::to_string(r.m) +
                                       ", margin " + fc::shortest(r.bound - r.measured));
        throw StageFailure("stage modulus failed: margin " + fc::shortest(s.modulus.margin));
    }
    return 0;
}

fc::pipeline::StepOptions step_options(const RunConfig& c) {
    fc::pipeline::StepOptions o;
    o.nodes = c.nodes;
    o.base_dim = base_dim(c);
    o.empirical_radius = c.rho;
    return o;
}

int cmd_certify(const RunConfig& c) {
    const auto L = make_ledger(c);
    const fc::pipeline::GraphSource src(load_field(c));
    auto o = step_options(c);
    o.nodes = 2 * src.field().half_extent() + 1;
    if (!c.no_refine) o.refiner = [&](double r) { return src.refined(r); };
    const auto cert = fc::pipeline::improvement_step(src.samples(), c.eps, L, o);
    write_output(c.out, fc::report::certificate_json(cert).dump(2) + "\n");
    if (!cert.verdict) throw StageFailure(first_failure(cert));
    return 0;
}

int cmd_iterate(const RunConfig& c) {
    const auto L = make_ledger(c);
    const fc::pipeline::GraphSource src(load_field(c));
    auto o = step_options(c);
    o.nodes = 2 * src.field().half_extent() + 1;
    const auto r = fc::pipeline::iterate_flatness(src, c.eps, c.steps, L, o);
    write_output(c.out, fc::report::iteration_json(r).dump(2) + "\n");
    if (!r.completed) throw StageFailure("step " + std::to_string(r.certificates.size() - 1) + ": " +
                                         first_failure(r.certificates.back()));
    return 0;
}

int cmd_report(const RunConfig& c) {
    std::vector<fc::report::ClosenessRow> rows;
    bool all = true;
    for (const auto& path : c.inputs) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("cannot read " + path);
        const Json j = Json::parse(is);
        const Json& cert = j.contains("steps") ? j["steps"].back()["certificate"] : j;
        all = all && cert["verdict"].get<bool>();
        if (cert["closenessMeasured"].is_null()) continue;
        const double m = cert["closenessMeasured"].get<double>();
        rows.push_back({cert["eps"].get<double>(), m, m + cert["margins"]["closeness"].get<double>()});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.eps < b.eps; });
    write_output(c.out, fc::report::closeness_csv(rows));
    if (!all) throw StageFailure("stage report failed: an input certificate carries verdict false");
    return 0;
}

void add_params(CLI::App* s, RunConfig& c) {
    s->add_option("--n", c.n, "ambient dimension")->check(CLI::Range(2, 1000000));
    s->add_option("--eps1", c.eps1, "Harnack flatness threshold");
    s->add_option("--eta", c.eta, "Harnack improvement factor (default: alpha = 1/4 exactly)");
}

void add_surface(CLI::App* s, RunConfig& c) {
    s->add_option("--nodes", c.nodes, "grid nodes per diameter (odd)")
        ->check(CLI::Range(17, 4097))
        ->check(CLI::Validator([](std::string& v) { return std::stoi(v) % 2 ? std::string() : "must be odd"; },
                               "ODD"));
    s->add_option("--eps", c.eps, "flatness");
    s->add_option("--preset", c.preset, "boundary preset")->check(CLI::IsMember({"bump", "affine", "scherk"}));
    s->add_option("--a", c.slope, "affine slope a1,a2")->delimiter(',');
    s->add_option("--amplitude", c.amplitude, "bump amplitude");
    s->add_option("--scale", c.scherk_scale, "Scherk scale");
    s->add_option("--perturb", c.perturb, "relative random boundary perturbation");
    s->add_option("--seed", c.seed, "seed for --perturb");
    s->add_option("--out,-o", c.out, "output path (default stdout)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flatcert: certified improvement of flatness for minimal graphs"};
    app.require_subcommand(1);
    RunConfig c;

    auto* ledger = app.add_subcommand("ledger", "emit the constant ledger and threshold chain as JSON");
    add_params(ledger, c);
    ledger->add_option("--out,-o", c.out, "output path");

    auto* solve = app.add_subcommand("solve", "solve the minimal surface equation from a boundary preset (gf1)");
    add_params(solve, c);
    add_surface(solve, c);

    auto* exact = app.add_subcommand("exact", "write an exact catalog surface (gf1)");
    add_params(exact, c);
    add_surface(exact, c);
    exact->add_option("--kind", c.exact, "affine or scherk")->check(CLI::IsMember({"affine", "scherk"}));

    auto add_run = [&](const std::string& name, const std::string& help) {
        auto* s = app.add_subcommand(name, help);
        add_params(s, c);
        add_surface(s, c);
        s->add_option("--surface", c.surface, "gf1 surface file");
        s->add_option("--exact", c.exact, "exact surface kind")->check(CLI::IsMember({"affine", "scherk"}));
        return s;
    };
    auto* audit = add_run("audit", "Harnack decay audit (CSV)");
    auto* certify = add_run("certify", "one improvement step (certificate JSON)");
    certify->add_option("--rho", c.rho, "empirical inclusion radius");
    certify->add_flag("--no-refine", c.no_refine, "skip the local re-solve for the empirical check");
    auto* iterate = add_run("iterate", "iterated improvement steps (certificate list JSON)");
    iterate->add_option("--steps", c.steps, "number of steps")->check(CLI::Range(1, 16));
    iterate->add_option("--rho", c.rho, "rescaling radius");

    auto* report = app.add_subcommand("report", "merge certificates into a closeness CSV");
    report->add_option("inputs", c.inputs, "certificate or iteration JSON files")->required();
    report->add_option("--out,-o", c.out, "output path");

    CLI11_PARSE(app, argc, argv);
    try {
        if (ledger->parsed()) return cmd_ledger(c);
        if (solve->parsed()) return cmd_solve(c);
        if (exact->parsed()) return cmd_exact(c);
        if (audit->parsed()) return cmd_audit(c);
        if (certify->parsed()) return cmd_certify(c);
        if (iterate->parsed()) return cmd_iterate(c);
        if (report->parsed()) return cmd_report(c);
    } catch (const StageFailure& e) {
        std::cerr << "flatcert: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "flatcert: error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
