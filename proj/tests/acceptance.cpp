// Acceptance checks. Prints one PASS/FAIL line per criterion; `acceptance 4 6`
// runs a subset.

#include "incsens/cli.hpp"
#include "incsens/csv.hpp"
#include "incsens/estimator.hpp"
#include "incsens/numeric.hpp"
#include "incsens/oracle.hpp"
#include "incsens/output.hpp"
#include "incsens/rng.hpp"
#include "incsens/simulation.hpp"
#include "incsens/t2_bounds.hpp"
#include "incsens/t2_model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace incsens;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// Shared between criteria 2, 6 and 7.
struct EnvelopeLog {
    std::size_t datasets = 0;
    std::size_t violations = 0;
    double min_margin = 1e300;

    void check(const BoundEstimate& e, std::pair<double, double> env) {
        ++datasets;
        const double margin = std::min(e.psi_lower - env.first, env.second - e.psi_upper);
        min_margin = std::min(min_margin, margin);
        if (margin < 0.0) ++violations;
    }
};

EnvelopeLog g_envelope_c2;
EnvelopeLog g_envelope_c6;
bool g_ran_c2 = false;
bool g_ran_c6 = false;

Outcome criterion1() {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        Rng rng(derive_seed(101, s));
        const std::size_t n = 50;
        std::vector<UnitRecord> recs;
        std::vector<UnitNuisance> units(n);
        double ysum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = rng.normal();
            const int a = rng.bernoulli(0.5) ? 1 : 0;
            const double y = rng.normal(x, 2.0);
            recs.push_back({{x}, a, y});
            ysum += y;
            auto& u = units[i];
            u.pi = rng.uniform(0.05, 0.95);
            for (int arm = 0; arm < 2; ++arm) {
                u.mu[arm] = rng.normal(0.0, 3.0);
                for (int side = 0; side < 2; ++side) {
                    u.theta[arm][side] = u.mu[arm];
                    u.nu[arm][side] = 1.0;
                }
            }
        }
        const Dataset data(std::move(recs), {"x"});
        const auto plan = make_fold_plan(n, 10, s);
        const auto e = estimate_from_if(influence_values(data, units, 1.0, 1.0, plan.fold_of), 0.95);
        const double ybar = ysum / static_cast<double>(n);
        worst = std::max({worst, std::abs(e.psi_lower - ybar), std::abs(e.psi_upper - ybar)});
    }
    return {worst <= 1e-12, "max |psi_hat - mean(Y)| = " + fmt("%.3g", worst) + " over 100 datasets"};
}

Outcome criterion2() {
    g_ran_c2 = true;
    const AnalyticDGP dgp;
    const double truth = true_psi(1.0, dgp);
    const LearnerSpec spec;
    const double quoted = 0.8295;
    std::size_t hits = 0;
    std::size_t hits_quoted = 0;
    const std::size_t runs = 200;
    for (std::size_t r = 0; r < runs; ++r) {
        const auto data = generate(dgp, 2000, derive_seed(202, r));
        const auto fit = cross_fit(data, spec, 10, {1.0}, derive_seed(203, r)).front();
        const auto units = evaluate_units(data, fit);
        const auto e = estimate_from_if(influence_values(data, units, 1.0, 1.0, fit.plan.fold_of), 0.95);
        const double se = e.sigma_lower / std::sqrt(static_cast<double>(e.n));
        if (std::abs(e.psi_lower - truth) <= 3.0 * se) ++hits;
        if (std::abs(e.psi_lower - quoted) <= 3.0 * se) ++hits_quoted;
        const auto env = mixture_envelope(units);
        g_envelope_c2.check(e, env);
        g_envelope_c2.check(plugin_bounds(units, 1.0, 1.0), env);
    }
    const double rate = static_cast<double>(hits) / runs;
    const double rate_quoted = static_cast<double>(hits_quoted) / runs;
    return {rate >= 0.95 && rate_quoted >= 0.95 && std::abs(truth - quoted) < 1e-4,
            "oracle psi(1) = " + fmt("%.7f", truth) + "; within 3 SE of the oracle in " + fmt("%.3f", rate) +
                " and of 0.8295 in " + fmt("%.3f", rate_quoted) + " of 200 runs"};
}

Outcome criterion3() {
    const auto deltas = [] {
        std::vector<double> d;
        for (int i = 0; i <= 80; ++i) d.push_back(0.1 * std::pow(100.0, i / 80.0));
        return d;
    }();
    const auto r = figure1_sweep({1.0, 1.5, 2.0, 3.0, 4.0, 5.0}, deltas, 2.0);
    const std::vector<std::pair<std::string, LengthPattern>> expected{{"unif_0_1", LengthPattern::decreasing},
                                                                      {"unif_m1_0", LengthPattern::increasing},
                                                                      {"unif_m4_3", LengthPattern::u_shaped}};
    bool ok = r.panels.size() == 3;
    std::string detail;
    for (std::size_t i = 0; ok && i < 3; ++i) {
        const auto& p = r.panels[i];
        ok = ok && p.panel == expected[i].first && p.pattern == expected[i].second && p.uniform_encloses_gaussian;
        detail += p.panel + ":" + to_string(p.pattern) + (p.uniform_encloses_gaussian ? "/wider " : "/not-wider ");
    }
    return {ok, detail + "(Gamma in {1,1.5,2,3,4,5}, 81 deltas in [0.1,10])"};
}

Outcome criterion4() {
    SimConfig sc;
    sc.n = 1000;
    sc.reps = 200;
    sc.delta = 2.0;
    sc.gamma = 2.0;
    sc.seed = 404;
    const auto t = bias_sweep(sc);
    bool ok = true;
    std::string detail;
    for (BoundSide s : kBothSides) {
        const double dr = t.slope(EstimatorKind::dr, s);
        const double pi = t.slope(EstimatorKind::plugin, s);
        ok = ok && dr >= -2.6 && dr <= -1.4 && pi >= -1.4 && pi <= -0.6;
        detail += to_string(s) + " slopes dr " + fmt("%.3f", dr) + " plugin " + fmt("%.3f", pi) + "; ";
    }
    std::size_t dominated = 0;
    std::size_t cells = 0;
    for (const auto& a : t.rows) {
        if (a.estimator != EstimatorKind::dr) continue;
        for (const auto& b : t.rows) {
            if (b.estimator == EstimatorKind::plugin && b.side == a.side && b.alpha == a.alpha) {
                ++cells;
                if (a.abs_bias <= b.abs_bias) ++dominated;
            }
        }
    }
    ok = ok && cells == 10 && dominated == cells;
    detail += "dr <= plugin in " + std::to_string(dominated) + "/" + std::to_string(cells) + " cells";
    return {ok, detail};
}

Outcome criterion5() {
    bool ok = solve_h(1.0, {NoiseKind::gaussian, 0.5}) == 0.0 && solve_h(1.0, {NoiseKind::uniform, 0.7}) == 0.0;
    std::string detail = ok ? "h(1)=0 exact; " : "h(1) nonzero; ";

    // Monte Carlo root for standard normal noise at Gamma = 2.
    Rng rng(505);
    const std::size_t N = 1000000;
    std::vector<double> e(N);
    for (auto& v : e) v = rng.normal();
    const double gamma = 2.0;
    auto mc_moment = [&](double h) {
        double s = 0.0;
        for (double v : e) s += v > h ? v - h : gamma * (v - h);
        return s / static_cast<double>(N);
    };
    const double h_mc = bisect(mc_moment, -3.0, 3.0, 1e-12);
    double below = 0.0;
    double ss = 0.0;
    for (double v : e) {
        const double f = v > h_mc ? v - h_mc : gamma * (v - h_mc);
        ss += f * f;
        below += v < h_mc ? 1.0 : 0.0;
    }
    const double slope = 1.0 + (gamma - 1.0) * below / static_cast<double>(N);
    const double mc_se = std::sqrt(ss / static_cast<double>(N)) / std::sqrt(static_cast<double>(N)) / slope;
    const double h_an = solve_h(gamma, {NoiseKind::gaussian, 1.0});
    const double z = std::abs(h_an - h_mc) / mc_se;
    ok = ok && z <= 3.0;
    detail += "gaussian h(2)=" + fmt("%.6f", h_an) + " vs MC " + fmt("%.6f", h_mc) + " (" + fmt("%.2f", z) + " SE); ";

    // Uniform closed form against bisection on the integrated moment.
    double worst = 0.0;
    const double b = 0.5 * std::sqrt(3.0);
    for (double g : {1.2, 1.5, 2.0, 3.0, 5.0, 8.0, 10.0}) {
        auto moment = [&](double h) {
            auto above = [&](double v) { return (v - h) / (2.0 * b); };
            auto under = [&](double v) { return g * (v - h) / (2.0 * b); };
            return adaptive_simpson(above, h, b, 1e-14) + adaptive_simpson(under, -b, h, 1e-14);
        };
        const double numeric = bisect(moment, -b + 1e-12, b - 1e-12, 1e-15);
        worst = std::max(worst, std::abs(numeric - solve_h(g, {NoiseKind::uniform, b})));
    }
    ok = ok && worst <= 1e-10;
    detail += "uniform max gap " + fmt("%.2e", worst) + "; ";

    bool decreasing = true;
    for (NoiseSpec noise : {NoiseSpec{NoiseKind::gaussian, 0.5}, NoiseSpec{NoiseKind::uniform, b}}) {
        double prev = solve_h(1.0, noise);
        for (int i = 1; i <= 180; ++i) {
            const double cur = solve_h(1.0 + 0.05 * i, noise);
            if (!(cur < prev)) decreasing = false;
            prev = cur;
        }
    }
    ok = ok && decreasing;
    detail += decreasing ? "strictly decreasing on [1,10]" : "not strictly decreasing";
    return {ok, detail};
}

Outcome criterion6() {
    g_ran_c6 = true;
    CoverageConfig cc;
    cc.n = 1000;
    cc.reps = 500;
    cc.seed = 606;
    const auto r = coverage_study(cc);
    for (const auto& rep : r.reps) {
        g_envelope_c6.check(rep.dr, rep.envelope);
        g_envelope_c6.check(rep.plugin, rep.envelope);
    }
    const bool ok = r.coverage_lower >= 0.93 && r.coverage_lower <= 0.97 && r.coverage_upper >= 0.93 &&
                    r.coverage_upper <= 0.97;
    return {ok, "coverage lower " + fmt("%.3f", r.coverage_lower) + ", upper " + fmt("%.3f", r.coverage_upper) +
                    " (truth " + fmt("%.6f", r.truth_lower) + ", " + fmt("%.6f", r.truth_upper) + ")"};
}

Outcome criterion7() {
    if (!g_ran_c2) criterion2();
    if (!g_ran_c6) criterion6();
    const std::size_t bad = g_envelope_c2.violations + g_envelope_c6.violations;
    const std::size_t total = g_envelope_c2.datasets + g_envelope_c6.datasets;
    return {bad == 0 && total == 2 * (200 + 500),
            std::to_string(total - bad) + "/" + std::to_string(total) + " estimates inside; min margin " +
                fmt("%.4f", std::min(g_envelope_c2.min_margin, g_envelope_c6.min_margin))};
}

Outcome criterion8() {
    bool ok = true;
    std::string detail;

    double worst_a = 0.0;
    bool nested = true;
    for (std::uint64_t s = 1; s <= 10; ++s) {
        const auto model = random_t2_model(s);
        for (double delta : {0.5, 1.0, 2.0}) {
            const double g = gformula_point(model, delta);
            double prev_lo = 0.0;
            double prev_hi = 0.0;
            bool first = true;
            for (double L : {1.0, 1.5, 2.0, 3.0}) {
                const double lo = sharp_bounds(model, delta, L, L, BoundSide::lower).value;
                const double hi = sharp_bounds(model, delta, L, L, BoundSide::upper).value;
                if (L == 1.0) worst_a = std::max({worst_a, std::abs(lo - g), std::abs(hi - g)});
                if (!first && (lo > prev_lo + 1e-12 || hi < prev_hi - 1e-12)) nested = false;
                if (lo > hi) nested = false;
                prev_lo = lo;
                prev_hi = hi;
                first = false;
            }
        }
    }
    ok = ok && worst_a <= 1e-10 && nested;
    detail += "(a) |bound - gformula| " + fmt("%.2e", worst_a) + "; (b) " + (nested ? "nested" : "NOT nested");

    double worst_c = 0.0;
    double worst_inside = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto model = random_t2_model(1000 + s);
        const double L = s % 2 == 0 ? 2.0 : 3.0;
        const double delta = s % 4 < 2 ? 2.0 : 0.5;
        const double lo = sharp_bounds(model, delta, L, L, BoundSide::lower).value;
        const double hi = sharp_bounds(model, delta, L, L, BoundSide::upper).value;
        const auto bf = brute_force_bounds(model, delta, L, L, 0.01);
        worst_c = std::max({worst_c, std::abs(lo - bf.lower), std::abs(hi - bf.upper)});
        worst_inside = std::max({worst_inside, lo - bf.lower, bf.upper - hi});
    }
    ok = ok && worst_c <= 0.02;
    detail += "; (c) max |solver - grid| " + fmt("%.2e", worst_c) + " on 20 models (grid beyond solver by at most " +
              fmt("%.1e", std::max(0.0, worst_inside)) + ")";

    // Robustness search on synthetic bound curves that first admit a common
    // value at gamma_star = 2.3 with witness c = 0.4.
    const double gs = 2.3;
    const double c = 0.4;
    auto bounds_at = [&](double g) {
        std::vector<double> lo{c + 0.8 * (gs - g), c - 1.0 - g, c - 0.5 * g};
        std::vector<double> hi{c + 2.0 + g, c - 0.3 * (gs - g), c + 1.0 + g};
        return std::make_pair(lo, hi);
    };
    const auto rr = robustness_gamma(bounds_at, {1.0, 1.5, 2.0, 2.5, 3.0, 4.0});
    const bool rob_ok = rr.found && std::abs(rr.gamma_star - gs) <= 1e-8 && std::abs(rr.witness - c) <= 1e-8;
    ok = ok && rob_ok;
    detail += "; robustness search Gamma* " + fmt("%.10f", rr.gamma_star) + " witness " + fmt("%.10f", rr.witness);
    return {ok, detail};
}

Outcome criterion9() {
    const fs::path root = fs::temp_directory_path() / "incsens_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);
    std::ostringstream out;
    std::ostringstream err;
    auto run = [&](std::vector<std::string> args) { return run_command(args, out, err); };
    auto dir = [&](const std::string& name) { return (root / name).string(); };

    std::vector<std::string> failures;
    auto expect = [&](bool cond, const std::string& what) {
        if (!cond) failures.push_back(what);
    };
    expect(run({"simulate", "data", "--n", "1000", "--seed", "9", "--out", dir("data")}) == 0, "simulate data");
    const std::string csv = dir("data") + "/data.csv";
    const std::vector<std::pair<std::string, std::vector<std::string>>> jobs{
        {"figure1", {"simulate", "figure1", "--svg"}},
        {"bias", {"simulate", "bias", "--reps", "20", "--seed", "3"}},
        {"estimate", {"estimate", "--data", csv, "--delta", "2", "--gamma", "2"}},
        {"curve", {"curve", "--data", csv, "--gamma-grid", "1,2,3", "--delta-grid", "0.5,1,2", "--svg"}},
        {"t2", {"t2", "sharp-bounds", "--delta", "2", "--gamma", "2"}},
    };
    for (const auto& [name, base] : jobs) {
        auto args = base;
        args.push_back("--out");
        args.push_back(dir(name));
        expect(run(args) == 0, name + " run");
        expect(run({"replay", dir(name) + "/" + kManifestName, "--out", dir(name + "_replay")}) == 0,
               name + " replay");
    }

    // Gamma = 1 rows collapse, and the table has one row per (delta, Gamma, side).
    try {
        const auto rows = parse_csv(read_file(dir("curve") + "/curve.csv"));
        expect(rows.size() == 1 + 18, "curve row count");
        std::size_t collapsed = 0;
        for (std::size_t i = 1; i + 1 < rows.size(); i += 2) {
            if (rows[i][0] == "1" && rows[i][2] == "lower" && rows[i + 1][2] == "upper" && rows[i][3] == rows[i + 1][3])
                ++collapsed;
        }
        expect(collapsed == 3, "Gamma=1 collapse");
        const auto est = Json::parse(read_file(dir("estimate") + "/estimate.json"));
        const auto truth = true_bounds(2.0, 2.0, AnalyticDGP{});
        const double lo = est["estimate"]["psi_lower"].get<double>();
        const double hi = est["estimate"]["psi_upper"].get<double>();
        expect(est["estimate"]["ci_lower_bound"].get<double>() <= truth.first + 0.1 && lo <= hi &&
                   est["estimate"]["ci_upper_bound"].get<double>() >= truth.second - 0.1,
               "estimate near oracle");
    } catch (const std::exception& e) {
        failures.push_back(std::string("artifact parse: ") + e.what());
    }
    expect(run({"estimate", "--data", csv, "--no-such-flag"}) != 0, "unknown flag rejected");

    std::string detail = failures.empty() ? "5 commands replayed byte-identically" : "failed:";
    for (const auto& f : failures) detail += " [" + f + "]";
    if (!failures.empty() && !err.str().empty()) detail += " stderr: " + err.str().substr(0, 300);
    return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<int, std::function<Outcome()>>> all{
        {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4}, {5, criterion5},
        {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}};
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
    int failed = 0;
    for (const auto& [id, fn] : all) {
        if (!wanted.empty() && !wanted.count(id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << o.detail << " [" << fmt("%.1f", secs)
                  << " s]" << std::endl;
        if (!o.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
