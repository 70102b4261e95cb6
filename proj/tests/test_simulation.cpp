#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "incsens/numeric.hpp"
#include "incsens/simulation.hpp"

#include <cmath>

using namespace incsens;

TEST_CASE("generate draws from the analytic design") {
    CHECK_THROWS(generate(AnalyticDGP{}, 1, 1));
    const AnalyticDGP dgp;
    const auto a = generate(dgp, 50000, 61);
    const auto b = generate(dgp, 50000, 61);
    const auto c = generate(dgp, 50000, 62);
    CHECK(a[17].outcome == b[17].outcome);
    CHECK(a[17].covariates == b[17].covariates);
    CHECK(a[17].outcome != c[17].outcome);
    const double expected_treated = adaptive_simpson([](double x) { return logistic(x); }, 0.0, 1.0, 1e-12);
    CHECK(static_cast<double>(a.count_treated()) / 50000.0 == doctest::Approx(expected_treated).epsilon(0.02));
    std::vector<double> resid;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i].covariates[0];
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
        resid.push_back(a[i].outcome - (1.0 + a[i].treatment) * x);
    }
    CHECK(variance(resid) == doctest::Approx(0.25).epsilon(0.03));
    const auto shifted = generate(AnalyticDGP{-4.0, 3.0, uniform_noise_default()}, 2000, 63);
    for (std::size_t i = 0; i < shifted.size(); ++i) {
        CHECK(shifted[i].covariates[0] >= -4.0);
        CHECK(std::abs(shifted[i].outcome - (1.0 + shifted[i].treatment) * shifted[i].covariates[0]) <=
              0.5 * std::sqrt(3.0));
    }
}

TEST_CASE("bound geometry sweep") {
    std::vector<double> deltas;
    for (int i = 0; i <= 40; ++i) deltas.push_back(0.1 * std::pow(100.0, i / 40.0));
    const auto r = figure1_sweep({1.0, 2.0, 3.0}, deltas, 2.0);
    CHECK(r.rows.size() == 3 * 2 * 3 * deltas.size());
    REQUIRE(r.panels.size() == 3);
    CHECK(r.panels[0].pattern == LengthPattern::decreasing);
    for (const auto& p : r.panels) CHECK(p.uniform_encloses_gaussian);
    for (const auto& row : r.rows) {
        CHECK(row.psi_lower <= row.psi + 1e-12);
        CHECK(row.psi <= row.psi_upper + 1e-12);
        CHECK(row.length == doctest::Approx(row.psi_upper - row.psi_lower));
        if (row.gamma == 1.0) {
            CHECK(row.psi_lower == doctest::Approx(row.psi).epsilon(1e-12));
            CHECK(row.length == doctest::Approx(0.0).epsilon(1e-12));
        }
    }
    CHECK_THROWS(figure1_sweep({0.5}, deltas));
}

TEST_CASE("shift scores are reproducible and roughly standard normal") {
    for (bool quasi : {false, true}) {
        CHECK(shift_scores(3, 5, quasi) == shift_scores(3, 5, quasi));
        CHECK(shift_scores(3, 5, quasi) != shift_scores(3, 6, quasi));
        double s = 0.0;
        double ss = 0.0;
        const int reps = 4000;
        for (int r = 0; r < reps; ++r) {
            for (double z : shift_scores(11, static_cast<std::size_t>(r), quasi)) {
                s += z;
                ss += z * z;
            }
        }
        const double m = reps * static_cast<double>(kNoisedFunctionCount);
        CHECK(std::abs(s / m) < 0.02);
        CHECK(ss / m == doctest::Approx(1.0).epsilon(0.04));
    }
}

TEST_CASE("bias sweep rates") {
    SimConfig sc;
    sc.n = 1000;
    sc.reps = 200;
    sc.seed = 71;
    sc.alpha_grid = {0.1, 0.2, 0.3, 0.45};
    const auto t = bias_sweep(sc);
    CHECK(t.rows.size() == 2 * 2 * 4);
    for (BoundSide s : kBothSides) {
        const double dr = t.slope(EstimatorKind::dr, s);
        const double plug = t.slope(EstimatorKind::plugin, s);
        CHECK(dr / plug >= 1.3);
        CHECK(dr / plug <= 2.6);
    }
    for (const auto& row : t.rows) {
        CHECK(row.n == 1000);
        CHECK(row.mc_se > 0.0);
        CHECK(row.raw_mc_se > row.mc_se);
        if (row.estimator == EstimatorKind::plugin) {
            // First-order bias: a constant multiple of the shift size n^(-alpha).
            const double m = std::pow(1000.0, -row.alpha);
            CHECK(row.abs_bias > 0.05 * m);
            CHECK(row.abs_bias < 5.0 * m);
        }
        if (row.estimator == EstimatorKind::dr && row.alpha == 0.45) {
            CHECK(std::abs(row.raw_bias) < 3.0 * row.raw_mc_se);
        }
    }
    SimConfig bad = sc;
    bad.alpha_grid = {0.7};
    CHECK_THROWS(bias_sweep(bad));
    bad = sc;
    bad.reps = 0;
    CHECK_THROWS(bias_sweep(bad));
}

TEST_CASE("bias sweep without variance reduction agrees in sign and order") {
    SimConfig sc;
    sc.n = 1000;
    sc.reps = 400;
    sc.seed = 72;
    sc.alpha_grid = {0.1};
    sc.estimators = {EstimatorKind::plugin};
    const auto fast = bias_sweep(sc);
    const auto slow = bias_sweep(sc, {false, false});
    for (std::size_t i = 0; i < fast.rows.size(); ++i) {
        CHECK(std::abs(fast.rows[i].abs_bias - slow.rows[i].abs_bias) <
              4.0 * std::hypot(fast.rows[i].mc_se, slow.rows[i].mc_se));
    }
}

TEST_CASE("coverage with exact nuisances") {
    CoverageConfig cc;
    cc.n = 1000;
    cc.reps = 300;
    cc.seed = 82;
    const auto r = coverage_study(cc);
    CHECK(r.reps.size() == 300);
    CHECK(r.truth_lower == doctest::Approx(0.8372227370).epsilon(1e-9));
    CHECK(r.truth_upper == doctest::Approx(0.9558614582).epsilon(1e-9));
    CHECK(r.coverage_lower >= 0.91);
    CHECK(r.coverage_upper >= 0.91);
    CHECK(r.coverage_se_lower == doctest::Approx(std::sqrt(r.coverage_lower * (1.0 - r.coverage_lower) / 300.0)));
    CHECK(r.mean_width_lower > 0.0);
    cc.n = 1;
    CHECK_THROWS(coverage_study(cc));
    cc.n = 1000;
    cc.nuisance = CoverageNuisance::noised;
    cc.alpha = 0.6;
    CHECK_THROWS(coverage_study(cc));
}

TEST_CASE("coverage with noised nuisances at alpha = 0.25 reaches 0.92") {
    CoverageConfig cc;
    cc.n = 1000;
    cc.reps = 400;
    cc.seed = 81;
    cc.nuisance = CoverageNuisance::noised;
    cc.alpha = 0.25;
    const auto r = coverage_study(cc);
    CHECK(r.coverage_lower >= 0.92);
    CHECK(r.coverage_upper >= 0.92);
}

TEST_CASE("coverage with noised nuisances at alpha = 0.05 degrades") {
    CoverageConfig cc;
    cc.n = 1000;
    cc.reps = 400;
    cc.seed = 81;
    cc.nuisance = CoverageNuisance::noised;
    cc.alpha = 0.05;
    const auto r = coverage_study(cc);
    CHECK(std::min(r.coverage_lower, r.coverage_upper) < 0.90);
}
