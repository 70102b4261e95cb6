#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "incsens/lp.hpp"
#include "incsens/t2_bounds.hpp"
#include "incsens/t2_model.hpp"

#include <cmath>

using namespace incsens;

namespace {

double mean_y(const DiscreteT2Model& m, std::size_t i, std::size_t j, int a1, int a2) {
    double s = 0.0;
    for (std::size_t k = 0; k < m.ny(); ++k) {
        s += m.p_y[i][j][static_cast<std::size_t>(a1)][static_cast<std::size_t>(a2)][k] * m.y_support[k];
    }
    return s;
}

double total_ipw(const LambdaTables& t, double delta, const DiscreteT2Model& m, const T2Options& o = {}) {
    double s = 0.0;
    for (TreatmentPath p : kPaths) s += f_ipw(t.paths[p.index()], p, delta, m, o);
    return s;
}

}  // namespace

TEST_CASE("linear programs") {
    SUBCASE("known optimum") {
        // max 3x + 2y with x + y <= 4, x + 3y <= 6 written with slacks.
        LinearProgram lp;
        lp.c = {3.0, 2.0, 0.0, 0.0};
        lp.A = {{1.0, 1.0, 1.0, 0.0}, {1.0, 3.0, 0.0, 1.0}};
        lp.b = {4.0, 6.0};
        lp.lo = {0.0, 0.0, 0.0, 0.0};
        lp.hi = {10.0, 10.0, 10.0, 10.0};
        const auto r = solve_lp(lp);
        REQUIRE(r.status == LpStatus::optimal);
        CHECK(r.value == doctest::Approx(12.0).epsilon(1e-12));
        CHECK(r.x[0] == doctest::Approx(4.0).epsilon(1e-12));
        CHECK(r.x[1] == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("infeasible") {
        LinearProgram lp;
        lp.c = {1.0, 1.0};
        lp.A = {{1.0, 1.0}};
        lp.b = {5.0};
        lp.lo = {0.0, 0.0};
        lp.hi = {1.0, 1.0};
        CHECK(solve_lp(lp).status == LpStatus::infeasible);
    }
    SUBCASE("redundant rows and negative bounds") {
        LinearProgram lp;
        lp.c = {1.0, 0.0};
        lp.A = {{1.0, 1.0}, {2.0, 2.0}};
        lp.b = {1.0, 2.0};
        lp.lo = {-1.0, -1.0};
        lp.hi = {0.7, 3.0};
        const auto r = solve_lp(lp);
        REQUIRE(r.status == LpStatus::optimal);
        CHECK(r.value == doctest::Approx(0.7).epsilon(1e-12));
        CHECK(r.x[1] == doctest::Approx(0.3).epsilon(1e-12));
    }
}

TEST_CASE("stage and path tilt probabilities") {
    CHECK(stage_tilt_prob(0.3, 1, 1.0) == doctest::Approx(0.3));
    CHECK(stage_tilt_prob(0.3, 0, 1.0) == doctest::Approx(0.7));
    CHECK(stage_tilt_prob(0.5, 1, 2.0) == doctest::Approx(2.0 / 3.0));
    CHECK(stage_tilt_prob(0.3, 1, 1e12) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(stage_tilt_prob(0.3, 0, 1e12) == doctest::Approx(0.0).epsilon(1e-9));
    const auto m = random_t2_model(3);
    const History2 h{1, 1, 0};
    const double expected = stage_tilt_prob(m.pi1[1], 1, 2.0) * stage_tilt_prob(m.pi2[1][1][0], 0, 2.0);
    CHECK(tilt_path_prob({1, 0}, h, 2.0, m) == doctest::Approx(expected).epsilon(1e-14));
    double total = 0.0;
    for (std::size_t i = 0; i < m.n1(); ++i) {
        for (TreatmentPath p : kPaths) total += tilt_path_prob(p, {i, p.a1, 1}, 0.7, m);
    }
    CHECK(total == doctest::Approx(static_cast<double>(m.n1())).epsilon(1e-13));
}

TEST_CASE("rho weights") {
    auto m = random_t2_model(4);
    m.pi2[0][1][1] = 0.5;
    for (TreatmentPath p : kPaths) {
        for (RhoWeight w : {RhoWeight::stage2_path, RhoWeight::stage1_literal}) {
            CHECK(rho(m, p, 0, 1, 1.0, w) == doctest::Approx(1.0).epsilon(1e-15));
        }
    }
    CHECK(rho_weight(m, {1, 1}, 0, 1, RhoWeight::stage2_path) == 0.5);
    CHECK(rho(m, {1, 1}, 0, 1, 2.0, RhoWeight::stage2_path) == doctest::Approx(1.5));
    CHECK(rho_weight(m, {0, 1}, 1, 0, RhoWeight::stage1_literal) == m.pi1[1]);
}

TEST_CASE("compatibility residuals") {
    const auto m = random_t2_model(5);
    auto t = LambdaTables::ones(m, 2.0, 2.0);
    CHECK(check_compatibility(t, m).max_residual() <= 1e-15);
    CHECK(check_compatibility(t, m).feasible());
    t.paths[3].lambda2[0][0][0] += 0.1;
    const auto bad = check_compatibility(t, m);
    CHECK_FALSE(bad.feasible());
    CHECK(bad.max_residual() > 1e-3);
    CHECK(bad.max_residual() <= 0.1 + 1e-12);
    auto box = LambdaTables::ones(m, 2.0, 2.0);
    box.paths[0].lambda1[0][0] = 3.0;
    CHECK(check_compatibility(box, m).max_box_violation == doctest::Approx(1.0));
}

TEST_CASE("weighted objective at unit lambdas is the g-formula") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto m = random_t2_model(20 + s, 2, 3, 3);
        const auto ones = LambdaTables::ones(m, 1.0, 1.0);
        for (double d : {0.4, 1.0, 3.0}) {
            CHECK(total_ipw(ones, d, m) == doctest::Approx(gformula_point(m, d)).epsilon(1e-12));
        }
    }
}

TEST_CASE("objective is linear in the outcome") {
    auto m = random_t2_model(6);
    const auto t = LambdaTables::ones(m, 2.0, 2.0);
    const double base = total_ipw(t, 2.0, m);
    auto doubled = m;
    for (double& y : doubled.y_support) y *= 2.0;
    CHECK(total_ipw(t, 2.0, doubled) == doctest::Approx(2.0 * base));
    auto zero = m;
    for (double& y : zero.y_support) y = 0.0;
    CHECK(total_ipw(t, 2.0, zero) == 0.0);
    CHECK(gformula_point(zero, 2.0) == 0.0);
}

TEST_CASE("g-formula limits") {
    const auto m = random_t2_model(7, 2, 2, 3);
    double observed = 0.0;
    double treated = 0.0;
    for (std::size_t i = 0; i < m.n1(); ++i) {
        for (int a1 = 0; a1 < 2; ++a1) {
            for (std::size_t j = 0; j < m.n2(); ++j) {
                for (int a2 = 0; a2 < 2; ++a2) {
                    observed += m.p_x1[i] * m.stage1_prob(i, a1) * m.p_x2[i][static_cast<std::size_t>(a1)][j] *
                                m.stage2_prob(i, a1, j, a2) * mean_y(m, i, j, a1, a2);
                }
            }
        }
        for (std::size_t j = 0; j < m.n2(); ++j) treated += m.p_x1[i] * m.p_x2[i][1][j] * mean_y(m, i, j, 1, 1);
    }
    CHECK(gformula_point(m, 1.0) == doctest::Approx(observed).epsilon(1e-13));
    CHECK(gformula_point(m, 1e12) == doctest::Approx(treated).epsilon(1e-9));
}

TEST_CASE("sharp bounds collapse, widen and stay compatible") {
    for (std::uint64_t s = 0; s < 4; ++s) {
        const auto m = random_t2_model(40 + s);
        const double g = gformula_point(m, 2.0);
        CHECK(sharp_bounds(m, 2.0, 1.0, 1.0, BoundSide::lower).value == doctest::Approx(g).epsilon(1e-10));
        CHECK(sharp_bounds(m, 2.0, 1.0, 1.0, BoundSide::upper).value == doctest::Approx(g).epsilon(1e-10));
        double prev = g;
        for (double L2 : {1.5, 2.0, 3.0}) {
            const auto up = sharp_bounds(m, 2.0, 1.5, L2, BoundSide::upper);
            CHECK(up.value >= prev - 1e-12);
            CHECK(up.compatibility.max_residual() <= 1e-9);
            double sum = 0.0;
            for (double v : up.path_values) sum += v;
            CHECK(sum == doctest::Approx(up.value).epsilon(1e-12));
            CHECK(total_ipw(up.lambdas, 2.0, m) == doctest::Approx(up.value).epsilon(1e-10));
            prev = up.value;
        }
        const auto lo = sharp_bounds(m, 2.0, 2.0, 2.0, BoundSide::lower);
        CHECK(lo.value <= g);
        CHECK(lo.compatibility.max_residual() <= 1e-9);
    }
    CHECK_THROWS(sharp_bounds(random_t2_model(1), 2.0, 0.5, 2.0, BoundSide::upper));
}

TEST_CASE("brute force agrees with the solver") {
    const auto m = random_t2_model(50);
    const double g = gformula_point(m, 2.0);
    const auto one = brute_force_bounds(m, 2.0, 1.0, 1.0, 0.05);
    CHECK(one.lower == doctest::Approx(g).epsilon(1e-10));
    CHECK(one.upper == doctest::Approx(g).epsilon(1e-10));
    const auto bf = brute_force_bounds(m, 2.0, 2.0, 2.0, 0.02);
    const double lo = sharp_bounds(m, 2.0, 2.0, 2.0, BoundSide::lower).value;
    const double hi = sharp_bounds(m, 2.0, 2.0, 2.0, BoundSide::upper).value;
    CHECK(bf.feasible_points > 0);
    CHECK(lo <= bf.lower + 1e-9);
    CHECK(bf.upper <= hi + 1e-9);
    CHECK(bf.lower <= g);
    CHECK(g <= bf.upper);
    CHECK(hi - bf.upper < 0.02);
    CHECK(bf.lower - lo < 0.02);
    CHECK_THROWS(brute_force_bounds(random_t2_model(1, 3, 3, 3), 2.0, 2.0, 2.0, 0.1));
}

TEST_CASE("model serialization and validation") {
    const auto m = random_t2_model(60, 2, 3, 2);
    const auto text = t2_model_to_json(m);
    const auto back = parse_t2_model(text);
    CHECK(t2_model_to_json(back) == text);
    CHECK(back.y_support == m.y_support);
    CHECK(back.p_y == m.p_y);
    auto bad = m;
    bad.p_x1[0] += 0.01;
    CHECK_THROWS(bad.validate());
    bad = m;
    bad.pi2[0][0][0] = 1.0;
    CHECK_THROWS(bad.validate());
    CHECK_THROWS(parse_t2_model("{}"));
    CHECK_THROWS(parse_t2_model("not json"));
    const auto neg = m.negated_outcome();
    CHECK(gformula_point(neg, 1.5) == doctest::Approx(-gformula_point(m, 1.5)));
}
