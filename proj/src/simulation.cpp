#include "incsens/simulation.hpp"

#include "incsens/numeric.hpp"
#include "incsens/parallel.hpp"
#include "incsens/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace incsens {

namespace {

constexpr std::array<std::uint64_t, kNoisedFunctionCount> kHaltonBases{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31};
constexpr std::uint64_t kHaltonRotationStream = 0x48414C544F4EULL;

double radical_inverse(std::uint64_t index, std::uint64_t base) {
    double inv = 1.0 / static_cast<double>(base);
    double f = inv;
    double r = 0.0;
    while (index > 0) {
        r += f * static_cast<double>(index % base);
        index /= base;
        f *= inv;
    }
    return r;
}

double mc_se(const std::vector<double>& v) {
    return v.size() > 1 ? std::sqrt(variance(v) / static_cast<double>(v.size())) : 0.0;
}

}  // namespace

Dataset generate(const AnalyticDGP& dgp, std::size_t n, std::uint64_t seed) {
    dgp.validate();
    if (n < 2) throw std::invalid_argument("generate needs n >= 2");
    Rng rng(seed);
    std::vector<UnitRecord> records;
    records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = rng.uniform(dgp.x_lo, dgp.x_hi);
        const int a = rng.bernoulli(dgp.propensity(x)) ? 1 : 0;
        const double eps = dgp.noise.kind == NoiseKind::gaussian ? rng.normal(0.0, dgp.noise.scale)
                                                                 : rng.uniform(-dgp.noise.scale, dgp.noise.scale);
        records.push_back({{x}, a, dgp.mu(a, x) + eps});
    }
    return Dataset(std::move(records), {"x"});
}

std::vector<Figure1Panel> figure1_panels() {
    return {{"unif_0_1", 0.0, 1.0}, {"unif_m1_0", -1.0, 0.0}, {"unif_m4_3", -4.0, 3.0}};
}

NoiseSpec gaussian_noise_default() { return {NoiseKind::gaussian, 0.5}; }
NoiseSpec uniform_noise_default() { return {NoiseKind::uniform, 0.5 * std::sqrt(3.0)}; }

Figure1Result figure1_sweep(const std::vector<double>& gammas, const std::vector<double>& deltas,
                            double classify_gamma) {
    ParamGrid grid(deltas, gammas);  // validates both grids
    Figure1Result result;
    for (const auto& panel : figure1_panels()) {
        AnalyticDGP gauss{panel.x_lo, panel.x_hi, gaussian_noise_default()};
        AnalyticDGP unif{panel.x_lo, panel.x_hi, uniform_noise_default()};
        bool encloses = true;
        for (double g : grid.gammas()) {
            const OracleTruth tg(gauss, g);
            const OracleTruth tu(unif, g);
            for (double d : grid.deltas()) {
                const double psi = tg.psi(d);
                const auto bg = tg.bounds(d);
                const auto bu = tu.bounds(d);
                result.rows.push_back({panel.name, "gaussian", g, d, psi, bg.first, bg.second, bg.second - bg.first});
                result.rows.push_back({panel.name, "uniform", g, d, psi, bu.first, bu.second, bu.second - bu.first});
                if (g > 1.0 && !(bu.first < bg.first && bu.second > bg.second)) encloses = false;
            }
        }
        result.panels.push_back({panel.name, classify_length_pattern(gauss, classify_gamma, grid.deltas()), encloses});
    }
    return result;
}

std::string to_string(EstimatorKind e) { return e == EstimatorKind::plugin ? "plugin" : "dr"; }

void SimConfig::validate() const {
    dgp.validate();
    if (n < 2) throw std::invalid_argument("simulation sample size must be >= 2");
    if (reps < 1) throw std::invalid_argument("simulation needs at least one replication");
    if (alpha_grid.empty()) throw std::invalid_argument("alpha grid is empty");
    for (double a : alpha_grid) {
        if (!(a > 0.0) || a > 0.5) throw std::invalid_argument("alpha values must lie in (0, 0.5]");
    }
    SensitivityParams(delta, gamma);
    if (estimators.empty()) throw std::invalid_argument("no estimators selected");
}

double BiasTable::slope(EstimatorKind e, BoundSide side) const {
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& r : rows) {
        if (r.estimator != e || r.side != side) continue;
        x.push_back(r.alpha * std::log(static_cast<double>(r.n)));
        y.push_back(std::log(r.abs_bias));
    }
    if (x.size() < 2) throw std::invalid_argument("slope needs at least two alpha values");
    return fit_line(x, y).slope;
}

NoiseScores shift_scores(std::uint64_t seed, std::size_t rep, bool quasi_random) {
    NoiseScores z{};
    if (!quasi_random) {
        Rng rng(derive_seed(seed, 2 * rep + 1));
        for (auto& v : z) v = rng.normal();
        return z;
    }
    Rng rotation(derive_seed(seed, kHaltonRotationStream));
    for (std::size_t f = 0; f < kNoisedFunctionCount; ++f) {
        double u = radical_inverse(rep + 1, kHaltonBases[f]) + rotation.uniform();
        u -= std::floor(u);
        u = std::clamp(u, 1e-12, 1.0 - 1e-12);
        z[f] = normal_quantile(u);
    }
    return z;
}

BiasTable bias_sweep(const SimConfig& config, const BiasSweepOptions& options) {
    config.validate();
    const double delta = config.delta;
    const double gamma = config.gamma;
    const auto truth = OracleTruth(config.dgp, gamma).bounds(delta);
    const FittedNuisanceSet exact = truth_nuisances(config.dgp, gamma);
    const std::size_t A = config.alpha_grid.size();
    const std::size_t E = config.estimators.size();
    // diff[rep][alpha][estimator][side] and raw[...] with the same layout.
    const std::size_t cells = A * E * 2;
    std::vector<std::vector<double>> diff(config.reps, std::vector<double>(cells));
    std::vector<std::vector<double>> raw(config.reps, std::vector<double>(cells));
    auto cell = [&](std::size_t a, std::size_t e, int s) { return (a * E + e) * 2 + static_cast<std::size_t>(s); };

    parallel_for(config.reps, [&](std::size_t rep) {
        const Dataset data = generate(config.dgp, config.n, derive_seed(config.seed, 2 * rep));
        const auto z = shift_scores(config.seed, rep, options.quasi_random_shifts);
        const auto exact_units = evaluate_units(data, exact);
        std::vector<BoundEstimate> at_truth(E);
        for (std::size_t e = 0; e < E; ++e) {
            at_truth[e] = config.estimators[e] == EstimatorKind::plugin
                              ? plugin_bounds(exact_units, delta, gamma)
                              : estimate_from_if(influence_values(data, exact_units, delta, gamma), 0.95);
        }
        for (std::size_t a = 0; a < A; ++a) {
            const double m = std::pow(static_cast<double>(config.n), -config.alpha_grid[a]);
            const auto noised = shifted_truth_nuisances(config.dgp, gamma, m, z);
            const auto units = evaluate_units(data, noised);
            for (std::size_t e = 0; e < E; ++e) {
                const BoundEstimate est = config.estimators[e] == EstimatorKind::plugin
                                              ? plugin_bounds(units, delta, gamma)
                                              : estimate_from_if(influence_values(data, units, delta, gamma), 0.95);
                for (BoundSide s : kBothSides) {
                    const int k = side_index(s);
                    const double t = s == BoundSide::lower ? truth.first : truth.second;
                    raw[rep][cell(a, e, k)] = est.psi(s) - t;
                    diff[rep][cell(a, e, k)] =
                        options.control_variate ? est.psi(s) - at_truth[e].psi(s) : est.psi(s) - t;
                }
            }
        }
    });

    BiasTable table;
    for (std::size_t a = 0; a < A; ++a) {
        for (std::size_t e = 0; e < E; ++e) {
            for (BoundSide s : kBothSides) {
                const std::size_t c = cell(a, e, side_index(s));
                std::vector<double> d(config.reps);
                std::vector<double> r(config.reps);
                for (std::size_t rep = 0; rep < config.reps; ++rep) {
                    d[rep] = diff[rep][c];
                    r[rep] = raw[rep][c];
                }
                BiasRow row;
                row.estimator = config.estimators[e];
                row.side = s;
                row.alpha = config.alpha_grid[a];
                row.n = config.n;
                row.abs_bias = std::abs(mean(d));
                row.mc_se = mc_se(d);
                row.raw_bias = mean(r);
                row.raw_mc_se = mc_se(r);
                table.rows.push_back(row);
            }
        }
    }
    return table;
}

void CoverageConfig::validate() const {
    dgp.validate();
    if (n < 2) throw std::invalid_argument("coverage sample size must be >= 2");
    if (reps < 1) throw std::invalid_argument("coverage study needs at least one replication");
    if (!(ci_level > 0.0 && ci_level < 1.0)) throw std::invalid_argument("ci level must lie in (0,1)");
    SensitivityParams(delta, gamma);
    if (nuisance == CoverageNuisance::noised && (!(alpha > 0.0) || alpha > 0.5)) {
        throw std::invalid_argument("alpha must lie in (0, 0.5]");
    }
}

CoverageResult coverage_study(const CoverageConfig& config) {
    config.validate();
    const auto truth = OracleTruth(config.dgp, config.gamma).bounds(config.delta);
    CoverageResult result;
    result.truth_lower = truth.first;
    result.truth_upper = truth.second;
    result.reps.resize(config.reps);
    const FittedNuisanceSet exact = truth_nuisances(config.dgp, config.gamma);
    parallel_for(config.reps, [&](std::size_t rep) {
        const Dataset data = generate(config.dgp, config.n, derive_seed(config.seed, 2 * rep));
        const FittedNuisanceSet eta =
            config.nuisance == CoverageNuisance::exact
                ? exact
                : noised_truth_nuisances(config.dgp, config.alpha, config.n, config.gamma,
                                         derive_seed(config.seed, 2 * rep + 1));
        const auto units = evaluate_units(data, eta);
        CoverageRep r;
        r.dr = estimate_from_if(influence_values(data, units, config.delta, config.gamma), config.ci_level);
        r.plugin = plugin_bounds(units, config.delta, config.gamma, config.ci_level);
        r.envelope = mixture_envelope(units);
        const auto lo = r.dr.side_interval(BoundSide::lower);
        const auto hi = r.dr.side_interval(BoundSide::upper);
        r.covered_lower = lo.first <= truth.first && truth.first <= lo.second;
        r.covered_upper = hi.first <= truth.second && truth.second <= hi.second;
        result.reps[rep] = r;
    });
    std::vector<double> cl;
    std::vector<double> cu;
    double wl = 0.0;
    double wu = 0.0;
    for (const auto& r : result.reps) {
        cl.push_back(r.covered_lower ? 1.0 : 0.0);
        cu.push_back(r.covered_upper ? 1.0 : 0.0);
        const auto lo = r.dr.side_interval(BoundSide::lower);
        const auto hi = r.dr.side_interval(BoundSide::upper);
        wl += lo.second - lo.first;
        wu += hi.second - hi.first;
    }
    const double R = static_cast<double>(config.reps);
    result.coverage_lower = mean(cl);
    result.coverage_upper = mean(cu);
    result.coverage_se_lower = std::sqrt(result.coverage_lower * (1.0 - result.coverage_lower) / R);
    result.coverage_se_upper = std::sqrt(result.coverage_upper * (1.0 - result.coverage_upper) / R);
    result.mean_width_lower = wl / R;
    result.mean_width_upper = wu / R;
    return result;
}

}  // namespace incsens
