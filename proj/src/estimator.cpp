#include "incsens/estimator.hpp"

#include "incsens/conditional_bounds.hpp"
#include "incsens/numeric.hpp"
#include "incsens/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace incsens {

namespace {

constexpr double kFeasibleSlack = 1e-12;

void require_delta(double delta) {
    if (!std::isfinite(delta) || delta <= 0.0) throw std::invalid_argument("delta must be a finite positive real");
}

void require_level(double level) {
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("ci level must lie in (0,1)");
}

void require_finite_nuisance(const UnitNuisance& u) {
    bool ok = std::isfinite(u.pi) && std::isfinite(u.mu[0]) && std::isfinite(u.mu[1]);
    for (int a = 0; a < 2; ++a) {
        for (int s = 0; s < 2; ++s) ok = ok && std::isfinite(u.theta[a][s]) && std::isfinite(u.nu[a][s]);
    }
    if (!ok) throw std::domain_error("non-finite nuisance evaluation");
}

double wald_z(double level) { return normal_quantile(0.5 + 0.5 * level); }

double sd_of(const std::vector<double>& v) { return v.size() > 1 ? std::sqrt(variance(v)) : 0.0; }

double fold_averaged_mean(const std::vector<double>& v, const std::vector<int>& fold) {
    if (fold.empty()) return mean(v);
    std::map<int, std::pair<double, std::size_t>> acc;
    for (std::size_t i = 0; i < v.size(); ++i) {
        auto& a = acc[fold[i]];
        a.first += v[i];
        a.second += 1;
    }
    double total = 0.0;
    for (const auto& [k, a] : acc) total += a.first / static_cast<double>(a.second);
    return total / static_cast<double>(acc.size());
}

/// Max of lower minus min of upper: nonpositive iff a horizontal line fits.
double overlap_gap(const std::vector<double>& lower, const std::vector<double>& upper) {
    return *std::max_element(lower.begin(), lower.end()) - *std::min_element(upper.begin(), upper.end());
}

double overlap_midpoint(const std::vector<double>& lower, const std::vector<double>& upper) {
    return 0.5 * (*std::max_element(lower.begin(), lower.end()) + *std::min_element(upper.begin(), upper.end()));
}

}  // namespace

std::pair<double, double> BoundEstimate::side_interval(BoundSide s) const {
    const double half = wald_z(ci_level) * sigma(s) / std::sqrt(static_cast<double>(n));
    return {psi(s) - half, psi(s) + half};
}

double evaluate_if(const UnitRecord& record, const UnitNuisance& eta, double delta, double gamma, BoundSide side) {
    require_delta(delta);
    require_finite_nuisance(eta);
    const int s = side_index(side);
    const double tilt = side_tilt(gamma, side);
    const double pi = eta.pi;
    const double A = record.treatment;
    const double Y = record.outcome;
    const double th1 = eta.theta[1][s];
    const double th0 = eta.theta[0][s];
    const double D = delta * pi + 1.0 - pi;

    double value = (delta * pi * (A * Y + (1.0 - A) * th1) + (1.0 - pi) * ((1.0 - A) * Y + A * th0)) / D;
    if (record.treatment == 1) value += delta * (1.0 - pi) / D * f_theta(Y, th1, tilt) / eta.nu[1][s];
    else value += pi / D * f_theta(Y, th0, tilt) / eta.nu[0][s];
    value += delta * (A - pi) / (D * D) * (pi * eta.mu[1] + (1.0 - pi) * th1 - (1.0 - pi) * eta.mu[0] - pi * th0);
    if (!std::isfinite(value)) throw std::domain_error("non-finite influence function value");
    return value;
}

double evaluate_if(const UnitRecord& record, const FittedNuisanceSet& eta, double delta, double gamma,
                   BoundSide side) {
    return evaluate_if(record, eta.evaluate(record.covariates), delta, gamma, side);
}

double plugin_integrand(const UnitNuisance& eta, double delta, BoundSide side) {
    require_finite_nuisance(eta);
    const int s = side_index(side);
    const double pi = eta.pi;
    const double q = tilt_propensity(pi, delta);
    return q * (pi * eta.mu[1] + (1.0 - pi) * eta.theta[1][s]) +
           (1.0 - q) * ((1.0 - pi) * eta.mu[0] + pi * eta.theta[0][s]);
}

std::vector<CrossFitNuisances> cross_fit(const Dataset& data, const LearnerSpec& spec, std::size_t K,
                                         const std::vector<double>& gammas, std::uint64_t seed) {
    spec.validate();
    if (gammas.empty()) throw std::invalid_argument("cross_fit needs at least one gamma");
    const FoldPlan plan = make_fold_plan(data.size(), K, seed);
    std::vector<CrossFitNuisances> out(gammas.size());
    for (std::size_t g = 0; g < gammas.size(); ++g) {
        out[g].plan = plan;
        out[g].gamma = gammas[g];
        out[g].per_fold.resize(K);
    }
    parallel_for(K, [&](std::size_t k) {
        PropensityOutcomeFit base;
        try {
            base = fit_propensity_outcome(data.subset(plan.training(k)), spec);
        } catch (const std::exception& e) {
            throw std::runtime_error("nuisance fit for fold " + std::to_string(k) + ": " + e.what());
        }
        for (std::size_t g = 0; g < gammas.size(); ++g) {
            out[g].per_fold[k] = attach_bound_fields(base, data, plan, k, gammas[g], spec);
        }
    });
    return out;
}

std::vector<UnitNuisance> evaluate_units(const Dataset& data, const CrossFitNuisances& fit) {
    if (fit.plan.n != data.size()) throw std::invalid_argument("cross-fit plan does not match the dataset");
    std::vector<UnitNuisance> units(data.size());
    parallel_for(fit.plan.K, [&](std::size_t k) {
        for (std::size_t i : fit.plan.members(k)) units[i] = fit.per_fold[k].evaluate(data[i].covariates);
    });
    return units;
}

std::vector<UnitNuisance> evaluate_units(const Dataset& data, const FittedNuisanceSet& eta) {
    std::vector<UnitNuisance> units(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) units[i] = eta.evaluate(data[i].covariates);
    return units;
}

IFValues influence_values(const Dataset& data, std::span<const UnitNuisance> units, double delta, double gamma,
                          std::span<const int> fold) {
    if (units.size() != data.size()) throw std::invalid_argument("nuisance count does not match the dataset");
    IFValues out;
    out.lower.resize(data.size());
    out.upper.resize(data.size());
    out.fold.assign(fold.begin(), fold.end());
    for (std::size_t i = 0; i < data.size(); ++i) {
        out.lower[i] = evaluate_if(data[i], units[i], delta, gamma, BoundSide::lower);
        out.upper[i] = evaluate_if(data[i], units[i], delta, gamma, BoundSide::upper);
    }
    return out;
}

BoundEstimate estimate_from_if(const IFValues& values, double ci_level) {
    require_level(ci_level);
    if (values.lower.size() < 2 || values.lower.size() != values.upper.size()) {
        throw std::invalid_argument("influence values need at least two units per side");
    }
    BoundEstimate e;
    e.n = values.lower.size();
    e.ci_level = ci_level;
    e.psi_lower = fold_averaged_mean(values.lower, values.fold);
    e.psi_upper = fold_averaged_mean(values.upper, values.fold);
    e.sigma_lower = sd_of(values.lower);
    e.sigma_upper = sd_of(values.upper);
    const double z = wald_z(ci_level);
    const double rn = std::sqrt(static_cast<double>(e.n));
    e.ci_lower_bound = e.psi_lower - z * e.sigma_lower / rn;
    e.ci_upper_bound = e.psi_upper + z * e.sigma_upper / rn;
    return e;
}

BoundEstimate estimate_bounds(const Dataset& data, const LearnerSpec& spec, std::size_t K, double delta, double gamma,
                              double ci_level, std::uint64_t seed) {
    require_delta(delta);
    require_level(ci_level);
    const auto fits = cross_fit(data, spec, K, {gamma}, seed);
    const auto units = evaluate_units(data, fits.front());
    return estimate_from_if(influence_values(data, units, delta, gamma, fits.front().plan.fold_of), ci_level);
}

BoundEstimate estimate_bounds(const Dataset& data, const FittedNuisanceSet& eta, double delta, double ci_level) {
    const auto units = evaluate_units(data, eta);
    return estimate_from_if(influence_values(data, units, delta, eta.gamma), ci_level);
}

BoundEstimate plugin_bounds(std::span<const UnitNuisance> units, double delta, double gamma, double ci_level) {
    require_delta(delta);
    (void)gamma;
    IFValues v;
    for (const auto& u : units) {
        v.lower.push_back(plugin_integrand(u, delta, BoundSide::lower));
        v.upper.push_back(plugin_integrand(u, delta, BoundSide::upper));
    }
    return estimate_from_if(v, ci_level);
}

BoundEstimate plugin_bounds(const Dataset& data, const FittedNuisanceSet& eta, double delta, double ci_level) {
    const auto units = evaluate_units(data, eta);
    return plugin_bounds(units, delta, eta.gamma, ci_level);
}

IncrementalCurve curve(const Dataset& data, const LearnerSpec& spec, const ParamGrid& grid, std::size_t K,
                       double ci_level, std::uint64_t seed) {
    require_level(ci_level);
    std::vector<double> gammas = grid.gammas();
    const bool has_one = gammas.front() == 1.0;
    if (!has_one) gammas.insert(gammas.begin(), 1.0);
    const auto fits = cross_fit(data, spec, K, gammas, seed);
    IncrementalCurve c{grid, {}, {}};
    for (std::size_t g = 0; g < gammas.size(); ++g) {
        const auto units = evaluate_units(data, fits[g]);
        std::vector<BoundEstimate> row;
        for (double d : grid.deltas()) {
            row.push_back(estimate_from_if(influence_values(data, units, d, gammas[g], fits[g].plan.fold_of), ci_level));
        }
        if (g == 0) c.point = row;
        if (g > 0 || has_one) c.estimates.push_back(std::move(row));
    }
    return c;
}

BoundTable point_table(const IncrementalCurve& c) {
    BoundTable t;
    t.gammas = c.grid.gammas();
    for (const auto& row : c.estimates) {
        std::vector<double> lo;
        std::vector<double> hi;
        for (const auto& e : row) {
            lo.push_back(e.psi_lower);
            hi.push_back(e.psi_upper);
        }
        t.lower.push_back(std::move(lo));
        t.upper.push_back(std::move(hi));
    }
    return t;
}

BoundTable ci_table(const IncrementalCurve& c) {
    BoundTable t;
    t.gammas = c.grid.gammas();
    for (const auto& row : c.estimates) {
        std::vector<double> lo;
        std::vector<double> hi;
        for (const auto& e : row) {
            lo.push_back(e.ci_lower_bound);
            hi.push_back(e.ci_upper_bound);
        }
        t.lower.push_back(std::move(lo));
        t.upper.push_back(std::move(hi));
    }
    return t;
}

RobustnessResult robustness_gamma(
    const std::function<std::pair<std::vector<double>, std::vector<double>>(double)>& bounds_at,
    const std::vector<double>& gamma_grid, double tol) {
    if (gamma_grid.empty()) throw std::invalid_argument("robustness search needs a gamma grid");
    for (std::size_t g = 1; g < gamma_grid.size(); ++g) {
        if (!(gamma_grid[g] > gamma_grid[g - 1])) throw std::invalid_argument("gamma grid must be increasing");
    }
    auto gap_at = [&](double gamma) {
        const auto [lo, hi] = bounds_at(gamma);
        if (lo.empty() || lo.size() != hi.size()) throw std::invalid_argument("bounds must share one delta grid");
        return overlap_gap(lo, hi);
    };
    std::size_t first = gamma_grid.size();
    for (std::size_t g = 0; g < gamma_grid.size(); ++g) {
        if (gap_at(gamma_grid[g]) <= kFeasibleSlack) {
            first = g;
            break;
        }
    }
    RobustnessResult r;
    if (first == gamma_grid.size()) {
        std::ostringstream os;
        os << "effect robust beyond grid: no horizontal line fits between the bounds for gamma <= "
           << gamma_grid.back();
        r.message = os.str();
        return r;
    }
    double hi = gamma_grid[first];
    if (first > 0) {
        double lo = gamma_grid[first - 1];
        while (hi - lo > tol) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (gap_at(mid) <= kFeasibleSlack) hi = mid;
            else lo = mid;
        }
    }
    const auto [lo_b, hi_b] = bounds_at(hi);
    r.found = true;
    r.gamma_star = hi;
    r.witness = overlap_midpoint(lo_b, hi_b);
    std::ostringstream os;
    os << "bounds admit a constant effect from gamma " << r.gamma_star;
    r.message = os.str();
    return r;
}

RobustnessResult robustness_gamma(const BoundTable& table) {
    const std::size_t G = table.gammas.size();
    if (G == 0 || table.lower.size() != G || table.upper.size() != G) {
        throw std::invalid_argument("bound table rows must match the gamma grid");
    }
    auto bounds_at = [&](double gamma) -> std::pair<std::vector<double>, std::vector<double>> {
        auto it = std::lower_bound(table.gammas.begin(), table.gammas.end(), gamma);
        if (it == table.gammas.end()) return {table.lower.back(), table.upper.back()};
        const auto g = static_cast<std::size_t>(it - table.gammas.begin());
        if (*it == gamma || g == 0) return {table.lower[g], table.upper[g]};
        const double w = (gamma - table.gammas[g - 1]) / (table.gammas[g] - table.gammas[g - 1]);
        std::vector<double> lo(table.lower[g].size());
        std::vector<double> hi(lo.size());
        for (std::size_t d = 0; d < lo.size(); ++d) {
            lo[d] = (1.0 - w) * table.lower[g - 1][d] + w * table.lower[g][d];
            hi[d] = (1.0 - w) * table.upper[g - 1][d] + w * table.upper[g][d];
        }
        return {lo, hi};
    };
    return robustness_gamma(bounds_at, table.gammas);
}

std::pair<double, double> mixture_envelope(std::span<const UnitNuisance> units) {
    if (units.empty()) throw std::invalid_argument("mixture envelope needs at least one unit");
    double lo = 0.0;
    double hi = 0.0;
    for (const auto& u : units) {
        require_finite_nuisance(u);
        const double pi = u.pi;
        const double m1_lo = pi * u.mu[1] + (1.0 - pi) * u.theta[1][0];
        const double m0_lo = (1.0 - pi) * u.mu[0] + pi * u.theta[0][0];
        const double m1_hi = pi * u.mu[1] + (1.0 - pi) * u.theta[1][1];
        const double m0_hi = (1.0 - pi) * u.mu[0] + pi * u.theta[0][1];
        lo += std::min(m1_lo, m0_lo);
        hi += std::max(m1_hi, m0_hi);
    }
    const double n = static_cast<double>(units.size());
    return {lo / n, hi / n};
}

std::pair<double, double> mixture_envelope(const Dataset& data, const FittedNuisanceSet& eta) {
    return mixture_envelope(evaluate_units(data, eta));
}

double derivative_at_delta(std::span<const UnitNuisance> units, double delta) {
    require_delta(delta);
    if (units.empty()) throw std::invalid_argument("derivative needs at least one unit");
    double total = 0.0;
    for (const auto& u : units) {
        require_finite_nuisance(u);
        const double D = delta * u.pi + 1.0 - u.pi;
        total += u.pi * (1.0 - u.pi) * (u.mu[1] - u.mu[0]) / (D * D);
    }
    return total / static_cast<double>(units.size());
}

double derivative_at_delta(const FittedNuisanceSet& eta, const Dataset& data, double delta) {
    return derivative_at_delta(evaluate_units(data, eta), delta);
}

SubgroupReport subgroup_curves(const Dataset& data, std::span<const int> group_of, const LearnerSpec& spec,
                               const ParamGrid& grid, std::size_t K, double ci_level, std::uint64_t seed) {
    if (group_of.size() != data.size()) throw std::invalid_argument("one group label per unit is required");
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < data.size(); ++i) members[group_of[i]].push_back(i);
    SubgroupReport report;
    for (const auto& [label, idx] : members) {
        const Dataset sub = data.subset(idx);
        const std::size_t treated = sub.count_treated();
        if (treated == 0 || treated == sub.size()) {
            report.warnings.push_back("group " + std::to_string(label) + " skipped: a treatment arm is empty");
            continue;
        }
        if (sub.size() < 2 * K) {
            report.warnings.push_back("group " + std::to_string(label) + " skipped: too few units for the folds");
            continue;
        }
        try {
            report.curves.push_back(curve(sub, spec, grid, K, ci_level, seed));
            report.groups.push_back(label);
        } catch (const std::exception& e) {
            report.warnings.push_back("group " + std::to_string(label) + " skipped: " + e.what());
        }
    }
    for (std::size_t d = 0; d < grid.deltas().size(); ++d) {
        double max_lo = -INFINITY;
        double min_hi = INFINITY;
        for (const auto& c : report.curves) {
            max_lo = std::max(max_lo, c.point[d].ci_lower_bound);
            min_hi = std::min(min_hi, c.point[d].ci_upper_bound);
        }
        report.point_cis_overlap.push_back(report.curves.empty() || max_lo <= min_hi);
    }
    return report;
}

}  // namespace incsens
