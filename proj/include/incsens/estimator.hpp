#pragma once

#include "incsens/core.hpp"
#include "incsens/nuisance.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace incsens {

struct BoundEstimate {
    double psi_lower = 0.0;
    double psi_upper = 0.0;
    double sigma_lower = 0.0;
    double sigma_upper = 0.0;
    std::size_t n = 0;
    double ci_level = 0.95;
    /// Outer Wald limits: psi_lower - z*sigma_lower/sqrt(n), psi_upper + z*sigma_upper/sqrt(n).
    double ci_lower_bound = 0.0;
    double ci_upper_bound = 0.0;

    double psi(BoundSide s) const { return s == BoundSide::lower ? psi_lower : psi_upper; }
    double sigma(BoundSide s) const { return s == BoundSide::lower ? sigma_lower : sigma_upper; }
    /// Symmetric Wald interval for one side alone.
    std::pair<double, double> side_interval(BoundSide s) const;
};

/// Per-unit influence values for one (delta, Gamma).
struct IFValues {
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<int> fold;

    const std::vector<double>& side(BoundSide s) const { return s == BoundSide::lower ? lower : upper; }
};

/// Uncentered influence function phi^pm at one record given its nuisance values.
double evaluate_if(const UnitRecord& record, const UnitNuisance& eta, double delta, double gamma, BoundSide side);
double evaluate_if(const UnitRecord& record, const FittedNuisanceSet& eta, double delta, double gamma,
                   BoundSide side);

/// Identification integrand q(pi mu_1 + (1-pi) theta_1) + (1-q)((1-pi) mu_0 + pi theta_0).
double plugin_integrand(const UnitNuisance& eta, double delta, BoundSide side);

/// Cross-fitted nuisances for one Gamma: one fitted set per fold of the plan.
struct CrossFitNuisances {
    FoldPlan plan;
    std::vector<FittedNuisanceSet> per_fold;
    double gamma = 1.0;
};

/// Cross-fits at each Gamma in turn on one fold plan; pi and mu are fit once
/// per fold and shared across Gammas.
std::vector<CrossFitNuisances> cross_fit(const Dataset& data, const LearnerSpec& spec, std::size_t K,
                                         const std::vector<double>& gammas, std::uint64_t seed);

/// Nuisance values for every unit, each taken from the set fit without it.
std::vector<UnitNuisance> evaluate_units(const Dataset& data, const CrossFitNuisances& fit);
/// Nuisance values for every unit from one fixed set (no sample splitting).
std::vector<UnitNuisance> evaluate_units(const Dataset& data, const FittedNuisanceSet& eta);

IFValues influence_values(const Dataset& data, std::span<const UnitNuisance> units, double delta, double gamma,
                          std::span<const int> fold = {});

/// Average of per-fold means (a plain mean when no folds are recorded),
/// pooled standard deviations and Wald limits.
BoundEstimate estimate_from_if(const IFValues& values, double ci_level);

BoundEstimate estimate_bounds(const Dataset& data, const LearnerSpec& spec, std::size_t K, double delta, double gamma,
                              double ci_level, std::uint64_t seed);
/// Influence-function estimator with one known nuisance set for all units.
BoundEstimate estimate_bounds(const Dataset& data, const FittedNuisanceSet& eta, double delta, double ci_level);

BoundEstimate plugin_bounds(const Dataset& data, const FittedNuisanceSet& eta, double delta, double ci_level = 0.95);
BoundEstimate plugin_bounds(std::span<const UnitNuisance> units, double delta, double gamma, double ci_level = 0.95);

struct IncrementalCurve {
    ParamGrid grid;
    /// estimates[g][d] for gammas()[g], deltas()[d].
    std::vector<std::vector<BoundEstimate>> estimates;
    /// Gamma = 1 estimate per delta.
    std::vector<BoundEstimate> point;
};

IncrementalCurve curve(const Dataset& data, const LearnerSpec& spec, const ParamGrid& grid, std::size_t K,
                       double ci_level, std::uint64_t seed);

struct RobustnessResult {
    bool found = false;
    double gamma_star = 0.0;
    double witness = 0.0;
    std::string message;
};

/// Bound tables over a common delta grid: lower[g][d], upper[g][d].
struct BoundTable {
    std::vector<double> gammas;
    std::vector<std::vector<double>> lower;
    std::vector<std::vector<double>> upper;
};

BoundTable point_table(const IncrementalCurve& c);
/// Outer Wald limits instead of point bounds.
BoundTable ci_table(const IncrementalCurve& c);

/// Smallest Gamma at which a horizontal line fits between every lower and
/// upper bound, refined by bisection with bounds interpolated linearly in Gamma.
RobustnessResult robustness_gamma(const BoundTable& table);

/// Same search with bounds recomputed at every trial Gamma.
RobustnessResult robustness_gamma(
    const std::function<std::pair<std::vector<double>, std::vector<double>>(double)>& bounds_at,
    const std::vector<double>& gamma_grid, double tol = 1e-10);

/// (P_n[min_a mu_a^-], P_n[max_a mu_a^+]) with mu_1^pm = pi mu_1 + (1-pi) theta_1^pm
/// and mu_0^pm = (1-pi) mu_0 + pi theta_0^pm.
std::pair<double, double> mixture_envelope(std::span<const UnitNuisance> units);
std::pair<double, double> mixture_envelope(const Dataset& data, const FittedNuisanceSet& eta);

/// P_n[pi (1-pi)(mu_1 - mu_0) / (delta pi + 1 - pi)^2].
double derivative_at_delta(std::span<const UnitNuisance> units, double delta);
double derivative_at_delta(const FittedNuisanceSet& eta, const Dataset& data, double delta);

struct SubgroupReport {
    std::vector<int> groups;
    std::vector<IncrementalCurve> curves;
    std::vector<std::string> warnings;
    /// Per delta: whether all groups' Gamma = 1 confidence intervals share a point.
    std::vector<bool> point_cis_overlap;
};

/// Runs curve on each group label present in `group_of` (one label per unit).
/// Groups missing an arm, or too small for K folds, are skipped with a warning.
SubgroupReport subgroup_curves(const Dataset& data, std::span<const int> group_of, const LearnerSpec& spec,
                               const ParamGrid& grid, std::size_t K, double ci_level, std::uint64_t seed);

}  // namespace incsens
