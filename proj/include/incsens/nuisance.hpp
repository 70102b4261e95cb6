#pragma once

#include "incsens/conditional_bounds.hpp"
#include "incsens/core.hpp"
#include "incsens/learners.hpp"
#include "incsens/oracle.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace incsens {

/// K balanced folds plus, per fold k, a balanced split of the training set
/// (all units outside fold k) into inner halves 1 and 2.
struct FoldPlan {
    std::size_t n = 0;
    std::size_t K = 0;
    std::vector<int> fold_of;
    /// inner_half[k][i] is 0 for units in fold k, else 1 or 2.
    std::vector<std::vector<int>> inner_half;

    std::vector<std::size_t> members(std::size_t k) const;
    std::vector<std::size_t> training(std::size_t k) const;
    std::vector<std::size_t> training_half(std::size_t k, int half) const;
};

FoldPlan make_fold_plan(std::size_t n, std::size_t K, std::uint64_t seed);

enum class PropensityMethod { logistic, kernel };
enum class OutcomeMethod { linear, kernel };

struct LearnerSpec {
    PropensityMethod propensity = PropensityMethod::logistic;
    OutcomeMethod outcome = OutcomeMethod::linear;
    BoundLearnerSpec bounds;
    double logistic_ridge = 1e-6;
    double propensity_clip = 1e-12;

    void validate() const;
    std::string describe() const;
};

using ScalarField = std::function<double(std::span<const double>)>;

/// Nuisance values at one covariate vector. theta and nu are [arm][side].
struct UnitNuisance {
    double pi = 0.5;
    std::array<double, 2> mu{0.0, 0.0};
    std::array<std::array<double, 2>, 2> theta{};
    std::array<std::array<double, 2>, 2> nu{};
};

struct NuisanceProvenance {
    std::string kind;  // "learned", "analytic" or "noised"
    int fold = -1;
    std::string learner;
    double alpha = 0.0;
    std::uint64_t seed = 0;
    /// Units whose records any learner in the set was fit on.
    std::vector<std::size_t> training_indices;
};

struct PropensityOutcomeFit {
    ScalarField pi;
    std::array<ScalarField, 2> mu;
};

/// Full set eta = (pi, mu_1, mu_0, theta_a^pm, nu_a^pm) at one Gamma.
struct FittedNuisanceSet {
    ScalarField pi;
    std::array<ScalarField, 2> mu;
    std::array<BoundFieldPair, 2> bounds;  // by arm
    double gamma = 1.0;
    NuisanceProvenance provenance;

    UnitNuisance evaluate(std::span<const double> x) const;
};

ScalarField fit_propensity(const Dataset& train, const LearnerSpec& spec);
ScalarField fit_outcome_regression(const Dataset& train, int arm, const LearnerSpec& spec);
PropensityOutcomeFit fit_propensity_outcome(const Dataset& train, const LearnerSpec& spec);

/// pi and mu on all of the training set of fold k; theta on inner half 1 and
/// nu on inner half 2 (with the half-1 theta).
FittedNuisanceSet fit_nuisance_set(const Dataset& data, const FoldPlan& plan, std::size_t k, double gamma,
                                   const LearnerSpec& spec);

/// As fit_nuisance_set, reusing a pi/mu fit already made on fold k's training set.
FittedNuisanceSet attach_bound_fields(const PropensityOutcomeFit& base, const Dataset& data, const FoldPlan& plan,
                                      std::size_t k, double gamma, const LearnerSpec& spec);

/// Exact population nuisances of the analytic design (scalar covariate).
FittedNuisanceSet truth_nuisances(const AnalyticDGP& dgp, double gamma);

inline constexpr std::size_t kNoisedFunctionCount = 11;

/// Standard normal scores for the eleven perturbed functions, in the order
/// pi, mu_0, mu_1, theta_1^-, theta_1^+, theta_0^-, theta_0^+, nu_1^-, nu_1^+, nu_0^-, nu_0^+.
using NoiseScores = std::array<double, kNoisedFunctionCount>;

/// Truth perturbed by constant shifts m + m*z_f per function: pi on the logit
/// scale, the others additively, nu re-clipped to its range.
FittedNuisanceSet shifted_truth_nuisances(const AnalyticDGP& dgp, double gamma, double m, const NoiseScores& z);

struct NoisedOptions {
    /// Draw an independent score at every evaluation point instead of one per function.
    bool per_point = false;
};

/// Shift scale m = n^(-alpha) with scores drawn from the seed.
FittedNuisanceSet noised_truth_nuisances(const AnalyticDGP& dgp, double alpha, std::size_t n, double gamma,
                                         std::uint64_t seed, NoisedOptions options = {});

}  // namespace incsens
