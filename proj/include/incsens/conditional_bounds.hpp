#pragma once

#include "incsens/core.hpp"
#include "incsens/learners.hpp"

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace incsens {

/// (y - theta)_+ - tilt * (y - theta)_-, with x_- = max(-x, 0).
double f_theta(double y, double theta, double gamma_tilt);

/// Gamma for the lower side, 1/Gamma for the upper side.
double side_tilt(double gamma, BoundSide side);

struct WeightedSample {
    std::vector<double> values;
    std::vector<double> weights;

    /// Throws unless lengths match, entries are finite, weights are nonnegative
    /// and at least one weight is positive.
    void validate() const;
};

/// Unique root of sum_i w_i f_theta(y_i) = 0 with the side's tilt.
double solve_theta(const WeightedSample& sample, double gamma, BoundSide side);

/// Same root for values sorted ascending with aligned weights; no validation.
/// The root is found by locating the linear segment of the piecewise-linear
/// score that changes sign and solving it exactly.
double solve_theta_sorted(std::span<const double> sorted_values, std::span<const double> weights, double tilt);

/// 1 + (tilt - 1) * cdf_below with tilt = Gamma (lower) or 1/Gamma (upper).
double nu_from_cdf(double cdf_below, double gamma, BoundSide side);

/// Clamp to [1, Gamma] (lower) or [1/Gamma, 1] (upper).
double clip_nu(double nu, double gamma, BoundSide side);

struct BoundValue {
    double theta = 0.0;
    double nu = 1.0;
};

enum class BoundMethod { local_kernel, asymmetric_basis };

struct BoundLearnerSpec {
    BoundMethod method = BoundMethod::local_kernel;
    LocalitySpec locality;
    int basis_degree = 2;

    void validate() const;
};

/// Joint evaluator of both sides for one arm and Gamma. Both sides share the
/// same localization so one weight pass serves the lower and upper fields.
class BoundFieldPair {
public:
    struct Impl {
        virtual ~Impl() = default;
        virtual std::array<BoundValue, 2> evaluate(std::span<const double> x) const = 0;
    };

    BoundFieldPair() = default;
    BoundFieldPair(std::shared_ptr<const Impl> impl, int arm, double gamma)
        : impl_(std::move(impl)), arm_(arm), gamma_(gamma) {}

    /// Indexed by side_index.
    std::array<BoundValue, 2> operator()(std::span<const double> x) const { return impl_->evaluate(x); }
    int arm() const { return arm_; }
    double gamma() const { return gamma_; }
    bool valid() const { return static_cast<bool>(impl_); }

private:
    std::shared_ptr<const Impl> impl_;
    int arm_ = 0;
    double gamma_ = 1.0;
};

/// Evaluator x -> (theta, nu) for a fixed arm, side and Gamma.
class ConditionalBoundField {
public:
    ConditionalBoundField() = default;
    ConditionalBoundField(BoundFieldPair pair, BoundSide side) : pair_(std::move(pair)), side_(side) {}

    BoundValue operator()(std::span<const double> x) const { return pair_(x)[side_index(side_)]; }
    BoundSide side() const { return side_; }
    int arm() const { return pair_.arm(); }
    double gamma() const { return pair_.gamma(); }

private:
    BoundFieldPair pair_;
    BoundSide side_ = BoundSide::lower;
};

/// theta from the arm's units in theta_half, nu from the arm's units in
/// nu_half evaluated at the already-fit theta. Records of the other arm in
/// either half are ignored.
BoundFieldPair fit_bound_fields(const Dataset& theta_half, const Dataset& nu_half, int arm, double gamma,
                                const BoundLearnerSpec& spec);

ConditionalBoundField fit_bound_field(const Dataset& theta_half, const Dataset& nu_half, int arm, double gamma,
                                      BoundSide side, const BoundLearnerSpec& spec);

/// Fixed closed-form fields, e.g. exact or perturbed truths.
BoundFieldPair make_bound_fields(std::function<std::array<BoundValue, 2>(std::span<const double>)> fn, int arm,
                                 double gamma);

}  // namespace incsens
