#include "incsens/conditional_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace incsens {

namespace {

void require_gamma(double gamma) {
    if (!std::isfinite(gamma) || gamma < 1.0) throw std::invalid_argument("gamma must be a finite real >= 1");
}

double score(std::span<const double> y, std::span<const double> w, double theta, double tilt) {
    double g = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) g += w[i] * f_theta(y[i], theta, tilt);
    return g;
}

struct ArmRows {
    std::vector<std::vector<double>> points;
    std::vector<double> outcomes;
};

ArmRows arm_rows(const Dataset& data, int arm) {
    ArmRows out;
    for (const auto& r : data.records()) {
        if (r.treatment != arm) continue;
        out.points.push_back(r.covariates);
        out.outcomes.push_back(r.outcome);
    }
    return out;
}

/// theta_half rows are stored in ascending outcome order so localization
/// weights line up with the sorted values the solver expects.
class KernelBoundFields final : public BoundFieldPair::Impl {
public:
    KernelBoundFields(ArmRows theta_rows, ArmRows nu_rows, double gamma, const LocalitySpec& locality)
        : gamma_(gamma) {
        std::vector<std::size_t> order(theta_rows.outcomes.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return theta_rows.outcomes[a] < theta_rows.outcomes[b];
        });
        std::vector<std::vector<double>> pts;
        pts.reserve(order.size());
        for (std::size_t i : order) {
            pts.push_back(std::move(theta_rows.points[i]));
            sorted_y_.push_back(theta_rows.outcomes[i]);
        }
        theta_weighter_ = LocalWeighter(std::move(pts), locality);
        nu_y_ = std::move(nu_rows.outcomes);
        nu_weighter_ = LocalWeighter(std::move(nu_rows.points), locality);
    }

    std::array<BoundValue, 2> evaluate(std::span<const double> x) const override {
        std::vector<double> w;
        theta_weighter_.weights(x, w);
        std::array<BoundValue, 2> out;
        for (BoundSide s : kBothSides) {
            out[side_index(s)].theta = solve_theta_sorted(sorted_y_, w, side_tilt(gamma_, s));
        }
        nu_weighter_.weights(x, w);
        double total = 0.0;
        std::array<double, 2> below{0.0, 0.0};
        for (std::size_t j = 0; j < nu_y_.size(); ++j) {
            total += w[j];
            for (int s = 0; s < 2; ++s) {
                if (nu_y_[j] < out[s].theta) below[s] += w[j];
            }
        }
        for (BoundSide s : kBothSides) {
            const int k = side_index(s);
            const double cdf = std::clamp(below[k] / total, 0.0, 1.0);
            out[k].nu = clip_nu(nu_from_cdf(cdf, gamma_, s), gamma_, s);
        }
        return out;
    }

private:
    double gamma_;
    std::vector<double> sorted_y_;
    LocalWeighter theta_weighter_;
    std::vector<double> nu_y_;
    LocalWeighter nu_weighter_;
};

class BasisBoundFields final : public BoundFieldPair::Impl {
public:
    BasisBoundFields(const ArmRows& theta_rows, const ArmRows& nu_rows, double gamma, int degree) : gamma_(gamma) {
        std::vector<std::span<const double>> rows1(theta_rows.points.begin(), theta_rows.points.end());
        basis_ = BasisExpansion(rows1, degree);
        const Eigen::MatrixXd d1 = basis_.design(rows1);
        const Eigen::VectorXd y1 =
            Eigen::Map<const Eigen::VectorXd>(theta_rows.outcomes.data(), static_cast<Eigen::Index>(theta_rows.outcomes.size()));
        std::vector<std::span<const double>> rows2(nu_rows.points.begin(), nu_rows.points.end());
        const Eigen::MatrixXd d2 = basis_.design(rows2);
        for (BoundSide s : kBothSides) {
            const int k = side_index(s);
            theta_coef_[k] = fit_asymmetric_least_squares(d1, y1, side_tilt(gamma, s));
            const Eigen::VectorXd fitted = d2 * theta_coef_[k];
            Eigen::VectorXd labels(d2.rows());
            for (Eigen::Index j = 0; j < d2.rows(); ++j) {
                labels[j] = nu_rows.outcomes[static_cast<std::size_t>(j)] < fitted[j] ? 1.0 : 0.0;
            }
            const double frac = labels.mean();
            if (frac <= 0.0 || frac >= 1.0) {
                constant_cdf_[k] = frac;
                cdf_coef_[k].resize(0);
            } else {
                cdf_coef_[k] = fit_logistic_irls(d2, labels, 1e-6);
            }
        }
    }

    std::array<BoundValue, 2> evaluate(std::span<const double> x) const override {
        const Eigen::VectorXd f = basis_.transform(x);
        std::array<BoundValue, 2> out;
        for (BoundSide s : kBothSides) {
            const int k = side_index(s);
            out[k].theta = f.dot(theta_coef_[k]);
            const double cdf = cdf_coef_[k].size() == 0 ? constant_cdf_[k] : logistic(f.dot(cdf_coef_[k]));
            out[k].nu = clip_nu(nu_from_cdf(cdf, gamma_, s), gamma_, s);
        }
        return out;
    }

private:
    double gamma_;
    BasisExpansion basis_;
    std::array<Eigen::VectorXd, 2> theta_coef_;
    std::array<Eigen::VectorXd, 2> cdf_coef_;
    std::array<double, 2> constant_cdf_{0.0, 0.0};
};

class FunctionBoundFields final : public BoundFieldPair::Impl {
public:
    explicit FunctionBoundFields(std::function<std::array<BoundValue, 2>(std::span<const double>)> fn)
        : fn_(std::move(fn)) {}
    std::array<BoundValue, 2> evaluate(std::span<const double> x) const override { return fn_(x); }

private:
    std::function<std::array<BoundValue, 2>(std::span<const double>)> fn_;
};

}  // namespace

double f_theta(double y, double theta, double gamma_tilt) {
    if (!std::isfinite(y) || !std::isfinite(theta) || !std::isfinite(gamma_tilt)) {
        throw std::invalid_argument("f_theta needs finite inputs");
    }
    const double r = y - theta;
    return r >= 0.0 ? r : gamma_tilt * r;
}

double side_tilt(double gamma, BoundSide side) { return side == BoundSide::lower ? gamma : 1.0 / gamma; }

void WeightedSample::validate() const {
    if (values.empty()) throw std::invalid_argument("weighted sample is empty");
    if (values.size() != weights.size()) throw std::invalid_argument("values and weights differ in length");
    bool positive = false;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]) || !std::isfinite(weights[i])) {
            throw std::invalid_argument("weighted sample entries must be finite");
        }
        if (weights[i] < 0.0) throw std::invalid_argument("weights must be nonnegative");
        positive = positive || weights[i] > 0.0;
    }
    if (!positive) throw std::invalid_argument("weighted sample needs a positive weight");
}

double solve_theta_sorted(std::span<const double> y, std::span<const double> w, double tilt) {
    const std::size_t m = y.size();
    double w_above = 0.0;
    double s_above = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        w_above += w[i];
        s_above += w[i] * y[i];
    }
    double w_below = 0.0;
    double s_below = 0.0;
    // Split k: y[0..k) lie at or below theta, y[k..m) at or above it. On that
    // segment g(theta) = s_above - w_above*theta - tilt*(w_below*theta - s_below).
    for (std::size_t k = 0; k <= m; ++k) {
        const double denom = w_above + tilt * w_below;
        if (denom > 0.0) {
            const double theta = (s_above + tilt * s_below) / denom;
            const bool lo_ok = k == 0 || theta >= y[k - 1];
            const bool hi_ok = k == m || theta <= y[k];
            if (lo_ok && hi_ok) return theta;
        }
        if (k < m) {
            w_above -= w[k];
            s_above -= w[k] * y[k];
            w_below += w[k];
            s_below += w[k] * y[k];
        }
    }
    // Rounding can leave every segment test marginally failing; bisection on
    // the monotone score is the fallback.
    double lo = y.front();
    double hi = y.back();
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (score(y, w, mid, tilt) > 0.0) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

double solve_theta(const WeightedSample& sample, double gamma, BoundSide side) {
    sample.validate();
    require_gamma(gamma);
    std::vector<std::size_t> order(sample.values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sample.values[a] < sample.values[b]; });
    std::vector<double> y;
    std::vector<double> w;
    y.reserve(order.size());
    w.reserve(order.size());
    for (std::size_t i : order) {
        y.push_back(sample.values[i]);
        w.push_back(sample.weights[i]);
    }
    return solve_theta_sorted(y, w, side_tilt(gamma, side));
}

double nu_from_cdf(double cdf_below, double gamma, BoundSide side) {
    if (!std::isfinite(cdf_below) || cdf_below < 0.0 || cdf_below > 1.0) {
        throw std::invalid_argument("cdf_below must be a probability");
    }
    require_gamma(gamma);
    return 1.0 + (side_tilt(gamma, side) - 1.0) * cdf_below;
}

double clip_nu(double nu, double gamma, BoundSide side) {
    if (side == BoundSide::lower) return std::clamp(nu, 1.0, gamma);
    return std::clamp(nu, 1.0 / gamma, 1.0);
}

void BoundLearnerSpec::validate() const {
    locality.validate();
    if (basis_degree < 1) throw std::invalid_argument("basis degree must be >= 1");
}

BoundFieldPair fit_bound_fields(const Dataset& theta_half, const Dataset& nu_half, int arm, double gamma,
                                const BoundLearnerSpec& spec) {
    require_gamma(gamma);
    spec.validate();
    if (arm != 0 && arm != 1) throw std::invalid_argument("arm must be 0 or 1");
    ArmRows theta_rows = arm_rows(theta_half, arm);
    ArmRows nu_rows = arm_rows(nu_half, arm);
    if (theta_rows.outcomes.empty() || nu_rows.outcomes.empty()) {
        throw std::invalid_argument("arm " + std::to_string(arm) + " is empty in a bound-fitting half");
    }
    std::shared_ptr<const BoundFieldPair::Impl> impl;
    if (spec.method == BoundMethod::local_kernel) {
        impl = std::make_shared<KernelBoundFields>(std::move(theta_rows), std::move(nu_rows), gamma, spec.locality);
    } else {
        impl = std::make_shared<BasisBoundFields>(theta_rows, nu_rows, gamma, spec.basis_degree);
    }
    return BoundFieldPair(std::move(impl), arm, gamma);
}

ConditionalBoundField fit_bound_field(const Dataset& theta_half, const Dataset& nu_half, int arm, double gamma,
                                      BoundSide side, const BoundLearnerSpec& spec) {
    return ConditionalBoundField(fit_bound_fields(theta_half, nu_half, arm, gamma, spec), side);
}

BoundFieldPair make_bound_fields(std::function<std::array<BoundValue, 2>(std::span<const double>)> fn, int arm,
                                 double gamma) {
    require_gamma(gamma);
    return BoundFieldPair(std::make_shared<FunctionBoundFields>(std::move(fn)), arm, gamma);
}

}  // namespace incsens
