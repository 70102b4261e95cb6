#pragma once

#include "incsens/core.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace incsens {

/// Standardized polynomial basis (intercept, x_j, x_j^2, ...) on the training
/// covariates. Columns constant in training are dropped.
class BasisExpansion {
public:
    BasisExpansion() = default;
    BasisExpansion(const std::vector<std::span<const double>>& rows, int degree);

    Eigen::VectorXd transform(std::span<const double> x) const;
    Eigen::MatrixXd design(const std::vector<std::span<const double>>& rows) const;
    std::size_t size() const { return 1 + kept_.size() * static_cast<std::size_t>(degree_); }

private:
    std::vector<std::size_t> kept_;
    std::vector<double> center_;
    std::vector<double> scale_;
    int degree_ = 1;
};

/// Ridge-stabilized logistic regression by iteratively reweighted least squares.
/// The intercept (column 0) is not penalized.
Eigen::VectorXd fit_logistic_irls(const Eigen::MatrixXd& design, const Eigen::VectorXd& labels,
                                  double ridge, int max_iter = 100, double tol = 1e-10);

/// Weighted least squares with an optional ridge on non-intercept columns.
Eigen::VectorXd fit_weighted_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                           const Eigen::VectorXd& weights, double ridge = 0.0);

/// Minimizer of sum (y - m)_+^2 + tilt * (y - m)_-^2 over m = design * beta,
/// by reweighting until the residual sign pattern is stable.
Eigen::VectorXd fit_asymmetric_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                             double tilt, int max_iter = 200);

enum class LocalityKind { gaussian_kernel, nearest_neighbors };

struct LocalitySpec {
    LocalityKind kind = LocalityKind::gaussian_kernel;
    /// Multiplier on the per-covariate rule-of-thumb bandwidth sd * m^(-1/5).
    double bandwidth_scale = 1.0;
    /// When positive, a fixed bandwidth used for every covariate instead.
    double bandwidth = 0.0;
    std::size_t neighbors = 30;

    void validate() const;
};

/// Localization weights around a query point for a fixed training design.
/// Gaussian weights are rescaled so the largest is 1, so distant queries
/// never underflow to an all-zero weight vector.
class LocalWeighter {
public:
    LocalWeighter() = default;
    LocalWeighter(std::vector<std::vector<double>> points, const LocalitySpec& spec);

    std::size_t size() const { return points_.size(); }
    void weights(std::span<const double> x, std::vector<double>& out) const;

private:
    std::vector<std::vector<double>> points_;
    std::vector<double> inv_bandwidth_;  // 0 for ignored (constant) columns
    LocalitySpec spec_;
};

}  // namespace incsens
