#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace incsens {

/// One observed unit: covariates (missing-indicator columns already appended),
/// binary treatment and a real outcome.
struct UnitRecord {
    std::vector<double> covariates;
    int treatment = 0;
    double outcome = 0.0;
};

/// Immutable table of units. Copies share the underlying storage.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<UnitRecord> records, std::vector<std::string> covariate_names = {});

    std::size_t size() const { return records_ ? records_->size() : 0; }
    std::size_t dim() const { return dim_; }
    const UnitRecord& operator[](std::size_t i) const { return (*records_)[i]; }
    std::span<const UnitRecord> records() const;
    const std::vector<std::string>& covariate_names() const { return *names_; }

    /// Rows selected by index, in the given order.
    Dataset subset(std::span<const std::size_t> indices) const;

    std::size_t count_treated() const;

private:
    std::shared_ptr<const std::vector<UnitRecord>> records_;
    std::shared_ptr<const std::vector<std::string>> names_;
    std::size_t dim_ = 0;
};

struct SensitivityParams {
    double delta = 1.0;
    double gamma = 1.0;

    SensitivityParams() = default;
    SensitivityParams(double delta, double gamma);
};

/// Sorted sweep over intervention odds multipliers and confounding levels.
class ParamGrid {
public:
    ParamGrid(std::vector<double> deltas, std::vector<double> gammas);

    const std::vector<double>& deltas() const { return deltas_; }
    const std::vector<double>& gammas() const { return gammas_; }

private:
    std::vector<double> deltas_;
    std::vector<double> gammas_;
};

enum class BoundSide { lower, upper };

inline constexpr BoundSide kBothSides[2] = {BoundSide::lower, BoundSide::upper};
inline int side_index(BoundSide s) { return s == BoundSide::lower ? 0 : 1; }
std::string to_string(BoundSide s);

/// Propensity under the incremental intervention: delta*pi / (delta*pi + 1 - pi).
/// Degenerate propensities (0 or 1) are returned unchanged.
double tilt_propensity(double pi, double delta);

/// Odds ratio between an intervened propensity q and the observed pi.
double implied_delta(double q, double pi);

/// Mixture weights (q*pi, q*(1-pi), (1-q)*(1-pi), (1-q)*pi) used by the
/// bound identification formula: weights on mu_1, theta_1, mu_0, theta_0.
struct IdentificationWeights {
    double treated_mu = 0.0;
    double treated_theta = 0.0;
    double control_mu = 0.0;
    double control_theta = 0.0;

    double sum() const { return treated_mu + treated_theta + control_mu + control_theta; }
};

IdentificationWeights identification_weights(double pi, double delta);

double logistic(double x);
double logit(double p);

}  // namespace incsens
