#pragma once

#include "incsens/core.hpp"
#include "incsens/estimator.hpp"
#include "incsens/nuisance.hpp"
#include "incsens/oracle.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace incsens {

/// X uniform on its support, A ~ Bernoulli(logistic(X)), Y = (1 + A) X + eps.
Dataset generate(const AnalyticDGP& dgp, std::size_t n, std::uint64_t seed);

/// The three covariate laws and two matched-variance noises of the bound-geometry study.
struct Figure1Panel {
    std::string name;
    double x_lo = 0.0;
    double x_hi = 1.0;
};
std::vector<Figure1Panel> figure1_panels();
NoiseSpec gaussian_noise_default();
NoiseSpec uniform_noise_default();

struct Figure1Row {
    std::string panel;
    std::string noise;
    double gamma = 1.0;
    double delta = 1.0;
    double psi = 0.0;
    double psi_lower = 0.0;
    double psi_upper = 0.0;
    double length = 0.0;
};

struct Figure1PanelSummary {
    std::string panel;
    LengthPattern pattern = LengthPattern::flat;
    /// Uniform-noise bounds strictly outside gaussian-noise bounds at every grid point with gamma > 1.
    bool uniform_encloses_gaussian = false;
};

struct Figure1Result {
    std::vector<Figure1Row> rows;
    std::vector<Figure1PanelSummary> panels;
};

Figure1Result figure1_sweep(const std::vector<double>& gammas, const std::vector<double>& deltas,
                            double classify_gamma = 2.0);

enum class EstimatorKind { plugin, dr };
std::string to_string(EstimatorKind e);

struct SimConfig {
    AnalyticDGP dgp;
    std::size_t n = 1000;
    std::size_t reps = 1000;
    std::vector<double> alpha_grid{0.10, 0.15, 0.20, 0.25, 0.30};
    double delta = 2.0;
    double gamma = 2.0;
    std::uint64_t seed = 1;
    std::vector<EstimatorKind> estimators{EstimatorKind::plugin, EstimatorKind::dr};

    void validate() const;
};

struct BiasSweepOptions {
    /// Subtract the same estimator evaluated at the exact nuisances on the same
    /// sample; that term has expectation equal to the target, so the difference
    /// estimates the bias with far less sampling noise.
    bool control_variate = true;
    /// Shift scores from a randomly rotated Halton sequence instead of iid draws.
    bool quasi_random_shifts = true;
};

struct BiasRow {
    EstimatorKind estimator = EstimatorKind::dr;
    BoundSide side = BoundSide::lower;
    double alpha = 0.0;
    std::size_t n = 0;
    /// |mean over reps of the bias estimate|.
    double abs_bias = 0.0;
    double mc_se = 0.0;
    /// Mean estimate minus the oracle value, without the control variate.
    double raw_bias = 0.0;
    double raw_mc_se = 0.0;
};

struct BiasTable {
    std::vector<BiasRow> rows;

    /// Slope of log(abs_bias) on alpha * ln(n) for one estimator and side.
    double slope(EstimatorKind e, BoundSide side) const;
};

/// Shift scores for replication `rep`; the same scores are reused at every alpha.
NoiseScores shift_scores(std::uint64_t seed, std::size_t rep, bool quasi_random);

BiasTable bias_sweep(const SimConfig& config, const BiasSweepOptions& options = {});

enum class CoverageNuisance { exact, noised };

struct CoverageConfig {
    AnalyticDGP dgp;
    std::size_t n = 1000;
    std::size_t reps = 500;
    double delta = 2.0;
    double gamma = 2.0;
    double ci_level = 0.95;
    std::uint64_t seed = 1;
    CoverageNuisance nuisance = CoverageNuisance::exact;
    double alpha = 0.25;

    void validate() const;
};

struct CoverageRep {
    BoundEstimate dr;
    BoundEstimate plugin;
    std::pair<double, double> envelope;
    bool covered_lower = false;
    bool covered_upper = false;
};

struct CoverageResult {
    double truth_lower = 0.0;
    double truth_upper = 0.0;
    double coverage_lower = 0.0;
    double coverage_upper = 0.0;
    double coverage_se_lower = 0.0;
    double coverage_se_upper = 0.0;
    double mean_width_lower = 0.0;
    double mean_width_upper = 0.0;
    std::vector<CoverageRep> reps;
};

CoverageResult coverage_study(const CoverageConfig& config);

}  // namespace incsens
