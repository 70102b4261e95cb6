#pragma once

#include "incsens/core.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace incsens {

enum class NoiseKind { gaussian, uniform };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::gaussian;
    /// Standard deviation (gaussian) or half-width (uniform).
    double scale = 0.5;

    double sd() const;
    /// P(eps < e) for the raw (unstandardized) noise.
    double cdf(double e) const;
};

/// X ~ Unif(x_lo, x_hi), A ~ Bernoulli(logistic(X)), Y = (1 + A) X + eps.
struct AnalyticDGP {
    double x_lo = 0.0;
    double x_hi = 1.0;
    NoiseSpec noise;

    void validate() const;
    double propensity(double x) const { return logistic(x); }
    double mu(int arm, double x) const { return (1.0 + arm) * x; }
};

/// Root h of E[(eps - h)_+ - gamma (eps - h)_-] = 0 on the raw noise scale,
/// so theta^-_a = mu_a + h and theta^+_a = mu_a - h. Nonpositive; zero iff gamma = 1.
double solve_h(double gamma, const NoiseSpec& noise);

/// Root for standard normal noise, from the closed-form moment equation.
double gaussian_h_standard(double gamma);

/// Closed-form population nuisances at a fixed Gamma.
class OracleTruth {
public:
    OracleTruth(AnalyticDGP dgp, double gamma);

    const AnalyticDGP& dgp() const { return dgp_; }
    double gamma() const { return gamma_; }
    double h() const { return h_; }

    double pi(double x) const { return dgp_.propensity(x); }
    double mu(int arm, double x) const { return dgp_.mu(arm, x); }
    double theta(int arm, BoundSide side, double x) const;
    /// Constant in x for this design.
    double nu(BoundSide side) const;

    double psi(double delta) const;
    std::pair<double, double> bounds(double delta) const;
    double length(double delta) const;
    double length_derivative(double delta) const;
    double psi_derivative(double delta) const;
    /// (E[min_a mu_a^-], E[max_a mu_a^+]) with the mixture forms of mu_a^pm.
    std::pair<double, double> mixture_envelope() const;
    /// Bound lengths of E[Y^1] and E[Y^0] alone: the delta -> inf and delta -> 0 limits.
    double length_treated_limit() const;
    double length_control_limit() const;

private:
    double expect(const std::function<double(double)>& f) const;

    AnalyticDGP dgp_;
    double gamma_;
    double h_;
};

double true_psi(double delta, const AnalyticDGP& dgp);
std::pair<double, double> true_bounds(double delta, double gamma, const AnalyticDGP& dgp);
std::pair<double, double> bound_length_and_derivative(double delta, double gamma, const AnalyticDGP& dgp);

enum class LengthPattern { decreasing, increasing, u_shaped, flat, irregular };
std::string to_string(LengthPattern p);

/// Sign pattern of successive differences of the bound length over the grid.
/// Differences within 1e-10 of zero are ignored.
LengthPattern classify_length_pattern(const AnalyticDGP& dgp, double gamma, const std::vector<double>& delta_grid);

}  // namespace incsens
