#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace incsens {

double normal_cdf(double x);
double normal_pdf(double x);
double normal_quantile(double p);

/// Bisection for a continuous function with f(lo) and f(hi) of opposite sign.
double bisect(const std::function<double(double)>& f, double lo, double hi, double xtol = 1e-14,
              int max_iter = 300);

/// Adaptive Simpson quadrature of f over [a,b] to absolute tolerance tol.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol = 1e-8,
                        int max_depth = 50);

double mean(std::span<const double> v);
/// Sample variance with n-1 denominator.
double variance(std::span<const double> v);

/// Slope and intercept of the ordinary least-squares line y ~ a + b x.
struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace incsens
