#include "incsens/oracle.hpp"

#include "incsens/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace incsens {

namespace {

void require_gamma(double gamma) {
    if (!std::isfinite(gamma) || gamma < 1.0) throw std::invalid_argument("gamma must be a finite real >= 1");
}

double tilt_denominator(double pi, double delta) { return delta * pi + 1.0 - pi; }

}  // namespace

double NoiseSpec::sd() const { return kind == NoiseKind::gaussian ? scale : scale / std::sqrt(3.0); }

double NoiseSpec::cdf(double e) const {
    if (kind == NoiseKind::gaussian) return normal_cdf(e / scale);
    return std::clamp((e + scale) / (2.0 * scale), 0.0, 1.0);
}

void AnalyticDGP::validate() const {
    if (!(x_lo < x_hi) || !std::isfinite(x_lo) || !std::isfinite(x_hi)) {
        throw std::invalid_argument("covariate support needs x_lo < x_hi");
    }
    if (!(noise.scale > 0.0) || !std::isfinite(noise.scale)) throw std::invalid_argument("noise scale must be positive");
}

double gaussian_h_standard(double gamma) {
    require_gamma(gamma);
    if (gamma == 1.0) return 0.0;
    // E[(xi-h)_+] = phi(h) - h(1 - Phi(h)); E[(xi-h)_-] = h Phi(h) + phi(h).
    auto g = [gamma](double h) {
        return normal_pdf(h) - h * (1.0 - normal_cdf(h)) - gamma * (h * normal_cdf(h) + normal_pdf(h));
    };
    double lo = -1.0;
    while (g(lo) <= 0.0) lo *= 2.0;
    return bisect(g, lo, 0.0, 1e-15);
}

double solve_h(double gamma, const NoiseSpec& noise) {
    require_gamma(gamma);
    if (!(noise.scale > 0.0)) throw std::invalid_argument("noise scale must be positive");
    if (noise.kind == NoiseKind::gaussian) return noise.scale * gaussian_h_standard(gamma);
    const double b = noise.scale;
    const double r = std::sqrt(gamma);
    return b * (1.0 - r) / (1.0 + r);
}

OracleTruth::OracleTruth(AnalyticDGP dgp, double gamma) : dgp_(dgp), gamma_(gamma) {
    dgp_.validate();
    require_gamma(gamma);
    h_ = solve_h(gamma, dgp_.noise);
}

double OracleTruth::theta(int arm, BoundSide side, double x) const {
    return side == BoundSide::lower ? mu(arm, x) + h_ : mu(arm, x) - h_;
}

double OracleTruth::nu(BoundSide side) const {
    const double f = dgp_.noise.cdf(h_);
    if (side == BoundSide::lower) return 1.0 + (gamma_ - 1.0) * f;
    return 1.0 / gamma_ + (1.0 - 1.0 / gamma_) * f;
}

double OracleTruth::expect(const std::function<double(double)>& f) const {
    return adaptive_simpson(f, dgp_.x_lo, dgp_.x_hi, 1e-10) / (dgp_.x_hi - dgp_.x_lo);
}

double OracleTruth::psi(double delta) const { return true_psi(delta, dgp_); }

std::pair<double, double> OracleTruth::bounds(double delta) const {
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    auto side_value = [&](BoundSide s) {
        return expect([&](double x) {
            const double p = pi(x);
            const double q = tilt_propensity(p, delta);
            return q * (p * mu(1, x) + (1.0 - p) * theta(1, s, x)) +
                   (1.0 - q) * ((1.0 - p) * mu(0, x) + p * theta(0, s, x));
        });
    };
    return {side_value(BoundSide::lower), side_value(BoundSide::upper)};
}

double OracleTruth::length(double delta) const {
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    return -2.0 * h_ * expect([&](double x) {
        const double p = pi(x);
        return p * (1.0 - p) * (1.0 + delta) / tilt_denominator(p, delta);
    });
}

double OracleTruth::length_derivative(double delta) const {
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    return -2.0 * h_ * expect([&](double x) {
        const double p = pi(x);
        const double d = tilt_denominator(p, delta);
        return p * (1.0 - p) * (1.0 - 2.0 * p) / (d * d);
    });
}

double OracleTruth::psi_derivative(double delta) const {
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    return expect([&](double x) {
        const double p = pi(x);
        const double d = tilt_denominator(p, delta);
        return p * (1.0 - p) * (mu(1, x) - mu(0, x)) / (d * d);
    });
}

std::pair<double, double> OracleTruth::mixture_envelope() const {
    auto arm_value = [&](int arm, BoundSide s, double x) {
        const double p = pi(x);
        const double w = arm == 1 ? p : 1.0 - p;
        return w * mu(arm, x) + (1.0 - w) * theta(arm, s, x);
    };
    const double lo = expect([&](double x) {
        return std::min(arm_value(0, BoundSide::lower, x), arm_value(1, BoundSide::lower, x));
    });
    const double hi = expect([&](double x) {
        return std::max(arm_value(0, BoundSide::upper, x), arm_value(1, BoundSide::upper, x));
    });
    return {lo, hi};
}

double OracleTruth::length_treated_limit() const {
    return -2.0 * h_ * expect([&](double x) { return 1.0 - pi(x); });
}

double OracleTruth::length_control_limit() const {
    return -2.0 * h_ * expect([&](double x) { return pi(x); });
}

double true_psi(double delta, const AnalyticDGP& dgp) {
    dgp.validate();
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    const double integral = adaptive_simpson(
        [&](double x) {
            const double p = dgp.propensity(x);
            return (delta * p * dgp.mu(1, x) + (1.0 - p) * dgp.mu(0, x)) / tilt_denominator(p, delta);
        },
        dgp.x_lo, dgp.x_hi, 1e-10);
    return integral / (dgp.x_hi - dgp.x_lo);
}

std::pair<double, double> true_bounds(double delta, double gamma, const AnalyticDGP& dgp) {
    return OracleTruth(dgp, gamma).bounds(delta);
}

std::pair<double, double> bound_length_and_derivative(double delta, double gamma, const AnalyticDGP& dgp) {
    const OracleTruth t(dgp, gamma);
    return {t.length(delta), t.length_derivative(delta)};
}

std::string to_string(LengthPattern p) {
    switch (p) {
        case LengthPattern::decreasing: return "decreasing";
        case LengthPattern::increasing: return "increasing";
        case LengthPattern::u_shaped: return "u_shaped";
        case LengthPattern::flat: return "flat";
        case LengthPattern::irregular: return "irregular";
    }
    return "irregular";
}

LengthPattern classify_length_pattern(const AnalyticDGP& dgp, double gamma, const std::vector<double>& delta_grid) {
    if (delta_grid.size() < 2) throw std::invalid_argument("pattern classification needs at least two grid points");
    for (std::size_t i = 1; i < delta_grid.size(); ++i) {
        if (!(delta_grid[i] > delta_grid[i - 1])) throw std::invalid_argument("delta grid must be increasing");
    }
    const OracleTruth t(dgp, gamma);
    std::vector<int> signs;
    double prev = t.length(delta_grid.front());
    for (std::size_t i = 1; i < delta_grid.size(); ++i) {
        const double cur = t.length(delta_grid[i]);
        const double diff = cur - prev;
        prev = cur;
        if (std::abs(diff) <= 1e-10) continue;
        const int s = diff > 0.0 ? 1 : -1;
        if (signs.empty() || signs.back() != s) signs.push_back(s);
    }
    if (signs.empty()) return LengthPattern::flat;
    if (signs.size() == 1) return signs[0] < 0 ? LengthPattern::decreasing : LengthPattern::increasing;
    if (signs.size() == 2 && signs[0] < 0) return LengthPattern::u_shaped;
    return LengthPattern::irregular;
}

}  // namespace incsens
