#include "incsens/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace incsens {

namespace {

void require_probability(double p, const char* what) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
        throw std::invalid_argument(std::string(what) + " must be a probability in [0,1]");
    }
}

void require_delta(double delta) {
    if (!std::isfinite(delta) || delta <= 0.0) {
        throw std::invalid_argument("delta must be a finite positive real");
    }
}

void require_strictly_increasing(const std::vector<double>& v, const char* what) {
    if (v.empty()) throw std::invalid_argument(std::string(what) + " grid is empty");
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (!(v[i] > v[i - 1])) {
            throw std::invalid_argument(std::string(what) + " grid must be strictly increasing");
        }
    }
}

}  // namespace

Dataset::Dataset(std::vector<UnitRecord> records, std::vector<std::string> covariate_names) {
    if (records.size() < 2) throw std::invalid_argument("dataset needs at least two records");
    dim_ = records.front().covariates.size();
    for (const auto& r : records) {
        if (r.covariates.size() != dim_) {
            throw std::invalid_argument("covariate vector length differs across records");
        }
        if (r.treatment != 0 && r.treatment != 1) {
            throw std::invalid_argument("treatment must be 0 or 1");
        }
        if (!std::isfinite(r.outcome)) throw std::invalid_argument("outcome must be finite");
        for (double x : r.covariates) {
            if (!std::isfinite(x)) throw std::invalid_argument("covariates must be finite");
        }
    }
    if (covariate_names.empty()) {
        for (std::size_t j = 0; j < dim_; ++j) covariate_names.push_back("x" + std::to_string(j + 1));
    }
    if (covariate_names.size() != dim_) {
        throw std::invalid_argument("covariate name count does not match covariate dimension");
    }
    records_ = std::make_shared<const std::vector<UnitRecord>>(std::move(records));
    names_ = std::make_shared<const std::vector<std::string>>(std::move(covariate_names));
}

std::span<const UnitRecord> Dataset::records() const {
    if (!records_) return {};
    return {records_->data(), records_->size()};
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    std::vector<UnitRecord> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= size()) throw std::out_of_range("subset index out of range");
        out.push_back((*records_)[i]);
    }
    return Dataset(std::move(out), *names_);
}

std::size_t Dataset::count_treated() const {
    std::size_t c = 0;
    for (const auto& r : records()) c += static_cast<std::size_t>(r.treatment);
    return c;
}

SensitivityParams::SensitivityParams(double delta_, double gamma_) : delta(delta_), gamma(gamma_) {
    require_delta(delta);
    if (!std::isfinite(gamma) || gamma < 1.0) {
        throw std::invalid_argument("gamma must be a finite real >= 1");
    }
}

ParamGrid::ParamGrid(std::vector<double> deltas, std::vector<double> gammas)
    : deltas_(std::move(deltas)), gammas_(std::move(gammas)) {
    require_strictly_increasing(deltas_, "delta");
    require_strictly_increasing(gammas_, "gamma");
    for (double d : deltas_) require_delta(d);
    for (double g : gammas_) {
        if (!std::isfinite(g) || g < 1.0) throw std::invalid_argument("gamma grid values must be >= 1");
    }
}

std::string to_string(BoundSide s) { return s == BoundSide::lower ? "lower" : "upper"; }

double tilt_propensity(double pi, double delta) {
    require_probability(pi, "pi");
    require_delta(delta);
    if (pi == 0.0 || pi == 1.0) return pi;
    return delta * pi / (delta * pi + 1.0 - pi);
}

double implied_delta(double q, double pi) {
    if (!std::isfinite(q) || !std::isfinite(pi) || q <= 0.0 || q >= 1.0 || pi <= 0.0 || pi >= 1.0) {
        throw std::invalid_argument("implied_delta needs q and pi strictly inside (0,1)");
    }
    return (q / (1.0 - q)) / (pi / (1.0 - pi));
}

IdentificationWeights identification_weights(double pi, double delta) {
    const double q = tilt_propensity(pi, delta);
    return {q * pi, q * (1.0 - pi), (1.0 - q) * (1.0 - pi), (1.0 - q) * pi};
}

double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace incsens
