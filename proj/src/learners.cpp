#include "incsens/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace incsens {

namespace {

struct ColumnStats {
    double mean = 0.0;
    double sd = 0.0;
};

ColumnStats column_stats(const std::vector<std::span<const double>>& rows, std::size_t j) {
    double m = 0.0;
    for (const auto& r : rows) m += r[j];
    m /= static_cast<double>(rows.size());
    double ss = 0.0;
    for (const auto& r : rows) ss += (r[j] - m) * (r[j] - m);
    const double sd = rows.size() > 1 ? std::sqrt(ss / static_cast<double>(rows.size() - 1)) : 0.0;
    return {m, sd};
}

}  // namespace

BasisExpansion::BasisExpansion(const std::vector<std::span<const double>>& rows, int degree)
    : degree_(degree) {
    if (rows.empty()) throw std::invalid_argument("basis expansion needs at least one row");
    if (degree < 1) throw std::invalid_argument("basis degree must be >= 1");
    const std::size_t d = rows.front().size();
    for (std::size_t j = 0; j < d; ++j) {
        const auto s = column_stats(rows, j);
        if (s.sd > 1e-12 * std::max(1.0, std::abs(s.mean))) {
            kept_.push_back(j);
            center_.push_back(s.mean);
            scale_.push_back(s.sd);
        }
    }
}

Eigen::VectorXd BasisExpansion::transform(std::span<const double> x) const {
    Eigen::VectorXd f(static_cast<Eigen::Index>(size()));
    f[0] = 1.0;
    Eigen::Index c = 1;
    for (std::size_t k = 0; k < kept_.size(); ++k) {
        const double z = (x[kept_[k]] - center_[k]) / scale_[k];
        double p = 1.0;
        for (int deg = 1; deg <= degree_; ++deg) {
            p *= z;
            f[c++] = p;
        }
    }
    return f;
}

Eigen::MatrixXd BasisExpansion::design(const std::vector<std::span<const double>>& rows) const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = transform(rows[i]);
    return m;
}

Eigen::VectorXd fit_weighted_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                           const Eigen::VectorXd& weights, double ridge) {
    const Eigen::Index p = design.cols();
    Eigen::MatrixXd gram = design.transpose() * weights.asDiagonal() * design;
    Eigen::VectorXd rhs = design.transpose() * (weights.array() * y.array()).matrix();
    for (Eigen::Index j = 1; j < p; ++j) gram(j, j) += ridge;
    // Tiny jitter keeps rank-deficient designs (e.g. duplicated covariates) solvable.
    const double jitter = 1e-12 * std::max(1.0, gram.diagonal().cwiseAbs().maxCoeff());
    for (Eigen::Index j = 0; j < p; ++j) gram(j, j) += jitter;
    return gram.ldlt().solve(rhs);
}

Eigen::VectorXd fit_logistic_irls(const Eigen::MatrixXd& design, const Eigen::VectorXd& labels, double ridge,
                                  int max_iter, double tol) {
    const Eigen::Index n = design.rows();
    const Eigen::Index p = design.cols();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    const double ybar = labels.mean();
    if (ybar <= 0.0 || ybar >= 1.0) throw std::invalid_argument("logistic fit needs both classes present");
    beta[0] = logit(ybar);

    auto penalized_loglik = [&](const Eigen::VectorXd& b) {
        double ll = 0.0;
        const Eigen::VectorXd eta = design * b;
        for (Eigen::Index i = 0; i < n; ++i) {
            // log(1 + exp(eta)) computed without overflow
            const double e = eta[i];
            const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
            ll += labels[i] * e - softplus;
        }
        return ll - ridge * b.tail(p - 1).squaredNorm();
    };

    double current = penalized_loglik(beta);
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd eta = design * beta;
        Eigen::VectorXd w(n);
        Eigen::VectorXd grad_resid(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double mu = logistic(eta[i]);
            w[i] = std::max(mu * (1.0 - mu), 1e-12);
            grad_resid[i] = labels[i] - mu;
        }
        Eigen::MatrixXd hess = design.transpose() * w.asDiagonal() * design;
        Eigen::VectorXd grad = design.transpose() * grad_resid;
        for (Eigen::Index j = 1; j < p; ++j) {
            hess(j, j) += 2.0 * ridge;
            grad[j] -= 2.0 * ridge * beta[j];
        }
        hess.diagonal().array() += 1e-12;
        Eigen::VectorXd step = hess.ldlt().solve(grad);
        // Step halving keeps the penalized likelihood monotone under separation.
        double scale = 1.0;
        Eigen::VectorXd candidate = beta + step;
        double next = penalized_loglik(candidate);
        while (!(next >= current - 1e-12) && scale > 1e-8) {
            scale *= 0.5;
            candidate = beta + scale * step;
            next = penalized_loglik(candidate);
        }
        const double change = (candidate - beta).cwiseAbs().maxCoeff();
        beta = candidate;
        const double gain = next - current;
        current = next;
        if (change < tol || std::abs(gain) < tol * (1.0 + std::abs(current))) break;
    }
    return beta;
}

Eigen::VectorXd fit_asymmetric_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, double tilt,
                                             int max_iter) {
    if (!(tilt > 0.0)) throw std::invalid_argument("asymmetric loss tilt must be positive");
    const Eigen::Index n = design.rows();
    Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd beta = fit_weighted_least_squares(design, y, w);
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd resid = y - design * beta;
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double wi = resid[i] < 0.0 ? tilt : 1.0;
            if (wi != w[i]) {
                w[i] = wi;
                changed = true;
            }
        }
        if (!changed) break;
        beta = fit_weighted_least_squares(design, y, w);
    }
    return beta;
}

void LocalitySpec::validate() const {
    if (kind == LocalityKind::gaussian_kernel) {
        if (!(bandwidth_scale > 0.0) || !std::isfinite(bandwidth_scale)) {
            throw std::invalid_argument("bandwidth scale must be positive");
        }
        if (bandwidth < 0.0 || !std::isfinite(bandwidth)) throw std::invalid_argument("bandwidth must be positive");
    } else if (neighbors == 0) {
        throw std::invalid_argument("neighbor count must be positive");
    }
}

LocalWeighter::LocalWeighter(std::vector<std::vector<double>> points, const LocalitySpec& spec)
    : points_(std::move(points)), spec_(spec) {
    spec_.validate();
    if (points_.empty()) throw std::invalid_argument("local weighting needs at least one training point");
    const std::size_t d = points_.front().size();
    std::vector<std::span<const double>> rows;
    rows.reserve(points_.size());
    for (const auto& p : points_) rows.emplace_back(p);
    const double m = static_cast<double>(points_.size());
    inv_bandwidth_.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        const auto s = column_stats(rows, j);
        if (!(s.sd > 0.0)) continue;
        double h = spec_.bandwidth > 0.0 ? spec_.bandwidth : spec_.bandwidth_scale * s.sd * std::pow(m, -0.2);
        if (spec_.kind == LocalityKind::nearest_neighbors) h = s.sd;  // distance scaling only
        inv_bandwidth_[j] = 1.0 / h;
    }
}

void LocalWeighter::weights(std::span<const double> x, std::vector<double>& out) const {
    const std::size_t n = points_.size();
    out.resize(n);
    const std::size_t d = inv_bandwidth_.size();
    for (std::size_t i = 0; i < n; ++i) {
        double q = 0.0;
        const auto& p = points_[i];
        for (std::size_t j = 0; j < d; ++j) {
            const double u = (x[j] - p[j]) * inv_bandwidth_[j];
            q += u * u;
        }
        out[i] = q;
    }
    if (spec_.kind == LocalityKind::gaussian_kernel) {
        const double qmin = *std::min_element(out.begin(), out.end());
        for (auto& v : out) v = std::exp(-0.5 * (v - qmin));
        return;
    }
    const std::size_t k = std::min(spec_.neighbors, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1), order.end(),
                     [&](std::size_t a, std::size_t b) { return out[a] < out[b] || (out[a] == out[b] && a < b); });
    std::vector<double> w(n, 0.0);
    for (std::size_t r = 0; r < k; ++r) w[order[r]] = 1.0;
    out.swap(w);
}

}  // namespace incsens
