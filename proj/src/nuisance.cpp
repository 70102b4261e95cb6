#include "incsens/nuisance.hpp"

#include "incsens/numeric.hpp"
#include "incsens/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace incsens {

namespace {

std::vector<std::span<const double>> covariate_rows(const Dataset& d, int arm = -1) {
    std::vector<std::span<const double>> rows;
    for (const auto& r : d.records()) {
        if (arm >= 0 && r.treatment != arm) continue;
        rows.emplace_back(r.covariates);
    }
    return rows;
}

double clamp_probability(double p, double clip) { return std::clamp(p, clip, 1.0 - clip); }

ScalarField kernel_regression(std::vector<std::vector<double>> points, std::vector<double> targets,
                              const LocalitySpec& locality) {
    auto weighter = std::make_shared<const LocalWeighter>(std::move(points), locality);
    auto y = std::make_shared<const std::vector<double>>(std::move(targets));
    return [weighter, y](std::span<const double> x) {
        std::vector<double> w;
        weighter->weights(x, w);
        double num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            num += w[i] * (*y)[i];
            den += w[i];
        }
        return num / den;
    };
}

std::string fold_context(std::size_t k, const std::exception& e) {
    return "nuisance fit for fold " + std::to_string(k) + ": " + e.what();
}

}  // namespace

std::vector<std::size_t> FoldPlan::members(std::size_t k) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (fold_of[i] == static_cast<int>(k)) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> FoldPlan::training(std::size_t k) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (fold_of[i] != static_cast<int>(k)) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> FoldPlan::training_half(std::size_t k, int half) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (inner_half[k][i] == half) out.push_back(i);
    }
    return out;
}

FoldPlan make_fold_plan(std::size_t n, std::size_t K, std::uint64_t seed) {
    if (K < 2 || K > n) throw std::invalid_argument("fold count must satisfy 2 <= K <= n");
    FoldPlan plan;
    plan.n = n;
    plan.K = K;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, 0));
    rng.shuffle(perm.begin(), perm.end());
    plan.fold_of.assign(n, 0);
    for (std::size_t r = 0; r < n; ++r) plan.fold_of[perm[r]] = static_cast<int>(r % K);
    plan.inner_half.assign(K, std::vector<int>(n, 0));
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<std::size_t> train = plan.training(k);
        Rng half_rng(derive_seed(seed, k + 1));
        half_rng.shuffle(train.begin(), train.end());
        const std::size_t first = (train.size() + 1) / 2;
        for (std::size_t r = 0; r < train.size(); ++r) plan.inner_half[k][train[r]] = r < first ? 1 : 2;
    }
    return plan;
}

void LearnerSpec::validate() const {
    bounds.validate();
    if (!(logistic_ridge > 0.0)) throw std::invalid_argument("logistic ridge must be positive");
    if (!(propensity_clip > 0.0) || propensity_clip >= 0.5) {
        throw std::invalid_argument("propensity clip must lie in (0, 0.5)");
    }
}

std::string LearnerSpec::describe() const {
    std::ostringstream os;
    os << "propensity=" << (propensity == PropensityMethod::logistic ? "logistic" : "kernel")
       << ";outcome=" << (outcome == OutcomeMethod::linear ? "linear" : "kernel")
       << ";bounds=" << (bounds.method == BoundMethod::local_kernel ? "kernel" : "asymmetric_basis");
    const auto& loc = bounds.locality;
    if (loc.kind == LocalityKind::gaussian_kernel) {
        if (loc.bandwidth > 0.0) os << ";bandwidth=" << loc.bandwidth;
        else os << ";bandwidth_scale=" << loc.bandwidth_scale;
    } else {
        os << ";neighbors=" << loc.neighbors;
    }
    if (bounds.method == BoundMethod::asymmetric_basis) os << ";degree=" << bounds.basis_degree;
    return os.str();
}

UnitNuisance FittedNuisanceSet::evaluate(std::span<const double> x) const {
    UnitNuisance u;
    u.pi = pi(x);
    for (int a = 0; a < 2; ++a) {
        u.mu[a] = mu[a](x);
        const auto b = bounds[a](x);
        for (int s = 0; s < 2; ++s) {
            u.theta[a][s] = b[s].theta;
            u.nu[a][s] = b[s].nu;
        }
    }
    return u;
}

ScalarField fit_propensity(const Dataset& train, const LearnerSpec& spec) {
    spec.validate();
    const std::size_t treated = train.count_treated();
    if (treated == 0 || treated == train.size()) {
        throw std::invalid_argument("propensity fit needs both treatment arms in the training set");
    }
    const double clip = spec.propensity_clip;
    if (spec.propensity == PropensityMethod::kernel) {
        std::vector<std::vector<double>> pts;
        std::vector<double> labels;
        for (const auto& r : train.records()) {
            pts.push_back(r.covariates);
            labels.push_back(r.treatment);
        }
        auto base = kernel_regression(std::move(pts), std::move(labels), spec.bounds.locality);
        return [base, clip](std::span<const double> x) { return clamp_probability(base(x), clip); };
    }
    const auto rows = covariate_rows(train);
    auto basis = std::make_shared<const BasisExpansion>(rows, 1);
    const Eigen::MatrixXd design = basis->design(rows);
    Eigen::VectorXd labels(design.rows());
    for (std::size_t i = 0; i < train.size(); ++i) labels[static_cast<Eigen::Index>(i)] = train[i].treatment;
    auto coef = std::make_shared<const Eigen::VectorXd>(fit_logistic_irls(design, labels, spec.logistic_ridge));
    return [basis, coef, clip](std::span<const double> x) {
        return clamp_probability(logistic(basis->transform(x).dot(*coef)), clip);
    };
}

ScalarField fit_outcome_regression(const Dataset& train, int arm, const LearnerSpec& spec) {
    spec.validate();
    if (arm != 0 && arm != 1) throw std::invalid_argument("arm must be 0 or 1");
    std::vector<std::vector<double>> pts;
    std::vector<double> y;
    for (const auto& r : train.records()) {
        if (r.treatment != arm) continue;
        pts.push_back(r.covariates);
        y.push_back(r.outcome);
    }
    if (y.empty()) throw std::invalid_argument("outcome regression arm " + std::to_string(arm) + " is empty");
    if (spec.outcome == OutcomeMethod::kernel) return kernel_regression(std::move(pts), std::move(y), spec.bounds.locality);
    std::vector<std::span<const double>> rows(pts.begin(), pts.end());
    auto basis = std::make_shared<const BasisExpansion>(rows, 1);
    const Eigen::MatrixXd design = basis->design(rows);
    const Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    auto coef = std::make_shared<const Eigen::VectorXd>(design.colPivHouseholderQr().solve(target));
    return [basis, coef](std::span<const double> x) { return basis->transform(x).dot(*coef); };
}

PropensityOutcomeFit fit_propensity_outcome(const Dataset& train, const LearnerSpec& spec) {
    return {fit_propensity(train, spec), {fit_outcome_regression(train, 0, spec), fit_outcome_regression(train, 1, spec)}};
}

FittedNuisanceSet attach_bound_fields(const PropensityOutcomeFit& base, const Dataset& data, const FoldPlan& plan,
                                      std::size_t k, double gamma, const LearnerSpec& spec) {
    if (plan.n != data.size()) throw std::invalid_argument("fold plan size does not match the dataset");
    if (k >= plan.K) throw std::out_of_range("fold index out of range");
    FittedNuisanceSet set;
    set.pi = base.pi;
    set.mu = base.mu;
    set.gamma = gamma;
    try {
        const auto half1 = plan.training_half(k, 1);
        const auto half2 = plan.training_half(k, 2);
        const Dataset theta_half = data.subset(half1);
        const Dataset nu_half = data.subset(half2);
        for (int a = 0; a < 2; ++a) set.bounds[a] = fit_bound_fields(theta_half, nu_half, a, gamma, spec.bounds);
    } catch (const std::exception& e) {
        throw std::runtime_error(fold_context(k, e));
    }
    set.provenance.kind = "learned";
    set.provenance.fold = static_cast<int>(k);
    set.provenance.learner = spec.describe();
    set.provenance.training_indices = plan.training(k);
    return set;
}

FittedNuisanceSet fit_nuisance_set(const Dataset& data, const FoldPlan& plan, std::size_t k, double gamma,
                                   const LearnerSpec& spec) {
    if (plan.n != data.size()) throw std::invalid_argument("fold plan size does not match the dataset");
    if (k >= plan.K) throw std::out_of_range("fold index out of range");
    PropensityOutcomeFit base;
    try {
        base = fit_propensity_outcome(data.subset(plan.training(k)), spec);
    } catch (const std::exception& e) {
        throw std::runtime_error(fold_context(k, e));
    }
    return attach_bound_fields(base, data, plan, k, gamma, spec);
}

FittedNuisanceSet truth_nuisances(const AnalyticDGP& dgp, double gamma) {
    auto truth = std::make_shared<const OracleTruth>(dgp, gamma);
    FittedNuisanceSet set;
    set.gamma = gamma;
    set.pi = [truth](std::span<const double> x) { return truth->pi(x[0]); };
    for (int a = 0; a < 2; ++a) {
        set.mu[a] = [truth, a](std::span<const double> x) { return truth->mu(a, x[0]); };
        set.bounds[a] = make_bound_fields(
            [truth, a](std::span<const double> x) {
                std::array<BoundValue, 2> out;
                for (BoundSide s : kBothSides) out[side_index(s)] = {truth->theta(a, s, x[0]), truth->nu(s)};
                return out;
            },
            a, gamma);
    }
    set.provenance.kind = "analytic";
    return set;
}

namespace {

std::size_t theta_id(int arm, int side) { return 3 + static_cast<std::size_t>((1 - arm) * 2 + side); }
std::size_t nu_id(int arm, int side) { return 7 + static_cast<std::size_t>((1 - arm) * 2 + side); }

/// Shift for one function at x: either the fixed per-function score or a
/// score hashed from (seed, function, x).
struct ShiftSource {
    double m = 0.0;
    NoiseScores z{};
    bool per_point = false;
    std::uint64_t seed = 0;

    double operator()(std::size_t fid, double x) const {
        if (!per_point) return m + m * z[fid];
        const std::uint64_t key = derive_seed(derive_seed(seed, fid), std::bit_cast<std::uint64_t>(x));
        Rng rng(key);
        return m + m * rng.normal();
    }
};

FittedNuisanceSet perturbed_truth(const AnalyticDGP& dgp, double gamma, ShiftSource shift) {
    auto truth = std::make_shared<const OracleTruth>(dgp, gamma);
    FittedNuisanceSet set;
    set.gamma = gamma;
    set.pi = [truth, shift](std::span<const double> x) {
        return clamp_probability(logistic(logit(truth->pi(x[0])) + shift(0, x[0])), 1e-12);
    };
    for (int a = 0; a < 2; ++a) {
        set.mu[a] = [truth, shift, a](std::span<const double> x) {
            return truth->mu(a, x[0]) + shift(static_cast<std::size_t>(1 + a), x[0]);
        };
        set.bounds[a] = make_bound_fields(
            [truth, shift, a, gamma](std::span<const double> x) {
                std::array<BoundValue, 2> out;
                for (BoundSide s : kBothSides) {
                    const int k = side_index(s);
                    out[k].theta = truth->theta(a, s, x[0]) + shift(theta_id(a, k), x[0]);
                    out[k].nu = clip_nu(truth->nu(s) + shift(nu_id(a, k), x[0]), gamma, s);
                }
                return out;
            },
            a, gamma);
    }
    set.provenance.kind = "noised";
    return set;
}

}  // namespace

FittedNuisanceSet shifted_truth_nuisances(const AnalyticDGP& dgp, double gamma, double m, const NoiseScores& z) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw std::invalid_argument("shift scale must be finite and >= 0");
    ShiftSource shift;
    shift.m = m;
    shift.z = z;
    return perturbed_truth(dgp, gamma, shift);
}

FittedNuisanceSet noised_truth_nuisances(const AnalyticDGP& dgp, double alpha, std::size_t n, double gamma,
                                         std::uint64_t seed, NoisedOptions options) {
    if (!(alpha > 0.0) || alpha > 0.5) throw std::invalid_argument("alpha must lie in (0, 0.5]");
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    ShiftSource shift;
    shift.m = std::pow(static_cast<double>(n), -alpha);
    shift.per_point = options.per_point;
    shift.seed = seed;
    Rng rng(seed);
    for (auto& v : shift.z) v = rng.normal();
    FittedNuisanceSet set = perturbed_truth(dgp, gamma, shift);
    set.provenance.alpha = alpha;
    set.provenance.seed = seed;
    return set;
}

}  // namespace incsens
