#include "incsens/t2_bounds.hpp"

#include "incsens/lp.hpp"
#include "incsens/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace incsens {

namespace {

void require_caps(double delta, double Lambda1, double Lambda2) {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("delta must be a finite positive real");
    if (!(Lambda1 >= 1.0) || !(Lambda2 >= 1.0) || !std::isfinite(Lambda1) || !std::isfinite(Lambda2)) {
        throw std::invalid_argument("sensitivity caps must be finite and >= 1");
    }
}

/// The (path, x1 = i) block: objective and constraints only couple entries
/// sharing both.
struct Block {
    std::size_t n2 = 0;
    std::size_t ny = 0;
    double mass1 = 0.0;  // p(x1)
    double pi1s = 0.0;   // P(A1 = a1 | x1)
    bool stage_weighted = true;
    std::vector<double> px2;              // [j]
    std::vector<double> q;                // [j]
    std::vector<double> pi2s;             // [j]
    std::vector<double> w;                // [j] rho weight
    std::vector<std::vector<double>> py;  // [j][k]
    std::vector<double> y;                // [k]
    double L1 = 1.0;
    double L2 = 1.0;

    Block(const DiscreteT2Model& m, TreatmentPath path, std::size_t i, double delta, double Lambda1, double Lambda2,
          const T2Options& opt)
        : n2(m.n2()), ny(m.ny()), mass1(m.p_x1[i]), pi1s(m.stage1_prob(i, path.a1)),
          stage_weighted(opt.objective == ObjectiveForm::stage_weighted), y(m.y_support), L1(Lambda1), L2(Lambda2) {
        const auto a1 = static_cast<std::size_t>(path.a1);
        const auto a2 = static_cast<std::size_t>(path.a2);
        for (std::size_t j = 0; j < n2; ++j) {
            px2.push_back(m.p_x2[i][a1][j]);
            q.push_back(tilt_path_prob(path, {i, path.a1, j}, delta, m));
            pi2s.push_back(m.stage2_prob(i, path.a1, j, path.a2));
            w.push_back(rho_weight(m, path, i, j, opt.rho_weight));
            py.push_back(m.p_y[i][j][a1][a2]);
        }
    }

    double stage1(const std::vector<double>& l1, std::size_t k) const {
        return stage_weighted ? pi1s + (1.0 - pi1s) * l1[k] : pi1s;
    }

    double objective(const std::vector<std::vector<double>>& l2, const std::vector<double>& l1) const {
        double v = 0.0;
        for (std::size_t j = 0; j < n2; ++j) {
            for (std::size_t k = 0; k < ny; ++k) {
                v += px2[j] * q[j] * py[j][k] * y[k] * stage1(l1, k) * (pi2s[j] + (1.0 - pi2s[j]) * l2[j][k]);
            }
        }
        return mass1 * v;
    }

    /// Linear program in lambda2 with lambda1 fixed; cost overrides the objective when given.
    LinearProgram lambda2_program(const std::vector<double>& l1, const std::vector<double>* cost) const {
        LinearProgram lp;
        const std::size_t nv = n2 * ny;
        lp.c.assign(nv, 0.0);
        lp.lo.assign(nv, 1.0 / L2);
        lp.hi.assign(nv, L2);
        std::vector<double> compat1(nv, 0.0);
        double compat1_rhs = 1.0;
        for (std::size_t j = 0; j < n2; ++j) {
            std::vector<double> row(nv, 0.0);
            for (std::size_t k = 0; k < ny; ++k) {
                const std::size_t v = j * ny + k;
                row[v] = py[j][k];
                lp.c[v] = cost ? (*cost)[v] : mass1 * px2[j] * q[j] * py[j][k] * y[k] * stage1(l1, k) * (1.0 - pi2s[j]);
                compat1[v] = px2[j] * py[j][k] * l1[k] * (1.0 - w[j]);
                compat1_rhs -= px2[j] * py[j][k] * l1[k] * w[j];
            }
            lp.A.push_back(std::move(row));
            lp.b.push_back(1.0);
        }
        lp.A.push_back(std::move(compat1));
        lp.b.push_back(compat1_rhs);
        return lp;
    }

    /// Linear program in lambda1 with lambda2 fixed.
    LinearProgram lambda1_program(const std::vector<std::vector<double>>& l2, const std::vector<double>* cost) const {
        LinearProgram lp;
        lp.c.assign(ny, 0.0);
        lp.lo.assign(ny, 1.0 / L1);
        lp.hi.assign(ny, L1);
        std::vector<double> row(ny, 0.0);
        for (std::size_t k = 0; k < ny; ++k) {
            double coef = 0.0;
            double obj = 0.0;
            for (std::size_t j = 0; j < n2; ++j) {
                coef += px2[j] * py[j][k] * (w[j] + (1.0 - w[j]) * l2[j][k]);
                obj += px2[j] * q[j] * py[j][k] * (pi2s[j] + (1.0 - pi2s[j]) * l2[j][k]);
            }
            row[k] = coef;
            if (cost) lp.c[k] = (*cost)[k];
            else if (stage_weighted) lp.c[k] = mass1 * (1.0 - pi1s) * y[k] * obj;
        }
        lp.A.push_back(std::move(row));
        lp.b.push_back(1.0);
        return lp;
    }
};

std::vector<std::vector<double>> unflatten(const std::vector<double>& x, std::size_t n2, std::size_t ny) {
    std::vector<std::vector<double>> out(n2, std::vector<double>(ny));
    for (std::size_t j = 0; j < n2; ++j) {
        for (std::size_t k = 0; k < ny; ++k) out[j][k] = x[j * ny + k];
    }
    return out;
}

struct BlockSolution {
    double value = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> l2;
    std::vector<double> l1;
};

/// Lattice of lambda1 starting points, or empty when it would exceed the cap.
std::vector<std::vector<double>> lambda1_lattice(std::size_t ny, double L1, std::size_t per_dim, std::size_t cap) {
    std::vector<std::vector<double>> pts;
    if (per_dim < 2 || L1 <= 1.0) return pts;
    double total = 1.0;
    for (std::size_t k = 0; k < ny; ++k) total *= static_cast<double>(per_dim);
    if (total > static_cast<double>(cap)) return pts;
    std::vector<std::size_t> idx(ny, 0);
    while (true) {
        std::vector<double> p(ny);
        for (std::size_t k = 0; k < ny; ++k) {
            p[k] = 1.0 / L1 + (L1 - 1.0 / L1) * static_cast<double>(idx[k]) / static_cast<double>(per_dim - 1);
        }
        pts.push_back(std::move(p));
        std::size_t k = 0;
        while (k < ny && ++idx[k] == per_dim) idx[k++] = 0;
        if (k == ny) break;
    }
    return pts;
}

BlockSolution solve_block(const Block& b, const T2SolverOptions& solver, std::uint64_t seed) {
    BlockSolution best;
    auto polish = [&](std::vector<std::vector<double>> l2, std::vector<double> l1) {
        double value = b.objective(l2, l1);
        for (std::size_t it = 0; it < solver.max_iterations; ++it) {
            const double before = value;
            const auto r2 = solve_lp(b.lambda2_program(l1, nullptr));
            if (r2.status == LpStatus::optimal) {
                auto cand = unflatten(r2.x, b.n2, b.ny);
                if (b.objective(cand, l1) >= value) {
                    l2 = std::move(cand);
                    value = b.objective(l2, l1);
                }
            }
            const auto r1 = solve_lp(b.lambda1_program(l2, nullptr));
            if (r1.status == LpStatus::optimal && b.objective(l2, r1.x) >= value) {
                l1 = r1.x;
                value = b.objective(l2, l1);
            }
            if (value - before < solver.tolerance) break;
        }
        if (value > best.value) best = {value, std::move(l2), std::move(l1)};
    };

    // lambda1 = 1 keeps any stage-2-normalized lambda2 feasible.
    const std::vector<double> ones1(b.ny, 1.0);
    polish(std::vector<std::vector<double>>(b.n2, std::vector<double>(b.ny, 1.0)), ones1);
    Rng rng(seed);
    for (std::size_t start = 1; start < solver.starts; ++start) {
        std::vector<double> c2(b.n2 * b.ny);
        for (auto& v : c2) v = rng.normal();
        const auto r2 = solve_lp(b.lambda2_program(ones1, &c2));
        if (r2.status != LpStatus::optimal) continue;
        auto l2 = unflatten(r2.x, b.n2, b.ny);
        std::vector<double> c1(b.ny);
        for (auto& v : c1) v = rng.normal();
        const auto r1 = solve_lp(b.lambda1_program(l2, &c1));
        polish(std::move(l2), r1.status == LpStatus::optimal ? r1.x : ones1);
    }
    // The lambda1-lambda2 coupling makes the problem bilinear; a lattice of
    // lambda1 values, each with its exact lambda2 response, seeds every basin.
    for (const auto& l1 : lambda1_lattice(b.ny, b.L1, solver.lattice_points, solver.lattice_cap)) {
        const auto r2 = solve_lp(b.lambda2_program(l1, nullptr));
        if (r2.status != LpStatus::optimal) continue;
        polish(unflatten(r2.x, b.n2, b.ny), l1);
    }
    return best;
}

SharpBoundResult upper_bound(const DiscreteT2Model& model, double delta, double Lambda1, double Lambda2,
                             const T2Options& options, const T2SolverOptions& solver) {
    SharpBoundResult res;
    res.lambdas = LambdaTables::ones(model, Lambda1, Lambda2);
    for (TreatmentPath path : kPaths) {
        double total = 0.0;
        for (std::size_t i = 0; i < model.n1(); ++i) {
            const Block b(model, path, i, delta, Lambda1, Lambda2, options);
            const auto sol = solve_block(b, solver, derive_seed(solver.seed, path.index() * 1000003ULL + i));
            res.lambdas.paths[path.index()].lambda2[i] = sol.l2;
            res.lambdas.paths[path.index()].lambda1[i] = sol.l1;
            total += sol.value;
        }
        res.path_values[path.index()] = total;
        res.value += total;
    }
    return res;
}

std::vector<double> grid_values(double cap, double step) {
    std::vector<double> v;
    const double lo = 1.0 / cap;
    for (std::size_t m = 0;; ++m) {
        const double x = lo + static_cast<double>(m) * step;
        if (x > cap + 1e-12) break;
        v.push_back(std::min(x, cap));
    }
    v.push_back(1.0);
    v.push_back(cap);
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }), v.end());
    return v;
}

/// Odometer over a product of grid indices.
bool advance(std::vector<std::size_t>& idx, std::size_t base) {
    for (auto& d : idx) {
        if (++d < base) return true;
        d = 0;
    }
    return false;
}

}  // namespace

SharpBoundResult sharp_bounds(const DiscreteT2Model& model, double delta, double Lambda1, double Lambda2,
                              BoundSide direction, const T2Options& options, const T2SolverOptions& solver) {
    model.validate();
    require_caps(delta, Lambda1, Lambda2);
    SharpBoundResult res;
    if (direction == BoundSide::upper) {
        res = upper_bound(model, delta, Lambda1, Lambda2, options, solver);
    } else {
        res = upper_bound(model.negated_outcome(), delta, Lambda1, Lambda2, options, solver);
        res.value = -res.value;
        for (auto& v : res.path_values) v = -v;
    }
    res.compatibility = check_compatibility(res.lambdas, model, options);
    return res;
}

BruteForceResult brute_force_bounds(const DiscreteT2Model& model, double delta, double Lambda1, double Lambda2,
                                    double grid_step, const T2Options& options) {
    model.validate();
    require_caps(delta, Lambda1, Lambda2);
    if (!(grid_step > 0.0)) throw std::invalid_argument("grid step must be positive");
    const std::size_t per_path = model.n1() * model.n2() * model.ny() + model.n1() * model.ny();
    if (per_path > 12) throw std::invalid_argument("brute force is limited to 12 lambda entries per treatment path");

    const auto g2 = grid_values(Lambda2, grid_step);
    const auto g1 = grid_values(Lambda1, grid_step);
    const double lo2 = 1.0 / Lambda2;
    const double lo1 = 1.0 / Lambda1;
    constexpr double kBoxTol = 1e-12;
    BruteForceResult out;
    for (TreatmentPath path : kPaths) {
        for (std::size_t i = 0; i < model.n1(); ++i) {
            const Block b(model, path, i, delta, Lambda1, Lambda2, options);
            // Per x2 value, the outcome entry with the largest probability is solved from its normalization.
            std::vector<std::size_t> solved2(b.n2);
            for (std::size_t j = 0; j < b.n2; ++j) {
                solved2[j] = static_cast<std::size_t>(std::max_element(b.py[j].begin(), b.py[j].end()) - b.py[j].begin());
            }
            const std::size_t free2 = b.n2 * (b.ny - 1);
            const std::size_t free1 = b.ny - 1;
            double best_hi = -std::numeric_limits<double>::infinity();
            double best_lo = std::numeric_limits<double>::infinity();
            std::vector<std::vector<double>> l2(b.n2, std::vector<double>(b.ny));
            std::vector<double> l1(b.ny);
            std::vector<double> coef(b.ny);
            std::vector<std::size_t> idx2(free2, 0);
            do {
                bool ok = true;
                std::size_t f = 0;
                for (std::size_t j = 0; j < b.n2 && ok; ++j) {
                    double rest = 1.0;
                    for (std::size_t k = 0; k < b.ny; ++k) {
                        if (k == solved2[j]) continue;
                        l2[j][k] = g2[idx2[f++]];
                        rest -= b.py[j][k] * l2[j][k];
                    }
                    const double v = rest / b.py[j][solved2[j]];
                    if (v < lo2 - kBoxTol || v > Lambda2 + kBoxTol) ok = false;
                    l2[j][solved2[j]] = v;
                }
                if (!ok) continue;
                for (std::size_t k = 0; k < b.ny; ++k) {
                    coef[k] = 0.0;
                    for (std::size_t j = 0; j < b.n2; ++j) coef[k] += b.px2[j] * b.py[j][k] * (b.w[j] + (1.0 - b.w[j]) * l2[j][k]);
                }
                const std::size_t solved1 =
                    static_cast<std::size_t>(std::max_element(coef.begin(), coef.end()) - coef.begin());
                std::vector<std::size_t> idx1(free1, 0);
                do {
                    double rest = 1.0;
                    std::size_t g = 0;
                    for (std::size_t k = 0; k < b.ny; ++k) {
                        if (k == solved1) continue;
                        l1[k] = g1[idx1[g++]];
                        rest -= coef[k] * l1[k];
                    }
                    const double v = rest / coef[solved1];
                    if (v < lo1 - kBoxTol || v > Lambda1 + kBoxTol) continue;
                    l1[solved1] = v;
                    const double val = b.objective(l2, l1);
                    best_hi = std::max(best_hi, val);
                    best_lo = std::min(best_lo, val);
                    ++out.feasible_points;
                } while (advance(idx1, g1.size()));
            } while (advance(idx2, g2.size()));
            if (!std::isfinite(best_hi)) throw std::runtime_error("brute force found no feasible grid point");
            out.upper += best_hi;
            out.lower += best_lo;
        }
    }
    return out;
}

}  // namespace incsens
