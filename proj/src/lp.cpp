#include "incsens/lp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace incsens {

namespace {

/// Tableau rows 0..m-1 are constraints with the right-hand side in the last
/// column; basis[r] is the variable basic in row r.
struct Tableau {
    std::vector<std::vector<double>> t;
    std::vector<int> basis;
    int cols = 0;  // variables, excluding the rhs column

    void pivot(int row, int col) {
        auto& pr = t[static_cast<std::size_t>(row)];
        const double p = pr[static_cast<std::size_t>(col)];
        for (double& v : pr) v /= p;
        for (std::size_t r = 0; r < t.size(); ++r) {
            if (static_cast<int>(r) == row) continue;
            const double f = t[r][static_cast<std::size_t>(col)];
            if (f == 0.0) continue;
            for (std::size_t k = 0; k < pr.size(); ++k) t[r][k] -= f * pr[k];
        }
        basis[static_cast<std::size_t>(row)] = col;
    }

    /// Maximizes the objective sum_j obj[j] x_j over the current tableau,
    /// restricted to columns with allowed[j]. Returns false if unbounded.
    bool optimize(const std::vector<double>& obj, const std::vector<bool>& allowed, double tol) {
        const std::size_t m = t.size();
        const auto rhs = static_cast<std::size_t>(cols);
        for (int guard = 0; guard < 100000; ++guard) {
            // Reduced cost of column j: obj[j] - sum_r obj[basis[r]] * t[r][j].
            int enter = -1;
            for (int j = 0; j < cols; ++j) {
                if (!allowed[static_cast<std::size_t>(j)]) continue;
                double rc = obj[static_cast<std::size_t>(j)];
                for (std::size_t r = 0; r < m; ++r) rc -= obj[static_cast<std::size_t>(basis[r])] * t[r][static_cast<std::size_t>(j)];
                if (rc > tol) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return true;
            int leave = -1;
            double best = 0.0;
            for (std::size_t r = 0; r < m; ++r) {
                const double a = t[r][static_cast<std::size_t>(enter)];
                if (a <= tol) continue;
                const double ratio = t[r][rhs] / a;
                if (leave < 0 || ratio < best - tol ||
                    (std::abs(ratio - best) <= tol && basis[r] < basis[static_cast<std::size_t>(leave)])) {
                    leave = static_cast<int>(r);
                    best = ratio;
                }
            }
            if (leave < 0) return false;
            pivot(leave, enter);
        }
        throw std::runtime_error("simplex iteration limit reached");
    }
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp, double tol) {
    const std::size_t n = lp.c.size();
    const std::size_t me = lp.A.size();
    if (lp.lo.size() != n || lp.hi.size() != n || lp.b.size() != me) {
        throw std::invalid_argument("linear program dimensions are inconsistent");
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (!(lp.lo[j] <= lp.hi[j])) return {};
    }
    for (const auto& row : lp.A) {
        if (row.size() != n) throw std::invalid_argument("constraint row length mismatch");
    }
    // Variables: y_j = x_j - lo_j in [0, u_j] (n), box slacks s_j (n), artificials (me).
    const std::size_t nvar = 2 * n + me;
    const std::size_t m = me + n;
    Tableau tab;
    tab.cols = static_cast<int>(nvar);
    tab.t.assign(m, std::vector<double>(nvar + 1, 0.0));
    tab.basis.assign(m, 0);
    for (std::size_t r = 0; r < me; ++r) {
        double rhs = lp.b[r];
        for (std::size_t j = 0; j < n; ++j) rhs -= lp.A[r][j] * lp.lo[j];
        const double sign = rhs < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < n; ++j) tab.t[r][j] = sign * lp.A[r][j];
        tab.t[r][2 * n + r] = 1.0;
        tab.t[r][nvar] = sign * rhs;
        tab.basis[r] = static_cast<int>(2 * n + r);
    }
    for (std::size_t j = 0; j < n; ++j) {
        auto& row = tab.t[me + j];
        row[j] = 1.0;
        row[n + j] = 1.0;
        row[nvar] = lp.hi[j] - lp.lo[j];
        tab.basis[me + j] = static_cast<int>(n + j);
    }

    std::vector<bool> allowed(nvar, true);
    std::vector<double> phase1(nvar, 0.0);
    for (std::size_t r = 0; r < me; ++r) phase1[2 * n + r] = -1.0;
    tab.optimize(phase1, allowed, tol);
    double infeas = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
        if (tab.basis[r] >= static_cast<int>(2 * n)) infeas += tab.t[r][nvar];
    }
    double b_scale = 1.0;
    for (double v : lp.b) b_scale = std::max(b_scale, std::abs(v));
    if (infeas > 1e-9 * b_scale) return {};

    // Drive remaining (zero-valued) artificials out of the basis; rows where
    // that is impossible are redundant and are dropped.
    for (std::size_t r = 0; r < tab.t.size();) {
        if (tab.basis[r] < static_cast<int>(2 * n)) {
            ++r;
            continue;
        }
        int col = -1;
        for (std::size_t j = 0; j < 2 * n; ++j) {
            if (std::abs(tab.t[r][j]) > 1e-9) {
                col = static_cast<int>(j);
                break;
            }
        }
        if (col >= 0) {
            tab.pivot(static_cast<int>(r), col);
            ++r;
        } else {
            tab.t.erase(tab.t.begin() + static_cast<std::ptrdiff_t>(r));
            tab.basis.erase(tab.basis.begin() + static_cast<std::ptrdiff_t>(r));
        }
    }
    for (std::size_t j = 2 * n; j < nvar; ++j) allowed[j] = false;

    std::vector<double> phase2(nvar, 0.0);
    for (std::size_t j = 0; j < n; ++j) phase2[j] = lp.c[j];
    if (!tab.optimize(phase2, allowed, tol)) throw std::runtime_error("linear program is unbounded");

    LpResult res;
    res.status = LpStatus::optimal;
    res.x = lp.lo;
    for (std::size_t r = 0; r < tab.t.size(); ++r) {
        const int v = tab.basis[r];
        if (v < static_cast<int>(n)) res.x[static_cast<std::size_t>(v)] += tab.t[r][nvar];
    }
    for (std::size_t j = 0; j < n; ++j) res.x[j] = std::clamp(res.x[j], lp.lo[j], lp.hi[j]);
    res.value = 0.0;
    for (std::size_t j = 0; j < n; ++j) res.value += lp.c[j] * res.x[j];
    return res;
}

}  // namespace incsens
