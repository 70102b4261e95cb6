#pragma once

#include <vector>

namespace incsens {

/// maximize c'x subject to A x = b and lo <= x <= hi (dense, small problems).
struct LinearProgram {
    std::vector<double> c;
    std::vector<std::vector<double>> A;
    std::vector<double> b;
    std::vector<double> lo;
    std::vector<double> hi;
};

enum class LpStatus { optimal, infeasible };

struct LpResult {
    LpStatus status = LpStatus::infeasible;
    std::vector<double> x;
    double value = 0.0;
};

/// Two-phase tableau simplex with Bland's rule. Redundant equality rows are
/// tolerated. Bounded boxes make the problem bounded whenever feasible.
LpResult solve_lp(const LinearProgram& lp, double tol = 1e-11);

}  // namespace incsens
