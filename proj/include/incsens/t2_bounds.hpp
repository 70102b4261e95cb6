#pragma once

#include "incsens/core.hpp"
#include "incsens/t2_model.hpp"

#include <array>
#include <cstdint>

namespace incsens {

struct T2SolverOptions {
    std::size_t starts = 16;
    std::size_t max_iterations = 200;
    double tolerance = 1e-13;
    std::uint64_t seed = 7;
    /// Points per lambda1 coordinate in the start lattice; skipped when the
    /// lattice would exceed lattice_cap points.
    std::size_t lattice_points = 17;
    std::size_t lattice_cap = 5000;
};

struct SharpBoundResult {
    double value = 0.0;
    /// Maximizing (upper) or minimizing (lower) tables.
    LambdaTables lambdas;
    std::array<double, 4> path_values{};
    CompatibilityReport compatibility;
};

/// Optimizes the sum over paths of f_ipw over box- and compatibility-feasible
/// lambda tables. Each (path, x1) block is solved by alternating exact linear
/// programs in lambda2 (lambda1 fixed) and lambda1 (lambda2 fixed) from random
/// vertex starts and a lambda1 lattice; the lower bound is minus the upper
/// bound for the negated outcome.
SharpBoundResult sharp_bounds(const DiscreteT2Model& model, double delta, double Lambda1, double Lambda2,
                              BoundSide direction, const T2Options& options = {},
                              const T2SolverOptions& solver = {});

struct BruteForceResult {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t feasible_points = 0;
};

/// Exhaustive search over lambda entries on the grid {1/Lambda + m*step} plus
/// {1, Lambda}, with one entry per equality solved exactly from the others.
/// Requires at most 12 lambda entries per treatment path.
BruteForceResult brute_force_bounds(const DiscreteT2Model& model, double delta, double Lambda1, double Lambda2,
                                    double grid_step, const T2Options& options = {});

}  // namespace incsens
