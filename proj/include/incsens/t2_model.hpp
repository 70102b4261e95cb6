#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace incsens {

/// Fully tabulated observed law of (X1, A1, X2, A2, Y) on finite supports.
/// Indices: i over X1, j over X2, k over Y, a1 and a2 in {0,1}.
struct DiscreteT2Model {
    std::vector<double> x1_support;
    std::vector<double> x2_support;
    std::vector<double> y_support;
    std::vector<double> p_x1;                            // [i]
    std::vector<double> pi1;                             // [i] = P(A1=1 | x1)
    std::vector<std::vector<std::vector<double>>> p_x2;  // [i][a1][j]
    std::vector<std::vector<std::vector<double>>> pi2;   // [i][a1][j] = P(A2=1 | h2)
    std::vector<std::vector<std::vector<std::vector<std::vector<double>>>>> p_y;  // [i][j][a1][a2][k]

    std::size_t n1() const { return x1_support.size(); }
    std::size_t n2() const { return x2_support.size(); }
    std::size_t ny() const { return y_support.size(); }

    /// Throws unless every factor normalizes within 1e-9 and treatment
    /// probabilities lie strictly inside (0,1).
    void validate() const;

    /// P(A1 = a1 | x1 = i).
    double stage1_prob(std::size_t i, int a1) const;
    /// P(A2 = a2 | x1 = i, A1 = a1, x2 = j).
    double stage2_prob(std::size_t i, int a1, std::size_t j, int a2) const;

    /// Copy with the outcome support negated (lower bounds reuse the upper-bound solver).
    DiscreteT2Model negated_outcome() const;
};

/// Treatment path index 2*a1 + a2.
struct TreatmentPath {
    int a1 = 0;
    int a2 = 0;
    std::size_t index() const { return static_cast<std::size_t>(2 * a1 + a2); }
};
inline constexpr TreatmentPath kPaths[4] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};

/// History at stage 2.
struct History2 {
    std::size_t i = 0;
    int a1 = 0;
    std::size_t j = 0;
};

/// dQ(a | pi) = (a delta pi + (1-a)(1-pi)) / (delta pi + 1 - pi).
double stage_tilt_prob(double pi, int a, double delta);

/// dQ1(a1 | x1) * dQ2(a2 | h2) for the path and history.
double tilt_path_prob(TreatmentPath path, const History2& h2, double delta, const DiscreteT2Model& model);

struct PathLambda {
    std::vector<std::vector<std::vector<double>>> lambda2;  // [i][j][k]
    std::vector<std::vector<double>> lambda1;               // [i][k]
};

struct LambdaTables {
    std::array<PathLambda, 4> paths;  // by TreatmentPath::index()
    double Lambda1 = 1.0;
    double Lambda2 = 1.0;

    static LambdaTables ones(const DiscreteT2Model& model, double Lambda1, double Lambda2);
};

/// Weight w in rho = w + (1 - w) lambda2.
enum class RhoWeight {
    /// P(A2 = a2 | H2): the stage-2 treatment probability of the path.
    stage2_path,
    /// P(A1 = 1 | X1), the literal stage-1 propensity.
    stage1_literal,
};

enum class ObjectiveForm {
    /// E[1(A=a)(1 + (1-pi1*)/pi1* lambda1)(1 + (1-pi2*)/pi2* lambda2) q Y], pi_k* = P(A_k = a_k | H_k).
    stage_weighted,
    /// E[1(A=a)(1 + (1-pi2*)/pi2* lambda2) q Y]; lambda1 enters only through compatibility.
    lambda2_only,
};

struct T2Options {
    ObjectiveForm objective = ObjectiveForm::stage_weighted;
    RhoWeight rho_weight = RhoWeight::stage2_path;
};

double rho_weight(const DiscreteT2Model& model, TreatmentPath path, std::size_t i, std::size_t j, RhoWeight w);
double rho(const DiscreteT2Model& model, TreatmentPath path, std::size_t i, std::size_t j, double lambda2,
           RhoWeight w);

struct CompatibilityReport {
    double max_stage2_residual = 0.0;
    double max_stage1_residual = 0.0;
    double max_box_violation = 0.0;

    double max_residual() const;
    bool feasible(double tol = 1e-9) const { return max_residual() <= tol; }
};

CompatibilityReport check_compatibility(const LambdaTables& lambdas, const DiscreteT2Model& model,
                                        const T2Options& options = {});

/// Objective contribution of one path.
double f_ipw(const PathLambda& lambda, TreatmentPath path, double delta, const DiscreteT2Model& model,
             const T2Options& options = {});

/// Sum over paths of E[q(a, H2; delta) E(Y | X, A = a)] with the intervened a1 in H2.
double gformula_point(const DiscreteT2Model& model, double delta);

/// Random model with the given support sizes; outcome support drawn in [-1, 2].
DiscreteT2Model random_t2_model(std::uint64_t seed, std::size_t n1 = 2, std::size_t n2 = 2, std::size_t ny = 2);

DiscreteT2Model load_t2_model(const std::string& path);
DiscreteT2Model parse_t2_model(const std::string& json_text);
std::string t2_model_to_json(const DiscreteT2Model& model);

}  // namespace incsens
