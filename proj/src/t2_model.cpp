#include "incsens/t2_model.hpp"

#include "incsens/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace incsens {

namespace {

constexpr double kNormTol = 1e-9;

void require_distribution(const std::vector<double>& p, std::size_t size, const std::string& what) {
    if (p.size() != size) throw std::invalid_argument(what + " has the wrong length");
    double s = 0.0;
    for (double v : p) {
        if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument(what + " has a negative or non-finite entry");
        s += v;
    }
    if (std::abs(s - 1.0) > kNormTol) throw std::invalid_argument(what + " does not sum to 1");
}

void require_open_probability(double p, const std::string& what) {
    if (!std::isfinite(p) || p <= 0.0 || p >= 1.0) throw std::invalid_argument(what + " must lie strictly in (0,1)");
}

std::vector<double> random_simplex(Rng& rng, std::size_t n) {
    std::vector<double> p(n);
    double s = 0.0;
    for (auto& v : p) {
        v = 0.1 + rng.uniform();
        s += v;
    }
    for (auto& v : p) v /= s;
    return p;
}

}  // namespace

void DiscreteT2Model::validate() const {
    const std::size_t a = n1();
    const std::size_t b = n2();
    const std::size_t c = ny();
    if (a == 0 || b == 0 || c == 0) throw std::invalid_argument("model supports must be nonempty");
    for (const auto* s : {&x1_support, &x2_support, &y_support}) {
        for (double v : *s) {
            if (!std::isfinite(v)) throw std::invalid_argument("support values must be finite");
        }
    }
    require_distribution(p_x1, a, "p_x1");
    if (pi1.size() != a) throw std::invalid_argument("pi1 has the wrong length");
    for (double p : pi1) require_open_probability(p, "pi1");
    if (p_x2.size() != a || pi2.size() != a || p_y.size() != a) {
        throw std::invalid_argument("stage-2 tables must have one entry per x1 value");
    }
    for (std::size_t i = 0; i < a; ++i) {
        if (p_x2[i].size() != 2 || pi2[i].size() != 2) throw std::invalid_argument("stage-2 tables need both a1 values");
        for (int a1 = 0; a1 < 2; ++a1) {
            require_distribution(p_x2[i][a1], b, "p_x2");
            if (pi2[i][a1].size() != b) throw std::invalid_argument("pi2 has the wrong length");
            for (double p : pi2[i][a1]) require_open_probability(p, "pi2");
        }
        if (p_y[i].size() != b) throw std::invalid_argument("p_y has the wrong x2 dimension");
        for (std::size_t j = 0; j < b; ++j) {
            if (p_y[i][j].size() != 2) throw std::invalid_argument("p_y needs both a1 values");
            for (int a1 = 0; a1 < 2; ++a1) {
                if (p_y[i][j][a1].size() != 2) throw std::invalid_argument("p_y needs both a2 values");
                for (int a2 = 0; a2 < 2; ++a2) require_distribution(p_y[i][j][a1][a2], c, "p_y");
            }
        }
    }
}

double DiscreteT2Model::stage1_prob(std::size_t i, int a1) const { return a1 == 1 ? pi1[i] : 1.0 - pi1[i]; }

double DiscreteT2Model::stage2_prob(std::size_t i, int a1, std::size_t j, int a2) const {
    const double p = pi2[i][static_cast<std::size_t>(a1)][j];
    return a2 == 1 ? p : 1.0 - p;
}

DiscreteT2Model DiscreteT2Model::negated_outcome() const {
    DiscreteT2Model m = *this;
    for (double& y : m.y_support) y = -y;
    return m;
}

double stage_tilt_prob(double pi, int a, double delta) {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("delta must be a finite positive real");
    return (a == 1 ? delta * pi : 1.0 - pi) / (delta * pi + 1.0 - pi);
}

double tilt_path_prob(TreatmentPath path, const History2& h2, double delta, const DiscreteT2Model& model) {
    if (h2.i >= model.n1() || h2.j >= model.n2() || (h2.a1 != 0 && h2.a1 != 1)) {
        throw std::out_of_range("history is outside the model support");
    }
    const double q1 = stage_tilt_prob(model.pi1[h2.i], path.a1, delta);
    const double q2 = stage_tilt_prob(model.pi2[h2.i][static_cast<std::size_t>(h2.a1)][h2.j], path.a2, delta);
    return q1 * q2;
}

LambdaTables LambdaTables::ones(const DiscreteT2Model& model, double Lambda1, double Lambda2) {
    LambdaTables t;
    t.Lambda1 = Lambda1;
    t.Lambda2 = Lambda2;
    for (auto& p : t.paths) {
        p.lambda2.assign(model.n1(), std::vector<std::vector<double>>(model.n2(), std::vector<double>(model.ny(), 1.0)));
        p.lambda1.assign(model.n1(), std::vector<double>(model.ny(), 1.0));
    }
    return t;
}

double rho_weight(const DiscreteT2Model& model, TreatmentPath path, std::size_t i, std::size_t j, RhoWeight w) {
    if (w == RhoWeight::stage2_path) return model.stage2_prob(i, path.a1, j, path.a2);
    return model.pi1[i];
}

double rho(const DiscreteT2Model& model, TreatmentPath path, std::size_t i, std::size_t j, double lambda2,
           RhoWeight w) {
    const double weight = rho_weight(model, path, i, j, w);
    return weight + (1.0 - weight) * lambda2;
}

double CompatibilityReport::max_residual() const {
    return std::max({max_stage2_residual, max_stage1_residual, max_box_violation});
}

CompatibilityReport check_compatibility(const LambdaTables& lambdas, const DiscreteT2Model& model,
                                        const T2Options& options) {
    CompatibilityReport rep;
    const auto box = [](double v, double cap) { return std::max({0.0, 1.0 / cap - v, v - cap}); };
    for (TreatmentPath path : kPaths) {
        const PathLambda& L = lambdas.paths[path.index()];
        for (std::size_t i = 0; i < model.n1(); ++i) {
            double stage1 = 0.0;
            for (std::size_t j = 0; j < model.n2(); ++j) {
                const auto& py = model.p_y[i][j][static_cast<std::size_t>(path.a1)][static_cast<std::size_t>(path.a2)];
                double stage2 = 0.0;
                double inner = 0.0;
                for (std::size_t k = 0; k < model.ny(); ++k) {
                    const double l2 = L.lambda2[i][j][k];
                    stage2 += py[k] * l2;
                    inner += py[k] * L.lambda1[i][k] * rho(model, path, i, j, l2, options.rho_weight);
                    rep.max_box_violation = std::max(rep.max_box_violation, box(l2, lambdas.Lambda2));
                }
                rep.max_stage2_residual = std::max(rep.max_stage2_residual, std::abs(stage2 - 1.0));
                stage1 += model.p_x2[i][static_cast<std::size_t>(path.a1)][j] * inner;
            }
            rep.max_stage1_residual = std::max(rep.max_stage1_residual, std::abs(stage1 - 1.0));
            for (std::size_t k = 0; k < model.ny(); ++k) {
                rep.max_box_violation = std::max(rep.max_box_violation, box(L.lambda1[i][k], lambdas.Lambda1));
            }
        }
    }
    return rep;
}

double f_ipw(const PathLambda& lambda, TreatmentPath path, double delta, const DiscreteT2Model& model,
             const T2Options& options) {
    double total = 0.0;
    const auto a1 = static_cast<std::size_t>(path.a1);
    const auto a2 = static_cast<std::size_t>(path.a2);
    for (std::size_t i = 0; i < model.n1(); ++i) {
        const double pi1s = model.stage1_prob(i, path.a1);
        for (std::size_t j = 0; j < model.n2(); ++j) {
            const double pi2s = model.stage2_prob(i, path.a1, j, path.a2);
            const double q = tilt_path_prob(path, {i, path.a1, j}, delta, model);
            const double mass = model.p_x1[i] * model.p_x2[i][a1][j] * q;
            for (std::size_t k = 0; k < model.ny(); ++k) {
                const double stage2 = pi2s + (1.0 - pi2s) * lambda.lambda2[i][j][k];
                const double stage1 = options.objective == ObjectiveForm::stage_weighted
                                          ? pi1s + (1.0 - pi1s) * lambda.lambda1[i][k]
                                          : pi1s;
                total += mass * model.p_y[i][j][a1][a2][k] * stage1 * stage2 * model.y_support[k];
            }
        }
    }
    return total;
}

double gformula_point(const DiscreteT2Model& model, double delta) {
    double total = 0.0;
    for (TreatmentPath path : kPaths) {
        const auto a1 = static_cast<std::size_t>(path.a1);
        const auto a2 = static_cast<std::size_t>(path.a2);
        for (std::size_t i = 0; i < model.n1(); ++i) {
            for (std::size_t j = 0; j < model.n2(); ++j) {
                const double q = tilt_path_prob(path, {i, path.a1, j}, delta, model);
                double mean_y = 0.0;
                for (std::size_t k = 0; k < model.ny(); ++k) mean_y += model.p_y[i][j][a1][a2][k] * model.y_support[k];
                total += model.p_x1[i] * model.p_x2[i][a1][j] * q * mean_y;
            }
        }
    }
    return total;
}

DiscreteT2Model random_t2_model(std::uint64_t seed, std::size_t n1, std::size_t n2, std::size_t ny) {
    if (n1 == 0 || n2 == 0 || ny == 0) throw std::invalid_argument("support sizes must be positive");
    Rng rng(seed);
    DiscreteT2Model m;
    for (std::size_t i = 0; i < n1; ++i) m.x1_support.push_back(static_cast<double>(i));
    for (std::size_t j = 0; j < n2; ++j) m.x2_support.push_back(static_cast<double>(j));
    for (std::size_t k = 0; k < ny; ++k) m.y_support.push_back(rng.uniform(-1.0, 2.0));
    std::sort(m.y_support.begin(), m.y_support.end());
    m.p_x1 = random_simplex(rng, n1);
    for (std::size_t i = 0; i < n1; ++i) m.pi1.push_back(rng.uniform(0.15, 0.85));
    m.p_x2.assign(n1, {});
    m.pi2.assign(n1, {});
    m.p_y.assign(n1, {});
    for (std::size_t i = 0; i < n1; ++i) {
        for (int a1 = 0; a1 < 2; ++a1) {
            m.p_x2[i].push_back(random_simplex(rng, n2));
            std::vector<double> p2;
            for (std::size_t j = 0; j < n2; ++j) p2.push_back(rng.uniform(0.15, 0.85));
            m.pi2[i].push_back(p2);
        }
        m.p_y[i].assign(n2, {});
        for (std::size_t j = 0; j < n2; ++j) {
            m.p_y[i][j].assign(2, {});
            for (int a1 = 0; a1 < 2; ++a1) {
                for (int a2 = 0; a2 < 2; ++a2) m.p_y[i][j][static_cast<std::size_t>(a1)].push_back(random_simplex(rng, ny));
            }
        }
    }
    m.validate();
    return m;
}

DiscreteT2Model parse_t2_model(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("model file is not valid JSON: ") + e.what());
    }
    DiscreteT2Model m;
    try {
        j.at("x1_support").get_to(m.x1_support);
        j.at("x2_support").get_to(m.x2_support);
        j.at("y_support").get_to(m.y_support);
        j.at("p_x1").get_to(m.p_x1);
        j.at("pi1").get_to(m.pi1);
        j.at("p_x2").get_to(m.p_x2);
        j.at("pi2").get_to(m.pi2);
        j.at("p_y").get_to(m.p_y);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("model file is missing or mistypes a field: ") + e.what());
    }
    m.validate();
    return m;
}

DiscreteT2Model load_t2_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_t2_model(ss.str());
}

std::string t2_model_to_json(const DiscreteT2Model& model) {
    nlohmann::ordered_json j;
    j["x1_support"] = model.x1_support;
    j["x2_support"] = model.x2_support;
    j["y_support"] = model.y_support;
    j["p_x1"] = model.p_x1;
    j["pi1"] = model.pi1;
    j["p_x2"] = model.p_x2;
    j["pi2"] = model.pi2;
    j["p_y"] = model.p_y;
    return j.dump(2);
}

}  // namespace incsens
