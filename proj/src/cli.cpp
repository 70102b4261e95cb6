#include "incsens/cli.hpp"

#include "incsens/csv.hpp"
#include "incsens/estimator.hpp"
#include "incsens/oracle.hpp"
#include "incsens/output.hpp"
#include "incsens/simulation.hpp"
#include "incsens/t2_bounds.hpp"
#include "incsens/t2_model.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace incsens {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : text) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

double parse_double(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("not a number: '" + s + "'");
    }
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument("not a number: '" + s + "'");
    return v;
}

}  // namespace

std::vector<double> parse_grid(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("empty grid");
    std::vector<double> grid;
    const auto parts = split(text, ':');
    if (parts.size() == 4 && (parts[0] == "geom" || parts[0] == "lin")) {
        const double lo = parse_double(parts[1]);
        const double hi = parse_double(parts[2]);
        const double count = parse_double(parts[3]);
        if (count < 1 || count != std::floor(count)) throw std::invalid_argument("grid size must be a positive integer");
        const auto n = static_cast<std::size_t>(count);
        if (n == 1 && lo != hi) throw std::invalid_argument("a one-point grid needs equal ends");
        const bool geom = parts[0] == "geom";
        if (geom && !(lo > 0.0 && hi > 0.0)) throw std::invalid_argument("geometric grid needs positive ends");
        for (std::size_t i = 0; i < n; ++i) {
            const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
            double v = geom ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t;
            if (i + 1 == n) v = hi;
            grid.push_back(v);
        }
        return grid;
    }
    if (parts.size() != 1) throw std::invalid_argument("grid must be a comma list or geom:lo:hi:n / lin:lo:hi:n");
    for (const auto& p : split(text, ',')) grid.push_back(parse_double(p));
    return grid;
}

LearnerSpec learner_from_name(const std::string& name, double bandwidth, double bandwidth_scale,
                              std::size_t neighbors, int basis_degree) {
    LearnerSpec spec;
    spec.bounds.locality.bandwidth = bandwidth;
    spec.bounds.locality.bandwidth_scale = bandwidth_scale;
    spec.bounds.locality.neighbors = neighbors;
    spec.bounds.basis_degree = basis_degree;
    if (name == "kernel") {
    } else if (name == "knn") {
        spec.bounds.locality.kind = LocalityKind::nearest_neighbors;
    } else if (name == "basis") {
        spec.bounds.method = BoundMethod::asymmetric_basis;
    } else if (name == "full-kernel") {
        spec.propensity = PropensityMethod::kernel;
        spec.outcome = OutcomeMethod::kernel;
    } else {
        throw std::invalid_argument("unknown learner '" + name + "' (kernel, knn, basis, full-kernel)");
    }
    spec.validate();
    return spec;
}

namespace {

struct Options {
    std::uint64_t seed = 1;
    std::size_t folds = 10;
    std::optional<double> delta;
    std::optional<double> gamma;
    std::string delta_grid;
    std::string gamma_grid;
    std::string learner = "kernel";
    double bandwidth = 0.0;
    double bandwidth_scale = 1.0;
    std::size_t neighbors = 30;
    int basis_degree = 2;
    double ci_level = 0.95;
    std::string out = "incsens_out";
    bool svg = false;

    std::string data;
    std::string outcome = "y";
    std::string treatment = "a";
    std::string covariates;
    std::optional<std::string> missing;

    std::size_t n = 1000;
    std::optional<std::size_t> reps;
    std::string alpha_grid = "0.10,0.15,0.20,0.25,0.30";
    double x_lo = 0.0;
    double x_hi = 1.0;
    std::string noise = "gaussian";
    std::optional<double> noise_scale;
    bool no_control_variate = false;
    bool iid_shifts = false;
    std::string nuisance = "exact";
    double alpha = 0.25;
    double classify_gamma = 2.0;

    std::string model;
    std::optional<std::uint64_t> model_seed;
    std::optional<double> lambda1;
    std::optional<double> lambda2;
    std::string objective = "stage_weighted";
    std::string rho_weight = "stage2_path";
    std::size_t starts = 16;
    double grid_step = 0.01;
    std::size_t n1 = 2;
    std::size_t n2 = 2;
    std::size_t ny = 2;
    bool refine = false;

    std::string manifest;
};

/// Command-line tokens with the output directory removed, so a manifest
/// replayed into another directory reproduces its own bytes.
std::vector<std::string> strip_out(const std::vector<std::string>& args) {
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--out") {
            ++i;
            continue;
        }
        if (args[i].rfind("--out=", 0) == 0) continue;
        kept.push_back(args[i]);
    }
    return kept;
}

Json grid_json(const std::vector<double>& g) { return Json(g); }

class Runner {
public:
    Runner(const Options& o, std::vector<std::string> argv, std::ostream& out) : o_(o), argv_(std::move(argv)), out_(out) {}

    int estimate();
    int curve_cmd();
    int robustness();
    int sim_figure1();
    int sim_bias();
    int sim_coverage();
    int sim_data();
    int t2_sharp();
    int t2_brute();
    int t2_random_model();

private:
    LoadedData load_data(ArtifactWriter& w, Json& config) const;
    LearnerSpec learner(Json& config) const;
    AnalyticDGP dgp(Json& config) const;
    DiscreteT2Model t2_model(ArtifactWriter& w, Json& config) const;
    T2Options t2_options(Json& config) const;
    std::vector<double> deltas(const std::string& fallback, Json& config) const;
    std::vector<double> gammas(const std::string& fallback, Json& config) const;
    void finish(ArtifactWriter& w, const std::string& command, Json config) const;

    const Options& o_;
    std::vector<std::string> argv_;
    std::ostream& out_;
};

LoadedData Runner::load_data(ArtifactWriter& w, Json& config) const {
    if (o_.data.empty()) throw std::invalid_argument("--data is required");
    SchemaConfig schema;
    schema.outcome = o_.outcome;
    schema.treatment = o_.treatment;
    if (!o_.covariates.empty()) schema.covariates = split(o_.covariates, ',');
    if (o_.missing) schema.missing_tokens = split(*o_.missing, ',');
    auto loaded = load_csv(o_.data, schema);
    w.record_input(o_.data);
    config["data"] = o_.data;
    config["outcome"] = schema.outcome;
    config["treatment"] = schema.treatment;
    config["covariates"] = loaded.data.covariate_names();
    config["missing_tokens"] = schema.missing_tokens;
    return loaded;
}

LearnerSpec Runner::learner(Json& config) const {
    const auto spec = learner_from_name(o_.learner, o_.bandwidth, o_.bandwidth_scale, o_.neighbors, o_.basis_degree);
    config["learner"] = o_.learner;
    config["learner_detail"] = spec.describe();
    config["bandwidth"] = o_.bandwidth;
    config["bandwidth_scale"] = o_.bandwidth_scale;
    config["neighbors"] = o_.neighbors;
    config["basis_degree"] = o_.basis_degree;
    config["folds"] = o_.folds;
    config["ci_level"] = o_.ci_level;
    return spec;
}

AnalyticDGP Runner::dgp(Json& config) const {
    AnalyticDGP d;
    d.x_lo = o_.x_lo;
    d.x_hi = o_.x_hi;
    if (o_.noise == "gaussian") d.noise = gaussian_noise_default();
    else if (o_.noise == "uniform") d.noise = uniform_noise_default();
    else throw std::invalid_argument("--noise must be gaussian or uniform");
    if (o_.noise_scale) d.noise.scale = *o_.noise_scale;
    d.validate();
    config["x_lo"] = d.x_lo;
    config["x_hi"] = d.x_hi;
    config["noise"] = o_.noise;
    config["noise_scale"] = d.noise.scale;
    return d;
}

DiscreteT2Model Runner::t2_model(ArtifactWriter& w, Json& config) const {
    if (!o_.model.empty()) {
        auto m = load_t2_model(o_.model);
        w.record_input(o_.model);
        config["model"] = o_.model;
        return m;
    }
    const std::uint64_t ms = o_.model_seed.value_or(o_.seed);
    config["model_seed"] = ms;
    config["model_shape"] = {o_.n1, o_.n2, o_.ny};
    auto m = random_t2_model(ms, o_.n1, o_.n2, o_.ny);
    w.write("t2_model.json", t2_model_to_json(m) + "\n");
    return m;
}

T2Options Runner::t2_options(Json& config) const {
    T2Options opts;
    if (o_.objective == "stage_weighted") opts.objective = ObjectiveForm::stage_weighted;
    else if (o_.objective == "lambda2_only") opts.objective = ObjectiveForm::lambda2_only;
    else throw std::invalid_argument("--objective must be stage_weighted or lambda2_only");
    if (o_.rho_weight == "stage2_path") opts.rho_weight = RhoWeight::stage2_path;
    else if (o_.rho_weight == "stage1_literal") opts.rho_weight = RhoWeight::stage1_literal;
    else throw std::invalid_argument("--rho-weight must be stage2_path or stage1_literal");
    config["objective"] = o_.objective;
    config["rho_weight"] = o_.rho_weight;
    return opts;
}

std::vector<double> Runner::deltas(const std::string& fallback, Json& config) const {
    std::vector<double> g;
    if (!o_.delta_grid.empty()) g = parse_grid(o_.delta_grid);
    else if (o_.delta) g = {*o_.delta};
    else g = parse_grid(fallback);
    config["delta_grid"] = grid_json(g);
    return g;
}

std::vector<double> Runner::gammas(const std::string& fallback, Json& config) const {
    std::vector<double> g;
    if (!o_.gamma_grid.empty()) g = parse_grid(o_.gamma_grid);
    else if (o_.gamma) g = {*o_.gamma};
    else g = parse_grid(fallback);
    config["gamma_grid"] = grid_json(g);
    return g;
}

void Runner::finish(ArtifactWriter& w, const std::string& command, Json config) const {
    RunManifest m;
    m.command = command;
    m.argv = argv_;
    m.seed = o_.seed;
    config["seed"] = o_.seed;
    m.config = std::move(config);
    const auto path = w.finish(std::move(m));
    out_ << "manifest: " << path.string() << "\n";
}

int Runner::estimate() {
    ArtifactWriter w(o_.out);
    Json config;
    auto loaded = load_data(w, config);
    const auto spec = learner(config);
    const double delta = o_.delta.value_or(1.0);
    const double gamma = o_.gamma.value_or(1.0);
    config["delta"] = delta;
    config["gamma"] = gamma;
    const auto e = estimate_bounds(loaded.data, spec, o_.folds, delta, gamma, o_.ci_level, o_.seed);
    Json j;
    j["delta"] = delta;
    j["gamma"] = gamma;
    j["estimate"] = to_json(e);
    j["ingestion"] = to_json(loaded.report);
    w.write("estimate.json", j.dump(2) + "\n");
    out_ << j["estimate"].dump(2) << "\n";
    finish(w, "estimate", std::move(config));
    return 0;
}

SvgChart curve_chart(const IncrementalCurve& c) {
    SvgChart chart;
    chart.title = "Incremental effect bounds";
    chart.x_label = "delta";
    chart.y_label = "bound";
    const auto& deltas = c.grid.deltas();
    chart.log_x = std::all_of(deltas.begin(), deltas.end(), [](double d) { return d > 0.0; });
    for (std::size_t g = 0; g < c.grid.gammas().size(); ++g) {
        char name[64];
        std::snprintf(name, sizeof name, "Gamma=%g", c.grid.gammas()[g]);
        SvgSeries lo{std::string(name) + " lower", deltas, {}, false};
        SvgSeries hi{std::string(name) + " upper", deltas, {}, true};
        for (const auto& e : c.estimates[g]) {
            lo.ys.push_back(e.psi_lower);
            hi.ys.push_back(e.psi_upper);
        }
        chart.series.push_back(std::move(lo));
        chart.series.push_back(std::move(hi));
    }
    return chart;
}

int Runner::curve_cmd() {
    ArtifactWriter w(o_.out);
    Json config;
    auto loaded = load_data(w, config);
    const auto spec = learner(config);
    const auto ds = deltas("geom:0.2:5:15", config);
    const auto gs = gammas("1,1.5,2,3", config);
    const auto c = curve(loaded.data, spec, ParamGrid(ds, gs), o_.folds, o_.ci_level, o_.seed);
    w.write("curve.csv", curve_table(c).to_string());
    if (o_.svg) w.write("curve.svg", render_svg(curve_chart(c)));
    config["svg"] = o_.svg;
    Json summary;
    summary["ingestion"] = to_json(loaded.report);
    summary["rows"] = 2 * c.grid.gammas().size() * c.grid.deltas().size();
    w.write("curve_summary.json", summary.dump(2) + "\n");
    out_ << "curve: " << summary["rows"] << " rows\n";
    finish(w, "curve", std::move(config));
    return 0;
}

int Runner::robustness() {
    ArtifactWriter w(o_.out);
    Json config;
    auto loaded = load_data(w, config);
    const auto spec = learner(config);
    const auto ds = deltas("geom:0.2:5:15", config);
    const auto gs = gammas("1,1.25,1.5,2,2.5,3,4,5", config);
    config["refine"] = o_.refine;
    const auto c = curve(loaded.data, spec, ParamGrid(ds, gs), o_.folds, o_.ci_level, o_.seed);
    w.write("curve.csv", curve_table(c).to_string());
    Json j;
    j["point"] = to_json(robustness_gamma(point_table(c)));
    j["confidence"] = to_json(robustness_gamma(ci_table(c)));
    if (o_.refine) {
        auto bounds_at = [&](double gamma) {
            const auto fit = cross_fit(loaded.data, spec, o_.folds, {gamma}, o_.seed).front();
            const auto units = evaluate_units(loaded.data, fit);
            std::pair<std::vector<double>, std::vector<double>> b;
            for (double d : ds) {
                const auto e = estimate_from_if(influence_values(loaded.data, units, d, gamma, fit.plan.fold_of),
                                                o_.ci_level);
                b.first.push_back(e.psi_lower);
                b.second.push_back(e.psi_upper);
            }
            return b;
        };
        j["point_refined"] = to_json(robustness_gamma(bounds_at, c.grid.gammas(), 1e-4));
    }
    w.write("robustness.json", j.dump(2) + "\n");
    out_ << j.dump(2) << "\n";
    finish(w, "robustness-gamma", std::move(config));
    return 0;
}

int Runner::sim_figure1() {
    ArtifactWriter w(o_.out);
    Json config;
    const auto ds = deltas("geom:0.1:10:41", config);
    const auto gs = gammas("1,1.5,2,3,4,5", config);
    config["classify_gamma"] = o_.classify_gamma;
    config["svg"] = o_.svg;
    const auto r = figure1_sweep(gs, ds, o_.classify_gamma);
    Json summary = Json::array();
    for (const auto& panel : r.panels) {
        Figure1Result part;
        for (const auto& row : r.rows) {
            if (row.panel == panel.panel) part.rows.push_back(row);
        }
        w.write("figure1_" + panel.panel + ".csv", figure1_table(part).to_string());
        if (o_.svg) {
            SvgChart chart;
            chart.title = "Population bounds, X ~ " + panel.panel + ", Gamma = " + format_double(o_.classify_gamma);
            chart.x_label = "delta";
            chart.y_label = "psi";
            chart.log_x = true;
            SvgSeries psi{"psi", {}, {}, false};
            std::array<SvgSeries, 4> bounds{SvgSeries{"gaussian lower", {}, {}, false},
                                            SvgSeries{"gaussian upper", {}, {}, false},
                                            SvgSeries{"uniform lower", {}, {}, true},
                                            SvgSeries{"uniform upper", {}, {}, true}};
            for (const auto& row : part.rows) {
                if (row.gamma != o_.classify_gamma) continue;
                const std::size_t base = row.noise == "gaussian" ? 0 : 2;
                bounds[base].xs.push_back(row.delta);
                bounds[base].ys.push_back(row.psi_lower);
                bounds[base + 1].xs.push_back(row.delta);
                bounds[base + 1].ys.push_back(row.psi_upper);
                if (base == 0) {
                    psi.xs.push_back(row.delta);
                    psi.ys.push_back(row.psi);
                }
            }
            chart.series.push_back(std::move(psi));
            for (auto& s : bounds) chart.series.push_back(std::move(s));
            w.write("figure1_" + panel.panel + ".svg", render_svg(chart));
        }
        summary.push_back({{"panel", panel.panel},
                           {"length_pattern", to_string(panel.pattern)},
                           {"uniform_encloses_gaussian", panel.uniform_encloses_gaussian}});
    }
    w.write("figure1_summary.json", summary.dump(2) + "\n");
    out_ << summary.dump(2) << "\n";
    finish(w, "simulate figure1", std::move(config));
    return 0;
}

int Runner::sim_bias() {
    ArtifactWriter w(o_.out);
    Json config;
    SimConfig sc;
    sc.dgp = dgp(config);
    sc.n = o_.n;
    sc.reps = o_.reps.value_or(200);
    sc.alpha_grid = parse_grid(o_.alpha_grid);
    sc.delta = o_.delta.value_or(2.0);
    sc.gamma = o_.gamma.value_or(2.0);
    sc.seed = o_.seed;
    BiasSweepOptions opts;
    opts.control_variate = !o_.no_control_variate;
    opts.quasi_random_shifts = !o_.iid_shifts;
    config["n"] = sc.n;
    config["reps"] = sc.reps;
    config["alpha_grid"] = sc.alpha_grid;
    config["delta"] = sc.delta;
    config["gamma"] = sc.gamma;
    config["control_variate"] = opts.control_variate;
    config["quasi_random_shifts"] = opts.quasi_random_shifts;
    const auto table = bias_sweep(sc, opts);
    w.write("bias.csv", bias_table(table).to_string());
    Json slopes = Json::array();
    for (EstimatorKind e : sc.estimators) {
        for (BoundSide s : kBothSides) {
            slopes.push_back({{"estimator", to_string(e)}, {"side", to_string(s)}, {"slope", table.slope(e, s)}});
        }
    }
    Json summary;
    summary["slopes"] = slopes;
    w.write("bias_summary.json", summary.dump(2) + "\n");
    if (o_.svg) {
        SvgChart chart;
        chart.title = "Absolute bias against alpha";
        chart.x_label = "alpha";
        chart.y_label = "log10 |bias|";
        for (EstimatorKind e : sc.estimators) {
            for (BoundSide s : kBothSides) {
                SvgSeries ser{to_string(e) + " " + to_string(s), {}, {}, e == EstimatorKind::plugin};
                for (const auto& row : table.rows) {
                    if (row.estimator != e || row.side != s) continue;
                    ser.xs.push_back(row.alpha);
                    ser.ys.push_back(std::log10(row.abs_bias));
                }
                chart.series.push_back(std::move(ser));
            }
        }
        w.write("bias.svg", render_svg(chart));
    }
    config["svg"] = o_.svg;
    out_ << summary.dump(2) << "\n";
    finish(w, "simulate bias", std::move(config));
    return 0;
}

int Runner::sim_coverage() {
    ArtifactWriter w(o_.out);
    Json config;
    CoverageConfig cc;
    cc.dgp = dgp(config);
    cc.n = o_.n;
    cc.reps = o_.reps.value_or(500);
    cc.delta = o_.delta.value_or(2.0);
    cc.gamma = o_.gamma.value_or(2.0);
    cc.ci_level = o_.ci_level;
    cc.seed = o_.seed;
    if (o_.nuisance == "exact") cc.nuisance = CoverageNuisance::exact;
    else if (o_.nuisance == "noised") cc.nuisance = CoverageNuisance::noised;
    else throw std::invalid_argument("--nuisance must be exact or noised");
    cc.alpha = o_.alpha;
    config["n"] = cc.n;
    config["reps"] = cc.reps;
    config["delta"] = cc.delta;
    config["gamma"] = cc.gamma;
    config["ci_level"] = cc.ci_level;
    config["nuisance"] = o_.nuisance;
    config["alpha"] = cc.alpha;
    const auto r = coverage_study(cc);
    const Json j = to_json(r);
    w.write("coverage.json", j.dump(2) + "\n");
    out_ << j.dump(2) << "\n";
    finish(w, "simulate coverage", std::move(config));
    return 0;
}

int Runner::sim_data() {
    ArtifactWriter w(o_.out);
    Json config;
    const auto d = dgp(config);
    config["n"] = o_.n;
    const auto data = generate(d, o_.n, o_.seed);
    w.write("data.csv", dataset_table(data).to_string());
    out_ << "data: " << data.size() << " rows\n";
    finish(w, "simulate data", std::move(config));
    return 0;
}

int Runner::t2_sharp() {
    ArtifactWriter w(o_.out);
    Json config;
    const auto model = t2_model(w, config);
    const auto opts = t2_options(config);
    const double delta = o_.delta.value_or(1.0);
    const double L1 = o_.lambda1.value_or(o_.gamma.value_or(1.0));
    const double L2 = o_.lambda2.value_or(o_.gamma.value_or(1.0));
    T2SolverOptions solver;
    solver.starts = o_.starts;
    solver.seed = o_.seed;
    config["delta"] = delta;
    config["Lambda1"] = L1;
    config["Lambda2"] = L2;
    config["starts"] = solver.starts;
    const auto lo = sharp_bounds(model, delta, L1, L2, BoundSide::lower, opts, solver);
    const auto hi = sharp_bounds(model, delta, L1, L2, BoundSide::upper, opts, solver);
    Json j;
    j["delta"] = delta;
    j["Lambda1"] = L1;
    j["Lambda2"] = L2;
    j["gformula_point"] = gformula_point(model, delta);
    j["lower"] = lo.value;
    j["upper"] = hi.value;
    j["lower_detail"] = to_json(lo);
    j["upper_detail"] = to_json(hi);
    w.write("t2_sharp_bounds.json", j.dump(2) + "\n");
    out_ << "lower " << format_double(lo.value) << " upper " << format_double(hi.value) << "\n";
    finish(w, "t2 sharp-bounds", std::move(config));
    return 0;
}

int Runner::t2_brute() {
    ArtifactWriter w(o_.out);
    Json config;
    const auto model = t2_model(w, config);
    const auto opts = t2_options(config);
    const double delta = o_.delta.value_or(1.0);
    const double L1 = o_.lambda1.value_or(o_.gamma.value_or(1.0));
    const double L2 = o_.lambda2.value_or(o_.gamma.value_or(1.0));
    config["delta"] = delta;
    config["Lambda1"] = L1;
    config["Lambda2"] = L2;
    config["grid_step"] = o_.grid_step;
    const auto r = brute_force_bounds(model, delta, L1, L2, o_.grid_step, opts);
    Json j;
    j["delta"] = delta;
    j["Lambda1"] = L1;
    j["Lambda2"] = L2;
    j["grid_step"] = o_.grid_step;
    j["lower"] = r.lower;
    j["upper"] = r.upper;
    j["feasible_points"] = r.feasible_points;
    w.write("t2_brute_force.json", j.dump(2) + "\n");
    out_ << "lower " << format_double(r.lower) << " upper " << format_double(r.upper) << "\n";
    finish(w, "t2 brute-force", std::move(config));
    return 0;
}

int Runner::t2_random_model() {
    ArtifactWriter w(o_.out);
    Json config;
    const std::uint64_t ms = o_.model_seed.value_or(o_.seed);
    config["model_seed"] = ms;
    config["model_shape"] = {o_.n1, o_.n2, o_.ny};
    w.write("t2_model.json", t2_model_to_json(random_t2_model(ms, o_.n1, o_.n2, o_.ny)) + "\n");
    out_ << "model written\n";
    finish(w, "t2 random-model", std::move(config));
    return 0;
}

int replay(const Options& o, bool out_given, std::ostream& out, std::ostream& err) {
    const fs::path manifest_path = o.manifest;
    const auto recorded = RunManifest::from_json(Json::parse(read_file(manifest_path)));
    for (const auto& in : recorded.inputs) {
        const auto now = sha256_file(in.path);
        if (now != in.sha256) {
            err << "replay: input " << in.path << " changed since the manifest was written\n";
            return 3;
        }
    }
    const fs::path dir = out_given ? fs::path(o.out) : manifest_path.parent_path() / "replay";
    if (fs::exists(dir / kManifestName) && fs::equivalent(dir / kManifestName, manifest_path)) {
        err << "replay: output directory must differ from the recorded one\n";
        return 2;
    }
    std::vector<std::string> args = recorded.argv;
    args.push_back("--out");
    args.push_back(dir.string());
    std::ostringstream sink;
    const int status = run_command(args, sink, err);
    if (status != 0) return status;
    std::size_t mismatches = 0;
    for (const auto& a : recorded.outputs) {
        const fs::path p = dir / a.path;
        const bool same = fs::exists(p) && sha256_file(p) == a.sha256;
        if (!same) {
            err << "replay: " << a.path << " differs\n";
            ++mismatches;
        }
    }
    const bool manifest_same = read_file(dir / kManifestName) == read_file(manifest_path);
    if (!manifest_same) {
        err << "replay: manifest differs\n";
        ++mismatches;
    }
    if (mismatches > 0) return 4;
    out << "replay: " << recorded.outputs.size() << " artifacts and the manifest are byte-identical\n";
    return 0;
}

void add_data_options(CLI::App* sub, Options& o) {
    sub->add_option("--data", o.data, "Input CSV")->required();
    sub->add_option("--outcome", o.outcome, "Outcome column")->capture_default_str();
    sub->add_option("--treatment", o.treatment, "Binary treatment column")->capture_default_str();
    sub->add_option("--covariates", o.covariates, "Comma-separated covariate columns (default: all others)");
    sub->add_option("--missing", o.missing, "Comma-separated missing tokens (default: empty,NA,NaN,nan,.)");
}

void add_dgp_options(CLI::App* sub, Options& o) {
    sub->add_option("--n", o.n, "Sample size")->capture_default_str();
    sub->add_option("--x-lo", o.x_lo, "Covariate support lower end")->capture_default_str();
    sub->add_option("--x-hi", o.x_hi, "Covariate support upper end")->capture_default_str();
    sub->add_option("--noise", o.noise, "gaussian or uniform")->capture_default_str();
    sub->add_option("--noise-scale", o.noise_scale, "Noise sd (gaussian) or half-width (uniform)");
}

void add_t2_options(CLI::App* sub, Options& o) {
    sub->add_option("--model", o.model, "Model JSON file (default: random binary model)");
    sub->add_option("--model-seed", o.model_seed, "Seed for the random model (default: --seed)");
    sub->add_option("--lambda1", o.lambda1, "Stage-1 sensitivity (default: --gamma)");
    sub->add_option("--lambda2", o.lambda2, "Stage-2 sensitivity (default: --gamma)");
    sub->add_option("--objective", o.objective, "stage_weighted or lambda2_only")->capture_default_str();
    sub->add_option("--rho-weight", o.rho_weight, "stage2_path or stage1_literal")->capture_default_str();
    sub->add_option("--n1", o.n1, "Random model: stage-1 covariate support size")->capture_default_str();
    sub->add_option("--n2", o.n2, "Random model: stage-2 covariate support size")->capture_default_str();
    sub->add_option("--ny", o.ny, "Random model: outcome support size")->capture_default_str();
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Sensitivity bounds for incremental propensity score effects", "incsens"};
    app.fallthrough();
    app.require_subcommand(1);
    app.add_option("--seed", o.seed, "Random seed")->capture_default_str();
    app.add_option("--folds", o.folds, "Cross-fitting folds")->capture_default_str()->check(CLI::Range(2, 1000000));
    app.add_option("--delta", o.delta, "Odds multiplier of the incremental intervention");
    app.add_option("--gamma", o.gamma, "Confounding level Gamma >= 1");
    app.add_option("--delta-grid", o.delta_grid, "Delta grid: a,b,c | geom:lo:hi:n | lin:lo:hi:n");
    app.add_option("--gamma-grid", o.gamma_grid, "Gamma grid, same syntax");
    app.add_option("--learner", o.learner, "kernel, knn, basis or full-kernel")->capture_default_str();
    app.add_option("--bandwidth", o.bandwidth, "Fixed kernel bandwidth (0: rule of thumb)")->capture_default_str();
    app.add_option("--bandwidth-scale", o.bandwidth_scale, "Rule-of-thumb multiplier")->capture_default_str();
    app.add_option("--neighbors", o.neighbors, "Neighbors for knn")->capture_default_str();
    app.add_option("--degree", o.basis_degree, "Polynomial degree for basis")->capture_default_str();
    app.add_option("--ci-level", o.ci_level, "Confidence level")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    app.add_option("--out", o.out, "Output directory")->capture_default_str();
    app.add_flag("--svg", o.svg, "Also write SVG charts");

    auto* est = app.add_subcommand("estimate", "Bounds at one (delta, Gamma) from a CSV");
    add_data_options(est, o);
    auto* cur = app.add_subcommand("curve", "Bounds over delta and Gamma grids from a CSV");
    add_data_options(cur, o);
    auto* rob = app.add_subcommand("robustness-gamma", "Smallest Gamma that explains away the effect");
    add_data_options(rob, o);
    rob->add_flag("--refine", o.refine, "Refit at each bisection Gamma instead of interpolating");

    auto* sim = app.add_subcommand("simulate", "Simulation studies on the analytic design");
    sim->require_subcommand(1);
    auto* fig1 = sim->add_subcommand("figure1", "Population bound geometry for three covariate laws");
    fig1->add_option("--classify-gamma", o.classify_gamma, "Gamma used for the length pattern")->capture_default_str();
    auto* bias = sim->add_subcommand("bias", "Bias against nuisance error rate");
    add_dgp_options(bias, o);
    bias->add_option("--reps", o.reps, "Replications (default 200)");
    bias->add_option("--alpha-grid", o.alpha_grid, "Nuisance error exponents")->capture_default_str();
    bias->add_flag("--no-control-variate", o.no_control_variate, "Report raw bias only");
    bias->add_flag("--iid-shifts", o.iid_shifts, "Independent instead of quasi-random shift scores");
    auto* cov = sim->add_subcommand("coverage", "Wald interval coverage");
    add_dgp_options(cov, o);
    cov->add_option("--reps", o.reps, "Replications (default 500)");
    cov->add_option("--nuisance", o.nuisance, "exact or noised")->capture_default_str();
    cov->add_option("--alpha", o.alpha, "Error exponent for noised nuisances")->capture_default_str();
    auto* data = sim->add_subcommand("data", "Write one simulated dataset as CSV");
    add_dgp_options(data, o);

    auto* t2 = app.add_subcommand("t2", "Two-timepoint discrete model bounds");
    t2->require_subcommand(1);
    auto* sharp = t2->add_subcommand("sharp-bounds", "Sharp bounds by alternating linear programs");
    add_t2_options(sharp, o);
    sharp->add_option("--starts", o.starts, "Starts per block")->capture_default_str();
    auto* brute = t2->add_subcommand("brute-force", "Grid search bounds for small models");
    add_t2_options(brute, o);
    brute->add_option("--grid-step", o.grid_step, "Grid step")->capture_default_str();
    auto* rmodel = t2->add_subcommand("random-model", "Write a random model file");
    add_t2_options(rmodel, o);

    auto* rep = app.add_subcommand("replay", "Re-run a manifest and compare artifacts byte for byte");
    rep->add_option("manifest", o.manifest, "manifest.json to replay")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        Runner r(o, strip_out(args), out);
        if (est->parsed()) return r.estimate();
        if (cur->parsed()) return r.curve_cmd();
        if (rob->parsed()) return r.robustness();
        if (fig1->parsed()) return r.sim_figure1();
        if (bias->parsed()) return r.sim_bias();
        if (cov->parsed()) return r.sim_coverage();
        if (data->parsed()) return r.sim_data();
        if (sharp->parsed()) return r.t2_sharp();
        if (brute->parsed()) return r.t2_brute();
        if (rmodel->parsed()) return r.t2_random_model();
        if (rep->parsed()) return replay(o, app.get_option("--out")->count() > 0, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    err << app.help();
    return 2;
}

int run_command(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_command(args, std::cout, std::cerr);
}

}  // namespace incsens
