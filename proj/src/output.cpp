#include "incsens/output.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace incsens {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

void write_file_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            out.close();
            fs::remove(tmp);
            throw std::runtime_error("write failed for " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

Json to_json(const BoundEstimate& e) {
    Json j;
    j["psi_lower"] = e.psi_lower;
    j["psi_upper"] = e.psi_upper;
    j["sigma_lower"] = e.sigma_lower;
    j["sigma_upper"] = e.sigma_upper;
    j["n"] = e.n;
    j["ci_level"] = e.ci_level;
    j["ci_lower_bound"] = e.ci_lower_bound;
    j["ci_upper_bound"] = e.ci_upper_bound;
    return j;
}

Json to_json(const IngestionReport& r) {
    Json j;
    j["rows_read"] = r.rows_read;
    j["rows_kept"] = r.rows_kept;
    j["rows_dropped"] = r.rows_dropped();
    j["dropped_missing_treatment"] = r.dropped_missing_treatment;
    j["dropped_missing_outcome"] = r.dropped_missing_outcome;
    j["indicator_columns"] = r.indicator_columns;
    return j;
}

Json to_json(const RobustnessResult& r) {
    Json j;
    j["found"] = r.found;
    if (r.found) {
        j["gamma_star"] = r.gamma_star;
        j["witness"] = r.witness;
    } else {
        j["gamma_star"] = nullptr;
        j["witness"] = nullptr;
    }
    j["message"] = r.message;
    return j;
}

Json to_json(const CoverageResult& r) {
    Json j;
    j["reps"] = r.reps.size();
    j["truth_lower"] = r.truth_lower;
    j["truth_upper"] = r.truth_upper;
    j["coverage_lower"] = r.coverage_lower;
    j["coverage_upper"] = r.coverage_upper;
    j["coverage_se_lower"] = r.coverage_se_lower;
    j["coverage_se_upper"] = r.coverage_se_upper;
    j["mean_width_lower"] = r.mean_width_lower;
    j["mean_width_upper"] = r.mean_width_upper;
    return j;
}

Json to_json(const CompatibilityReport& r) {
    Json j;
    j["max_stage2_residual"] = r.max_stage2_residual;
    j["max_stage1_residual"] = r.max_stage1_residual;
    j["max_box_violation"] = r.max_box_violation;
    j["feasible"] = r.feasible();
    return j;
}

Json to_json(const SharpBoundResult& r) {
    Json j;
    j["value"] = r.value;
    j["path_values"] = Json::array();
    for (const auto& p : kPaths) {
        Json pj;
        pj["a1"] = p.a1;
        pj["a2"] = p.a2;
        pj["value"] = r.path_values[static_cast<std::size_t>(p.index())];
        pj["lambda1"] = r.lambdas.paths[static_cast<std::size_t>(p.index())].lambda1;
        pj["lambda2"] = r.lambdas.paths[static_cast<std::size_t>(p.index())].lambda2;
        j["path_values"].push_back(pj);
    }
    j["compatibility"] = to_json(r.compatibility);
    return j;
}

CsvTable curve_table(const IncrementalCurve& c) {
    CsvTable t;
    t.header = {"gamma", "delta", "side", "psi", "sigma", "wald_lo", "wald_hi", "outer_limit", "ci_level", "n"};
    const auto& gammas = c.grid.gammas();
    const auto& deltas = c.grid.deltas();
    for (std::size_t g = 0; g < gammas.size(); ++g) {
        for (std::size_t d = 0; d < deltas.size(); ++d) {
            const auto& e = c.estimates[g][d];
            for (BoundSide s : kBothSides) {
                const auto [lo, hi] = e.side_interval(s);
                const double outer = s == BoundSide::lower ? e.ci_lower_bound : e.ci_upper_bound;
                t.add_row({format_double(gammas[g]), format_double(deltas[d]), to_string(s), format_double(e.psi(s)),
                           format_double(e.sigma(s)), format_double(lo), format_double(hi), format_double(outer),
                           format_double(e.ci_level), std::to_string(e.n)});
            }
        }
    }
    return t;
}

CsvTable figure1_table(const Figure1Result& r) {
    CsvTable t;
    t.header = {"panel", "noise", "gamma", "delta", "psi", "psi_lower", "psi_upper", "length"};
    for (const auto& row : r.rows) {
        t.add_row({row.panel, row.noise, format_double(row.gamma), format_double(row.delta), format_double(row.psi),
                   format_double(row.psi_lower), format_double(row.psi_upper), format_double(row.length)});
    }
    return t;
}

CsvTable bias_table(const BiasTable& b) {
    CsvTable t;
    t.header = {"estimator", "side", "alpha", "n", "abs_bias", "mc_se", "raw_bias", "raw_mc_se"};
    for (const auto& row : b.rows) {
        t.add_row({to_string(row.estimator), to_string(row.side), format_double(row.alpha), std::to_string(row.n),
                   format_double(row.abs_bias), format_double(row.mc_se), format_double(row.raw_bias),
                   format_double(row.raw_mc_se)});
    }
    return t;
}

namespace {

std::string fixed(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string tick_label(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string render_svg(const SvgChart& chart) {
    constexpr double width = 720.0;
    constexpr double height = 440.0;
    constexpr double left = 70.0;
    constexpr double right = 170.0;
    constexpr double top = 40.0;
    constexpr double bottom = 55.0;
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

    auto tx = [&](double x) { return chart.log_x ? std::log10(x) : x; };
    double xmin = std::numeric_limits<double>::infinity();
    double xmax = -xmin;
    double ymin = xmin;
    double ymax = -xmin;
    for (const auto& s : chart.series) {
        if (s.xs.size() != s.ys.size()) throw std::invalid_argument("series x and y lengths differ");
        for (std::size_t i = 0; i < s.xs.size(); ++i) {
            if (chart.log_x && !(s.xs[i] > 0.0)) throw std::invalid_argument("log axis needs positive x");
            if (!std::isfinite(s.ys[i])) continue;
            xmin = std::min(xmin, tx(s.xs[i]));
            xmax = std::max(xmax, tx(s.xs[i]));
            ymin = std::min(ymin, s.ys[i]);
            ymax = std::max(ymax, s.ys[i]);
        }
    }
    if (!std::isfinite(xmin)) {
        xmin = 0.0;
        xmax = 1.0;
        ymin = 0.0;
        ymax = 1.0;
    }
    if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
    if (ymax - ymin < 1e-12) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    const double pw = width - left - right;
    const double ph = height - top - bottom;
    auto px = [&](double x) { return left + (tx(x) - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << fixed(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << escape_xml(chart.title) << "</text>\n";
    o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 5; ++t) {
        const double fx = xmin + (xmax - xmin) * t / 5.0;
        const double xv = chart.log_x ? std::pow(10.0, fx) : fx;
        const double gx = left + pw * t / 5.0;
        o << "<line x1=\"" << fixed(gx) << "\" y1=\"" << top + ph << "\" x2=\"" << fixed(gx) << "\" y2=\""
          << top + ph + 5 << "\" stroke=\"black\"/>\n";
        o << "<text x=\"" << fixed(gx) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
          << tick_label(xv) << "</text>\n";
        const double yv = ymin + (ymax - ymin) * t / 5.0;
        const double gy = top + ph - ph * t / 5.0;
        o << "<line x1=\"" << left - 5 << "\" y1=\"" << fixed(gy) << "\" x2=\"" << left << "\" y2=\"" << fixed(gy)
          << "\" stroke=\"black\"/>\n";
        o << "<text x=\"" << left - 8 << "\" y=\"" << fixed(gy + 4) << "\" text-anchor=\"end\">" << tick_label(yv)
          << "</text>\n";
    }
    o << "<text x=\"" << fixed(left + pw / 2) << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\">"
      << escape_xml(chart.x_label) << "</text>\n";
    o << "<text x=\"16\" y=\"" << fixed(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << fixed(top + ph / 2) << ")\">" << escape_xml(chart.y_label) << "</text>\n";
    for (std::size_t s = 0; s < chart.series.size(); ++s) {
        const auto& ser = chart.series[s];
        const char* color = palette[s % (sizeof palette / sizeof *palette)];
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
        if (ser.dashed) o << " stroke-dasharray=\"6 4\"";
        o << " points=\"";
        bool first = true;
        for (std::size_t i = 0; i < ser.xs.size(); ++i) {
            if (!std::isfinite(ser.ys[i])) continue;
            if (!first) o << ' ';
            o << fixed(px(ser.xs[i])) << ',' << fixed(py(ser.ys[i]));
            first = false;
        }
        o << "\"/>\n";
        const double ly = top + 10 + 18.0 * static_cast<double>(s);
        o << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << fixed(ly) << "\" x2=\"" << left + pw + 34 << "\" y2=\""
          << fixed(ly) << "\" stroke=\"" << color << "\" stroke-width=\"1.5\""
          << (ser.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
        o << "<text x=\"" << left + pw + 40 << "\" y=\"" << fixed(ly + 4) << "\">" << escape_xml(ser.name)
          << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

Json RunManifest::to_json() const {
    Json j;
    j["command"] = command;
    j["argv"] = argv;
    j["seed"] = seed;
    j["config"] = config;
    auto digests = [](const std::vector<FileDigest>& v) {
        Json a = Json::array();
        for (const auto& d : v) a.push_back(Json{{"path", d.path}, {"sha256", d.sha256}});
        return a;
    };
    j["inputs"] = digests(inputs);
    j["outputs"] = digests(outputs);
    return j;
}

RunManifest RunManifest::from_json(const Json& j) {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config = j.value("config", Json::object());
    auto digests = [](const Json& a) {
        std::vector<FileDigest> v;
        for (const auto& d : a) v.push_back({d.at("path").get<std::string>(), d.at("sha256").get<std::string>()});
        return v;
    };
    m.inputs = digests(j.at("inputs"));
    m.outputs = digests(j.at("outputs"));
    return m;
}

ArtifactWriter::ArtifactWriter(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

void ArtifactWriter::write(const std::string& name, const std::string& content) {
    write_file_atomic(dir_ / name, content);
    outputs_.push_back({name, sha256_hex(content)});
}

void ArtifactWriter::record_input(const std::string& path) { inputs_.push_back({path, sha256_file(path)}); }

fs::path ArtifactWriter::finish(RunManifest manifest) {
    manifest.inputs = inputs_;
    manifest.outputs = outputs_;
    const fs::path path = dir_ / kManifestName;
    write_file_atomic(path, manifest.to_json().dump(2) + "\n");
    return path;
}

}  // namespace incsens
