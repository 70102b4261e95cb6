#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "incsens/cli.hpp"
#include "incsens/csv.hpp"
#include "incsens/output.hpp"
#include "incsens/simulation.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace incsens;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "incsens_cli_test" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run(std::vector<std::string> args, std::string* err_text = nullptr) {
    std::ostringstream out;
    std::ostringstream err;
    const int status = run_command(args, out, err);
    if (err_text) *err_text = err.str();
    return status;
}

// 100 rows; x1 is missing in rows 10, 40 and 70; x2 is complete.
std::string three_percent_missing_csv() {
    std::string s = "x1,x2,a,y\n";
    for (int i = 0; i < 100; ++i) {
        const std::string x1 = (i % 30 == 10) ? "NA" : std::to_string(i * 0.01);
        s += x1 + "," + std::to_string(1.0 - i * 0.01) + "," + std::to_string(i % 2) + "," + std::to_string(i * 0.5) +
             "\n";
    }
    return s;
}

}  // namespace

TEST_CASE("csv parsing") {
    const auto rows = parse_csv("a,b\r\n\"x, y\",\"say \"\"hi\"\"\"\n,3\n");
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == std::vector<std::string>{"a", "b"});
    CHECK(rows[1] == std::vector<std::string>{"x, y", "say \"hi\""});
    CHECK(rows[2] == std::vector<std::string>{"", "3"});
    CHECK_THROWS(parse_csv("a,\"b\n"));
    CsvTable t;
    t.header = {"name", "v"};
    t.add_row({"q,\"", "1"});
    CHECK_THROWS(t.add_row({"only one"}));
    const auto back = parse_csv(t.to_string());
    CHECK(back[1][0] == "q,\"");
}

TEST_CASE("dataset round trip is bit-exact") {
    const auto data = generate(AnalyticDGP{}, 300, 91);
    const std::string text = dataset_table(data, "a", "y").to_string();
    const auto loaded = load_csv_text(text, SchemaConfig{});
    REQUIRE(loaded.data.size() == data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        CHECK(loaded.data[i].outcome == data[i].outcome);
        CHECK(loaded.data[i].treatment == data[i].treatment);
        CHECK(loaded.data[i].covariates == data[i].covariates);
    }
    CHECK(loaded.report.indicator_columns.empty());
    CHECK(loaded.report.rows_dropped() == 0);
    CHECK(dataset_table(loaded.data, "a", "y").to_string() == text);
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(format_double(2.0) == "2");
}

TEST_CASE("missing covariates get one indicator column each") {
    const auto loaded = load_csv_text(three_percent_missing_csv(), SchemaConfig{});
    const auto& d = loaded.data;
    CHECK(loaded.report.indicator_columns == std::vector<std::string>{"x1_missing"});
    CHECK(d.dim() == 3);
    CHECK(d.covariate_names() == std::vector<std::string>{"x1", "x2", "x1_missing"});
    double observed_mean = 0.0;
    int observed = 0;
    for (int i = 0; i < 100; ++i) {
        if (i % 30 != 10) {
            observed_mean += i * 0.01;
            ++observed;
        }
    }
    observed_mean /= observed;
    CHECK(d[10].covariates[2] == 1.0);
    CHECK(d[11].covariates[2] == 0.0);
    CHECK(d[10].covariates[0] == doctest::Approx(observed_mean).epsilon(1e-12));
    CHECK(d[11].covariates[0] == doctest::Approx(0.11));
}

TEST_CASE("rows missing treatment or outcome are dropped") {
    const std::string text = "x,a,y\n1,1,2\n2,NA,3\n3,0,\n4,.,NA\n5,0,6\n6,1,7\n";
    const auto loaded = load_csv_text(text, SchemaConfig{});
    const auto& r = loaded.report;
    CHECK(r.rows_read == 6);
    CHECK(r.rows_kept == 3);
    CHECK(r.dropped_missing_treatment == 2);
    CHECK(r.dropped_missing_outcome == 1);
    CHECK(r.rows_read == r.rows_kept + r.dropped_missing_treatment + r.dropped_missing_outcome);
    CHECK(loaded.data[0].outcome == 2.0);
    CHECK(loaded.data[1].outcome == 6.0);
    CHECK(loaded.data[2].outcome == 7.0);
    const auto again = load_csv_text(text, SchemaConfig{});
    CHECK(again.data[1].covariates == loaded.data[1].covariates);
}

TEST_CASE("schema errors are reported") {
    CHECK_THROWS(load_csv_text("x,a,y\n1,2,3\n2,0,1\n", SchemaConfig{}));
    CHECK_THROWS(load_csv_text("x,a,y\nabc,1,3\n2,0,1\n", SchemaConfig{}));
    CHECK_THROWS(load_csv_text("x,a,outcome\n1,1,3\n2,0,1\n", SchemaConfig{}));
    CHECK_THROWS(load_csv_text("x,a,y\n1,1,3\n", SchemaConfig{}));
    SchemaConfig dup;
    dup.outcome = "a";
    CHECK_THROWS(dup.validate());
    SchemaConfig pick;
    pick.covariates = {"z"};
    const auto only = load_csv_text("x,z,a,y\n1,5,1,3\n2,6,0,1\n", pick);
    CHECK(only.data.covariate_names() == std::vector<std::string>{"z"});
    CHECK(only.data[1].covariates[0] == 6.0);
    SchemaConfig none;
    none.covariates = {};
    const auto bare = load_csv_text("a,y\n1,3\n0,1\n", none);
    CHECK(bare.data.dim() == 1);
}

TEST_CASE("grid and learner parsing") {
    CHECK(parse_grid("1,2,3") == std::vector<double>{1.0, 2.0, 3.0});
    const auto g = parse_grid("geom:0.1:10:3");
    REQUIRE(g.size() == 3);
    CHECK(g[1] == doctest::Approx(1.0));
    CHECK(g[2] == 10.0);
    CHECK(parse_grid("lin:0:1:5")[1] == doctest::Approx(0.25));
    CHECK_THROWS(parse_grid("1,x"));
    CHECK_THROWS(parse_grid("geom:0:1:3"));
    CHECK_THROWS(parse_grid("lin:0:1:1"));
    CHECK_NOTHROW(learner_from_name("kernel", 0.0, 1.0, 50, 3));
    CHECK(learner_from_name("knn", 0.0, 1.0, 50, 3).bounds.locality.kind == LocalityKind::nearest_neighbors);
    CHECK_THROWS(learner_from_name("forest", 0.0, 1.0, 50, 3));
    CHECK_THROWS(learner_from_name("knn", 0.0, 1.0, 0, 3));
}

TEST_CASE("sha256 and atomic writes") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    const auto dir = scratch("atomic");
    write_file_atomic(dir / "x.txt", "hello");
    CHECK(read_file(dir / "x.txt") == "hello");
    CHECK_FALSE(fs::exists(dir / "x.txt.partial"));
    CHECK(sha256_file(dir / "x.txt") == sha256_hex("hello"));
}

TEST_CASE("svg output is deterministic and well formed") {
    SvgChart c;
    c.title = "t <&>";
    c.x_label = "delta";
    c.y_label = "psi";
    c.log_x = true;
    c.series.push_back({"a", {0.1, 1.0, 10.0}, {0.0, 1.0, 0.5}, false});
    c.series.push_back({"b", {0.1, 10.0}, {0.2, 0.3}, true});
    const auto svg = render_svg(c);
    CHECK(svg == render_svg(c));
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("<polyline") != std::string::npos);
    CHECK(svg.find("t &lt;&amp;&gt;") != std::string::npos);
}

TEST_CASE("commands write artifacts") {
    const auto root = scratch("commands");
    const auto d = [&](const std::string& n) { return (root / n).string(); };
    REQUIRE(run({"simulate", "data", "--n", "400", "--seed", "5", "--out", d("data")}) == 0);
    const std::string csv = d("data") + "/data.csv";

    CHECK(run({"estimate", "--data", csv, "--no-such-flag", "--out", d("bad")}) != 0);
    CHECK(run({"frobnicate"}) != 0);

    REQUIRE(run({"estimate", "--data", csv, "--delta", "2", "--gamma", "2", "--folds", "5", "--out", d("est")}) == 0);
    const auto est = Json::parse(read_file(d("est") + "/estimate.json"));
    CHECK(est["estimate"]["psi_lower"].get<double>() <= est["estimate"]["psi_upper"].get<double>());
    CHECK(est["estimate"]["n"].get<std::size_t>() == 400);

    REQUIRE(run({"simulate", "figure1", "--gamma-grid", "1,2", "--delta-grid", "0.5,1,2", "--out", d("fig")}) == 0);
    for (const auto* panel : {"unif_0_1", "unif_m1_0", "unif_m4_3"}) {
        const auto rows = parse_csv(read_file(d("fig") + "/figure1_" + panel + ".csv"));
        CHECK(rows.size() == 1 + 2 * 2 * 3);
    }

    REQUIRE(run({"curve", "--data", csv, "--gamma-grid", "1,2", "--delta-grid", "0.5,2", "--folds", "4", "--out",
                 d("curve")}) == 0);
    const auto rows = parse_csv(read_file(d("curve") + "/curve.csv"));
    REQUIRE(rows.size() == 1 + 2 * 2 * 2);
    CHECK(rows[0][0] == "gamma");
    for (std::size_t i = 1; i < rows.size(); i += 2) {
        if (rows[i][0] == "1") CHECK(rows[i][3] == rows[i + 1][3]);
    }

    REQUIRE(run({"t2", "sharp-bounds", "--delta", "2", "--gamma", "1.5", "--out", d("t2")}) == 0);
    const auto t2 = Json::parse(read_file(d("t2") + "/t2_sharp_bounds.json"));
    CHECK(t2["lower"].get<double>() <= t2["gformula_point"].get<double>());
    CHECK(t2["gformula_point"].get<double>() <= t2["upper"].get<double>());
}

TEST_CASE("manifests audit configuration and inputs") {
    const auto root = scratch("manifest");
    const auto d = [&](const std::string& n) { return (root / n).string(); };
    REQUIRE(run({"simulate", "data", "--n", "200", "--seed", "1", "--out", d("d1")}) == 0);
    REQUIRE(run({"simulate", "data", "--n", "200", "--seed", "2", "--out", d("d2")}) == 0);
    const std::string csv1 = d("d1") + "/data.csv";
    const std::string csv2 = d("d2") + "/data.csv";
    auto estimate = [&](const std::string& csv, const std::string& seed, const std::string& out) {
        return run({"estimate", "--data", csv, "--delta", "2", "--gamma", "2", "--folds", "4", "--seed", seed,
                    "--out", d(out)});
    };
    REQUIRE(estimate(csv1, "3", "a") == 0);
    REQUIRE(estimate(csv1, "3", "b") == 0);
    REQUIRE(estimate(csv1, "4", "c") == 0);
    REQUIRE(estimate(csv2, "3", "e") == 0);
    const auto ma = read_file(d("a") + "/manifest.json");
    CHECK(ma == read_file(d("b") + "/manifest.json"));
    CHECK(ma != read_file(d("c") + "/manifest.json"));
    CHECK(ma != read_file(d("e") + "/manifest.json"));
    const auto m = RunManifest::from_json(Json::parse(ma));
    CHECK(m.command == "estimate");
    CHECK(m.seed == 3);
    REQUIRE(m.inputs.size() == 1);
    CHECK(m.inputs[0].sha256 == sha256_file(csv1));
    REQUIRE_FALSE(m.outputs.empty());
    for (const auto& o : m.outputs) CHECK(sha256_file(root / "a" / o.path) == o.sha256);
    CHECK(RunManifest::from_json(m.to_json()).to_json().dump() == m.to_json().dump());
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        CHECK(entry.path().extension() != ".partial");
    }
}

TEST_CASE("replay reproduces runs and detects drift") {
    const auto root = scratch("replay");
    const auto d = [&](const std::string& n) { return (root / n).string(); };
    REQUIRE(run({"simulate", "data", "--n", "200", "--seed", "1", "--out", d("data")}) == 0);
    const std::string csv = d("data") + "/data.csv";
    REQUIRE(run({"estimate", "--data", csv, "--delta", "1.5", "--gamma", "2", "--folds", "4", "--out", d("run")}) == 0);
    const std::string manifest = d("run") + "/manifest.json";
    CHECK(run({"replay", manifest, "--out", d("again")}) == 0);

    auto j = Json::parse(read_file(manifest));
    j["outputs"][0]["sha256"] = std::string(64, '0');
    {
        std::ofstream f(d("tampered.json"));
        f << j.dump(2) << "\n";
    }
    std::string err;
    CHECK(run({"replay", d("tampered.json"), "--out", d("again2")}, &err) == 4);
    CHECK(err.find("differs") != std::string::npos);

    {
        std::ofstream f(csv, std::ios::app);
        f << "0.5,1,0.25\n";
    }
    CHECK(run({"replay", manifest, "--out", d("again3")}, &err) == 3);
    CHECK(err.find("changed") != std::string::npos);
}
