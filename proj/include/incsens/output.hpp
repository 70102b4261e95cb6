#pragma once

#include "incsens/csv.hpp"
#include "incsens/estimator.hpp"
#include "incsens/simulation.hpp"
#include "incsens/t2_bounds.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace incsens {

using Json = nlohmann::ordered_json;

std::string sha256_hex(const std::string& bytes);
std::string read_file(const std::filesystem::path& path);
std::string sha256_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over the target, so
/// readers never observe a partial artifact.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

Json to_json(const BoundEstimate& e);
Json to_json(const IngestionReport& r);
Json to_json(const RobustnessResult& r);
Json to_json(const CoverageResult& r);
Json to_json(const SharpBoundResult& r);
Json to_json(const CompatibilityReport& r);

/// One row per (gamma, delta, side): point bound, its symmetric Wald interval
/// and the outer limit used for the pooled interval.
CsvTable curve_table(const IncrementalCurve& c);
CsvTable figure1_table(const Figure1Result& r);
CsvTable bias_table(const BiasTable& t);

struct SvgSeries {
    std::string name;
    std::vector<double> xs;
    std::vector<double> ys;
    bool dashed = false;
};

struct SvgChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    std::vector<SvgSeries> series;
};

/// Self-contained line chart; the output depends only on the inputs.
std::string render_svg(const SvgChart& chart);

struct FileDigest {
    /// Path relative to the output directory for outputs, as given for inputs.
    std::string path;
    std::string sha256;
};

/// Everything needed to re-run a command and audit its artifacts. Timestamps
/// and host details are deliberately absent so reruns match byte for byte.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    Json config = Json::object();
    std::uint64_t seed = 0;
    std::vector<FileDigest> inputs;
    std::vector<FileDigest> outputs;

    Json to_json() const;
    static RunManifest from_json(const Json& j);
};

/// Collects artifacts under one directory and writes manifest.json last.
class ArtifactWriter {
public:
    explicit ArtifactWriter(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return dir_; }
    void write(const std::string& name, const std::string& content);
    void record_input(const std::string& path);
    /// Writes manifest.json with the collected digests and returns its path.
    std::filesystem::path finish(RunManifest manifest);

private:
    std::filesystem::path dir_;
    std::vector<FileDigest> inputs_;
    std::vector<FileDigest> outputs_;
};

inline constexpr const char* kManifestName = "manifest.json";

}  // namespace incsens
