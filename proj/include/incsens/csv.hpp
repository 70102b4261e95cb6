#pragma once

#include "incsens/core.hpp"

#include <string>
#include <vector>

namespace incsens {

/// RFC-4180 style: comma separated, optional double quotes with "" escapes,
/// LF or CRLF line ends. A trailing empty line is ignored.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row);
    std::string to_string() const;
};

/// Shortest form that still carries 17 significant digits ("%.17g").
std::string format_double(double v);

struct SchemaConfig {
    std::string outcome = "y";
    std::string treatment = "a";
    /// Empty means every column other than outcome and treatment.
    std::vector<std::string> covariates;
    std::vector<std::string> missing_tokens{"", "NA", "NaN", "nan", "."};

    void validate() const;
};

struct IngestionReport {
    std::size_t rows_read = 0;
    std::size_t rows_kept = 0;
    std::size_t dropped_missing_treatment = 0;
    std::size_t dropped_missing_outcome = 0;
    /// Names of appended missing-indicator columns.
    std::vector<std::string> indicator_columns;

    std::size_t rows_dropped() const { return rows_read - rows_kept; }
};

struct LoadedData {
    Dataset data;
    IngestionReport report;
};

/// Rows missing treatment or outcome are dropped. Each covariate with any
/// missing value is imputed by its observed mean (zero once standardized) and
/// gains a 0/1 indicator column named "<covariate>_missing".
LoadedData load_csv_text(const std::string& text, const SchemaConfig& schema);
LoadedData load_csv(const std::string& path, const SchemaConfig& schema);

/// Writes x columns, treatment and outcome with full precision.
CsvTable dataset_table(const Dataset& data, const std::string& treatment = "a", const std::string& outcome = "y");

}  // namespace incsens
