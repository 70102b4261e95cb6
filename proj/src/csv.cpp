#include "incsens/csv.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace incsens {

namespace {

bool needs_quotes(const std::string& s) { return s.find_first_of(",\"\r\n") != std::string::npos; }

std::string quote(const std::string& s) {
    if (!needs_quotes(s)) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    const char* begin = t.data();
    const char* end = t.data() + t.size();
    if (*begin == '+') ++begin;
    const auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc() && res.ptr == end && std::isfinite(out);
}

}  // namespace

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t i = 0;
    auto end_row = [&] {
        row.push_back(std::move(field));
        field.clear();
        rows.push_back(std::move(row));
        row.clear();
        field_started = false;
    };
    while (i < text.size()) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    i += 2;
                    continue;
                }
                in_quotes = false;
            } else {
                field += c;
            }
            ++i;
            continue;
        }
        if (c == '"' && field.empty()) {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            field_started = true;
        } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
            end_row();
            ++i;
        } else if (c == '\n') {
            end_row();
        } else {
            field += c;
            field_started = true;
        }
        ++i;
    }
    if (in_quotes) throw std::invalid_argument("unterminated quoted CSV field");
    if (field_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

void CsvTable::add_row(std::vector<std::string> row) {
    if (row.size() != header.size()) throw std::invalid_argument("CSV row width differs from the header");
    rows.push_back(std::move(row));
}

std::string CsvTable::to_string() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& r) {
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (j) out += ',';
            out += quote(r[j]);
        }
        out += "\r\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void SchemaConfig::validate() const {
    std::set<std::string> seen{outcome, treatment};
    if (outcome.empty() || treatment.empty()) throw std::invalid_argument("outcome and treatment columns must be named");
    if (seen.size() != 2) throw std::invalid_argument("outcome and treatment columns must differ");
    for (const auto& c : covariates) {
        if (!seen.insert(c).second) throw std::invalid_argument("column names must be distinct: " + c);
    }
}

LoadedData load_csv_text(const std::string& text, const SchemaConfig& schema) {
    schema.validate();
    const auto table = parse_csv(text);
    if (table.empty()) throw std::invalid_argument("CSV input is empty");
    const auto& header = table.front();
    auto column = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw std::invalid_argument("required column missing: " + name);
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t col_a = column(schema.treatment);
    const std::size_t col_y = column(schema.outcome);
    std::vector<std::string> cov_names = schema.covariates;
    if (cov_names.empty()) {
        for (const auto& h : header) {
            if (h != schema.treatment && h != schema.outcome) cov_names.push_back(h);
        }
    }
    std::vector<std::size_t> cov_cols;
    for (const auto& c : cov_names) cov_cols.push_back(column(c));
    const std::set<std::string> missing(schema.missing_tokens.begin(), schema.missing_tokens.end());
    auto is_missing = [&](const std::string& s) { return missing.count(trim(s)) > 0; };

    IngestionReport report;
    const std::size_t d = cov_cols.size();
    std::vector<std::vector<double>> values;
    std::vector<std::vector<bool>> absent;
    std::vector<int> treat;
    std::vector<double> outc;
    for (std::size_t r = 1; r < table.size(); ++r) {
        const auto& row = table[r];
        if (row.size() != header.size()) {
            throw std::invalid_argument("CSV row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                                        " fields, expected " + std::to_string(header.size()));
        }
        ++report.rows_read;
        auto cell_error = [&](std::size_t col) {
            return std::invalid_argument("unparseable value '" + row[col] + "' in row " + std::to_string(r + 1) +
                                         ", column " + header[col]);
        };
        // Missing treatment counts as missing both, regardless of the outcome.
        if (is_missing(row[col_a])) {
            ++report.dropped_missing_treatment;
            continue;
        }
        if (is_missing(row[col_y])) {
            ++report.dropped_missing_outcome;
            continue;
        }
        double a = 0.0;
        double y = 0.0;
        if (!parse_number(row[col_a], a)) throw cell_error(col_a);
        if (a != 0.0 && a != 1.0) {
            throw std::invalid_argument("treatment must be 0 or 1 (row " + std::to_string(r + 1) + ")");
        }
        if (!parse_number(row[col_y], y)) throw cell_error(col_y);
        std::vector<double> x(d, 0.0);
        std::vector<bool> miss(d, false);
        for (std::size_t j = 0; j < d; ++j) {
            const auto& cell = row[cov_cols[j]];
            if (is_missing(cell)) miss[j] = true;
            else if (!parse_number(cell, x[j])) throw cell_error(cov_cols[j]);
        }
        values.push_back(std::move(x));
        absent.push_back(std::move(miss));
        treat.push_back(static_cast<int>(a));
        outc.push_back(y);
    }
    report.rows_kept = values.size();
    if (values.size() < 2) throw std::invalid_argument("fewer than two complete rows after dropping missing A or Y");

    std::vector<std::string> names = cov_names;
    std::vector<std::size_t> augmented;
    for (std::size_t j = 0; j < d; ++j) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!absent[i][j]) {
                sum += values[i][j];
                ++count;
            }
        }
        if (count == values.size()) continue;
        const double fill = count > 0 ? sum / static_cast<double>(count) : 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (absent[i][j]) values[i][j] = fill;
        }
        augmented.push_back(j);
        names.push_back(cov_names[j] + "_missing");
        report.indicator_columns.push_back(cov_names[j] + "_missing");
    }
    std::vector<UnitRecord> records;
    records.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::vector<double> x = std::move(values[i]);
        for (std::size_t j : augmented) x.push_back(absent[i][j] ? 1.0 : 0.0);
        records.push_back({std::move(x), treat[i], outc[i]});
    }
    if (names.empty()) {
        // A covariate-free design still needs a column for the learners.
        names.push_back("intercept_only");
        for (auto& r : records) r.covariates.push_back(0.0);
    }
    return {Dataset(std::move(records), names), report};
}

LoadedData load_csv(const std::string& path, const SchemaConfig& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open data file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_csv_text(ss.str(), schema);
}

CsvTable dataset_table(const Dataset& data, const std::string& treatment, const std::string& outcome) {
    CsvTable t;
    t.header = data.covariate_names();
    t.header.push_back(treatment);
    t.header.push_back(outcome);
    for (const auto& r : data.records()) {
        std::vector<std::string> row;
        for (double x : r.covariates) row.push_back(format_double(x));
        row.push_back(std::to_string(r.treatment));
        row.push_back(format_double(r.outcome));
        t.add_row(std::move(row));
    }
    return t;
}

}  // namespace incsens
