#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "t2/error.hpp"
#include "t2/tabular.hpp"

namespace t2 {

namespace csv_detail {

/// Splits RFC 4180 text into rows of fields. Quoted fields may contain
/// separators, doubled quotes and newlines.
inline std::vector<std::vector<std::string>> split_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty()) throw DataError("stray quote inside unquoted field");
                quoted = true;
                field_started = true;
                break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                field_started = true;
                break;
            case '\r':
                break;
            case '\n':
                if (field_started || !field.empty() || !row.empty()) {
                    row.push_back(std::move(field));
                    rows.push_back(std::move(row));
                }
                row.clear();
                field.clear();
                field_started = false;
                break;
            default:
                field.push_back(c);
                field_started = true;
        }
    }
    if (quoted) throw DataError("unterminated quoted field");
    if (field_started || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos && !s.empty()) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace csv_detail

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Parses a whole string as a finite double; nullopt otherwise.
inline std::optional<double> parse_number(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

/// Parses CSV text (header + rows) into a dataset validated against `schema`.
inline Dataset parse_csv(const std::string& text, const Schema& schema, const std::string& origin = "<csv>") {
    auto rows = csv_detail::split_rows(text);
    if (rows.empty()) throw DataError(origin + ": missing header row");
    const auto expected = schema.column_names();
    if (rows.front() != expected) {
        std::string want;
        for (const auto& n : expected) want += (want.empty() ? "" : ",") + n;
        throw DataError(origin + ": header mismatch, expected '" + want + "'");
    }
    std::vector<Record> records;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::string where = origin + ": row " + std::to_string(r);
        if (row.size() != expected.size())
            throw DataError(where + ": expected " + std::to_string(expected.size()) + " fields, got " +
                            std::to_string(row.size()));
        Record rec;
        for (std::size_t j = 0; j < row.size(); ++j) {
            const std::string& cell = row[j];
            const bool is_label = j == schema.dimension();
            const FeatureSpec& spec = is_label ? schema.label() : schema.feature(j);
            const std::string col = where + ", column '" + spec.name + "'";
            if (cell.empty()) throw DataError(col + ": missing value");
            if (spec.is_continuous()) {
                auto v = parse_number(cell);
                if (!v) throw DataError(col + ": cannot parse '" + cell + "' as a number");
                rec.values.emplace_back(*v);
            } else {
                if (!spec.category_index(cell)) throw DataError(col + ": unknown category '" + cell + "'");
                if (is_label)
                    rec.label = cell;
                else
                    rec.values.emplace_back(cell);
            }
        }
        records.push_back(std::move(rec));
    }
    return Dataset(schema, std::move(records));
}

inline Dataset load_csv(const std::filesystem::path& path, const Schema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str(), schema, path.string());
}

inline std::string to_csv(const Schema& schema, const std::vector<Record>& records) {
    std::string out;
    const auto names = schema.column_names();
    for (std::size_t j = 0; j < names.size(); ++j) out += (j ? "," : "") + csv_detail::quote(names[j]);
    out += '\n';
    for (const auto& r : records) {
        for (std::size_t j = 0; j < r.values.size(); ++j) {
            if (j) out += ',';
            if (const double* v = std::get_if<double>(&r.values[j]))
                out += format_number(*v);
            else
                out += csv_detail::quote(std::get<std::string>(r.values[j]));
        }
        out += ',' + csv_detail::quote(r.label) + '\n';
    }
    return out;
}

inline void save_csv(const Schema& schema, const std::vector<Record>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << to_csv(schema, records);
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

inline void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
    save_csv(dataset.schema(), dataset.records(), path);
}

}  // namespace t2
