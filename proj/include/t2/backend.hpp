#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "t2/csv.hpp"
#include "t2/error.hpp"
#include "t2/tabular.hpp"

namespace t2 {

/// Everything a worker sees for one component (or the label).
struct GeneratorRequest {
    std::string role;
    std::string instruction;
    std::vector<FeatureSpec> targets;
    ColumnBlock parents;  // row-aligned values already generated; may have no columns
    ColumnBlock excerpt;  // rows of D_ori shown as examples
    std::size_t n_b = 1;
    std::uint64_t seed = 0;  // used by seeded backends; remote ones ignore it
    int component = 0;       // -1 for the label worker

    void validate() const {
        if (n_b < 1) throw ConfigError("generator request: n_b must be >= 1");
        if (targets.empty()) throw ConfigError("generator request: no target columns");
        if (!parents.columns.empty() && parents.rows.size() != n_b)
            throw ConfigError("generator request: parent rows must number n_b");
        for (const auto& row : parents.rows)
            if (row.size() != parents.columns.size()) throw ConfigError("generator request: ragged parent rows");
    }

    std::vector<std::string> target_names() const {
        std::vector<std::string> out;
        for (const auto& f : targets) out.push_back(f.name);
        return out;
    }
};

/// Source of manager plans and worker replies. Implementations must be safe
/// to call from several threads at once.
class GeneratorBackend {
public:
    virtual ~GeneratorBackend() = default;
    virtual std::string name() const = 0;
    /// Free-form completion used for the task manager.
    virtual std::string complete(const std::string& system, const std::string& prompt) = 0;
    /// Raw worker reply text for `request`; parsed with parse_reply.
    virtual std::string generate(const GeneratorRequest& request) = 0;
};

inline std::string describe_feature(const FeatureSpec& f) {
    std::string s = "- " + f.name;
    if (f.is_continuous()) {
        s += " (continuous, range [" + format_number(f.bounds().lower) + ", " + format_number(f.bounds().upper) + "])";
    } else {
        s += " (categorical, one of: ";
        for (std::size_t i = 0; i < f.categories().size(); ++i) s += (i ? ", " : "") + f.categories()[i];
        s += ")";
    }
    if (!f.description.empty()) s += ": " + f.description;
    return s;
}

inline std::string block_to_csv(const ColumnBlock& b) {
    std::string out;
    for (std::size_t j = 0; j < b.columns.size(); ++j) out += (j ? "," : "") + csv_detail::quote(b.columns[j]);
    out += "\n";
    for (const auto& row : b.rows) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out += ",";
            if (const double* v = std::get_if<double>(&row[j]))
                out += format_number(*v);
            else
                out += csv_detail::quote(std::get<std::string>(row[j]));
        }
        out += "\n";
    }
    return out;
}

/// Fixed template: role, task, feature slice, D_ori excerpt, parent values
/// (only when present), output contract, row count.
inline std::string render_prompt(const GeneratorRequest& r) {
    r.validate();
    std::string p;
    p += "## Role\nYou are the " + r.role + ".\n\n";
    p += "## Task\n" + r.instruction + "\n\n";
    p += "## Features to generate\n";
    for (const auto& f : r.targets) p += describe_feature(f) + "\n";
    p += "\n## Examples from the original data\n";
    p += r.excerpt.columns.empty() ? std::string("(none)\n") : block_to_csv(r.excerpt);
    if (!r.parents.columns.empty()) {
        p += "\n## Values already generated (one line per output row, same order)\n";
        p += block_to_csv(r.parents);
    }
    p += "\n## Output format\nReply with a JSON array of objects, one object per row, with exactly these keys: ";
    for (std::size_t i = 0; i < r.targets.size(); ++i) p += (i ? ", " : "") + std::string("\"") + r.targets[i].name + "\"";
    p += ". Continuous values are JSON numbers; categorical values are JSON strings from the listed categories.";
    if (!r.parents.columns.empty()) p += " Row i must be consistent with line i of the values already generated.";
    p += "\n\nGenerate exactly " + std::to_string(r.n_b) + " rows.\n";
    return p;
}

namespace reply_detail {

/// End of the bracketed value starting at `open` (index of '[' or '{'),
/// honouring JSON strings; npos when unbalanced.
inline std::size_t matching_close(std::string_view text, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '[' || c == '{') ++depth;
        else if (c == ']' || c == '}') {
            if (--depth == 0) return i;
        }
    }
    return std::string_view::npos;
}

}  // namespace reply_detail

/// First syntactically valid JSON value of the given kind ('[' or '{')
/// embedded in `text`, skipping prose and code fences.
inline std::optional<Json> extract_json(std::string_view text, char open) {
    for (std::size_t i = text.find(open); i != std::string_view::npos; i = text.find(open, i + 1)) {
        const auto end = reply_detail::matching_close(text, i);
        if (end == std::string_view::npos) continue;
        Json j = Json::parse(text.substr(i, end - i + 1), nullptr, false);
        if (!j.is_discarded() && (open == '[' ? j.is_array() : j.is_object())) return j;
    }
    return std::nullopt;
}

/// Reply rows as a block over `targets`. Checks keys, row count and cell
/// types; vocabulary and ranges are left to the sanity stage.
inline ColumnBlock parse_reply(std::string_view text, const std::vector<FeatureSpec>& targets, std::size_t n_b,
                               int component = 0) {
    const auto arr = extract_json(text, '[');
    if (!arr) throw DataError("reply: no JSON array found");
    if (arr->size() != n_b)
        throw DataError("reply: expected " + std::to_string(n_b) + " rows, got " + std::to_string(arr->size()));
    ColumnBlock b;
    b.component = component;
    for (const auto& f : targets) b.columns.push_back(f.name);
    for (std::size_t i = 0; i < arr->size(); ++i) {
        const Json& obj = (*arr)[i];
        if (!obj.is_object()) throw DataError("reply: row " + std::to_string(i + 1) + " is not an object");
        for (auto it = obj.begin(); it != obj.end(); ++it)
            if (!b.column_index(it.key())) throw DataError("reply: row " + std::to_string(i + 1) + ": unknown column '" + it.key() + "'");
        std::vector<Cell> row;
        for (const auto& f : targets) {
            auto it = obj.find(f.name);
            if (it == obj.end()) throw DataError("reply: row " + std::to_string(i + 1) + ": missing column '" + f.name + "'");
            if (f.is_continuous()) {
                if (!it->is_number()) throw DataError("reply: row " + std::to_string(i + 1) + ": '" + f.name + "' must be a number");
                row.emplace_back(it->get<double>());
            } else if (it->is_string()) {
                row.emplace_back(it->get<std::string>());
            } else if (it->is_number()) {
                // integer-coded categories such as 0/1 labels
                row.emplace_back(format_number(it->get<double>()));
            } else {
                throw DataError("reply: row " + std::to_string(i + 1) + ": '" + f.name + "' must be a string");
            }
        }
        b.rows.push_back(std::move(row));
    }
    return b;
}

inline Json block_to_json(const ColumnBlock& b) {
    Json arr = Json::array();
    for (const auto& row : b.rows) {
        Json obj = Json::object();
        for (std::size_t j = 0; j < b.columns.size(); ++j) obj[b.columns[j]] = cell_to_json(row[j]);
        arr.push_back(std::move(obj));
    }
    return arr;
}

}  // namespace t2
