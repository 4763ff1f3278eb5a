#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "t2/error.hpp"

namespace t2 {

using Json = nlohmann::json;

struct ContinuousKind {
    double lower = 0.0;
    double upper = 0.0;
};

struct CategoricalKind {
    std::vector<std::string> categories;
};

/// One column of the table: a bounded real or a closed category vocabulary.
struct FeatureSpec {
    std::string name;
    std::variant<ContinuousKind, CategoricalKind> kind;
    std::string description;

    static FeatureSpec continuous(std::string name, double lower, double upper, std::string description = {}) {
        return {std::move(name), ContinuousKind{lower, upper}, std::move(description)};
    }
    static FeatureSpec categorical(std::string name, std::vector<std::string> categories,
                                   std::string description = {}) {
        return {std::move(name), CategoricalKind{std::move(categories)}, std::move(description)};
    }

    bool is_continuous() const noexcept { return std::holds_alternative<ContinuousKind>(kind); }
    bool is_categorical() const noexcept { return std::holds_alternative<CategoricalKind>(kind); }
    const ContinuousKind& bounds() const { return std::get<ContinuousKind>(kind); }
    const std::vector<std::string>& categories() const { return std::get<CategoricalKind>(kind).categories; }

    std::optional<std::size_t> category_index(std::string_view value) const {
        const auto& cats = categories();
        auto it = std::find(cats.begin(), cats.end(), value);
        if (it == cats.end()) return std::nullopt;
        return static_cast<std::size_t>(it - cats.begin());
    }

    bool operator==(const FeatureSpec& o) const {
        if (name != o.name || description != o.description || kind.index() != o.kind.index()) return false;
        if (is_continuous()) return bounds().lower == o.bounds().lower && bounds().upper == o.bounds().upper;
        return categories() == o.categories();
    }
};

inline void validate_feature(const FeatureSpec& f) {
    if (f.name.empty()) throw ConfigError("feature with empty name");
    if (f.is_continuous()) {
        const auto& b = f.bounds();
        if (!std::isfinite(b.lower) || !std::isfinite(b.upper) || b.lower > b.upper)
            throw ConfigError("feature '" + f.name + "': bounds must be finite with lower <= upper");
    } else {
        const auto& cats = f.categories();
        std::set<std::string> distinct(cats.begin(), cats.end());
        if (distinct.size() != cats.size())
            throw ConfigError("feature '" + f.name + "': duplicate category labels");
        if (distinct.size() < 2) throw ConfigError("feature '" + f.name + "': needs at least 2 categories");
    }
}

/// Ordered feature dictionary plus the categorical label.
class Schema {
public:
    Schema() = default;
    Schema(std::vector<FeatureSpec> features, FeatureSpec label)
        : features_(std::move(features)), label_(std::move(label)) {
        if (features_.empty()) throw ConfigError("schema needs at least one feature");
        std::set<std::string> names;
        for (const auto& f : features_) {
            validate_feature(f);
            if (!names.insert(f.name).second) throw ConfigError("duplicate feature name '" + f.name + "'");
        }
        validate_feature(label_);
        if (!label_.is_categorical()) throw ConfigError("label '" + label_.name + "' must be categorical");
        if (names.count(label_.name)) throw ConfigError("label name '" + label_.name + "' clashes with a feature");
    }

    const std::vector<FeatureSpec>& features() const noexcept { return features_; }
    const FeatureSpec& feature(std::size_t i) const { return features_.at(i); }
    const FeatureSpec& label() const noexcept { return label_; }
    std::size_t dimension() const noexcept { return features_.size(); }
    std::size_t num_classes() const { return label_.categories().size(); }
    const std::vector<std::string>& classes() const { return label_.categories(); }

    std::optional<std::size_t> index_of(std::string_view name) const {
        for (std::size_t i = 0; i < features_.size(); ++i)
            if (features_[i].name == name) return i;
        return std::nullopt;
    }
    std::optional<std::size_t> class_index(std::string_view label) const { return label_.category_index(label); }

    std::vector<std::string> column_names() const {
        std::vector<std::string> out;
        for (const auto& f : features_) out.push_back(f.name);
        out.push_back(label_.name);
        return out;
    }

    bool operator==(const Schema& o) const { return features_ == o.features_ && label_ == o.label_; }

private:
    std::vector<FeatureSpec> features_;
    FeatureSpec label_;
};

using Cell = std::variant<double, std::string>;

/// One row (x_i, y_i). Cells align with the schema's feature order.
struct Record {
    std::vector<Cell> values;
    std::string label;

    double number(std::size_t i) const { return std::get<double>(values.at(i)); }
    const std::string& text(std::size_t i) const { return std::get<std::string>(values.at(i)); }

    bool operator==(const Record&) const = default;
};

struct Provenance {
    enum class Source { original, generated, bootstrap };
    Source source = Source::original;
    int batch = 0;

    static Provenance original() { return {}; }
    static Provenance generated(int t) { return {Source::generated, t}; }
    static Provenance bootstrap(int t) { return {Source::bootstrap, t}; }

    std::string to_string() const {
        switch (source) {
            case Source::original: return "original";
            case Source::generated: return "generated(" + std::to_string(batch) + ")";
            case Source::bootstrap: return "bootstrap(" + std::to_string(batch) + ")";
        }
        return "unknown";
    }
    bool operator==(const Provenance&) const = default;
};

/// Cell type and vocabulary problems of `r` against `schema`; empty when conformant.
inline std::optional<std::string> conformance_error(const Schema& schema, const Record& r) {
    if (r.values.size() != schema.dimension())
        return "expected " + std::to_string(schema.dimension()) + " cells, got " + std::to_string(r.values.size());
    for (std::size_t j = 0; j < schema.dimension(); ++j) {
        const auto& f = schema.feature(j);
        if (f.is_continuous()) {
            const double* v = std::get_if<double>(&r.values[j]);
            if (!v) return "column '" + f.name + "': expected a number";
            if (!std::isfinite(*v)) return "column '" + f.name + "': non-finite value";
        } else {
            const std::string* s = std::get_if<std::string>(&r.values[j]);
            if (!s) return "column '" + f.name + "': expected a category label";
            if (!f.category_index(*s)) return "column '" + f.name + "': unknown category '" + *s + "'";
        }
    }
    if (!schema.class_index(r.label)) return "column '" + schema.label().name + "': unknown category '" + r.label + "'";
    return std::nullopt;
}

/// Records with per-row provenance. Rows are not required to be schema-valid
/// (freshly generated batches are checked by the sanity stage).
struct DataBatch {
    std::vector<Record> records;
    std::vector<Provenance> provenance;

    DataBatch() = default;
    DataBatch(std::vector<Record> rs, Provenance p) : records(std::move(rs)), provenance(records.size(), p) {}
    DataBatch(std::vector<Record> rs, std::vector<Provenance> ps) : records(std::move(rs)), provenance(std::move(ps)) {
        if (provenance.size() != records.size()) throw DataError("batch provenance/record count mismatch");
    }

    std::size_t size() const noexcept { return records.size(); }
    bool empty() const noexcept { return records.empty(); }
    void push_back(Record r, Provenance p) {
        records.push_back(std::move(r));
        provenance.push_back(p);
    }
};

/// A schema-conformant table. Immutable after construction; `appended`
/// returns a new value.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(Schema schema) : schema_(std::move(schema)) {}
    Dataset(Schema schema, std::vector<Record> records)
        : Dataset(std::move(schema), std::move(records), std::vector<Provenance>{}) {}
    Dataset(Schema schema, std::vector<Record> records, std::vector<Provenance> provenance)
        : schema_(std::move(schema)), records_(std::move(records)), provenance_(std::move(provenance)) {
        if (provenance_.empty()) provenance_.assign(records_.size(), Provenance::original());
        if (provenance_.size() != records_.size()) throw DataError("dataset provenance/record count mismatch");
        for (std::size_t i = 0; i < records_.size(); ++i)
            if (auto err = conformance_error(schema_, records_[i]))
                throw DataError("record " + std::to_string(i) + ": " + *err);
    }

    const Schema& schema() const noexcept { return schema_; }
    const std::vector<Record>& records() const noexcept { return records_; }
    const std::vector<Provenance>& provenance() const noexcept { return provenance_; }
    const Record& operator[](std::size_t i) const { return records_[i]; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

    Dataset appended(const DataBatch& batch) const {
        auto rs = records_;
        auto ps = provenance_;
        rs.insert(rs.end(), batch.records.begin(), batch.records.end());
        ps.insert(ps.end(), batch.provenance.begin(), batch.provenance.end());
        return Dataset(schema_, std::move(rs), std::move(ps));
    }

    Dataset subset(const std::vector<std::size_t>& indices) const {
        std::vector<Record> rs;
        std::vector<Provenance> ps;
        for (auto i : indices) {
            rs.push_back(records_.at(i));
            ps.push_back(provenance_.at(i));
        }
        return Dataset(schema_, std::move(rs), std::move(ps));
    }

    DataBatch as_batch() const { return DataBatch(records_, provenance_); }

    std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(schema_.num_classes(), 0);
        for (const auto& r : records_) ++counts[*schema_.class_index(r.label)];
        return counts;
    }

    /// Records equal and provenance equal; schemas compared as well.
    bool operator==(const Dataset& o) const {
        return schema_ == o.schema_ && records_ == o.records_ && provenance_ == o.provenance_;
    }

private:
    Schema schema_;
    std::vector<Record> records_;
    std::vector<Provenance> provenance_;
};

/// Columns for one component I_k, n_b rows, cells in `columns` order.
struct ColumnBlock {
    int component = 0;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    std::size_t row_count() const noexcept { return rows.size(); }
    std::optional<std::size_t> column_index(std::string_view name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        return std::nullopt;
    }
    bool operator==(const ColumnBlock&) const = default;
};

// ---- feature dictionary JSON -------------------------------------------------

inline Json feature_to_json(const FeatureSpec& f) {
    Json j;
    j["name"] = f.name;
    if (f.is_continuous()) {
        j["kind"] = "continuous";
        j["bounds"] = {f.bounds().lower, f.bounds().upper};
    } else {
        j["kind"] = "categorical";
        j["categories"] = f.categories();
    }
    j["description"] = f.description;
    return j;
}

inline FeatureSpec feature_from_json(const Json& j, bool force_categorical = false) {
    try {
        FeatureSpec f;
        f.name = j.at("name").get<std::string>();
        f.description = j.value("description", std::string{});
        std::string kind = j.value("kind", force_categorical ? std::string("categorical") : std::string{});
        if (kind == "continuous") {
            const auto& b = j.at("bounds");
            if (!b.is_array() || b.size() != 2) throw ConfigError("feature '" + f.name + "': bounds must be [lower, upper]");
            f.kind = ContinuousKind{b[0].get<double>(), b[1].get<double>()};
        } else if (kind == "categorical") {
            f.kind = CategoricalKind{j.at("categories").get<std::vector<std::string>>()};
        } else {
            throw ConfigError("feature '" + f.name + "': kind must be 'continuous' or 'categorical'");
        }
        validate_feature(f);
        return f;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed feature entry: ") + e.what());
    }
}

inline Json schema_to_json(const Schema& s) {
    Json feats = Json::array();
    for (const auto& f : s.features()) feats.push_back(feature_to_json(f));
    Json label = feature_to_json(s.label());
    return Json{{"features", feats}, {"label", label}};
}

inline Schema schema_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("features") || !j.contains("label"))
        throw ConfigError("feature dictionary must be an object with 'features' and 'label'");
    if (!j["features"].is_array()) throw ConfigError("'features' must be an array");
    std::vector<FeatureSpec> feats;
    for (const auto& f : j["features"]) feats.push_back(feature_from_json(f));
    return Schema(std::move(feats), feature_from_json(j["label"], true));
}

inline Json cell_to_json(const Cell& c) {
    if (const double* v = std::get_if<double>(&c)) return *v;
    return std::get<std::string>(c);
}

}  // namespace t2
