#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "t2/error.hpp"
#include "t2/random.hpp"
#include "t2/resample.hpp"
#include "t2/tabular.hpp"

namespace t2 {

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// Marginal law of one simulated column.
struct Marginal {
    enum class Kind { uniform, gaussian, categorical };
    Kind kind = Kind::uniform;
    double a = 0.0;  // uniform lower / gaussian mean
    double b = 1.0;  // uniform upper / gaussian sd
    std::vector<double> probabilities;

    static Marginal uniform(double lo, double hi) { return {Kind::uniform, lo, hi, {}}; }
    static Marginal gaussian(double mean, double sd) { return {Kind::gaussian, mean, sd, {}}; }
    static Marginal categorical(std::vector<double> p) { return {Kind::categorical, 0, 0, std::move(p)}; }

    bool operator==(const Marginal&) const = default;
};

/// Draws one cell for `spec`. Gaussian draws are truncated to the feature
/// bounds by rejection so that samples always respect the declared range.
inline Cell draw_cell(const Marginal& m, const FeatureSpec& spec, Rng& rng) {
    switch (m.kind) {
        case Marginal::Kind::uniform:
            return std::uniform_real_distribution<double>(m.a, m.b)(rng);
        case Marginal::Kind::gaussian: {
            std::normal_distribution<double> n(m.a, m.b);
            double v = n(rng);
            if (spec.is_continuous()) {
                const auto& bd = spec.bounds();
                for (int tries = 0; (v < bd.lower || v > bd.upper) && tries < 1000; ++tries) v = n(rng);
                v = std::clamp(v, bd.lower, bd.upper);
            }
            return v;
        }
        case Marginal::Kind::categorical: {
            std::discrete_distribution<std::size_t> dd(m.probabilities.begin(), m.probabilities.end());
            return spec.categories().at(dd(rng));
        }
    }
    throw ConfigError("unknown marginal kind");
}

inline void validate_marginal(const Marginal& m, const FeatureSpec& f) {
    const std::string where = "marginal for '" + f.name + "'";
    if (m.kind == Marginal::Kind::categorical) {
        if (!f.is_categorical()) throw ConfigError(where + ": categorical marginal on a continuous feature");
        if (m.probabilities.size() != f.categories().size())
            throw ConfigError(where + ": probability count must match category count");
        double s = 0.0;
        for (double p : m.probabilities) {
            if (!(p >= 0.0)) throw ConfigError(where + ": negative probability");
            s += p;
        }
        if (std::abs(s - 1.0) > 1e-9) throw ConfigError(where + ": probabilities must sum to 1");
        return;
    }
    if (!f.is_continuous()) throw ConfigError(where + ": numeric marginal on a categorical feature");
    if (!std::isfinite(m.a) || !std::isfinite(m.b)) throw ConfigError(where + ": non-finite parameters");
    if (m.kind == Marginal::Kind::uniform && m.a > m.b) throw ConfigError(where + ": uniform needs a <= b");
    if (m.kind == Marginal::Kind::gaussian && !(m.b > 0.0)) throw ConfigError(where + ": gaussian needs sd > 0");
    if (m.kind == Marginal::Kind::uniform && (m.a < f.bounds().lower || m.b > f.bounds().upper))
        throw ConfigError(where + ": uniform support exceeds feature bounds");
}

/// Linear-sigmoid data simulator. Features are drawn independently from their
/// marginals; the score is sigmoid(intercept + coefficients · raw encoding),
/// where the raw encoding keeps continuous values as-is and one-hot encodes
/// categoricals. Binary labels are Bernoulli(score); with thresholds the
/// label is the bucket index of the score.
struct SimulatorConfig {
    Schema schema;
    std::vector<Marginal> marginals;
    std::vector<double> coefficients;
    double intercept = 0.0;
    std::vector<double> thresholds;
    std::uint64_t seed = 0;

    std::size_t encoded_width() const {
        std::size_t w = 0;
        for (const auto& f : schema.features()) w += f.is_continuous() ? 1 : f.categories().size();
        return w;
    }

    void validate() const {
        if (marginals.size() != schema.dimension()) throw ConfigError("simulator: one marginal per feature required");
        for (std::size_t j = 0; j < marginals.size(); ++j) validate_marginal(marginals[j], schema.feature(j));
        if (coefficients.size() != encoded_width())
            throw ConfigError("simulator: expected " + std::to_string(encoded_width()) + " coefficients, got " +
                              std::to_string(coefficients.size()));
        for (double c : coefficients)
            if (!std::isfinite(c)) throw ConfigError("simulator: non-finite coefficient");
        if (!std::isfinite(intercept)) throw ConfigError("simulator: non-finite intercept");
        if (thresholds.empty()) {
            if (schema.num_classes() != 2) throw ConfigError("simulator: multi-class labels need thresholds");
        } else {
            if (thresholds.size() + 1 != schema.num_classes())
                throw ConfigError("simulator: need num_classes - 1 thresholds");
            for (std::size_t i = 0; i < thresholds.size(); ++i) {
                if (!(thresholds[i] > 0.0 && thresholds[i] < 1.0)) throw ConfigError("simulator: thresholds must lie in (0,1)");
                if (i && !(thresholds[i] > thresholds[i - 1])) throw ConfigError("simulator: thresholds must increase");
            }
        }
    }

    /// sigmoid(intercept + w · raw encoding) for the feature cells of `r`.
    double score(const Record& r) const {
        double z = intercept;
        std::size_t pos = 0;
        for (std::size_t j = 0; j < schema.dimension(); ++j) {
            const auto& f = schema.feature(j);
            if (f.is_continuous()) {
                z += coefficients[pos++] * r.number(j);
            } else {
                z += coefficients[pos + *f.category_index(r.text(j))];
                pos += f.categories().size();
            }
        }
        return sigmoid(z);
    }

    /// Class index for a given score; binary configs without thresholds draw.
    std::size_t label_index(double p, Rng& rng) const {
        if (thresholds.empty()) return uniform01(rng) < p ? 1 : 0;
        std::size_t k = 0;
        while (k < thresholds.size() && p >= thresholds[k]) ++k;
        return k;
    }
};

inline Dataset simulate(const SimulatorConfig& config, std::size_t n, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    std::vector<Record> records;
    records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Record r;
        for (std::size_t j = 0; j < config.schema.dimension(); ++j)
            r.values.push_back(draw_cell(config.marginals[j], config.schema.feature(j), rng));
        r.label = config.schema.classes()[config.label_index(config.score(r), rng)];
        records.push_back(std::move(r));
    }
    return Dataset(config.schema, std::move(records));
}

inline Dataset simulate(const SimulatorConfig& config, std::size_t n) { return simulate(config, n, config.seed); }

/// Draws n records whose class counts are the largest-remainder apportionment
/// of n by `ratios`. Without replacement inside a class when it has enough
/// records, with replacement otherwise.
inline Dataset sample_imbalanced(const Dataset& dataset, const std::vector<double>& ratios, std::size_t n,
                                 std::uint64_t seed) {
    const auto& schema = dataset.schema();
    if (ratios.size() != schema.num_classes())
        throw ConfigError("sample_imbalanced: need one ratio per class (" + std::to_string(schema.num_classes()) + ")");
    const auto counts = apportion(n, ratios);
    const auto groups = indices_by_class(dataset);
    Rng rng(seed);
    std::vector<std::size_t> picked;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0) continue;
        auto g = groups[c];
        if (g.empty()) throw DataError("sample_imbalanced: class '" + schema.classes()[c] + "' demanded but absent");
        if (counts[c] <= g.size()) {
            std::shuffle(g.begin(), g.end(), rng);
            picked.insert(picked.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(counts[c]));
        } else {
            for (std::size_t k = 0; k < counts[c]; ++k) picked.push_back(g[uniform_index(rng, g.size())]);
        }
    }
    std::shuffle(picked.begin(), picked.end(), rng);
    return dataset.subset(picked);
}

/// round-half-up(ratio · n) distinct indices, uniform and class-agnostic.
inline std::vector<std::size_t> select_flip_indices(std::size_t n, double ratio, std::uint64_t seed) {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("label flip ratio must lie in [0,1]");
    const auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 0.5));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(k, n));
    std::sort(idx.begin(), idx.end());
    return idx;
}

inline Dataset flip_labels_at(const Dataset& dataset, const std::vector<std::size_t>& indices) {
    const auto& schema = dataset.schema();
    if (schema.num_classes() != 2) throw ConfigError("label flipping requires a binary label space");
    auto records = dataset.records();
    for (auto i : indices) {
        auto& lab = records.at(i).label;
        lab = schema.classes()[1 - *schema.class_index(lab)];
    }
    return Dataset(schema, std::move(records), dataset.provenance());
}

inline Dataset apply_label_flip(const Dataset& dataset, double ratio, std::uint64_t seed) {
    if (dataset.schema().num_classes() != 2) throw ConfigError("label flipping requires a binary label space");
    return flip_labels_at(dataset, select_flip_indices(dataset.size(), ratio, seed));
}

/// Simulated deficiency applied to a large simulated pool to obtain D_ori.
struct DeficiencySpec {
    enum class Kind { none, imbalance, incompleteness, noise };
    Kind kind = Kind::none;
    std::vector<double> ratios;
    double flip_ratio = 0.0;
    std::size_t n = 0;

    void validate(const Schema& schema) const {
        if (kind == Kind::imbalance || kind == Kind::incompleteness) {
            if (ratios.size() != schema.num_classes()) throw ConfigError("deficiency: need one ratio per class");
            double s = 0.0;
            for (double r : ratios) {
                if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("deficiency: ratios must be nonnegative");
                s += r;
            }
            if (std::abs(s - 1.0) > 1e-9) throw ConfigError("deficiency: ratios must sum to 1");
            if (kind == Kind::incompleteness &&
                std::none_of(ratios.begin(), ratios.end(), [](double r) { return r == 0.0; }))
                throw ConfigError("deficiency: incompleteness removes at least one class (a zero ratio)");
        }
        if (kind == Kind::noise && !(flip_ratio >= 0.0 && flip_ratio <= 1.0))
            throw ConfigError("deficiency: flip ratio must lie in [0,1]");
    }
};

inline Dataset apply_deficiency(const Dataset& pool, const DeficiencySpec& spec, std::uint64_t seed) {
    spec.validate(pool.schema());
    switch (spec.kind) {
        case DeficiencySpec::Kind::imbalance:
        case DeficiencySpec::Kind::incompleteness:
            return sample_imbalanced(pool, spec.ratios, spec.n, seed);
        case DeficiencySpec::Kind::noise: {
            if (spec.n > pool.size()) throw DataError("deficiency: pool smaller than requested size");
            std::vector<std::size_t> idx(pool.size());
            std::iota(idx.begin(), idx.end(), 0);
            Rng rng(derive_seed(seed, 1));
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(spec.n);
            return apply_label_flip(pool.subset(idx), spec.flip_ratio, derive_seed(seed, 2));
        }
        case DeficiencySpec::Kind::none: {
            if (spec.n == 0 || spec.n >= pool.size()) return pool;
            std::vector<std::size_t> idx(spec.n);
            std::iota(idx.begin(), idx.end(), 0);
            return pool.subset(idx);
        }
    }
    throw ConfigError("unknown deficiency kind");
}

/// Eight-feature diabetes-style simulator with three ordered risk classes
/// (LR/MR/HR via score thresholds 0.5 and 0.8). Coefficients are chosen for
/// this library: roughly half LR, a third MR and a sixth HR.
inline SimulatorConfig diabetes_preset(std::uint64_t seed = 0) {
    SimulatorConfig c;
    c.schema = Schema(
        {
            FeatureSpec::continuous("age", 18, 90, "Age in years"),
            FeatureSpec::categorical("sex", {"Female", "Male"}, "Biological sex"),
            FeatureSpec::continuous("bmi", 15, 50, "Body mass index in kg/m^2"),
            FeatureSpec::continuous("physical_activity", 0, 20, "Hours of exercise per week"),
            FeatureSpec::categorical("smoking", {"never", "current"}, "Smoking status"),
            FeatureSpec::continuous("glucose", 50, 250, "Fasting plasma glucose in mg/dL"),
            FeatureSpec::continuous("blood_pressure", 40, 140, "Diastolic blood pressure in mmHg"),
            FeatureSpec::categorical("family_history", {"no", "yes"}, "Diabetes in first-degree relatives"),
        },
        FeatureSpec::categorical("risk", {"LR", "MR", "HR"}, "Diabetes risk group: low, moderate, high"));
    c.marginals = {
        Marginal::uniform(20, 80),     Marginal::categorical({0.5, 0.5}), Marginal::gaussian(27, 5),
        Marginal::uniform(0, 10),      Marginal::categorical({0.75, 0.25}), Marginal::gaussian(105, 20),
        Marginal::gaussian(80, 10),    Marginal::categorical({0.7, 0.3}),
    };
    // age, sex(F,M), bmi, activity, smoking(never,current), glucose, bp, family(no,yes)
    c.coefficients = {0.04, 0.0, 0.2, 0.08, -0.15, 0.0, 0.5, 0.05, 0.02, 0.0, 0.6};
    c.intercept = -10.7;
    c.thresholds = {0.5, 0.8};
    c.seed = seed;
    return c;
}

// ---- JSON forms ----------------------------------------------------------------

inline Json marginal_to_json(const Marginal& m) {
    switch (m.kind) {
        case Marginal::Kind::uniform: return {{"uniform", {m.a, m.b}}};
        case Marginal::Kind::gaussian: return {{"gaussian", {m.a, m.b}}};
        case Marginal::Kind::categorical: return {{"categorical", m.probabilities}};
    }
    return nullptr;
}

/// {"uniform": [a, b]}, {"gaussian": [mean, sd]} or {"categorical": [p...]}.
inline Marginal marginal_from_json(const Json& j) {
    try {
        if (j.contains("uniform")) return Marginal::uniform(j["uniform"].at(0).get<double>(), j["uniform"].at(1).get<double>());
        if (j.contains("gaussian"))
            return Marginal::gaussian(j["gaussian"].at(0).get<double>(), j["gaussian"].at(1).get<double>());
        if (j.contains("categorical")) return Marginal::categorical(j["categorical"].get<std::vector<double>>());
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed marginal: ") + e.what());
    }
    throw ConfigError("marginal must be one of uniform, gaussian, categorical");
}

inline Json simulator_to_json(const SimulatorConfig& c) {
    Json m = Json::array();
    for (const auto& x : c.marginals) m.push_back(marginal_to_json(x));
    return {{"schema", schema_to_json(c.schema)}, {"marginals", m},          {"coefficients", c.coefficients},
            {"intercept", c.intercept},           {"thresholds", c.thresholds}, {"seed", c.seed}};
}

/// Either {"preset": "diabetes", "seed": s} or a full explicit config.
inline SimulatorConfig simulator_from_json(const Json& j) {
    try {
        SimulatorConfig c;
        if (j.contains("preset")) {
            const auto name = j["preset"].get<std::string>();
            if (name != "diabetes") throw ConfigError("unknown simulator preset '" + name + "'");
            c = diabetes_preset(j.value("seed", std::uint64_t{0}));
        } else {
            c.schema = schema_from_json(j.at("schema"));
            for (const auto& m : j.at("marginals")) c.marginals.push_back(marginal_from_json(m));
            c.coefficients = j.at("coefficients").get<std::vector<double>>();
            c.intercept = j.value("intercept", 0.0);
            c.thresholds = j.value("thresholds", std::vector<double>{});
            c.seed = j.value("seed", std::uint64_t{0});
        }
        c.validate();
        return c;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed simulator config: ") + e.what());
    }
}

inline const char* deficiency_kind_name(DeficiencySpec::Kind k) {
    switch (k) {
        case DeficiencySpec::Kind::none: return "none";
        case DeficiencySpec::Kind::imbalance: return "imbalance";
        case DeficiencySpec::Kind::incompleteness: return "incompleteness";
        case DeficiencySpec::Kind::noise: return "noise";
    }
    return "none";
}

inline Json deficiency_to_json(const DeficiencySpec& d) {
    Json j = {{"kind", deficiency_kind_name(d.kind)}, {"n", d.n}};
    if (d.kind == DeficiencySpec::Kind::noise)
        j["flip_ratio"] = d.flip_ratio;
    else if (d.kind != DeficiencySpec::Kind::none)
        j["ratios"] = d.ratios;
    return j;
}

inline DeficiencySpec deficiency_from_json(const Json& j) {
    try {
        DeficiencySpec d;
        const auto kind = j.value("kind", std::string("none"));
        if (kind == "none") d.kind = DeficiencySpec::Kind::none;
        else if (kind == "imbalance") d.kind = DeficiencySpec::Kind::imbalance;
        else if (kind == "incompleteness") d.kind = DeficiencySpec::Kind::incompleteness;
        else if (kind == "noise") d.kind = DeficiencySpec::Kind::noise;
        else throw ConfigError("unknown deficiency kind '" + kind + "'");
        d.ratios = j.value("ratios", std::vector<double>{});
        d.flip_ratio = j.value("flip_ratio", 0.0);
        d.n = j.value("n", std::size_t{0});
        return d;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed deficiency spec: ") + e.what());
    }
}

}  // namespace t2
