#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "t2/backend.hpp"
#include "t2/error.hpp"
#include "t2/random.hpp"
#include "t2/sim.hpp"
#include "t2/tabular.hpp"

namespace t2 {

/// Row-wise function of already generated columns:
///   v = link(intercept + Σ w·x + Σ w·[x == category]) + noise.
/// Continuous targets take v (clamped to bounds). Categorical targets take
/// the bucket of v under `thresholds`, or a Bernoulli(v) draw between the
/// first two categories when there are no thresholds.
struct MockRule {
    struct Term {
        std::string feature;
        std::optional<std::string> category;  // indicator term when set
        double weight = 0.0;
    };
    enum class Link { identity, sigmoid };

    std::vector<Term> terms;
    double intercept = 0.0;
    double noise_sd = 0.0;
    Link link = Link::identity;
    std::vector<double> thresholds;
};

/// Test double for a worker: every column the backend may be asked for has a
/// marginal or a rule (rules win when both are present).
struct MockSpec {
    Schema schema;
    std::map<std::string, Marginal> marginals;
    std::map<std::string, MockRule> rules;
    std::uint64_t seed = 0;

    /// Spec for `name`: a schema feature or the label.
    const FeatureSpec& column(const std::string& name) const {
        if (name == schema.label().name) return schema.label();
        auto idx = schema.index_of(name);
        if (!idx) throw ConfigError("mock spec: unknown column '" + name + "'");
        return schema.feature(*idx);
    }

    void validate() const {
        for (const auto& [name, m] : marginals) validate_marginal(m, column(name));
        for (const auto& [name, r] : rules) {
            const auto& target = column(name);
            if (!(r.noise_sd >= 0.0)) throw ConfigError("mock rule '" + name + "': noise_sd must be >= 0");
            for (const auto& t : r.terms) {
                const auto& f = column(t.feature);
                if (t.category ? !f.is_categorical() || !f.category_index(*t.category) : !f.is_continuous())
                    throw ConfigError("mock rule '" + name + "': bad term on '" + t.feature + "'");
            }
            if (target.is_categorical()) {
                if (r.thresholds.empty() && target.categories().size() != 2)
                    throw ConfigError("mock rule '" + name + "': non-binary categorical target needs thresholds");
                if (!r.thresholds.empty() && r.thresholds.size() + 1 != target.categories().size())
                    throw ConfigError("mock rule '" + name + "': need categories - 1 thresholds");
            }
        }
    }
};

namespace mock_detail {

inline const char* link_name(MockRule::Link l) { return l == MockRule::Link::sigmoid ? "sigmoid" : "identity"; }

/// Nearest allowed category by position in the full vocabulary; ties go to
/// the lower position.
inline std::string clamp_category(const FeatureSpec& full, std::size_t index, const FeatureSpec& allowed) {
    const auto& cats = full.categories();
    std::optional<std::size_t> best;
    std::size_t best_gap = 0;
    for (std::size_t i = 0; i < cats.size(); ++i) {
        if (!allowed.category_index(cats[i])) continue;
        const std::size_t gap = i > index ? i - index : index - i;
        if (!best || gap < best_gap) best = i, best_gap = gap;
    }
    if (!best) throw ConfigError("mock: no category of '" + full.name + "' is allowed by the request");
    return cats[*best];
}

}  // namespace mock_detail

/// Deterministic in (spec.seed, request.seed). Rules read parent columns and
/// targets generated earlier in the same row.
inline ColumnBlock mock_generate(const MockSpec& spec, const GeneratorRequest& request) {
    request.validate();
    for (const auto& t : request.targets)
        if (!spec.rules.count(t.name) && !spec.marginals.count(t.name))
            throw ConfigError("mock spec does not cover column '" + t.name + "'");

    Rng rng(derive_seed(spec.seed, {request.seed, static_cast<std::uint64_t>(request.component + 1)}));
    ColumnBlock out;
    out.component = request.component;
    out.columns = request.target_names();

    for (std::size_t r = 0; r < request.n_b; ++r) {
        std::vector<Cell> row;
        auto lookup = [&](const std::string& name) -> const Cell& {
            for (std::size_t j = 0; j < row.size(); ++j)
                if (out.columns[j] == name) return row[j];
            if (auto j = request.parents.column_index(name)) return request.parents.rows[r][*j];
            throw DataError("mock rule needs column '" + name + "', which is not generated yet");
        };
        for (const auto& target : request.targets) {
            const FeatureSpec& full = spec.column(target.name);
            auto rule = spec.rules.find(target.name);
            if (rule == spec.rules.end()) {
                Cell c = draw_cell(spec.marginals.at(target.name), full, rng);
                if (target.is_categorical() && !target.category_index(std::get<std::string>(c)))
                    c = mock_detail::clamp_category(full, *full.category_index(std::get<std::string>(c)), target);
                row.push_back(std::move(c));
                continue;
            }
            const MockRule& m = rule->second;
            double z = m.intercept;
            for (const auto& t : m.terms) {
                const Cell& c = lookup(t.feature);
                if (t.category) {
                    if (std::get<std::string>(c) == *t.category) z += t.weight;
                } else {
                    z += t.weight * std::get<double>(c);
                }
            }
            double v = m.link == MockRule::Link::sigmoid ? sigmoid(z) : z;
            if (m.noise_sd > 0.0) v += std::normal_distribution<double>(0.0, m.noise_sd)(rng);
            if (full.is_continuous()) {
                row.emplace_back(std::clamp(v, full.bounds().lower, full.bounds().upper));
                continue;
            }
            std::size_t k = 0;
            if (m.thresholds.empty())
                k = uniform01(rng) < v ? 1 : 0;
            else
                while (k < m.thresholds.size() && v >= m.thresholds[k]) ++k;
            row.emplace_back(mock_detail::clamp_category(full, k, target));
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

/// Workers that sample the simulator's own conditionals: features from their
/// marginals, the label from the simulator's scoring rule.
inline MockSpec mock_spec_from_simulator(const SimulatorConfig& sim, std::uint64_t seed) {
    sim.validate();
    MockSpec spec;
    spec.schema = sim.schema;
    spec.seed = seed;
    MockRule label;
    label.link = MockRule::Link::sigmoid;
    label.intercept = sim.intercept;
    label.thresholds = sim.thresholds;
    std::size_t pos = 0;
    for (std::size_t j = 0; j < sim.schema.dimension(); ++j) {
        const auto& f = sim.schema.feature(j);
        spec.marginals[f.name] = sim.marginals[j];
        if (f.is_continuous()) {
            if (sim.coefficients[pos] != 0.0) label.terms.push_back({f.name, std::nullopt, sim.coefficients[pos]});
            ++pos;
        } else {
            for (const auto& c : f.categories()) {
                if (sim.coefficients[pos] != 0.0) label.terms.push_back({f.name, c, sim.coefficients[pos]});
                ++pos;
            }
        }
    }
    spec.rules[sim.schema.label().name] = label;
    return spec;
}

inline Json mock_rule_to_json(const MockRule& r) {
    Json terms = Json::array();
    for (const auto& t : r.terms) {
        Json j = {{"feature", t.feature}, {"weight", t.weight}};
        if (t.category) j["category"] = *t.category;
        terms.push_back(j);
    }
    return {{"terms", terms},
            {"intercept", r.intercept},
            {"noise_sd", r.noise_sd},
            {"link", mock_detail::link_name(r.link)},
            {"thresholds", r.thresholds}};
}

inline MockRule mock_rule_from_json(const Json& j) {
    try {
        MockRule r;
        for (const auto& t : j.value("terms", Json::array())) {
            MockRule::Term term{t.at("feature").get<std::string>(), std::nullopt, t.value("weight", 1.0)};
            if (t.contains("category")) term.category = t["category"].get<std::string>();
            r.terms.push_back(std::move(term));
        }
        r.intercept = j.value("intercept", 0.0);
        r.noise_sd = j.value("noise_sd", 0.0);
        const auto link = j.value("link", std::string("identity"));
        if (link == "sigmoid") r.link = MockRule::Link::sigmoid;
        else if (link != "identity") throw ConfigError("mock rule: link must be identity or sigmoid");
        r.thresholds = j.value("thresholds", std::vector<double>{});
        return r;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed mock rule: ") + e.what());
    }
}

inline Json mock_spec_to_json(const MockSpec& s) {
    Json m = Json::object(), r = Json::object();
    for (const auto& [k, v] : s.marginals) m[k] = marginal_to_json(v);
    for (const auto& [k, v] : s.rules) r[k] = mock_rule_to_json(v);
    return {{"marginals", m}, {"rules", r}, {"seed", s.seed}};
}

/// The schema comes from the run; the JSON holds marginals, rules and seed.
inline MockSpec mock_spec_from_json(const Json& j, const Schema& schema) {
    try {
        MockSpec s;
        s.schema = schema;
        const Json marginals = j.value("marginals", Json::object()), rules = j.value("rules", Json::object());
        for (const auto& [k, v] : marginals.items()) s.marginals[k] = marginal_from_json(v);
        for (const auto& [k, v] : rules.items()) s.rules[k] = mock_rule_from_json(v);
        s.seed = j.value("seed", std::uint64_t{0});
        s.validate();
        return s;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed mock spec: ") + e.what());
    }
}

/// Plan document putting every feature in one component.
inline std::string single_component_plan_text(const Schema& schema) {
    Json feats = Json::array();
    for (const auto& f : schema.features()) feats.push_back(f.name);
    Json plan = {{"components", Json::array({{{"name", "all_features"}, {"features", feats}}})},
                 {"edges", Json::array()},
                 {"roles", Json::array({"Tabular Feature Synthesizer"})}};
    return plan.dump();
}

/// Manager replies are served in order (the last one repeats); without any,
/// the manager proposes the single-component plan. `tamper`, when set, may
/// rewrite worker replies to exercise failure paths.
class MockBackend : public GeneratorBackend {
public:
    explicit MockBackend(MockSpec spec, std::vector<std::string> manager_replies = {})
        : spec_(std::move(spec)), manager_(std::move(manager_replies)) {
        spec_.validate();
    }

    std::function<std::string(const GeneratorRequest&, std::string)> tamper;

    std::string name() const override { return "mock"; }

    std::string complete(const std::string&, const std::string&) override {
        const auto i = manager_calls_.fetch_add(1);
        if (manager_.empty()) return single_component_plan_text(spec_.schema);
        return manager_[std::min<std::size_t>(i, manager_.size() - 1)];
    }

    std::string generate(const GeneratorRequest& request) override {
        worker_calls_.fetch_add(1);
        auto text = block_to_json(mock_generate(spec_, request)).dump();
        return tamper ? tamper(request, std::move(text)) : text;
    }

    std::size_t manager_calls() const { return manager_calls_.load(); }
    std::size_t worker_calls() const { return worker_calls_.load(); }
    const MockSpec& spec() const { return spec_; }

private:
    MockSpec spec_;
    std::vector<std::string> manager_;
    std::atomic<std::size_t> manager_calls_{0};
    std::atomic<std::size_t> worker_calls_{0};
};

}  // namespace t2
