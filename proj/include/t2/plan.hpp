#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "t2/backend.hpp"
#include "t2/csv.hpp"
#include "t2/error.hpp"
#include "t2/tabular.hpp"

namespace t2 {

struct WorkerRole {
    std::string name;
    std::string instruction;
};

struct Component {
    std::string name;
    std::vector<std::size_t> features;  // schema feature indices
};

/// Partition of the features into components, a precedence graph over them
/// (edge = {parent, child}, component indices) and one role per component
/// plus the label role. `stages` is filled by finalize_plan.
struct GenerationPlan {
    std::vector<Component> components;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<WorkerRole> roles;
    WorkerRole label_role{"Outcome Predictor", "Assign the outcome label to every row."};
    std::vector<std::vector<std::size_t>> stages;

    std::vector<std::size_t> parents(std::size_t k) const {
        std::vector<std::size_t> out;
        for (const auto& [u, v] : edges)
            if (v == k) out.push_back(u);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }
};

struct PlanViolation {
    std::string kind;  // overlap | coverage | empty | cycle | role | edge
    std::string message;
};

/// Stage i holds the vertices whose longest path from a source has length i,
/// sorted by index. Throws ConfigError on a cycle or self-loop.
inline std::vector<std::vector<std::size_t>> topological_schedule(
    std::size_t vertices, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    std::vector<std::vector<std::size_t>> children(vertices);
    std::vector<std::size_t> indegree(vertices, 0);
    for (const auto& [u, v] : edges) {
        if (u >= vertices || v >= vertices) throw ConfigError("precedence graph: edge references a missing vertex");
        if (u == v) throw ConfigError("precedence graph: cycle (self-loop on " + std::to_string(u) + ")");
        children[u].push_back(v);
        ++indegree[v];
    }
    std::vector<std::size_t> depth(vertices, 0), ready;
    for (std::size_t v = 0; v < vertices; ++v)
        if (indegree[v] == 0) ready.push_back(v);
    std::size_t seen = 0;
    while (!ready.empty()) {
        const auto u = ready.back();
        ready.pop_back();
        ++seen;
        for (auto v : children[u]) {
            depth[v] = std::max(depth[v], depth[u] + 1);
            if (--indegree[v] == 0) ready.push_back(v);
        }
    }
    if (seen != vertices) throw ConfigError("precedence graph: cycle detected");
    std::vector<std::vector<std::size_t>> stages;
    for (std::size_t v = 0; v < vertices; ++v) {
        if (stages.size() <= depth[v]) stages.resize(depth[v] + 1);
        stages[depth[v]].push_back(v);
    }
    return stages;
}

/// All problems with `plan` against `schema`; empty means valid. Never throws.
inline std::vector<PlanViolation> validate_plan(const GenerationPlan& plan, const Schema& schema) {
    std::vector<PlanViolation> out;
    const auto d = schema.dimension();
    std::vector<int> owner(d, -1);
    if (plan.components.empty()) out.push_back({"empty", "plan has no components"});
    for (std::size_t k = 0; k < plan.components.size(); ++k) {
        const auto& c = plan.components[k];
        if (c.features.empty()) out.push_back({"empty", "component '" + c.name + "' has no features"});
        for (auto f : c.features) {
            if (f >= d) {
                out.push_back({"coverage", "component '" + c.name + "' references feature index " + std::to_string(f)});
                continue;
            }
            if (owner[f] >= 0)
                out.push_back({"overlap", "feature '" + schema.feature(f).name + "' is in components '" +
                                              plan.components[static_cast<std::size_t>(owner[f])].name + "' and '" + c.name + "'"});
            else
                owner[f] = static_cast<int>(k);
        }
    }
    for (std::size_t f = 0; f < d; ++f)
        if (owner[f] < 0) out.push_back({"coverage", "feature '" + schema.feature(f).name + "' is in no component"});
    bool edges_ok = true;
    for (const auto& [u, v] : plan.edges) {
        if (u >= plan.components.size() || v >= plan.components.size()) {
            out.push_back({"edge", "edge references a missing component"});
            edges_ok = false;
        }
    }
    if (edges_ok) {
        try {
            topological_schedule(plan.components.size(), plan.edges);
        } catch (const ConfigError& e) {
            out.push_back({"cycle", e.what()});
        }
    }
    if (plan.roles.size() != plan.components.size())
        out.push_back({"role", "expected " + std::to_string(plan.components.size()) + " component roles, got " +
                                   std::to_string(plan.roles.size())});
    for (const auto& r : plan.roles)
        if (r.name.empty()) out.push_back({"role", "role without a name"});
    if (plan.label_role.name.empty()) out.push_back({"role", "label role without a name"});
    return out;
}

/// Validates and fills `stages`; throws ConfigError listing the violations.
inline GenerationPlan finalize_plan(GenerationPlan plan, const Schema& schema) {
    const auto v = validate_plan(plan, schema);
    if (!v.empty()) {
        std::string msg = "invalid plan:";
        for (const auto& x : v) msg += " [" + x.kind + "] " + x.message + ";";
        throw ConfigError(msg);
    }
    plan.stages = topological_schedule(plan.components.size(), plan.edges);
    return plan;
}

inline GenerationPlan single_component_plan(const Schema& schema) {
    GenerationPlan p;
    Component c{"all_features", {}};
    for (std::size_t j = 0; j < schema.dimension(); ++j) c.features.push_back(j);
    p.components.push_back(std::move(c));
    p.roles.push_back({"Tabular Feature Synthesizer", "Generate realistic values for every feature, jointly consistent."});
    return finalize_plan(std::move(p), schema);
}

namespace plan_detail {

inline WorkerRole role_from_json(const Json& j) {
    if (j.is_string()) return {j.get<std::string>(), {}};
    return {j.at("name").get<std::string>(), j.value("instruction", std::string{})};
}

inline std::size_t component_ref(const Json& j, const std::vector<Component>& comps) {
    if (j.is_number_unsigned() || j.is_number_integer()) {
        const auto i = j.get<long long>();
        if (i < 0 || static_cast<std::size_t>(i) >= comps.size()) throw ConfigError("plan: edge index out of range");
        return static_cast<std::size_t>(i);
    }
    const auto name = j.get<std::string>();
    for (std::size_t k = 0; k < comps.size(); ++k)
        if (comps[k].name == name) return k;
    throw ConfigError("plan: edge references unknown component '" + name + "'");
}

}  // namespace plan_detail

/// Parses the plan document
///   {"components": [{"name", "features": [names]}], "edges": [[parent, child]],
///    "roles": [name | {name, instruction}], "label_role": ...}
/// Edges may name components or index them. A K+1-th role is the label role.
/// Structural problems throw ConfigError; semantic ones are left to
/// validate_plan.
inline GenerationPlan plan_from_json(const Json& j, const Schema& schema) {
    try {
        GenerationPlan p;
        for (const auto& c : j.at("components")) {
            Component comp{c.at("name").get<std::string>(), {}};
            for (const auto& f : c.at("features")) {
                auto idx = schema.index_of(f.get<std::string>());
                if (!idx) throw ConfigError("plan: unknown feature '" + f.get<std::string>() + "'");
                comp.features.push_back(*idx);
            }
            p.components.push_back(std::move(comp));
        }
        for (const auto& e : j.value("edges", Json::array())) {
            if (!e.is_array() || e.size() != 2) throw ConfigError("plan: edges must be [parent, child] pairs");
            p.edges.emplace_back(plan_detail::component_ref(e[0], p.components),
                                 plan_detail::component_ref(e[1], p.components));
        }
        for (const auto& r : j.value("roles", Json::array())) p.roles.push_back(plan_detail::role_from_json(r));
        if (j.contains("label_role")) {
            p.label_role = plan_detail::role_from_json(j["label_role"]);
        } else if (p.roles.size() == p.components.size() + 1) {
            p.label_role = p.roles.back();
            p.roles.pop_back();
        }
        return p;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed plan document: ") + e.what());
    }
}

inline Json plan_to_json(const GenerationPlan& p, const Schema& schema) {
    Json comps = Json::array(), edges = Json::array(), roles = Json::array();
    for (const auto& c : p.components) {
        Json feats = Json::array();
        for (auto f : c.features) feats.push_back(schema.feature(f).name);
        comps.push_back({{"name", c.name}, {"features", feats}});
    }
    for (const auto& [u, v] : p.edges) edges.push_back({p.components[u].name, p.components[v].name});
    for (const auto& r : p.roles) roles.push_back({{"name", r.name}, {"instruction", r.instruction}});
    Json stages = Json::array();
    for (const auto& s : p.stages) {
        Json names = Json::array();
        for (auto k : s) names.push_back(p.components[k].name);
        stages.push_back(names);
    }
    return {{"components", comps},
            {"edges", edges},
            {"roles", roles},
            {"label_role", {{"name", p.label_role.name}, {"instruction", p.label_role.instruction}}},
            {"stages", stages}};
}

/// Rows of `d` taken round-robin over classes (in class order, records in
/// dataset order), at most `limit` rows.
inline std::vector<std::size_t> stratified_excerpt(const Dataset& d, std::size_t limit) {
    std::vector<std::vector<std::size_t>> groups(d.schema().num_classes());
    for (std::size_t i = 0; i < d.size(); ++i) groups[*d.schema().class_index(d[i].label)].push_back(i);
    std::vector<std::size_t> out;
    const auto n = std::min(limit, d.size());
    for (std::size_t round = 0; out.size() < n; ++round)
        for (const auto& g : groups)
            if (round < g.size() && out.size() < n) out.push_back(g[round]);
    std::sort(out.begin(), out.end());
    return out;
}

/// D_ori rows restricted to `columns` (feature names or the label name).
inline ColumnBlock excerpt_block(const Dataset& d, const std::vector<std::size_t>& rows,
                                 const std::vector<std::string>& columns) {
    ColumnBlock b;
    b.columns = columns;
    for (auto i : rows) {
        std::vector<Cell> row;
        for (const auto& c : columns) {
            if (c == d.schema().label().name)
                row.emplace_back(d[i].label);
            else
                row.push_back(d[i].values[*d.schema().index_of(c)]);
        }
        b.rows.push_back(std::move(row));
    }
    return b;
}

inline constexpr std::size_t kExcerptRows = 20;

inline std::string render_manager_prompt(const Dataset& d_ori) {
    const auto& schema = d_ori.schema();
    std::string p = "## Role\nYou are the task manager of a team of data-generation workers.\n\n";
    p += "## Task\nPartition the features below into disjoint, semantically coherent components that together cover "
         "every feature. Then give a precedence graph: an edge [parent, child] means the child component is generated "
         "conditioned on the parent. The graph must be acyclic. Assign one worker role per component, and a final role "
         "for the worker that assigns the label.\n\n";
    p += "## Feature dictionary\n";
    for (const auto& f : schema.features()) p += describe_feature(f) + "\n";
    p += "Label: " + describe_feature(schema.label()).substr(2) + "\n";
    p += "\n## Examples from the original data\n";
    p += block_to_csv(excerpt_block(d_ori, stratified_excerpt(d_ori, kExcerptRows), schema.column_names()));
    p += "\n## Output format\nReply with one JSON object:\n"
         "{\"components\": [{\"name\": ..., \"features\": [feature names]}], "
         "\"edges\": [[parent component name, child component name]], "
         "\"roles\": [{\"name\": ..., \"instruction\": ...} per component, in component order, then one for the label]}\n";
    return p;
}

struct PlanOutcome {
    GenerationPlan plan;
    int attempts = 0;
    bool fallback = false;
    std::vector<std::string> errors;  // one per rejected reply
};

/// Asks the manager for a plan; up to `attempts` replies are tried, then the
/// single-component plan is used. Backend errors propagate.
inline PlanOutcome plan_from_manager(GeneratorBackend& manager, const Dataset& d_ori, int attempts = 3) {
    const auto& schema = d_ori.schema();
    if (schema.dimension() == 0) throw ConfigError("plan: schema has no features");
    const auto prompt = render_manager_prompt(d_ori);
    PlanOutcome out;
    for (int a = 0; a < attempts; ++a) {
        ++out.attempts;
        const auto reply = manager.complete("You coordinate tabular data generation and reply only with JSON.", prompt);
        auto j = extract_json(reply, '{');
        if (!j) {
            out.errors.push_back("no JSON object in reply");
            continue;
        }
        try {
            out.plan = finalize_plan(plan_from_json(*j, schema), schema);
            return out;
        } catch (const ConfigError& e) {
            out.errors.push_back(e.what());
        }
    }
    out.plan = single_component_plan(schema);
    out.fallback = true;
    return out;
}

}  // namespace t2
