#pragma once

#include <chrono>
#include <future>
#include <string>
#include <vector>

#include "t2/backend.hpp"
#include "t2/error.hpp"
#include "t2/plan.hpp"
#include "t2/random.hpp"
#include "t2/tabular.hpp"

namespace t2 {

struct OrchestratorOptions {
    bool explore_labels = false;  // let the label worker use the full label vocabulary
    int attempts = 3;             // replies tried per worker before the batch is aborted
    std::size_t concurrency = 1;  // worker calls in flight within one stage
};

/// One worker call. `ms` is wall time and is kept out of reports.
struct TraceEvent {
    int batch = 0;
    int stage = 0;      // label worker: number of stages
    int component = 0;  // -1 for the label worker
    std::string role;
    int attempt = 1;
    bool ok = false;
    std::string error;
    double ms = 0.0;
};

inline Json trace_to_json(const TraceEvent& e) {
    Json j = {{"batch", e.batch}, {"stage", e.stage}, {"component", e.component}, {"role", e.role},
              {"attempt", e.attempt}, {"ok", e.ok}, {"ms", e.ms}};
    if (!e.error.empty()) j["error"] = e.error;
    return j;
}

struct GeneratedBatch {
    DataBatch batch;
    std::vector<ColumnBlock> blocks;  // component blocks in component order, then the label block
    std::vector<TraceEvent> trace;
};

/// Label spec the worker is told about: the observed vocabulary of D_ori
/// unless exploration is allowed.
inline FeatureSpec label_target(const Dataset& d_ori, bool explore) {
    const auto& label = d_ori.schema().label();
    if (explore) return label;
    const auto counts = d_ori.class_counts();
    std::vector<std::string> seen;
    for (std::size_t c = 0; c < counts.size(); ++c)
        if (counts[c] > 0) seen.push_back(label.categories()[c]);
    if (seen.empty()) return label;
    return FeatureSpec::categorical(label.name, seen, label.description);
}

/// Sends `request` to `backend` until a reply parses, at most `attempts`
/// times; each try gets its own seed. Appends one trace event per try.
inline ColumnBlock request_block(GeneratorBackend& backend, GeneratorRequest request, int attempts, int batch, int stage,
                                 std::vector<TraceEvent>& trace) {
    const auto base_seed = request.seed;
    std::string last;
    for (int a = 1; a <= attempts; ++a) {
        request.seed = derive_seed(base_seed, static_cast<std::uint64_t>(a));
        TraceEvent ev{batch, stage, request.component, request.role, a, false, {}, 0.0};
        const auto t0 = std::chrono::steady_clock::now();
        try {
            auto block = parse_reply(backend.generate(request), request.targets, request.n_b, request.component);
            ev.ok = true;
            ev.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            trace.push_back(ev);
            return block;
        } catch (const DataError& e) {
            last = e.what();
            ev.error = last;
            ev.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            trace.push_back(ev);
        }
    }
    throw BackendError("worker '" + request.role + "' gave no usable reply after " + std::to_string(attempts) +
                       " attempts: " + last);
}

namespace orchestrator_detail {

/// Row-aligned union of the blocks for `components`.
inline ColumnBlock join_blocks(const std::vector<ColumnBlock>& blocks, const std::vector<std::size_t>& components,
                               std::size_t n_b) {
    ColumnBlock out;
    out.rows.assign(n_b, {});
    for (auto k : components) {
        const auto& b = blocks[k];
        out.columns.insert(out.columns.end(), b.columns.begin(), b.columns.end());
        for (std::size_t r = 0; r < n_b; ++r) out.rows[r].insert(out.rows[r].end(), b.rows[r].begin(), b.rows[r].end());
    }
    return out;
}

}  // namespace orchestrator_detail

/// Generates batch `t`: components stage by stage, each conditioned on the
/// blocks of its parents, then the label worker labels the assembled rows.
inline GeneratedBatch generate_batch(const GenerationPlan& plan, GeneratorBackend& backend, const Dataset& d_ori,
                                     std::size_t n_b, std::uint64_t seed, int t = 1,
                                     const OrchestratorOptions& options = {}) {
    const auto& schema = d_ori.schema();
    if (n_b < 1) throw ConfigError("generate_batch: n_b must be >= 1");
    if (plan.stages.empty()) throw ConfigError("generate_batch: plan has no schedule (use finalize_plan)");
    const auto excerpt_rows = stratified_excerpt(d_ori, kExcerptRows);
    const auto K = plan.components.size();

    GeneratedBatch out;
    std::vector<ColumnBlock> blocks(K);
    auto make_request = [&](std::size_t k) {
        GeneratorRequest req;
        req.role = plan.roles[k].name;
        req.instruction = plan.roles[k].instruction.empty()
                              ? "Generate realistic values for the features below, consistent with the examples."
                              : plan.roles[k].instruction;
        for (auto f : plan.components[k].features) req.targets.push_back(schema.feature(f));
        const auto parents = plan.parents(k);
        req.parents = orchestrator_detail::join_blocks(blocks, parents, n_b);
        if (parents.empty()) req.parents = ColumnBlock{};
        auto cols = req.parents.columns;
        for (const auto& f : req.targets) cols.push_back(f.name);
        req.excerpt = excerpt_block(d_ori, excerpt_rows, cols);
        req.n_b = n_b;
        req.seed = derive_seed(seed, {k + 1});
        req.component = static_cast<int>(k);
        return req;
    };

    for (std::size_t s = 0; s < plan.stages.size(); ++s) {
        const auto& stage = plan.stages[s];
        std::vector<std::vector<TraceEvent>> traces(stage.size());
        std::vector<GeneratorRequest> requests;
        for (auto k : stage) requests.push_back(make_request(k));
        if (options.concurrency <= 1 || stage.size() == 1) {
            for (std::size_t i = 0; i < stage.size(); ++i)
                blocks[stage[i]] = request_block(backend, requests[i], options.attempts, t, static_cast<int>(s), traces[i]);
        } else {
            for (std::size_t lo = 0; lo < stage.size(); lo += options.concurrency) {
                const auto hi = std::min(stage.size(), lo + options.concurrency);
                std::vector<std::future<ColumnBlock>> futures;
                for (std::size_t i = lo; i < hi; ++i)
                    futures.push_back(std::async(std::launch::async, [&, i] {
                        return request_block(backend, requests[i], options.attempts, t, static_cast<int>(s), traces[i]);
                    }));
                for (std::size_t i = lo; i < hi; ++i) blocks[stage[i]] = futures[i - lo].get();
            }
        }
        for (auto& tr : traces) out.trace.insert(out.trace.end(), tr.begin(), tr.end());
    }

    // label worker sees every generated feature column
    std::vector<std::size_t> all(K);
    for (std::size_t k = 0; k < K; ++k) all[k] = k;
    GeneratorRequest lab;
    lab.role = plan.label_role.name;
    lab.instruction = plan.label_role.instruction.empty() ? "Assign the outcome label to every row." : plan.label_role.instruction;
    lab.targets = {label_target(d_ori, options.explore_labels)};
    lab.parents = orchestrator_detail::join_blocks(blocks, all, n_b);
    auto cols = lab.parents.columns;
    cols.push_back(schema.label().name);
    lab.excerpt = excerpt_block(d_ori, excerpt_rows, cols);
    lab.n_b = n_b;
    lab.seed = derive_seed(seed, {0});
    lab.component = -1;
    auto label_block = request_block(backend, lab, options.attempts, t, static_cast<int>(plan.stages.size()), out.trace);

    // assemble in schema order
    for (std::size_t r = 0; r < n_b; ++r) {
        Record rec;
        rec.values.resize(schema.dimension());
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t j = 0; j < plan.components[k].features.size(); ++j)
                rec.values[plan.components[k].features[j]] = blocks[k].rows[r][j];
        rec.label = std::get<std::string>(label_block.rows[r][0]);
        out.batch.push_back(std::move(rec), Provenance::generated(t));
    }
    out.blocks = std::move(blocks);
    out.blocks.push_back(std::move(label_block));
    return out;
}

}  // namespace t2
