#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "t2/backend.hpp"
#include "t2/cost.hpp"
#include "t2/csv.hpp"
#include "t2/diversity.hpp"
#include "t2/encoding.hpp"
#include "t2/error.hpp"
#include "t2/metrics.hpp"
#include "t2/mock_backend.hpp"
#include "t2/models.hpp"
#include "t2/orchestrator.hpp"
#include "t2/plan.hpp"
#include "t2/quality.hpp"
#include "t2/random.hpp"
#include "t2/sanity.hpp"
#include "t2/sim.hpp"
#include "t2/tabular.hpp"

namespace t2 {

/// Where D_ori and the test set come from: a simulator (pool, deficiency,
/// fresh test draw) or two CSV files plus a feature dictionary.
struct DataSource {
    std::optional<SimulatorConfig> simulator;
    std::size_t pool_size = 5000;
    std::size_t test_size = 500;
    DeficiencySpec deficiency;
    std::optional<Schema> schema;
    std::string d_ori_csv;
    std::string test_csv;
};

struct BackendConfig {
    std::string kind = "mock";  // mock | remote
    Json mock = Json::object();  // {"marginals", "rules", "seed"}; empty means the simulator's conditionals
    Json remote = Json::object();
    std::vector<std::string> manager_replies;  // mock manager script
    std::size_t concurrency = 1;
};

struct RunConfig {
    DataSource data;
    std::vector<std::string> rules;  // relational sanity constraints
    BackendConfig backend;
    std::optional<Json> plan;  // fixed plan document; otherwise the manager is asked
    std::size_t n_b = 10;
    int max_batches = 10;       // T
    std::size_t target = 0;     // stop once |D_kept| reaches this (0 = never)
    CostConfig cost;
    std::optional<double> tau;  // fixed threshold; skips calibration
    DiversityConfig diversity;
    bool diversity_gate = true;
    bool explore_labels = false;
    std::vector<ModelSpec> models = {ModelSpec::logistic(1.0), ModelSpec::feedforward()};
    std::size_t quality_k = 5;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_b < 1) throw ConfigError("run: n_b must be >= 1");
        if (max_batches < 1) throw ConfigError("run: max_batches must be >= 1");
        if (!data.simulator && (!data.schema || data.d_ori_csv.empty() || data.test_csv.empty()))
            throw ConfigError("run: data needs a simulator or schema + d_ori_csv + test_csv");
        if (data.simulator) {
            data.simulator->validate();
            data.deficiency.validate(data.simulator->schema);
            if (data.test_size < 1) throw ConfigError("run: test_size must be >= 1");
        }
        if (backend.kind != "mock" && backend.kind != "remote") throw ConfigError("run: backend must be mock or remote");
        if (backend.concurrency < 1) throw ConfigError("run: backend concurrency must be >= 1");
        if (models.empty()) throw ConfigError("run: at least one downstream model is required");
        cost.validate();
        diversity.validate();
        for (const auto& m : models) m.validate();
        if (tau && std::isnan(*tau)) throw ConfigError("run: tau must be a number");
    }

    const Schema& schema() const { return data.simulator ? data.simulator->schema : *data.schema; }
};

// ---- config JSON ----------------------------------------------------------------

inline Json run_config_to_json(const RunConfig& c) {
    Json data;
    if (c.data.simulator) {
        data["simulator"] = simulator_to_json(*c.data.simulator);
        data["pool_size"] = c.data.pool_size;
        data["test_size"] = c.data.test_size;
        data["deficiency"] = deficiency_to_json(c.data.deficiency);
    } else {
        data["schema"] = schema_to_json(*c.data.schema);
        data["d_ori_csv"] = c.data.d_ori_csv;
        data["test_csv"] = c.data.test_csv;
    }
    Json models = Json::array();
    for (const auto& m : c.models) models.push_back(model_spec_to_json(m));
    Json j = {{"data", data},
              {"rules", c.rules},
              {"backend",
               {{"kind", c.backend.kind},
                {"mock", c.backend.mock},
                {"remote", c.backend.remote},
                {"manager_replies", c.backend.manager_replies},
                {"concurrency", c.backend.concurrency}}},
              {"n_b", c.n_b},
              {"max_batches", c.max_batches},
              {"target", c.target},
              {"cost", cost_config_to_json(c.cost)},
              {"diversity", diversity_config_to_json(c.diversity)},
              {"diversity_gate", c.diversity_gate},
              {"explore_labels", c.explore_labels},
              {"models", models},
              {"quality_k", c.quality_k},
              {"seed", c.seed}};
    j["plan"] = c.plan ? *c.plan : Json(nullptr);
    if (c.tau) j["tau"] = std::isfinite(*c.tau) ? Json(*c.tau) : Json(*c.tau > 0 ? "inf" : "-inf");
    else j["tau"] = nullptr;
    return j;
}

namespace pipeline_detail {

inline double number_or_infinity(const Json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        throw ConfigError("expected a number, 'inf' or '-inf', got '" + s + "'");
    }
    return j.get<double>();
}

}  // namespace pipeline_detail

inline RunConfig run_config_from_json(const Json& j) {
    try {
        RunConfig c;
        const Json data = j.value("data", Json::object());
        if (data.contains("simulator")) {
            c.data.simulator = simulator_from_json(data["simulator"]);
            c.data.pool_size = data.value("pool_size", c.data.pool_size);
            c.data.test_size = data.value("test_size", c.data.test_size);
            if (data.contains("deficiency")) c.data.deficiency = deficiency_from_json(data["deficiency"]);
        } else {
            if (data.contains("schema")) c.data.schema = schema_from_json(data["schema"]);
            c.data.d_ori_csv = data.value("d_ori_csv", std::string{});
            c.data.test_csv = data.value("test_csv", std::string{});
        }
        c.rules = j.value("rules", std::vector<std::string>{});
        const Json be = j.value("backend", Json::object());
        c.backend.kind = be.value("kind", c.backend.kind);
        c.backend.mock = be.value("mock", Json::object());
        c.backend.remote = be.value("remote", Json::object());
        c.backend.manager_replies = be.value("manager_replies", std::vector<std::string>{});
        c.backend.concurrency = be.value("concurrency", c.backend.concurrency);
        if (j.contains("plan") && !j["plan"].is_null()) c.plan = j["plan"];
        c.n_b = j.value("n_b", c.n_b);
        c.max_batches = j.value("max_batches", c.max_batches);
        c.target = j.value("target", c.target);
        if (j.contains("cost")) c.cost = cost_config_from_json(j["cost"]);
        if (j.contains("tau") && !j["tau"].is_null()) c.tau = pipeline_detail::number_or_infinity(j["tau"]);
        if (j.contains("diversity")) c.diversity = diversity_config_from_json(j["diversity"]);
        c.diversity_gate = j.value("diversity_gate", c.diversity_gate);
        c.explore_labels = j.value("explore_labels", c.explore_labels);
        if (j.contains("models")) {
            c.models.clear();
            for (const auto& m : j["models"]) c.models.push_back(model_spec_from_json(m));
        }
        c.quality_k = j.value("quality_k", c.quality_k);
        c.seed = j.value("seed", c.seed);
        c.validate();
        return c;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed run config: ") + e.what());
    }
}

/// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON
/// when possible (numbers, true/false, arrays), otherwise taken as a string.
inline void apply_override(Json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    Json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override '" + assignment + "' has an empty key segment");
        if (!node->is_object()) {
            if (!node->is_null()) throw ConfigError("override '" + assignment + "': '" + part + "' is not inside an object");
            *node = Json::object();
        }
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

inline Json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("'" + path.string() + "' is not valid JSON");
    return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << text;
}

// ---- data ---------------------------------------------------------------------

struct Datasets {
    Dataset d_ori;
    Dataset test;
};

/// Simulated data: a pool of `pool_size` draws reduced to D_ori by the
/// deficiency, and an independent test draw from the full distribution.
inline Datasets load_datasets(const RunConfig& c) {
    if (c.data.simulator) {
        const auto& sim = *c.data.simulator;
        const Dataset pool = simulate(sim, c.data.pool_size, derive_seed(c.seed, {1}));
        return {apply_deficiency(pool, c.data.deficiency, derive_seed(c.seed, {2})),
                simulate(sim, c.data.test_size, derive_seed(c.seed, {3}))};
    }
    return {load_csv(c.data.d_ori_csv, *c.data.schema), load_csv(c.data.test_csv, *c.data.schema)};
}

// ---- evaluation ---------------------------------------------------------------

struct ModelMetrics {
    std::string model;
    double accuracy = 0.0;
    double auc = 0.0;
    double f1 = 0.0;
    double recall = 0.0;
};

struct MetricTable {
    std::vector<ModelMetrics> rows;
    ModelMetrics mean;
};

inline Json metric_table_to_json(const MetricTable& t) {
    auto row = [](const ModelMetrics& m) {
        return Json{{"model", m.model}, {"accuracy", m.accuracy}, {"auc", m.auc}, {"f1", m.f1}, {"recall", m.recall}};
    };
    Json rows = Json::array();
    for (const auto& r : t.rows) rows.push_back(row(r));
    return {{"models", rows}, {"mean", row(t.mean)}};
}

/// Trains every spec on `train` (features standardized with `reference`
/// statistics) and scores it on `test`. AUC is one-vs-rest macro over the
/// classes present in the test set. A class absent from training is allowed
/// (the model gives it small mass); fewer than two present classes throw.
inline MetricTable evaluate(const Dataset& train_set, const Dataset& test, const std::vector<ModelSpec>& specs,
                            const Dataset& reference) {
    if (test.empty()) throw DataError("evaluate: empty test set");
    const Encoder encoder = Encoder::fit(reference);
    const auto truth = encoder.labels(test.records());
    const int k = static_cast<int>(test.schema().num_classes());
    MetricTable t;
    t.mean.model = "mean";
    for (const auto& spec : specs) {
        const auto model = train(spec, train_set, encoder);
        const auto probs = model.predict_proba(test.records());
        const auto cm = classification_metrics(model.predict(test.records()), truth, k);
        ModelMetrics m{spec.name(), cm.accuracy, auc_ovr_macro(probs, truth), cm.f1, cm.recall};
        t.mean.accuracy += m.accuracy / static_cast<double>(specs.size());
        t.mean.auc += m.auc / static_cast<double>(specs.size());
        t.mean.f1 += m.f1 / static_cast<double>(specs.size());
        t.mean.recall += m.recall / static_cast<double>(specs.size());
        t.rows.push_back(std::move(m));
    }
    return t;
}

inline MetricTable evaluate(const Dataset& train_set, const Dataset& test, const std::vector<ModelSpec>& specs) {
    return evaluate(train_set, test, specs, train_set);
}

// ---- run ----------------------------------------------------------------------

struct BatchRecord {
    int t = 0;
    DataBatch generated;
    std::size_t sanity_kept = 0;
    std::vector<Violation> violations;
    std::optional<CostReport> cost;
    std::optional<DiversityReport> diversity;
    std::string decision;  // accept | reject_sanity | reject_cost | reject_diversity
    std::size_t merged = 0;
    std::string error;  // cost-model fit failure, counted as a cost rejection
};

inline Json batch_record_to_json(const BatchRecord& b) {
    Json v = Json::array();
    for (const auto& x : b.violations) v.push_back(violation_to_json(x));
    return {{"t", b.t},
            {"generated", b.generated.size()},
            {"sanity", {{"kept", b.sanity_kept}, {"rejected", b.generated.size() - b.sanity_kept}, {"violations", v}}},
            {"cost", b.cost ? cost_report_to_json(*b.cost) : Json(nullptr)},
            {"diversity", b.diversity ? diversity_report_to_json(*b.diversity) : Json(nullptr)},
            {"decision", b.decision},
            {"merged", b.merged},
            {"error", b.error.empty() ? Json(nullptr) : Json(b.error)}};
}

struct RunReport {
    RunConfig config;
    GenerationPlan plan;
    bool plan_fallback = false;
    Calibration calibration;
    bool calibrated = false;
    int clusters = 0;
    std::vector<std::pair<int, double>> silhouettes;
    std::vector<BatchRecord> batches;
    std::vector<int> accepted;
    std::size_t d_ori_size = 0;
    std::size_t kept_size = 0;
    std::size_t d_new_size = 0;
    std::string stop_reason;
    std::optional<MetricTable> eval_ori;
    std::optional<MetricTable> eval_new;
    std::optional<QualityReport> quality;
    std::string error;  // set when the run was aborted
    std::vector<TraceEvent> trace;
    Dataset d_ori;
    Dataset d_new;
    Dataset test;
};

inline Json run_report_to_json(const RunReport& r) {
    Json batches = Json::array();
    for (const auto& b : r.batches) batches.push_back(batch_record_to_json(b));
    Json sil = Json::array();
    for (const auto& [m, s] : r.silhouettes) sil.push_back({{"M", m}, {"silhouette", s}});
    Json j = {{"config", run_config_to_json(r.config)},
              {"plan", r.plan.components.empty() ? Json(nullptr) : plan_to_json(r.plan, r.config.schema())},
              {"plan_fallback", r.plan_fallback},
              {"calibration", r.calibrated ? calibration_to_json(r.calibration) : Json(nullptr)},
              {"tau", std::isfinite(r.calibration.tau) ? Json(r.calibration.tau)
                                                       : Json(r.calibration.tau > 0 ? "inf" : "-inf")},
              {"clusters", {{"M", r.clusters}, {"grid", sil}}},
              {"batches", batches},
              {"accepted", r.accepted},
              {"batches_processed", r.batches.size()},
              {"d_ori_size", r.d_ori_size},
              {"kept_size", r.kept_size},
              {"d_new_size", r.d_new_size},
              {"stop_reason", r.stop_reason},
              {"evaluation",
               {{"d_ori", r.eval_ori ? metric_table_to_json(*r.eval_ori) : Json(nullptr)},
                {"d_new", r.eval_new ? metric_table_to_json(*r.eval_new) : Json(nullptr)}}},
              {"quality", r.quality ? quality_to_json(*r.quality) : Json(nullptr)}};
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

/// Mock backend for a run: explicit spec from the config, else the
/// simulator's own conditionals.
inline std::unique_ptr<MockBackend> make_mock_backend(const RunConfig& c) {
    MockSpec spec;
    if (!c.backend.mock.empty()) {
        spec = mock_spec_from_json(c.backend.mock, c.schema());
    } else if (c.data.simulator) {
        spec = mock_spec_from_simulator(*c.data.simulator, 0);
    } else {
        throw ConfigError("run: the mock backend needs backend.mock or a simulator");
    }
    return std::make_unique<MockBackend>(std::move(spec), c.backend.manager_replies);
}

/// Hooks for callers that persist artifacts while the run progresses.
struct RunObserver {
    std::function<void(const BatchRecord&)> on_batch;
};

/// The main loop: generate → sanity → cost → diversity → merge, batch by batch,
/// then evaluation. Backend failures end the loop and are reported in
/// `error`; everything computed up to that point is kept.
inline RunReport run(const RunConfig& config, GeneratorBackend& backend, const RunObserver& observer = {}) {
    config.validate();
    RunReport rep;
    rep.config = config;
    auto data = load_datasets(config);
    rep.d_ori = data.d_ori;
    rep.test = data.test;
    rep.d_ori_size = data.d_ori.size();
    const Dataset& d_ori = data.d_ori;
    const Schema& schema = d_ori.schema();
    if (d_ori.empty()) throw DataError("run: D_ori is empty");

    const ConstraintSet constraints = compile_constraints(schema, config.rules);
    const Encoder encoder = Encoder::fit(d_ori);
    Dataset d = d_ori;

    try {
        if (config.plan) {
            rep.plan = finalize_plan(plan_from_json(*config.plan, schema), schema);
        } else {
            auto outcome = plan_from_manager(backend, d_ori);
            rep.plan = outcome.plan;
            rep.plan_fallback = outcome.fallback;
        }

        if (config.tau) {
            rep.calibration.tau = *config.tau;
        } else {
            rep.calibration = calibrate_threshold(d_ori, encoder, config.cost, config.n_b, derive_seed(config.seed, {4}));
            rep.calibrated = true;
        }
        const double tau = rep.calibration.tau;

        std::optional<ClusterModel> clusters;
        std::optional<ClusterClassifier> classifier;
        std::vector<std::size_t> base_counts;
        if (config.diversity_gate) {
            clusters = fit_clusters(d_ori, config.diversity, derive_seed(config.seed, {5}));
            classifier = train_cluster_classifier(d_ori, *clusters, config.diversity, derive_seed(config.seed, {6}));
            rep.clusters = clusters->num_clusters();
            rep.silhouettes = clusters->silhouettes;
            base_counts = cluster_counts(clusters->assignments, clusters->num_clusters());
        }

        OrchestratorOptions opts;
        opts.explore_labels = config.explore_labels;
        opts.concurrency = config.backend.concurrency;
        std::optional<CostAssessor> assessor;
        rep.stop_reason = "max_batches";
        for (int t = 1; t <= config.max_batches; ++t) {
            const std::uint64_t bseed = derive_seed(config.seed, {100, static_cast<std::uint64_t>(t)});
            BatchRecord br;
            br.t = t;
            auto gen = generate_batch(rep.plan, backend, d_ori, config.n_b, derive_seed(bseed, 0), t, opts);
            rep.trace.insert(rep.trace.end(), gen.trace.begin(), gen.trace.end());
            br.generated = gen.batch;

            auto trimmed = trim_batch(br.generated, constraints);
            br.sanity_kept = trimmed.kept.size();
            br.violations = std::move(trimmed.violations);
            if (trimmed.kept.empty()) {
                br.decision = "reject_sanity";
            } else {
                try {
                    if (!assessor) assessor.emplace(d_ori, d, encoder, config.cost);
                    br.cost = assessor->assess(trimmed.kept, tau, derive_seed(bseed, 1), t);
                } catch (const FitError& e) {
                    br.error = e.what();
                }
                if (!br.cost) {
                    br.decision = "reject_cost";
                } else if (!br.cost->accepted) {
                    br.decision = "reject_cost";
                } else if (config.diversity_gate) {
                    const auto& inspected = config.diversity.refined ? br.cost->refined.records : trimmed.kept.records;
                    br.diversity = inspect_batch(base_counts, inspected, *classifier, config.diversity);
                    br.decision = br.diversity->accepted ? "accept" : "reject_diversity";
                } else {
                    br.decision = "accept";
                }
            }
            if (br.decision == "accept") {
                d = d.appended(br.cost->refined);
                assessor.reset();  // D changed
                br.merged = br.cost->refined.size();
                rep.kept_size += br.merged;
                rep.accepted.push_back(t);
                if (config.diversity_gate && config.diversity.accumulated)
                    for (int a : classifier->predict(br.cost->refined.records)) ++base_counts[static_cast<std::size_t>(a)];
            }
            rep.batches.push_back(std::move(br));
            if (observer.on_batch) observer.on_batch(rep.batches.back());
            if (config.target > 0 && rep.kept_size >= config.target) {
                rep.stop_reason = "target";
                break;
            }
        }
    } catch (const BackendError& e) {
        rep.error = e.what();
        rep.stop_reason = "backend_error";
    }

    rep.d_new = d;
    rep.d_new_size = d.size();
    if (rep.error.empty()) {
        rep.eval_ori = evaluate(d_ori, data.test, config.models, d_ori);
        rep.eval_new = evaluate(d, data.test, config.models, d_ori);
        std::vector<std::size_t> generated;
        for (std::size_t i = 0; i < d.size(); ++i)
            if (d.provenance()[i].source == Provenance::Source::generated) generated.push_back(i);
        if (generated.size() > config.quality_k && data.test.size() > config.quality_k)
            rep.quality = assess_quality(data.test, d.subset(generated), derive_seed(config.seed, {7}), config.quality_k);
    }
    return rep;
}

/// Writes the run directory: config.json, d_ori.csv, test.csv, d_new.csv,
/// batch_<t>.csv, qc_<t>.json, trace.jsonl and report.json.
inline void write_run_artifacts(const RunReport& rep, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& schema = rep.config.schema();
    write_text(dir / "config.json", run_config_to_json(rep.config).dump(2) + "\n");
    if (!rep.d_ori.empty()) save_csv(rep.d_ori, dir / "d_ori.csv");
    if (!rep.test.empty()) save_csv(rep.test, dir / "test.csv");
    if (!rep.d_new.empty()) save_csv(rep.d_new, dir / "d_new.csv");
    for (const auto& b : rep.batches) {
        save_csv(schema, b.generated.records, dir / ("batch_" + std::to_string(b.t) + ".csv"));
        write_text(dir / ("qc_" + std::to_string(b.t) + ".json"), batch_record_to_json(b).dump(2) + "\n");
    }
    std::string trace;
    for (const auto& e : rep.trace) trace += trace_to_json(e).dump() + "\n";
    write_text(dir / "trace.jsonl", trace);
    write_text(dir / "report.json", run_report_to_json(rep).dump(2) + "\n");
}

}  // namespace t2
