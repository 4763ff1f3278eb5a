// t2: command-line front end for the generate-then-trim pipeline.
// Exit codes: 0 success, 2 configuration error, 3 backend/runtime error.

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "t2/remote_backend.hpp"
#include "t2/t2.hpp"

namespace fs = std::filesystem;
using namespace t2;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

struct Common {
    std::string config;
    std::string out;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::string backend;
    bool verbose = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_out) {
    cmd->add_option("-c,--config", c.config, "JSON run config")->required()->check(CLI::ExistingFile);
    auto* out = cmd->add_option("-o,--out", c.out, "output directory");
    if (needs_out) out->required();
    cmd->add_option("--set", c.overrides, "override a config value, e.g. --set n_b=20 (repeatable)");
    cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
    cmd->add_option("--backend", c.backend, "generator backend")->check(CLI::IsMember({"mock", "remote"}));
    cmd->add_flag("-v,--verbose", c.verbose, "progress on stderr");
}

/// Config file, then --set overrides, then the dedicated flags.
RunConfig effective_config(const Common& c) {
    Json doc = load_json_file(c.config);
    for (const auto& o : c.overrides) apply_override(doc, o);
    if (c.seed) doc["seed"] = *c.seed;
    if (!c.backend.empty()) doc["backend"]["kind"] = c.backend;
    return run_config_from_json(doc);
}

std::unique_ptr<GeneratorBackend> make_backend(const RunConfig& c, bool verbose) {
    if (c.backend.kind == "remote") {
        RemoteBackend::Log log = [verbose](const std::string& m) {
            if (verbose) std::cerr << "[remote] " << m << "\n";
        };
        return std::make_unique<RemoteBackend>(remote_config_from_json(c.backend.remote), log);
    }
    return make_mock_backend(c);
}

void write_config(const RunConfig& c, const fs::path& dir) {
    fs::create_directories(dir);
    write_text(dir / "config.json", run_config_to_json(c).dump(2) + "\n");
}

std::string fmt(double v, int precision = 4) {
    if (!std::isfinite(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << v;
    return s.str();
}

std::string fmt_json_number(const Json& j, int precision = 4) {
    if (j.is_number()) return fmt(j.get<double>(), precision);
    if (j.is_string()) return j.get<std::string>();
    return "-";
}

GenerationPlan resolve_plan(const RunConfig& c, GeneratorBackend& backend, const Dataset& d_ori, bool& fallback) {
    fallback = false;
    if (c.plan) return finalize_plan(plan_from_json(*c.plan, d_ori.schema()), d_ori.schema());
    auto outcome = plan_from_manager(backend, d_ori);
    fallback = outcome.fallback;
    return outcome.plan;
}

// ---- subcommands ------------------------------------------------------------------

int cmd_simulate(const Common& opt) {
    const auto c = effective_config(opt);
    if (!c.data.simulator) throw ConfigError("simulate: the config has no data.simulator");
    const auto data = load_datasets(c);
    const fs::path dir(opt.out);
    write_config(c, dir);
    save_csv(data.d_ori, dir / "d_ori.csv");
    save_csv(data.test, dir / "test.csv");
    write_text(dir / "deficiency.json", deficiency_to_json(c.data.deficiency).dump(2) + "\n");
    write_text(dir / "schema.json", schema_to_json(c.schema()).dump(2) + "\n");
    const auto counts = data.d_ori.class_counts();
    std::cout << "d_ori: " << data.d_ori.size() << " rows, class counts";
    for (std::size_t k = 0; k < counts.size(); ++k) std::cout << " " << c.schema().classes()[k] << "=" << counts[k];
    std::cout << "\ntest: " << data.test.size() << " rows\nwritten to " << dir.string() << "\n";
    return kOk;
}

int cmd_plan(const Common& opt) {
    const auto c = effective_config(opt);
    auto backend = make_backend(c, opt.verbose);
    const auto data = load_datasets(c);
    bool fallback = false;
    const auto plan = resolve_plan(c, *backend, data.d_ori, fallback);
    const auto j = plan_to_json(plan, c.schema());
    if (!opt.out.empty()) {
        write_config(c, opt.out);
        write_text(fs::path(opt.out) / "plan.json", j.dump(2) + "\n");
    }
    std::cout << j.dump(2) << "\n";
    if (fallback) std::cerr << "manager replies were unusable; using the single-component plan\n";
    return kOk;
}

int cmd_generate(const Common& opt) {
    const auto c = effective_config(opt);
    auto backend = make_backend(c, opt.verbose);
    const auto data = load_datasets(c);
    bool fallback = false;
    const auto plan = resolve_plan(c, *backend, data.d_ori, fallback);
    OrchestratorOptions o;
    o.explore_labels = c.explore_labels;
    o.concurrency = c.backend.concurrency;
    const auto gen = generate_batch(plan, *backend, data.d_ori, c.n_b, derive_seed(c.seed, {100, 1, 0}), 1, o);
    const fs::path dir(opt.out);
    write_config(c, dir);
    save_csv(c.schema(), gen.batch.records, dir / "batch_1.csv");
    std::string trace;
    for (const auto& e : gen.trace) trace += trace_to_json(e).dump() + "\n";
    write_text(dir / "trace.jsonl", trace);
    std::cout << "generated " << gen.batch.size() << " rows with " << plan.components.size() << " component(s)\n";
    return kOk;
}

int cmd_run(const Common& opt) {
    const auto c = effective_config(opt);
    auto backend = make_backend(c, opt.verbose);
    RunObserver obs;
    if (opt.verbose)
        obs.on_batch = [](const BatchRecord& b) {
            std::cerr << "batch " << b.t << ": " << b.decision;
            if (b.cost) std::cerr << " delta=" << fmt(b.cost->delta) << " tau=" << fmt(b.cost->tau);
            if (b.diversity) std::cerr << " dH=" << fmt(b.diversity->delta_h);
            std::cerr << "\n";
        };
    const fs::path dir(opt.out);
    write_config(c, dir);
    const auto rep = run(c, *backend, obs);
    write_run_artifacts(rep, dir);
    std::cout << "accepted " << rep.accepted.size() << "/" << rep.batches.size() << ", |D_new| = " << rep.d_new_size
              << ", report at " << (dir / "report.json").string() << "\n";
    if (!rep.error.empty()) {
        std::cerr << "run aborted: " << rep.error << "\n";
        return kRuntimeError;
    }
    return kOk;
}

struct EvaluateArgs {
    std::string train, test, reference;
};

int cmd_evaluate(const Common& opt, const EvaluateArgs& a) {
    const auto c = effective_config(opt);
    const auto train_set = load_csv(a.train, c.schema());
    const auto test = load_csv(a.test, c.schema());
    const auto reference = a.reference.empty() ? train_set : load_csv(a.reference, c.schema());
    const auto table = metric_table_to_json(evaluate(train_set, test, c.models, reference));
    if (!opt.out.empty()) {
        fs::create_directories(opt.out);
        write_text(fs::path(opt.out) / "metrics.json", table.dump(2) + "\n");
    }
    std::cout << table.dump(2) << "\n";
    return kOk;
}

void print_metrics(const std::string& title, const Json& table) {
    if (table.is_null()) return;
    std::cout << title << "\n  " << std::left << std::setw(12) << "model" << std::setw(10) << "accuracy" << std::setw(10)
              << "auc" << std::setw(10) << "f1" << "recall\n";
    auto row = [](const Json& m) {
        std::cout << "  " << std::left << std::setw(12) << m["model"].get<std::string>() << std::setw(10)
                  << fmt(m["accuracy"].get<double>()) << std::setw(10) << fmt(m["auc"].get<double>()) << std::setw(10)
                  << fmt(m["f1"].get<double>()) << fmt(m["recall"].get<double>()) << "\n";
    };
    for (const auto& m : table["models"]) row(m);
    row(table["mean"]);
}

int cmd_report(const std::string& run_dir) {
    const fs::path path = fs::path(run_dir) / "report.json";
    if (!fs::exists(path)) throw ConfigError("no report.json in '" + run_dir + "'");
    const Json r = load_json_file(path);
    try {
        const auto& batches = r.at("batches");
        if (batches.empty()) {
            std::cout << "no batches processed\n";
        } else {
            std::cout << "accepted " << r.at("accepted").size() << "/" << batches.size() << "\n";
            std::cout << "  t   decision          kept  delta     tau       dH        required\n";
            for (const auto& b : batches) {
                const auto& cost = b.at("cost");
                const auto& div = b.at("diversity");
                std::cout << "  " << std::left << std::setw(4) << b.at("t").get<int>() << std::setw(18)
                          << b.at("decision").get<std::string>() << std::setw(6) << b.at("sanity").at("kept").get<std::size_t>()
                          << std::setw(10) << (cost.is_null() ? "-" : fmt_json_number(cost.at("delta"))) << std::setw(10)
                          << (cost.is_null() ? "-" : fmt_json_number(cost.at("tau"))) << std::setw(10)
                          << (div.is_null() ? "-" : fmt_json_number(div.at("delta_h")))
                          << (div.is_null() ? "-" : fmt_json_number(div.at("required"))) << "\n";
            }
        }
        std::cout << "|D_ori| = " << r.at("d_ori_size") << ", |D_new| = " << r.at("d_new_size")
                  << ", stop: " << r.at("stop_reason").get<std::string>() << "\n";
        if (r.contains("error")) std::cout << "error: " << r["error"].get<std::string>() << "\n";
        print_metrics("downstream, trained on D_ori:", r.at("evaluation").at("d_ori"));
        print_metrics("downstream, trained on D_new:", r.at("evaluation").at("d_new"));
        const auto& q = r.at("quality");
        if (!q.is_null())
            std::cout << "quality (generated rows vs test): detection " << fmt(q.at("detection_auc").get<double>())
                      << ", precision proxy " << fmt(q.at("precision_proxy").get<double>()) << ", recall proxy "
                      << fmt(q.at("recall_proxy").get<double>()) << "\n";
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("report.json is malformed: ") + e.what());
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic tabular data generation with staged quality control"};
    app.require_subcommand(1);

    Common simulate_opt, plan_opt, generate_opt, run_opt, evaluate_opt;
    EvaluateArgs eval_args;
    std::string report_dir;

    add_common(app.add_subcommand("simulate", "draw D_ori and the test set from the configured simulator"), simulate_opt, true);
    add_common(app.add_subcommand("plan", "ask the task manager for a generation plan"), plan_opt, false);
    add_common(app.add_subcommand("generate", "generate one batch without quality control"), generate_opt, true);
    add_common(app.add_subcommand("run", "full generate / check / merge loop and evaluation"), run_opt, true);
    auto* ev = app.add_subcommand("evaluate", "train the downstream models on a CSV and score them on another");
    add_common(ev, evaluate_opt, false);
    ev->add_option("--train", eval_args.train, "training CSV")->required()->check(CLI::ExistingFile);
    ev->add_option("--test", eval_args.test, "test CSV")->required()->check(CLI::ExistingFile);
    ev->add_option("--reference", eval_args.reference, "CSV whose statistics standardize features (default: train)")
        ->check(CLI::ExistingFile);
    auto* rp = app.add_subcommand("report", "summarize a run directory");
    rp->add_option("run_dir", report_dir, "directory holding report.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (app.got_subcommand("simulate")) return cmd_simulate(simulate_opt);
        if (app.got_subcommand("plan")) return cmd_plan(plan_opt);
        if (app.got_subcommand("generate")) return cmd_generate(generate_opt);
        if (app.got_subcommand("run")) return cmd_run(run_opt);
        if (app.got_subcommand("evaluate")) return cmd_evaluate(evaluate_opt, eval_args);
        if (app.got_subcommand("report")) return cmd_report(report_dir);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kConfigError;
}
