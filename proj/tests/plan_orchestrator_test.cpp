#include <gtest/gtest.h>

#include <map>

#include "t2/mock_backend.hpp"
#include "t2/orchestrator.hpp"
#include "t2/plan.hpp"

using namespace t2;

namespace {

// Post-surgery recovery example: demographics and hospital resources are
// independent; sleep quality depends on both.
Schema recovery_schema() {
    return Schema({FeatureSpec::continuous("age", 18, 90, "Age in years"), FeatureSpec::categorical("sex", {"F", "M"}),
                   FeatureSpec::continuous("hospital_resources", 0, 10, "Staff and equipment index"),
                   FeatureSpec::categorical("sleep_quality", {"0", "1"}, "1 = poor sleep")},
                  FeatureSpec::categorical("recovery", {"short", "long"}));
}

const char* kRecoveryPlan = R"({
  "components": [
    {"name": "demographics", "features": ["age", "sex"]},
    {"name": "environment", "features": ["hospital_resources"]},
    {"name": "sleep", "features": ["sleep_quality"]}
  ],
  "edges": [["demographics", "sleep"], ["environment", "sleep"]],
  "roles": ["Demographer", "Hospital Analyst", "Sleep Specialist", "Outcome Predictor"]
})";

Dataset recovery_data() {
    const auto s = recovery_schema();
    std::vector<Record> rs;
    for (int i = 0; i < 30; ++i)
        rs.push_back(Record{{20.0 + 2 * i, std::string(i % 2 ? "M" : "F"), double(i % 10), std::string(i > 22 ? "1" : "0")},
                            i % 3 ? "short" : "long"});
    return Dataset(s, rs);
}

MockSpec recovery_mock() {
    MockSpec m;
    m.schema = recovery_schema();
    m.marginals["age"] = Marginal::uniform(18, 90);
    m.marginals["sex"] = Marginal::categorical({0.5, 0.5});
    m.marginals["hospital_resources"] = Marginal::uniform(0, 10);
    m.marginals["recovery"] = Marginal::categorical({0.6, 0.4});
    MockRule sleep;
    sleep.terms = {{"age", std::nullopt, 1.0}};
    sleep.thresholds = {65.0};
    m.rules["sleep_quality"] = sleep;
    m.seed = 17;
    return m;
}

std::vector<std::vector<std::string>> stage_names(const GenerationPlan& p) {
    std::vector<std::vector<std::string>> out;
    for (const auto& s : p.stages) {
        out.emplace_back();
        for (auto k : s) out.back().push_back(p.components[k].name);
    }
    return out;
}

}  // namespace

TEST(Schedule, ChainAndJoin) {
    using S = std::vector<std::vector<std::size_t>>;
    EXPECT_EQ(topological_schedule(3, {{0, 1}, {1, 2}}), (S{{0}, {1}, {2}}));
    EXPECT_EQ(topological_schedule(3, {{0, 2}, {1, 2}}), (S{{0, 1}, {2}}));
    EXPECT_EQ(topological_schedule(3, {}), (S{{0, 1, 2}}));
    // longest path decides the stage
    EXPECT_EQ(topological_schedule(4, {{0, 1}, {1, 2}, {0, 2}, {3, 2}}), (S{{0, 3}, {1}, {2}}));
}

TEST(Schedule, CyclesAndBadEdges) {
    EXPECT_THROW(topological_schedule(2, {{1, 1}}), ConfigError);
    EXPECT_THROW(topological_schedule(2, {{0, 1}, {1, 0}}), ConfigError);
    EXPECT_THROW(topological_schedule(2, {{0, 5}}), ConfigError);
}

TEST(Plan, RecoveryPlanFromManager) {
    const auto d = recovery_data();
    MockBackend manager(recovery_mock(), {kRecoveryPlan});
    const auto out = plan_from_manager(manager, d);
    EXPECT_FALSE(out.fallback);
    EXPECT_EQ(out.attempts, 1);
    EXPECT_EQ(stage_names(out.plan), (std::vector<std::vector<std::string>>{{"demographics", "environment"}, {"sleep"}}));
    EXPECT_EQ(out.plan.label_role.name, "Outcome Predictor");
    EXPECT_EQ(out.plan.roles[2].name, "Sleep Specialist");
    EXPECT_EQ(out.plan.parents(2), (std::vector<std::size_t>{0, 1}));
}

TEST(Plan, ManagerPromptCarriesDictionaryAndExcerpt) {
    const auto p = render_manager_prompt(recovery_data());
    EXPECT_NE(p.find("hospital_resources (continuous, range [0, 10])"), std::string::npos);
    EXPECT_NE(p.find("Staff and equipment index"), std::string::npos);
    EXPECT_NE(p.find("age,sex,hospital_resources,sleep_quality,recovery"), std::string::npos);
}

TEST(Plan, OverlapAndCycleFallBack) {
    const auto d = recovery_data();
    const std::string overlap = R"({"components": [{"name": "a", "features": ["age", "sex"]},
        {"name": "b", "features": ["sex", "hospital_resources", "sleep_quality"]}], "edges": [], "roles": ["x", "y"]})";
    const std::string cycle = R"({"components": [{"name": "a", "features": ["age", "sex"]},
        {"name": "b", "features": ["hospital_resources", "sleep_quality"]}], "edges": [["a","b"],["b","a"]], "roles": ["x", "y"]})";
    for (const auto& bad : {overlap, cycle}) {
        MockBackend manager(recovery_mock(), {bad});
        const auto out = plan_from_manager(manager, d);
        EXPECT_TRUE(out.fallback);
        EXPECT_EQ(out.attempts, 3);
        EXPECT_EQ(manager.manager_calls(), 3u);
        EXPECT_EQ(out.errors.size(), 3u);
        ASSERT_EQ(out.plan.components.size(), 1u);
        EXPECT_EQ(out.plan.components[0].features.size(), 4u);
    }
    // a bad first reply followed by a good one
    MockBackend manager(recovery_mock(), {"not json at all", kRecoveryPlan});
    const auto out = plan_from_manager(manager, d);
    EXPECT_FALSE(out.fallback);
    EXPECT_EQ(out.attempts, 2);
}

TEST(Plan, ValidateReportsEachKind) {
    const auto s = recovery_schema();
    auto kinds = [&](const GenerationPlan& p) {
        std::vector<std::string> k;
        for (const auto& v : validate_plan(p, s)) k.push_back(v.kind);
        return k;
    };
    EXPECT_TRUE(validate_plan(single_component_plan(s), s).empty());

    GenerationPlan overlap;
    overlap.components = {{"a", {0, 1, 3}}, {"b", {2, 3}}};
    overlap.roles = {{"x", ""}, {"y", ""}};
    EXPECT_EQ(kinds(overlap), (std::vector<std::string>{"overlap"}));

    GenerationPlan gap;
    gap.components = {{"a", {0, 1}}, {"b", {2}}};
    gap.roles = {{"x", ""}, {"y", ""}};
    EXPECT_EQ(kinds(gap), (std::vector<std::string>{"coverage"}));

    GenerationPlan cyc;
    cyc.components = {{"a", {0, 1}}, {"b", {2, 3}}};
    cyc.edges = {{0, 1}, {1, 0}};
    cyc.roles = {{"x", ""}, {"y", ""}};
    EXPECT_EQ(kinds(cyc), (std::vector<std::string>{"cycle"}));

    GenerationPlan roles;
    roles.components = {{"a", {0, 1}}, {"b", {2, 3}}};
    roles.roles = {{"x", ""}};
    EXPECT_EQ(kinds(roles), (std::vector<std::string>{"role"}));

    EXPECT_THROW(finalize_plan(cyc, s), ConfigError);
}

TEST(Plan, JsonRoundTrip) {
    const auto s = recovery_schema();
    const auto p = finalize_plan(plan_from_json(Json::parse(kRecoveryPlan), s), s);
    const auto j = plan_to_json(p, s);
    const auto back = finalize_plan(plan_from_json(j, s), s);
    EXPECT_EQ(plan_to_json(back, s), j);
    EXPECT_THROW(plan_from_json(Json::parse(R"({"components": [{"name": "a", "features": ["bmi"]}]})"), s), ConfigError);
    EXPECT_THROW(plan_from_json(Json::parse(R"({"edges": []})"), s), ConfigError);
}

TEST(Excerpt, StratifiedAndBounded) {
    const auto d = recovery_data();
    const auto rows = stratified_excerpt(d, 20);
    EXPECT_EQ(rows.size(), 20u);
    EXPECT_TRUE(std::is_sorted(rows.begin(), rows.end()));
    std::size_t longs = 0;
    for (auto i : rows) longs += d[i].label == "long";
    EXPECT_EQ(longs, 10u);
    EXPECT_EQ(stratified_excerpt(d, 100).size(), 30u);
}

class Orchestrator : public ::testing::Test {
protected:
    Dataset d = recovery_data();
    GenerationPlan plan = finalize_plan(plan_from_json(Json::parse(kRecoveryPlan), recovery_schema()), recovery_schema());
};

TEST_F(Orchestrator, SleepRuleHoldsOnGeneratedParents) {
    MockBackend backend(recovery_mock());
    const auto out = generate_batch(plan, backend, d, 200, 5);
    ASSERT_EQ(out.batch.size(), 200u);
    std::size_t old = 0;
    for (const auto& r : out.batch.records) {
        const bool senior = r.number(0) >= 65.0;
        old += senior;
        EXPECT_EQ(r.text(3), senior ? "1" : "0");
    }
    EXPECT_GT(old, 0u);
    EXPECT_LT(old, 200u);
}

TEST_F(Orchestrator, ShapeProvenanceAndAlignment) {
    MockBackend backend(recovery_mock());
    const auto out = generate_batch(single_component_plan(d.schema()), backend, d, 10, 1, 4);
    ASSERT_EQ(out.batch.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(out.batch.records[i].values.size(), 4u);
        EXPECT_FALSE(out.batch.records[i].label.empty());
        EXPECT_EQ(out.batch.provenance[i].source, Provenance::Source::generated);
        EXPECT_EQ(out.batch.provenance[i].batch, 4);
    }
    const auto full = generate_batch(plan, backend, d, 20, 1);
    EXPECT_EQ(full.batch.size(), 20u);
    for (std::size_t k = 0; k < plan.components.size(); ++k)
        for (std::size_t r = 0; r < 20; ++r)
            for (std::size_t j = 0; j < plan.components[k].features.size(); ++j)
                EXPECT_EQ(full.batch.records[r].values[plan.components[k].features[j]], full.blocks[k].rows[r][j]);
}

TEST_F(Orchestrator, DeterministicAndConcurrencyDoesNotChangeOutput) {
    MockBackend a(recovery_mock()), b(recovery_mock());
    const auto x = generate_batch(plan, a, d, 15, 9);
    const auto y = generate_batch(plan, b, d, 15, 9);
    EXPECT_EQ(x.batch.records, y.batch.records);
    OrchestratorOptions o;
    o.concurrency = 4;
    const auto z = generate_batch(plan, b, d, 15, 9, 1, o);
    EXPECT_EQ(x.batch.records, z.batch.records);
    EXPECT_NE(generate_batch(plan, b, d, 15, 10).batch.records, x.batch.records);
}

TEST_F(Orchestrator, ParentsAreProducedBeforeChildren) {
    MockBackend backend(recovery_mock());
    std::vector<std::string> seen_parents;
    backend.tamper = [&](const GeneratorRequest& req, std::string text) {
        if (req.role == "Sleep Specialist") {
            for (const auto& c : req.parents.columns) seen_parents.push_back(c);
            EXPECT_EQ(req.parents.rows.size(), req.n_b);
            EXPECT_NE(req.excerpt.column_index("sleep_quality"), std::nullopt);
            EXPECT_NE(req.excerpt.column_index("age"), std::nullopt);
        }
        if (req.component == -1) EXPECT_EQ(req.parents.columns.size(), 4u);
        return text;
    };
    const auto out = generate_batch(plan, backend, d, 5, 2);
    EXPECT_EQ(seen_parents, (std::vector<std::string>{"age", "sex", "hospital_resources"}));
    // trace: stage 0 components, then stage 1, then the label worker
    ASSERT_EQ(out.trace.size(), 4u);
    std::map<int, int> stage_of;
    for (const auto& e : out.trace) stage_of[e.component] = e.stage;
    for (const auto& [u, v] : plan.edges) EXPECT_LT(stage_of[static_cast<int>(u)], stage_of[static_cast<int>(v)]);
    EXPECT_EQ(out.trace.back().component, -1);
    for (std::size_t i = 1; i < out.trace.size(); ++i) EXPECT_LE(out.trace[i - 1].stage, out.trace[i].stage);
}

TEST_F(Orchestrator, BadRepliesAreRetriedThenAbort) {
    MockBackend flaky(recovery_mock());
    int calls = 0;
    flaky.tamper = [&](const GeneratorRequest&, std::string text) { return ++calls == 1 ? std::string("garbage") : text; };
    const auto out = generate_batch(plan, flaky, d, 5, 2);
    EXPECT_EQ(out.batch.size(), 5u);
    EXPECT_FALSE(out.trace[0].ok);
    EXPECT_TRUE(out.trace[1].ok);
    EXPECT_EQ(out.trace[1].attempt, 2);

    MockBackend broken(recovery_mock());
    broken.tamper = [](const GeneratorRequest&, std::string) { return std::string("[]"); };
    EXPECT_THROW(generate_batch(plan, broken, d, 5, 2), BackendError);
    EXPECT_EQ(broken.worker_calls(), 3u);
}

TEST_F(Orchestrator, LabelVocabularyFollowsDOri) {
    auto rs = d.records();
    for (auto& r : rs) r.label = "short";
    const Dataset one_class(d.schema(), rs);
    EXPECT_EQ(label_target(one_class, false).categories(), (std::vector<std::string>{"short"}));
    EXPECT_EQ(label_target(one_class, true).categories().size(), 2u);
    MockBackend backend(recovery_mock());
    for (const auto& r : generate_batch(plan, backend, one_class, 30, 3).batch.records) EXPECT_EQ(r.label, "short");
}
