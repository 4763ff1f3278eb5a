#include <gtest/gtest.h>

#include "t2/sanity.hpp"
#include "test_util.hpp"

using namespace t2;
using t2::test::compas_record;
using t2::test::compas_schema;

namespace {

const std::string kPriorsRule = "priors_count - juv_fel_count >= 0";

bool has_kind(const std::vector<Violation>& v, Violation::Kind k) {
    for (const auto& x : v)
        if (x.kind == k) return true;
    return false;
}

}  // namespace

TEST(Constraints, RangesAndVocabulariesComeFromTheSchema) {
    const auto cs = compile_constraints(test::small_schema(), {});
    ASSERT_EQ(cs.ranges.size(), 2u);
    EXPECT_EQ(cs.ranges[0].lower, 0.0);
    EXPECT_EQ(cs.ranges[0].upper, 120.0);
    // sex plus the label
    EXPECT_EQ(cs.categoricals.size(), 2u);
    EXPECT_TRUE(cs.relational.empty());
}

TEST(Constraints, PriorsRuleIsOneSingleClauseGroup) {
    const auto schema = compas_schema();
    const auto cs = compile_constraints(schema, {kPriorsRule});
    ASSERT_EQ(cs.relational.size(), 1u);
    ASSERT_EQ(cs.relational[0].clauses.size(), 1u);
    const auto& c = cs.relational[0].clauses[0];
    ASSERT_EQ(c.numeric.size(), 2u);
    EXPECT_EQ(c.numeric[0].feature, 3u);
    EXPECT_EQ(c.numeric[0].weight, 1.0);
    EXPECT_EQ(c.numeric[1].feature, 2u);
    EXPECT_EQ(c.numeric[1].weight, -1.0);
    EXPECT_EQ(c.constant, 0.0);
}

TEST(Constraints, RuleSyntaxVariants) {
    const auto schema = compas_schema();
    const auto r = compile_constraints(schema, {"2*age + 3 <= 200 - priors_count*0.5"}).relational[0].clauses[0];
    // 200 - 0.5 p - 2 age - 3 >= 0
    EXPECT_DOUBLE_EQ(r.constant, 197.0);
    EXPECT_DOUBLE_EQ(r.evaluate(compas_record(50, "Male", 0, 10), schema), 197.0 - 100.0 - 5.0);

    const auto g = parse_rule(schema, "age >= 30 || sex==Female");
    ASSERT_EQ(g.clauses.size(), 2u);
    ASSERT_EQ(g.clauses[1].indicators.size(), 1u);
    EXPECT_EQ(g.clauses[1].indicators[0].category, 0u);
    EXPECT_EQ(parse_rule(schema, "age >= 30 or sex == 'Female'").clauses.size(), 2u);
}

TEST(Constraints, MalformedRulesAreConfigErrors) {
    const auto schema = compas_schema();
    EXPECT_THROW(compile_constraints(schema, {"bmi2 >= 0"}), ConfigError);
    EXPECT_THROW(parse_rule(schema, "age > 3"), ConfigError);
    EXPECT_THROW(parse_rule(schema, "age >= "), ConfigError);
    EXPECT_THROW(parse_rule(schema, "sex >= 1"), ConfigError);
    EXPECT_THROW(parse_rule(schema, "sex==Other >= 1"), ConfigError);
    EXPECT_THROW(parse_rule(schema, "age==Male >= 1"), ConfigError);
    EXPECT_THROW(parse_rule(schema, "age >= 1 ||"), ConfigError);
    EXPECT_THROW(parse_rule(schema, "age >= 'unterminated"), ConfigError);
    EXPECT_THROW(parse_rule(schema, "age >= 1 $"), ConfigError);
}

TEST(CheckRecord, RangeViolationAndClosedBounds) {
    const auto schema = test::small_schema();
    const auto cs = compile_constraints(schema, {});
    auto v = check_record(test::make_record(130, 0, "F", "LR"), cs);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, Violation::Kind::range);
    EXPECT_NE(v[0].explanation.find("age"), std::string::npos);
    EXPECT_TRUE(check_record(test::make_record(120, 0, "F", "LR"), cs).empty());
    EXPECT_TRUE(check_record(test::make_record(0, 0, "F", "LR"), cs).empty());
    EXPECT_TRUE(check_record(test::make_record(120 + 1e-10, 0, "F", "LR"), cs).empty());
    EXPECT_FALSE(check_record(test::make_record(120 + 1e-6, 0, "F", "LR"), cs).empty());
}

TEST(CheckRecord, RelationalViolationFromTheCompasRule) {
    const auto schema = compas_schema();
    const auto cs = compile_constraints(schema, {kPriorsRule});
    auto v = check_record(compas_record(30, "Male", 3, 1), cs);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].kind, Violation::Kind::relational);
    EXPECT_TRUE(check_record(compas_record(30, "Male", 3, 3), cs).empty());
}

TEST(CheckRecord, DisjunctionPassesWhenAnyClauseHolds) {
    const auto schema = compas_schema();
    const auto cs = compile_constraints(schema, {"age >= 30 || sex==Female"});
    EXPECT_TRUE(check_record(compas_record(20, "Female", 0, 0), cs).empty());
    EXPECT_TRUE(check_record(compas_record(40, "Male", 0, 0), cs).empty());
    EXPECT_FALSE(check_record(compas_record(20, "Male", 0, 0), cs).empty());
}

TEST(CheckRecord, VocabularyTypeAndArity) {
    const auto schema = test::small_schema();
    const auto cs = compile_constraints(schema, {});
    EXPECT_TRUE(has_kind(check_record(test::make_record(30, 0, "X", "LR"), cs), Violation::Kind::categorical));
    EXPECT_TRUE(has_kind(check_record(test::make_record(30, 0, "F", "ZZ"), cs), Violation::Kind::categorical));
    EXPECT_TRUE(has_kind(check_record(Record{{30.0, 0.0, 1.0}, "LR"}, cs), Violation::Kind::type));
    EXPECT_TRUE(has_kind(check_record(Record{{30.0}, "LR"}, cs), Violation::Kind::type));
    const auto nan = std::numeric_limits<double>::quiet_NaN();
    EXPECT_TRUE(has_kind(check_record(test::make_record(nan, 0, "F", "LR"), cs), Violation::Kind::range));
}

TEST(TrimBatch, CountsAndOrder) {
    const auto schema = compas_schema();
    const auto cs = compile_constraints(schema, {kPriorsRule});
    DataBatch b;
    for (int i = 0; i < 10; ++i) {
        const bool bad = i == 2 || i == 5 || i == 9;
        b.push_back(compas_record(20 + i, "Male", bad ? 5 : 0, 1), Provenance::generated(1));
    }
    const auto r = trim_batch(b, cs);
    EXPECT_EQ(r.kept.size(), 7u);
    EXPECT_EQ(r.rejected, 3u);
    ASSERT_EQ(r.violations.size(), 3u);
    EXPECT_EQ(r.violations[0].record, 2u);
    EXPECT_EQ(r.violations[2].record, 9u);
    std::vector<double> ages;
    for (const auto& rec : r.kept.records) ages.push_back(rec.number(0));
    EXPECT_EQ(ages, (std::vector<double>{20, 21, 23, 24, 26, 27, 28}));
    // idempotent
    EXPECT_EQ(trim_batch(r.kept, cs).kept.records, r.kept.records);
}

TEST(TrimBatch, CleanAndFullyInvalidBatches) {
    const auto schema = compas_schema();
    const auto cs = compile_constraints(schema, {kPriorsRule});
    DataBatch clean, bad;
    for (int i = 0; i < 5; ++i) {
        clean.push_back(compas_record(30, "Female", 1, 2), Provenance::generated(1));
        bad.push_back(compas_record(300, "Female", 1, 2), Provenance::generated(1));
    }
    EXPECT_EQ(trim_batch(clean, cs).kept.records, clean.records);
    EXPECT_TRUE(trim_batch(bad, cs).kept.empty());
}

TEST(Violations, SerializeToJson) {
    const Violation v{4, Violation::Kind::relational, "violates 'x'"};
    const auto j = violation_to_json(v);
    EXPECT_EQ(j["record"], 4);
    EXPECT_EQ(j["kind"], "relational");
}
