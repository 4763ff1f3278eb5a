#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "t2/cost.hpp"
#include "t2/sim.hpp"
#include "test_util.hpp"

using namespace t2;

namespace {

Dataset small_data() {
    const auto schema = test::small_schema();
    std::vector<Record> rs;
    const char* labels[] = {"LR", "MR", "HR"};
    for (int i = 0; i < 12; ++i) rs.push_back(test::make_record(20 + 5 * i, 1000.0 * (i % 4), i % 2 ? "M" : "F", labels[i % 3]));
    return Dataset(schema, rs);
}

/// Sort-then-slice reference for the trim window.
std::vector<std::size_t> trim_oracle(const std::vector<double>& costs, double beta) {
    const std::size_t n_b = costs.size() / 2;
    std::vector<std::pair<double, std::size_t>> v;
    for (std::size_t i = 0; i < costs.size(); ++i) v.push_back({costs[i], i});
    std::sort(v.begin(), v.end());
    const auto start = static_cast<std::size_t>(std::floor(static_cast<double>(costs.size()) * beta));
    std::vector<std::size_t> out;
    for (std::size_t r = start; r < start + n_b; ++r) out.push_back(v[r].second);
    return out;
}

double sigmoid_(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST(PerSampleCost, IsTheComplementOfTheOwnLabelProbability) {
    const auto d = small_data();
    const auto enc = Encoder::fit(d);
    // intercept-only 3-class model with probabilities (0.2, 0.5, 0.3)
    const auto w = static_cast<Eigen::Index>(enc.width());
    LogisticFit fit;
    fit.num_classes = 3;
    fit.theta = Eigen::VectorXd::Zero(2 * (w + 1));
    fit.theta[0] = std::log(0.5 / 0.2);
    fit.theta[w + 1] = std::log(0.3 / 0.2);
    const TrainedModel m(ModelSpec::logistic(), enc, fit);
    EXPECT_NEAR(per_sample_cost(m, test::make_record(30, 0, "F", "MR")), 0.5, 1e-12);
    EXPECT_NEAR(per_sample_cost(m, test::make_record(30, 0, "F", "LR")), 0.8, 1e-12);
    EXPECT_NEAR(per_sample_cost(m, test::make_record(30, 0, "F", "HR")), 0.7, 1e-12);
    EXPECT_THROW(per_sample_cost(m, test::make_record(30, 0, "F", "XX")), DataError);

    const auto trained = train(ModelSpec::logistic(), d, enc);
    for (const auto& r : d.records()) {
        const double c = per_sample_cost(trained, r);
        EXPECT_GE(c, 0.0);
        EXPECT_LE(c, 1.0);
        EXPECT_NEAR(c, 1.0 - trained.predict_proba(r)[static_cast<Eigen::Index>(*d.schema().class_index(r.label))], 1e-12);
    }
}

TEST(QuantileTrim, EvenlySpacedExample) {
    std::vector<double> costs;
    for (int i = 1; i <= 20; ++i) costs.push_back(0.01 * i);
    std::mt19937 g(3);
    std::shuffle(costs.begin(), costs.end(), g);
    const auto sel = quantile_trim(costs, 0.5, 0.1);
    ASSERT_EQ(sel.size(), 10u);
    std::vector<double> picked;
    for (auto i : sel) picked.push_back(costs[i]);
    for (int k = 0; k < 10; ++k) EXPECT_NEAR(picked[static_cast<std::size_t>(k)], 0.01 * (k + 3), 1e-12);
}

TEST(QuantileTrim, TiesResolveByIndex) {
    const std::vector<double> costs(20, 0.4);
    const auto sel = quantile_trim(costs, 0.5, 0.1);
    std::vector<std::size_t> want(10);
    std::iota(want.begin(), want.end(), 2);
    EXPECT_EQ(sel, want);
}

TEST(QuantileTrim, SmallBetaKeepsTheLowestCosts) {
    const std::vector<double> costs = {0.9, 0.1, 0.5, 0.3, 0.7, 0.2};
    const auto sel = quantile_trim(costs, 0.5, 0.01);
    EXPECT_EQ(sel, (std::vector<std::size_t>{1, 5, 3}));
}

TEST(QuantileTrim, MatchesSortOracle) {
    std::mt19937_64 g(11);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 * (3 + g() % 18);
        std::vector<double> costs(n);
        // coarse values so ties are common
        for (auto& c : costs) c = static_cast<double>(g() % 7) / 7.0;
        EXPECT_EQ(quantile_trim(costs, 0.5, 0.1), trim_oracle(costs, 0.1));
    }
}

TEST(QuantileTrim, RejectsOddLengths) {
    EXPECT_THROW(quantile_trim({0.1, 0.2, 0.3}, 0.5, 0.1), DataError);
    EXPECT_THROW(quantile_trim({}, 0.5, 0.1), DataError);
}

TEST(InformationGain, EmptyAdditionIsZero) {
    Eigen::MatrixXd X(4, 2);
    X << 1, 0, 0, 1, -1, 0.5, 0.3, -0.2;
    const Eigen::MatrixXd none(0, 2);
    EXPECT_EQ(information_gain(X, {0, 1, 0, 1}, none, {}, 2), 0.0);
}

TEST(InformationGain, ZeroRowsCarryNoInformation) {
    Eigen::MatrixXd X(4, 2);
    X << 1, 0, 0, 1, -1, 0.5, 0.3, -0.2;
    const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(3, 2);
    EXPECT_NEAR(information_gain(X, {0, 1, 0, 1}, zeros, {1, 0, 1}, 2, {1.0, false}), 0.0, 1e-12);
}

TEST(InformationGain, ScalarHandCase) {
    // oracle: θ̂ solves θ = 1 - σ(θ); IG = ½·log(1 + σ(θ̂)(1-σ(θ̂)))
    double th = 0.0;
    for (int i = 0; i < 50; ++i) {
        const double s = sigmoid_(th);
        th -= (th - (1.0 - s)) / (1.0 + s * (1.0 - s));
    }
    const double s = sigmoid_(th);
    const double oracle = 0.5 * std::log(1.0 + s * (1.0 - s));
    EXPECT_NEAR(th, 0.401, 1e-3);
    EXPECT_NEAR(oracle, 0.108, 1e-3);

    const Eigen::MatrixXd base(0, 1);
    const Eigen::MatrixXd add = Eigen::MatrixXd::Ones(1, 1);
    const double ig = information_gain(base, {}, add, {1}, 2, {1.0, false});
    EXPECT_NEAR(ig, oracle, 1e-9);
}

TEST(InformationGain, NeverNegative) {
    std::mt19937_64 g(5);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 40; ++trial) {
        const int k = 2 + static_cast<int>(g() % 2);
        const Eigen::Index nb = 5 + static_cast<Eigen::Index>(g() % 20), na = 1 + static_cast<Eigen::Index>(g() % 10);
        Eigen::MatrixXd Xb(nb, 3), Xa(na, 3);
        for (Eigen::Index i = 0; i < Xb.size(); ++i) Xb.data()[i] = n01(g);
        for (Eigen::Index i = 0; i < Xa.size(); ++i) Xa.data()[i] = 3.0 * n01(g);
        std::vector<int> yb(static_cast<std::size_t>(nb)), ya(static_cast<std::size_t>(na));
        for (auto& y : yb) y = static_cast<int>(g() % static_cast<unsigned>(k));
        for (auto& y : ya) y = static_cast<int>(g() % static_cast<unsigned>(k));
        EXPECT_GE(information_gain(Xb, yb, Xa, ya, k), 0.0);
    }
}

TEST(InformationGain, AgreesWithTheDirectLogDetDifference) {
    std::mt19937_64 g(8);
    std::normal_distribution<double> n01;
    Eigen::MatrixXd Xb(15, 2), Xa(6, 2);
    for (Eigen::Index i = 0; i < Xb.size(); ++i) Xb.data()[i] = n01(g);
    for (Eigen::Index i = 0; i < Xa.size(); ++i) Xa.data()[i] = n01(g);
    std::vector<int> yb, ya;
    for (int i = 0; i < 15; ++i) yb.push_back(i % 2);
    for (int i = 0; i < 6; ++i) ya.push_back(i % 3 == 0);
    // both Hessians at the optimum fitted on the union
    Eigen::MatrixXd X(21, 2);
    X << Xb, Xa;
    std::vector<int> y = yb;
    y.insert(y.end(), ya.begin(), ya.end());
    LogisticOptions lo;
    lo.lambda = 1.0;
    lo.intercept_penalty = 1.0;
    const auto fit = fit_logistic(X, y, 2, lo);
    const LogisticObjective all(X, y, 2, lo), base(Xb, yb, 2, lo);
    const double direct = 0.5 * (std::log(all.hessian(fit.theta).determinant()) - std::log(base.hessian(fit.theta).determinant()));
    EXPECT_NEAR(information_gain(Xb, yb, Xa, ya, 2), direct, 1e-9);
}

TEST(CostAssessor, RefinedBatchHasBatchSizeAndGapIsTheDifference) {
    const auto sim = diabetes_preset(1);
    const auto d = simulate(sim, 80, 2);
    const auto enc = Encoder::fit(d);
    CostConfig cfg;
    const CostAssessor a(d, d, enc, cfg);
    const auto batch = simulate(sim, 10, 3).as_batch();
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto rep = a.assess(batch, 0.0, s);
        EXPECT_EQ(rep.refined.size(), 10u);
        EXPECT_EQ(rep.selected.size(), 10u);
        EXPECT_EQ(rep.residuals.size(), 20u);
        EXPECT_DOUBLE_EQ(rep.delta, rep.ig_refined - rep.ig_control);
        EXPECT_EQ(rep.accepted, rep.delta > 0.0);
        EXPECT_GE(rep.ig_refined, 0.0);
        EXPECT_GE(rep.ig_control, 0.0);
    }
    const auto r1 = a.assess(batch, 0.0, 7), r2 = a.assess(batch, 0.0, 7);
    EXPECT_EQ(r1.delta, r2.delta);
    EXPECT_EQ(r1.selected, r2.selected);
    EXPECT_FALSE(a.assess(batch, std::numeric_limits<double>::infinity(), 7).accepted);
    EXPECT_TRUE(a.assess(batch, -std::numeric_limits<double>::infinity(), 7).accepted);
    EXPECT_THROW(a.assess(DataBatch{}, 0.0, 1), DataError);
}

TEST(Calibration, SingleCoefficientGivesTheNullMean) {
    const auto d = simulate(diabetes_preset(1), 60, 4);
    CostConfig cfg;
    cfg.runs = 40;
    cfg.c_grid = {0.0};
    const auto cal = calibrate_threshold(d, Encoder::fit(d), cfg, 10, 9);
    ASSERT_EQ(cal.null_gaps.size(), 40u);
    const double m = std::accumulate(cal.null_gaps.begin(), cal.null_gaps.end(), 0.0) / 40.0;
    EXPECT_NEAR(cal.mean, m, 1e-12);
    EXPECT_NEAR(cal.tau, m, 1e-12);
    EXPECT_EQ(cal.c, 0.0);
}

TEST(Calibration, DeterministicAndTauIsMeanPlusCsd) {
    const auto d = simulate(diabetes_preset(1), 60, 4);
    CostConfig cfg;
    cfg.runs = 30;
    cfg.cv_runs = 10;
    const auto enc = Encoder::fit(d);
    const auto a = calibrate_threshold(d, enc, cfg, 10, 9);
    const auto b = calibrate_threshold(d, enc, cfg, 10, 9);
    EXPECT_EQ(a.tau, b.tau);
    EXPECT_EQ(a.c_scores, b.c_scores);
    EXPECT_NEAR(a.tau, a.mean + a.c * a.sd, 1e-12);
    EXPECT_NE(std::find(cfg.c_grid.begin(), cfg.c_grid.end(), a.c), cfg.c_grid.end());
}

TEST(Calibration, ZeroSpreadMakesEveryCoefficientEqual) {
    EXPECT_EQ(mean_sd({0.2, 0.2, 0.2}).sd, 0.0);
    EXPECT_EQ(mean_sd({0.2}).sd, 0.0);
}

TEST(Calibration, TooFewRecordsForTheFolds) {
    const auto d = simulate(diabetes_preset(1), 4, 4);
    EXPECT_THROW(calibrate_threshold(d, Encoder::fit(d), CostConfig{}, 2, 1), DataError);
}

TEST(CostConfig, ValidationAndJson) {
    CostConfig c;
    c.beta = 0.6;
    EXPECT_THROW(c.validate(), ConfigError);
    c = CostConfig{};
    c.alpha = 0.95;
    c.beta = 0.1;
    EXPECT_THROW(c.validate(), ConfigError);
    const auto back = cost_config_from_json(cost_config_to_json(CostConfig{}));
    EXPECT_EQ(back.c_grid, CostConfig{}.c_grid);
    EXPECT_EQ(back.runs, 1000);
}
