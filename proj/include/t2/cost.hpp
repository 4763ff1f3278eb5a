#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "t2/encoding.hpp"
#include "t2/error.hpp"
#include "t2/logistic.hpp"
#include "t2/models.hpp"
#include "t2/random.hpp"
#include "t2/resample.hpp"
#include "t2/tabular.hpp"

namespace t2 {

struct CostConfig {
    double alpha = 0.5;
    double beta = 0.1;
    int runs = 1000;  // Monte Carlo null draws for τ
    std::vector<double> c_grid = {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
    int folds = 5;
    int cv_runs = 100;  // draws per fold and per candidate kind when scoring c
    double lambda = 1.0;  // L2 strength of the IG model, intercept included
    ModelSpec model = ModelSpec::logistic(1.0);  // residual model

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("cost: alpha must lie in (0,1)");
        if (!(beta > 0.0 && beta < 0.5)) throw ConfigError("cost: beta must lie in (0,0.5)");
        if (!(beta < 1.0 - alpha)) throw ConfigError("cost: beta must be below 1 - alpha");
        if (runs < 1) throw ConfigError("cost: runs must be >= 1");
        if (cv_runs < 1) throw ConfigError("cost: cv_runs must be >= 1");
        if (folds < 2) throw ConfigError("cost: folds must be >= 2");
        if (c_grid.empty()) throw ConfigError("cost: empty coefficient grid");
        if (!(lambda > 0.0)) throw ConfigError("cost: lambda must be positive");
        model.validate();
    }
};

inline Json cost_config_to_json(const CostConfig& c) {
    return {{"alpha", c.alpha}, {"beta", c.beta},     {"runs", c.runs},     {"c_grid", c.c_grid},
            {"folds", c.folds}, {"cv_runs", c.cv_runs}, {"lambda", c.lambda}, {"model", model_spec_to_json(c.model)}};
}

inline CostConfig cost_config_from_json(const Json& j) {
    CostConfig c;
    try {
        c.alpha = j.value("alpha", c.alpha);
        c.beta = j.value("beta", c.beta);
        c.runs = j.value("runs", c.runs);
        c.c_grid = j.value("c_grid", c.c_grid);
        c.folds = j.value("folds", c.folds);
        c.cv_runs = j.value("cv_runs", c.cv_runs);
        c.lambda = j.value("lambda", c.lambda);
        if (j.contains("model")) c.model = model_spec_from_json(j.at("model"));
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed cost config: ") + e.what());
    }
    c.validate();
    return c;
}

/// r = 1 - p_f(y | x).
inline double per_sample_cost(const TrainedModel& model, const Record& record) {
    auto k = model.encoder().schema().class_index(record.label);
    if (!k) throw DataError("per_sample_cost: label '" + record.label + "' is not one of the model's classes");
    return 1.0 - model.predict_proba(record)[static_cast<Eigen::Index>(*k)];
}

/// Rank window over 2·n_b costs sorted ascending (ties by index): starts at
/// rank ⌊2·n_b·β⌋+1 and holds round(2(1-α)·n_b) ranks, which is n_b at α=½.
/// Returned indices are in rank order.
inline std::vector<std::size_t> quantile_trim(const std::vector<double>& costs, double alpha, double beta) {
    if (costs.empty() || costs.size() % 2 != 0) throw DataError("quantile_trim: need 2*n_b costs");
    const std::size_t total = costs.size();
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return costs[a] < costs[b]; });
    const auto count = std::min<std::size_t>(
        total, static_cast<std::size_t>(std::llround((1.0 - alpha) * static_cast<double>(total))));
    auto start = static_cast<std::size_t>(std::floor(static_cast<double>(total) * beta));
    start = std::min(start, total - count);
    return {order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(start + count)};
}

namespace cost_detail {

inline std::vector<int> one_vs_rest(const std::vector<int>& y, int c) {
    std::vector<int> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] == c ? 1 : 0;
    return out;
}

/// ½·log det(I + L⁻¹ A L⁻ᵀ) with H_D = L Lᵀ and A the added data Hessian.
/// Equal to ½(log det(H_D + A) - log det H_D) and never negative.
inline double half_log_det_ratio(const Eigen::MatrixXd& base, const Eigen::MatrixXd& added) {
    Eigen::LLT<Eigen::MatrixXd> llt(base);
    if (llt.info() != Eigen::Success) throw FitError("information_gain: base Hessian is not positive definite");
    const Eigen::MatrixXd Linv_A = llt.matrixL().solve(added);
    const Eigen::MatrixXd M = llt.matrixL().solve(Linv_A.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
    double s = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) s += std::log1p(std::max(0.0, es.eigenvalues()[i]));
    return 0.5 * s;
}

}  // namespace cost_detail

struct IgOptions {
    double lambda = 1.0;
    bool fit_intercept = true;
};

/// Laplace-approximation information gain of adding (X_add, y_add) to
/// (X_base, y_base) under an L2 logistic model with prior N(0, λ⁻¹I):
/// IG = ½(log det H_{D∪D'} - log det H_D), both Hessians of the negative log
/// posterior taken at the optimum fitted on D∪D'. Taking them at one point
/// makes the difference a PSD update, so IG ≥ 0. Binary labels use one
/// model; more classes sum one-vs-rest gains.
inline double information_gain(const Eigen::MatrixXd& X_base, const std::vector<int>& y_base, const Eigen::MatrixXd& X_add,
                               const std::vector<int>& y_add, int num_classes, const IgOptions& opts = {}) {
    if (X_add.rows() == 0) return 0.0;
    if (X_base.cols() != X_add.cols()) throw DataError("information_gain: feature width mismatch");
    Eigen::MatrixXd X(X_base.rows() + X_add.rows(), X_base.cols());
    X << X_base, X_add;
    std::vector<int> y = y_base;
    y.insert(y.end(), y_add.begin(), y_add.end());
    LogisticOptions lo;
    lo.lambda = opts.lambda;
    lo.intercept_penalty = opts.lambda;
    lo.fit_intercept = opts.fit_intercept;
    double ig = 0.0;
    const int first = num_classes == 2 ? 1 : 0;
    for (int c = first; c < num_classes; ++c) {
        const auto yc = cost_detail::one_vs_rest(y, c);
        const LogisticFit fit = fit_logistic(X, yc, 2, lo);
        const LogisticObjective base(X_base, cost_detail::one_vs_rest(y_base, c), 2, lo);
        const LogisticObjective add(X_add, cost_detail::one_vs_rest(y_add, c), 2, lo);
        ig += cost_detail::half_log_det_ratio(base.hessian(fit.theta), add.data_hessian(fit.theta));
    }
    return ig;
}

inline double information_gain(const Dataset& base, const DataBatch& addition, const Encoder& encoder,
                               const IgOptions& opts = {}) {
    return information_gain(encoder.encode(base.records()), encoder.labels(base.records()),
                            encoder.encode(addition.records), encoder.labels(addition.records),
                            static_cast<int>(base.schema().num_classes()), opts);
}

struct CostReport {
    std::vector<double> residuals;  // over D̃_t = batch then B_t
    std::vector<std::size_t> selected;
    DataBatch refined;              // D̄_t
    DataBatch control;              // B_t
    double ig_refined = 0.0;
    double ig_control = 0.0;
    double delta = 0.0;
    double tau = 0.0;
    bool accepted = false;
    std::size_t refined_generated = 0;  // records of D̄_t that came from the batch
};

inline Json cost_report_to_json(const CostReport& r) {
    auto num = [](double v) { return std::isfinite(v) ? Json(v) : Json(v > 0 ? "inf" : "-inf"); };
    return {{"residuals", r.residuals},
            {"selected", r.selected},
            {"refined_size", r.refined.size()},
            {"refined_generated", r.refined_generated},
            {"ig_refined", r.ig_refined},
            {"ig_control", r.ig_control},
            {"delta", r.delta},
            {"tau", num(r.tau)},
            {"decision", r.accepted ? "accept" : "reject"}};
}

/// The bootstrap duel against a fixed current dataset D. The residual model
/// is trained once on D and reused for every batch assessed.
class CostAssessor {
public:
    CostAssessor(Dataset d_ori, Dataset d_current, Encoder encoder, CostConfig config)
        : d_ori_(std::move(d_ori)), d_(std::move(d_current)), enc_(std::move(encoder)), cfg_(std::move(config)),
          model_(train(cfg_.model, d_, enc_)), X_d_(enc_.encode(d_.records())), y_d_(enc_.labels(d_.records())) {
        cfg_.validate();
        if (d_ori_.empty()) throw DataError("cost: D_ori is empty");
    }

    const TrainedModel& model() const noexcept { return model_; }
    const Dataset& current() const noexcept { return d_; }

    /// Draws B_t = bootstrap(D_ori, |batch|) from `seed`, then trims and
    /// compares. `batch` has already passed the sanity stage.
    CostReport assess(const DataBatch& batch, double tau, std::uint64_t seed, int batch_index = 0) const {
        if (batch.empty()) throw DataError("cost: empty batch");
        return assess(batch, bootstrap_sample(d_ori_, batch.size(), seed, batch_index), tau);
    }

    CostReport assess(const DataBatch& batch, const DataBatch& control, double tau) const {
        if (batch.size() != control.size()) throw DataError("cost: batch and control differ in size");
        CostReport rep;
        rep.tau = tau;
        rep.control = control;
        DataBatch mixture = batch;
        for (std::size_t i = 0; i < control.size(); ++i) mixture.push_back(control.records[i], control.provenance[i]);
        for (const auto& r : mixture.records) rep.residuals.push_back(per_sample_cost(model_, r));
        rep.selected = quantile_trim(rep.residuals, cfg_.alpha, cfg_.beta);
        for (auto i : rep.selected) {
            rep.refined.push_back(mixture.records[i], mixture.provenance[i]);
            rep.refined_generated += i < batch.size();
        }
        const IgOptions ig{cfg_.lambda, true};
        const int k = static_cast<int>(d_.schema().num_classes());
        rep.ig_refined = information_gain(X_d_, y_d_, enc_.encode(rep.refined.records), enc_.labels(rep.refined.records), k, ig);
        rep.ig_control = information_gain(X_d_, y_d_, enc_.encode(control.records), enc_.labels(control.records), k, ig);
        rep.delta = rep.ig_refined - rep.ig_control;
        rep.accepted = rep.delta > tau;
        return rep;
    }

private:
    Dataset d_ori_;
    Dataset d_;
    Encoder enc_;
    CostConfig cfg_;
    TrainedModel model_;
    Eigen::MatrixXd X_d_;
    std::vector<int> y_d_;
};

/// One-shot form of CostAssessor::assess.
inline CostReport assess_batch(const Dataset& d_ori, const Dataset& d_current, const DataBatch& batch, const Encoder& encoder,
                               const CostConfig& config, double tau, std::uint64_t seed, int batch_index = 0) {
    return CostAssessor(d_ori, d_current, encoder, config).assess(batch, tau, seed, batch_index);
}

struct NullStats {
    double mean = 0.0;
    double sd = 0.0;
};

inline NullStats mean_sd(const std::vector<double>& v) {
    NullStats s;
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    // identical draws have no spread, whatever the rounding of the mean
    if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); })) return s;
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    return s;
}

struct Calibration {
    double tau = 0.0;
    double mean = 0.0;
    double sd = 0.0;
    double c = 0.0;
    std::vector<double> c_scores;  // CV score per grid entry (empty when skipped)
    std::vector<double> null_gaps;
};

inline Json calibration_to_json(const Calibration& c) {
    return {{"tau", c.tau}, {"mean", c.mean}, {"sd", c.sd}, {"c", c.c}, {"c_scores", c.c_scores}};
}

/// Δ for `runs` batches that are themselves bootstraps of `pool`, assessed
/// against `assessor` (whose D is the pool being resampled, normally D_ori).
inline std::vector<double> bootstrap_gaps(const CostAssessor& assessor, const Dataset& pool, std::size_t n_b, int runs,
                                          std::uint64_t seed) {
    std::vector<double> gaps;
    gaps.reserve(static_cast<std::size_t>(runs));
    for (int r = 0; r < runs; ++r) {
        const auto s = static_cast<std::uint64_t>(r);
        const auto batch = bootstrap_sample(pool, n_b, derive_seed(seed, {s, 0}), 0);
        gaps.push_back(assessor.assess(batch, 0.0, derive_seed(seed, {s, 1})).delta);
    }
    return gaps;
}

/// τ = m + c·s where (m, s) are the mean and standard deviation of Δ over
/// `runs` null batches (bootstraps of D_ori) and c comes from the grid by
/// k-fold CV on D_ori. In fold f the null is rebuilt on the training folds
/// and the rule Δ > m_f + c·s_f is scored by balanced accuracy at telling
/// bootstraps of the held-out fold (data new to the model) from bootstraps
/// of the training folds. Ties go to the larger c.
inline Calibration calibrate_threshold(const Dataset& d_ori, const Encoder& encoder, const CostConfig& config,
                                       std::size_t n_b, std::uint64_t seed) {
    config.validate();
    if (n_b < 1) throw ConfigError("calibrate_threshold: n_b must be >= 1");
    if (d_ori.size() < static_cast<std::size_t>(config.folds))
        throw DataError("calibrate_threshold: D_ori smaller than the number of folds");
    Calibration cal;
    const CostAssessor full(d_ori, d_ori, encoder, config);
    cal.null_gaps = bootstrap_gaps(full, d_ori, n_b, config.runs, derive_seed(seed, 1));
    const NullStats st = mean_sd(cal.null_gaps);
    cal.mean = st.mean;
    cal.sd = st.sd;
    cal.c = config.c_grid.front();
    if (config.c_grid.size() > 1 && cal.sd > 0.0) {
        std::vector<double> score(config.c_grid.size(), 0.0);
        const auto folds = stratified_folds(d_ori, static_cast<std::size_t>(config.folds), derive_seed(seed, 2));
        int used = 0;
        for (std::size_t f = 0; f < folds.size(); ++f) {
            const Dataset held = d_ori.subset(folds[f]);
            const Dataset rest = d_ori.subset(complement(d_ori.size(), folds[f]));
            const auto counts = rest.class_counts();
            if (held.empty() || std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) < 2) continue;
            const CostAssessor fold(rest, rest, encoder, config);
            const std::uint64_t fs = derive_seed(seed, {3, f});
            const NullStats fst = mean_sd(bootstrap_gaps(fold, rest, n_b, config.cv_runs, derive_seed(fs, 0)));
            const auto nulls = bootstrap_gaps(fold, rest, n_b, config.cv_runs, derive_seed(fs, 1));
            std::vector<double> informative;
            for (int r = 0; r < config.cv_runs; ++r) {
                const auto s = static_cast<std::uint64_t>(r);
                const auto batch = bootstrap_sample(held, n_b, derive_seed(fs, {2, s, 0}), 0);
                informative.push_back(fold.assess(batch, 0.0, derive_seed(fs, {2, s, 1})).delta);
            }
            for (std::size_t g = 0; g < config.c_grid.size(); ++g) {
                const double tau = fst.mean + config.c_grid[g] * fst.sd;
                const double tpr = static_cast<double>(std::count_if(informative.begin(), informative.end(),
                                                                     [&](double d) { return d > tau; })) /
                                   static_cast<double>(informative.size());
                const double tnr = static_cast<double>(std::count_if(nulls.begin(), nulls.end(), [&](double d) { return d <= tau; })) /
                                   static_cast<double>(nulls.size());
                score[g] += 0.5 * (tpr + tnr);
            }
            ++used;
        }
        if (used > 0) {
            for (auto& s : score) s /= used;
            std::size_t best = 0;
            for (std::size_t g = 1; g < score.size(); ++g)
                if (score[g] > score[best] || (score[g] == score[best] && config.c_grid[g] > config.c_grid[best])) best = g;
            cal.c = config.c_grid[best];
            cal.c_scores = score;
        }
    }
    cal.tau = cal.mean + cal.c * cal.sd;
    return cal;
}

}  // namespace t2
