#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "t2/encoding.hpp"
#include "t2/error.hpp"
#include "t2/logistic.hpp"
#include "t2/metrics.hpp"
#include "t2/random.hpp"
#include "t2/tabular.hpp"

namespace t2 {

inline constexpr std::size_t kDetectionFolds = 5;

/// Cross-validated AUC of an L2 logistic classifier separating real (0) from
/// synthetic (1) records on features standardized over the pooled data.
/// Folds are stratified on the real/synth label and keep identical records
/// together; the score is the mean fold AUC. 0.5 means indistinguishable.
inline double detection_score(const Dataset& real, const Dataset& synth, std::uint64_t seed, double lambda = 1.0) {
    if (real.empty() || synth.empty()) throw DataError("detection_score: both datasets must be nonempty");
    if (!(real.schema() == synth.schema())) throw DataError("detection_score: schemas differ");
    const Dataset pooled = real.appended(DataBatch(synth.records(), Provenance::generated(0)));
    const auto encoder = Encoder::fit(pooled);
    const Eigen::MatrixXd X = encoder.encode(pooled.records());
    std::vector<int> y(pooled.size(), 0);
    std::fill(y.begin() + static_cast<std::ptrdiff_t>(real.size()), y.end(), 1);

    const std::size_t folds = std::min<std::size_t>(kDetectionFolds, std::min(real.size(), synth.size()));
    if (folds < 2) throw DataError("detection_score: need at least 2 records on each side");
    // Identical records share a fold: a copy left in training with the
    // opposite label would bias the held-out score below 0.5.
    std::map<std::pair<std::vector<double>, std::string>, std::size_t> group_of;
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < pooled.size(); ++i) {
        const Eigen::VectorXd row = X.row(static_cast<Eigen::Index>(i));
        auto [it, fresh] = group_of.try_emplace({std::vector<double>(row.data(), row.data() + row.size()), pooled[i].label},
                                                groups.size());
        if (fresh) groups.emplace_back();
        groups[it->second].push_back(i);
    }
    // stratify: groups holding only real, only synthetic, then mixed
    std::vector<std::vector<std::size_t>> kinds(3);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        bool has_real = false, has_synth = false;
        for (auto i : groups[g]) (y[i] ? has_synth : has_real) = true;
        kinds[has_real && has_synth ? 2 : (has_synth ? 1 : 0)].push_back(g);
    }
    Rng rng(seed);
    std::vector<std::size_t> fold_of(pooled.size());
    std::size_t pos = 0;
    for (auto& kind : kinds) {
        std::shuffle(kind.begin(), kind.end(), rng);
        for (auto g : kind) {
            for (auto i : groups[g]) fold_of[i] = pos % folds;
            ++pos;
        }
    }

    LogisticOptions opts;
    opts.lambda = lambda;
    double total = 0.0;
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> train_idx, test_idx;
        for (std::size_t i = 0; i < pooled.size(); ++i) (fold_of[i] == f ? test_idx : train_idx).push_back(static_cast<Eigen::Index>(i));
        std::vector<int> ytr, yte;
        for (auto i : train_idx) ytr.push_back(y[static_cast<std::size_t>(i)]);
        for (auto i : test_idx) yte.push_back(y[static_cast<std::size_t>(i)]);
        const auto fit = fit_logistic(X(train_idx, Eigen::all), ytr, 2, opts);
        std::vector<double> scores;
        for (auto i : test_idx) scores.push_back(fit.probabilities(X.row(i).transpose())[1]);
        total += auc(scores, yte);
    }
    return total / static_cast<double>(folds);
}

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
};

namespace quality_detail {

inline Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    Eigen::MatrixXd D(A.rows(), B.rows());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < B.rows(); ++j) D(i, j) = (A.row(i) - B.row(j)).norm();
    return D;
}

/// Distance from each row to its k-th nearest other row.
inline std::vector<double> knn_radius(const Eigen::MatrixXd& self_dist, std::size_t k) {
    std::vector<double> out;
    for (Eigen::Index i = 0; i < self_dist.rows(); ++i) {
        std::vector<double> d;
        for (Eigen::Index j = 0; j < self_dist.cols(); ++j)
            if (j != i) d.push_back(self_dist(i, j));
        std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k - 1), d.end());
        out.push_back(d[k - 1]);
    }
    return out;
}

/// Fraction of `probe` rows lying within the k-NN radius of their nearest
/// `support` row.
inline double coverage(const Eigen::MatrixXd& probe_to_support, const std::vector<double>& support_radius) {
    std::size_t inside = 0;
    for (Eigen::Index i = 0; i < probe_to_support.rows(); ++i) {
        Eigen::Index nearest;
        const double d = probe_to_support.row(i).minCoeff(&nearest);
        inside += d <= support_radius[static_cast<std::size_t>(nearest)];
    }
    return static_cast<double>(inside) / static_cast<double>(probe_to_support.rows());
}

}  // namespace quality_detail

/// Nearest-neighbour support proxies for alpha-precision / beta-recall.
/// precision: share of synthetic points within the k-NN radius of their
/// nearest real point; recall: the same with the roles swapped. Features are
/// standardized with real-data statistics, categoricals one-hot scaled by
/// 1/sqrt(2) (so two different categories are at distance 1).
inline PrecisionRecall knn_precision_recall(const Dataset& real, const Dataset& synth, std::size_t k = 5) {
    if (k < 1) throw ConfigError("knn_precision_recall: k must be >= 1");
    if (real.size() <= k || synth.size() <= k)
        throw DataError("knn_precision_recall: both datasets need more than k records");
    const auto encoder = Encoder::fit(real, 1.0 / std::sqrt(2.0));
    const Eigen::MatrixXd R = encoder.encode(real.records());
    const Eigen::MatrixXd S = encoder.encode(synth.records());
    using namespace quality_detail;
    const auto real_radius = knn_radius(pairwise_distances(R, R), k);
    const auto synth_radius = knn_radius(pairwise_distances(S, S), k);
    const Eigen::MatrixXd SR = pairwise_distances(S, R);
    return {coverage(SR, real_radius), coverage(SR.transpose(), synth_radius)};
}

struct QualityReport {
    double detection = 0.5;
    double precision = 0.0;
    double recall = 0.0;
    std::size_t n_real = 0;
    std::size_t n_synth = 0;
    std::size_t k = 5;
};

inline Json quality_to_json(const QualityReport& q) {
    return {{"detection_auc", q.detection},
            {"precision_proxy", q.precision},
            {"recall_proxy", q.recall},
            {"n_real", q.n_real},
            {"n_synth", q.n_synth},
            {"k", q.k},
            {"note", "precision/recall are k-NN support proxies for alpha-precision/beta-recall"}};
}

inline QualityReport assess_quality(const Dataset& real, const Dataset& synth, std::uint64_t seed, std::size_t k = 5) {
    QualityReport q;
    q.n_real = real.size();
    q.n_synth = synth.size();
    q.k = k;
    q.detection = detection_score(real, synth, seed);
    const auto pr = knn_precision_recall(real, synth, k);
    q.precision = pr.precision;
    q.recall = pr.recall;
    return q;
}

}  // namespace t2
