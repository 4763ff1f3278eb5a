#pragma once

#include <algorithm>
#include <numeric>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "t2/error.hpp"

namespace t2 {

/// Mann–Whitney AUC: probability a random positive outscores a random
/// negative, ties counted as ½. `labels` are 0/1.
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw DataError("auc: score/label length mismatch");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos_rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) {
                pos_rank_sum += mid_rank;
                ++n_pos;
            }
        i = j;
    }
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw DataError("auc: both classes must be present");
    const double np = static_cast<double>(n_pos);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

/// One-vs-rest macro AUC over the classes that occur (with at least one
/// non-member) in `labels`; column c of `probs` scores class c.
inline double auc_ovr_macro(const Eigen::MatrixXd& probs, const std::vector<int>& labels) {
    if (static_cast<std::size_t>(probs.rows()) != labels.size()) throw DataError("auc: row/label mismatch");
    double total = 0.0;
    int used = 0;
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
        std::vector<int> bin(labels.size());
        std::size_t pos = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) pos += (bin[i] = labels[i] == c ? 1 : 0);
        if (pos == 0 || pos == labels.size()) continue;
        std::vector<double> s(probs.col(c).data(), probs.col(c).data() + probs.rows());
        total += auc(s, bin);
        ++used;
    }
    if (used == 0) throw DataError("auc: labels contain a single class");
    return total / used;
}

struct ClassificationMetrics {
    double accuracy = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Accuracy, recall and F1. Two-class problems report the positive class
/// (index 1); larger label spaces macro-average over classes present in
/// either vector. Undefined precision/recall terms count as 0.
inline ClassificationMetrics classification_metrics(const std::vector<int>& predicted, const std::vector<int>& truth,
                                                    int num_classes) {
    if (predicted.size() != truth.size()) throw DataError("classification_metrics: length mismatch");
    if (truth.empty()) throw DataError("classification_metrics: empty input");
    auto per_class = [&](int c, double& recall, double& f1) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            tp += predicted[i] == c && truth[i] == c;
            fp += predicted[i] == c && truth[i] != c;
            fn += predicted[i] != c && truth[i] == c;
        }
        const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
        recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
        f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    };
    ClassificationMetrics m;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
    m.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
    if (num_classes == 2) {
        per_class(1, m.recall, m.f1);
        return m;
    }
    std::set<int> present(truth.begin(), truth.end());
    present.insert(predicted.begin(), predicted.end());
    for (int c : present) {
        double r, f;
        per_class(c, r, f);
        m.recall += r;
        m.f1 += f;
    }
    m.recall /= static_cast<double>(present.size());
    m.f1 /= static_cast<double>(present.size());
    return m;
}

}  // namespace t2
