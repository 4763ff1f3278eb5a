#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "t2/error.hpp"
#include "t2/random.hpp"
#include "t2/tabular.hpp"

namespace t2 {

/// Largest-remainder apportionment of `total` over nonnegative `weights`.
/// Remainder ties go to the lower index.
inline std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights) {
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("apportion: weights must be finite and nonnegative");
        sum += w;
    }
    if (weights.empty() || sum <= 0.0) throw ConfigError("apportion: weights must have a positive sum");
    std::vector<std::size_t> counts(weights.size());
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double quota = static_cast<double>(total) * weights[i] / sum;
        counts[i] = static_cast<std::size_t>(std::floor(quota + 1e-12));
        assigned += counts[i];
        rem.emplace_back(quota - static_cast<double>(counts[i]), i);
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < total && k < rem.size(); ++k) {
        if (weights[rem[k].second] <= 0.0) continue;
        ++counts[rem[k].second];
        ++assigned;
    }
    return counts;
}

/// n draws with replacement; every row tagged bootstrap(batch).
inline DataBatch bootstrap_sample(const Dataset& dataset, std::size_t n, std::uint64_t seed, int batch = 0) {
    if (n > 0 && dataset.empty()) throw DataError("bootstrap_sample: cannot draw from an empty dataset");
    Rng rng(seed);
    DataBatch out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(dataset[uniform_index(rng, dataset.size())], Provenance::bootstrap(batch));
    return out;
}

/// Record indices grouped by class index.
inline std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& dataset) {
    std::vector<std::vector<std::size_t>> groups(dataset.schema().num_classes());
    for (std::size_t i = 0; i < dataset.size(); ++i) groups[*dataset.schema().class_index(dataset[i].label)].push_back(i);
    return groups;
}

/// Splits into (first, second) with |first| ≈ fraction·n, apportioned per class.
/// Each class keeps at least one record on each side.
inline std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("stratified_split: fraction must lie in (0,1)");
    auto groups = indices_by_class(dataset);
    std::vector<double> weights;
    for (const auto& g : groups) {
        if (g.size() == 1) throw DataError("stratified_split: class '" + dataset[g[0]].label + "' has fewer than 2 records");
        weights.push_back(static_cast<double>(g.size()));
    }
    if (dataset.empty()) return {dataset, dataset};
    const auto total = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(dataset.size()) + 0.5));
    auto counts = apportion(total, weights);
    Rng rng(seed);
    std::vector<std::size_t> first, second;
    for (std::size_t c = 0; c < groups.size(); ++c) {
        auto g = groups[c];
        if (g.empty()) continue;
        std::shuffle(g.begin(), g.end(), rng);
        const std::size_t take = std::clamp<std::size_t>(counts[c], 1, g.size() - 1);
        first.insert(first.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(take));
        second.insert(second.end(), g.begin() + static_cast<std::ptrdiff_t>(take), g.end());
    }
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    return {dataset.subset(first), dataset.subset(second)};
}

/// k folds of record indices, class-balanced: each class is shuffled and dealt
/// round-robin, continuing the deal position across classes.
inline std::vector<std::vector<std::size_t>> stratified_folds(const Dataset& dataset, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("stratified_folds: need at least 2 folds");
    if (dataset.size() < k) throw DataError("stratified_folds: fewer records than folds");
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t pos = 0;
    for (auto g : indices_by_class(dataset)) {
        std::shuffle(g.begin(), g.end(), rng);
        for (auto i : g) folds[pos++ % k].push_back(i);
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

/// Indices [0, n) not in `excluded` (which must be sorted).
inline std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& excluded) {
    std::vector<std::size_t> out;
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (k < excluded.size() && excluded[k] == i) {
            ++k;
            continue;
        }
        out.push_back(i);
    }
    return out;
}

}  // namespace t2
