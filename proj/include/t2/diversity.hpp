#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "t2/encoding.hpp"
#include "t2/error.hpp"
#include "t2/mlp.hpp"
#include "t2/random.hpp"
#include "t2/tabular.hpp"

namespace t2 {

struct SilhouetteResult {
    std::vector<double> scores;
    double mean = 0.0;
};

/// s(x) = (sep - coh) / max(coh, sep) with Euclidean distances; coh is the
/// mean distance to the rest of x's cluster, sep the smallest mean distance
/// to another cluster. Members of singleton clusters score 0.
inline SilhouetteResult silhouette(const Eigen::MatrixXd& points, const std::vector<int>& assignments) {
    const auto n = static_cast<std::size_t>(points.rows());
    if (assignments.size() != n) throw DataError("silhouette: assignment count mismatch");
    int m = 0;
    for (int a : assignments) {
        if (a < 0) throw DataError("silhouette: negative cluster label");
        m = std::max(m, a + 1);
    }
    std::vector<std::size_t> size(static_cast<std::size_t>(m), 0);
    for (int a : assignments) ++size[static_cast<std::size_t>(a)];
    if (std::count_if(size.begin(), size.end(), [](std::size_t s) { return s > 0; }) < 2)
        throw DataError("silhouette: need at least two nonempty clusters");
    SilhouetteResult out;
    out.scores.assign(n, 0.0);
    std::vector<double> sum(static_cast<std::size_t>(m));
    for (std::size_t i = 0; i < n; ++i) {
        const auto own = static_cast<std::size_t>(assignments[i]);
        if (size[own] == 1) continue;
        std::fill(sum.begin(), sum.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) sum[static_cast<std::size_t>(assignments[j])] += (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j))).norm();
        const double coh = sum[own] / static_cast<double>(size[own] - 1);
        double sep = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < sum.size(); ++c)
            if (c != own && size[c] > 0) sep = std::min(sep, sum[c] / static_cast<double>(size[c]));
        const double den = std::max(coh, sep);
        out.scores[i] = den > 0.0 ? (sep - coh) / den : 0.0;
    }
    for (double s : out.scores) out.mean += s;
    out.mean /= static_cast<double>(n);
    return out;
}

struct KMeansResult {
    Eigen::MatrixXd centroids;  // M × width
    std::vector<int> assignments;
    double inertia = 0.0;
};

namespace kmeans_detail {

inline int nearest(const Eigen::MatrixXd& centroids, const Eigen::RowVectorXd& x, double* dist2 = nullptr) {
    Eigen::Index best;
    const double d = (centroids.rowwise() - x).rowwise().squaredNorm().minCoeff(&best);
    if (dist2) *dist2 = d;
    return static_cast<int>(best);
}

/// Greedy k-means++: at each step draw 2 + ⌊ln M⌋ candidates by D²
/// weighting and keep the one giving the lowest potential.
inline Eigen::MatrixXd greedy_seed(const Eigen::MatrixXd& X, int m, Rng& rng) {
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd C(m, X.cols());
    C.row(0) = X.row(static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n))));
    Eigen::VectorXd d2 = (X.rowwise() - C.row(0)).rowwise().squaredNorm();
    const int trials = 2 + static_cast<int>(std::log(static_cast<double>(m)));
    for (int k = 1; k < m; ++k) {
        const double total = d2.sum();
        Eigen::Index best = -1;
        double best_pot = std::numeric_limits<double>::infinity();
        Eigen::VectorXd best_d2;
        for (int t = 0; t < trials; ++t) {
            Eigen::Index cand = 0;
            if (total > 0.0) {
                double u = uniform01(rng) * total;
                for (cand = 0; cand < n - 1 && u >= d2[cand]; ++cand) u -= d2[cand];
            } else {
                cand = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n)));
            }
            Eigen::VectorXd nd = d2.cwiseMin((X.rowwise() - X.row(cand)).rowwise().squaredNorm());
            const double pot = nd.sum();
            if (pot < best_pot) {
                best_pot = pot;
                best = cand;
                best_d2 = std::move(nd);
            }
        }
        C.row(k) = X.row(best);
        d2 = std::move(best_d2);
    }
    return C;
}

}  // namespace kmeans_detail

/// Lloyd iterations from one greedy k-means++ seeding; an emptied cluster is
/// moved to the point farthest from its centroid.
inline KMeansResult kmeans_once(const Eigen::MatrixXd& X, int m, Rng& rng, int max_iterations = 300) {
    const Eigen::Index n = X.rows();
    KMeansResult r;
    r.centroids = kmeans_detail::greedy_seed(X, m, rng);
    r.assignments.assign(static_cast<std::size_t>(n), -1);
    for (int it = 0; it < max_iterations; ++it) {
        bool changed = false;
        Eigen::VectorXd dist(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int a = kmeans_detail::nearest(r.centroids, X.row(i), &dist[i]);
            if (a != r.assignments[static_cast<std::size_t>(i)]) {
                r.assignments[static_cast<std::size_t>(i)] = a;
                changed = true;
            }
        }
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(m, X.cols());
        std::vector<int> count(static_cast<std::size_t>(m), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int a = r.assignments[static_cast<std::size_t>(i)];
            sums.row(a) += X.row(i);
            ++count[static_cast<std::size_t>(a)];
        }
        for (int c = 0; c < m; ++c) {
            if (count[static_cast<std::size_t>(c)] > 0) {
                r.centroids.row(c) = sums.row(c) / count[static_cast<std::size_t>(c)];
            } else {
                Eigen::Index far;
                dist.maxCoeff(&far);
                r.centroids.row(c) = X.row(far);
                dist[far] = 0.0;
                changed = true;
            }
        }
        if (!changed) break;
    }
    r.inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double d2;
        r.assignments[static_cast<std::size_t>(i)] = kmeans_detail::nearest(r.centroids, X.row(i), &d2);
        r.inertia += d2;
    }
    return r;
}

/// Best of `restarts` runs by within-cluster sum of squares.
inline KMeansResult kmeans(const Eigen::MatrixXd& X, int m, int restarts, std::uint64_t seed) {
    if (m < 2 || X.rows() < m) throw DataError("kmeans: need 2 <= M <= number of points");
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < std::max(1, restarts); ++r) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
        auto cur = kmeans_once(X, m, rng);
        if (cur.inertia < best.inertia) best = std::move(cur);
    }
    return best;
}

struct DiversityConfig {
    enum class Mode { relative, headroom, absolute };
    std::vector<int> grid = {3, 4, 5};
    int restarts = 10;
    double threshold = 0.30;
    Mode mode = Mode::relative;
    bool refined = true;        // inspect D̄_t rather than D_t
    bool accumulated = false;   // measure against accumulated D rather than D_ori
    int hidden = 32;
    int epochs = 200;
    double learning_rate = 0.05;

    void validate() const {
        if (grid.empty()) throw ConfigError("diversity: empty cluster grid");
        for (int m : grid)
            if (m < 2) throw ConfigError("diversity: cluster counts must be >= 2");
        if (!(threshold >= 0.0)) throw ConfigError("diversity: threshold must be >= 0");
        if (restarts < 1 || hidden < 1 || epochs < 1 || !(learning_rate > 0.0))
            throw ConfigError("diversity: restarts, hidden, epochs and learning_rate must be positive");
    }

    static const char* mode_name(Mode m) {
        switch (m) {
            case Mode::relative: return "relative";
            case Mode::headroom: return "headroom";
            case Mode::absolute: return "absolute";
        }
        return "relative";
    }
};

inline Json diversity_config_to_json(const DiversityConfig& c) {
    return {{"grid", c.grid},         {"restarts", c.restarts}, {"threshold", c.threshold},
            {"mode", DiversityConfig::mode_name(c.mode)}, {"refined", c.refined}, {"accumulated", c.accumulated},
            {"hidden", c.hidden},     {"epochs", c.epochs},     {"learning_rate", c.learning_rate}};
}

inline DiversityConfig diversity_config_from_json(const Json& j) {
    DiversityConfig c;
    try {
        c.grid = j.value("grid", c.grid);
        c.restarts = j.value("restarts", c.restarts);
        c.threshold = j.value("threshold", c.threshold);
        const auto mode = j.value("mode", std::string("relative"));
        if (mode == "relative") c.mode = DiversityConfig::Mode::relative;
        else if (mode == "headroom") c.mode = DiversityConfig::Mode::headroom;
        else if (mode == "absolute") c.mode = DiversityConfig::Mode::absolute;
        else throw ConfigError("diversity: unknown mode '" + mode + "'");
        c.refined = j.value("refined", c.refined);
        c.accumulated = j.value("accumulated", c.accumulated);
        c.hidden = j.value("hidden", c.hidden);
        c.epochs = j.value("epochs", c.epochs);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed diversity config: ") + e.what());
    }
    c.validate();
    return c;
}

/// Clustering of D_ori in the distance geometry: z-scored continuous
/// features, one-hot categoricals scaled by 1/√2.
struct ClusterModel {
    Encoder encoder;
    Eigen::MatrixXd centroids;
    std::vector<int> assignments;  // D_ori records
    std::vector<std::pair<int, double>> silhouettes;  // (M, mean) over the grid
    std::uint64_t seed = 0;

    int num_clusters() const { return static_cast<int>(centroids.rows()); }
};

inline ClusterModel fit_clusters(const Dataset& d_ori, const DiversityConfig& config, std::uint64_t seed) {
    config.validate();
    const int max_m = *std::max_element(config.grid.begin(), config.grid.end());
    if (d_ori.size() <= static_cast<std::size_t>(max_m))
        throw DataError("fit_clusters: need more records than the largest cluster count");
    ClusterModel cm;
    cm.seed = seed;
    cm.encoder = Encoder::fit(d_ori, 1.0 / std::sqrt(2.0));
    const Eigen::MatrixXd X = cm.encoder.encode(d_ori.records());
    if (((X.rowwise() - X.row(0)).rowwise().squaredNorm().array() == 0.0).all())
        throw DataError("fit_clusters: all points are identical");
    double best = -std::numeric_limits<double>::infinity();
    for (int m : config.grid) {
        auto km = kmeans(X, m, config.restarts, derive_seed(seed, static_cast<std::uint64_t>(m)));
        std::vector<int> used = km.assignments;
        std::sort(used.begin(), used.end());
        double score = -1.0;
        if (std::unique(used.begin(), used.end()) - used.begin() >= 2) score = silhouette(X, km.assignments).mean;
        cm.silhouettes.emplace_back(m, score);
        if (score > best) {
            best = score;
            cm.centroids = km.centroids;
            cm.assignments = km.assignments;
        }
    }
    return cm;
}

/// One-hidden-layer ReLU network mapping encoded records to clusters.
class ClusterClassifier {
public:
    ClusterClassifier(Encoder encoder, Mlp net) : encoder_(std::move(encoder)), net_(std::move(net)) {}

    const Mlp& network() const noexcept { return net_; }

    std::vector<int> predict(const Eigen::MatrixXd& X) const {
        const Eigen::MatrixXd P = net_.predict_proba(X);
        std::vector<int> out(static_cast<std::size_t>(P.rows()));
        for (Eigen::Index i = 0; i < P.rows(); ++i) {
            Eigen::Index best;
            P.row(i).maxCoeff(&best);
            out[static_cast<std::size_t>(i)] = static_cast<int>(best);
        }
        return out;
    }

    std::vector<int> predict(const std::vector<Record>& records) const {
        return records.empty() ? std::vector<int>{} : predict(encoder_.encode(records));
    }

private:
    Encoder encoder_;
    Mlp net_;
};

inline ClusterClassifier train_cluster_classifier(const Eigen::MatrixXd& X, const std::vector<int>& labels, int num_clusters,
                                                  const Encoder& encoder, const DiversityConfig& config, std::uint64_t seed) {
    std::vector<std::size_t> count(static_cast<std::size_t>(num_clusters), 0);
    for (int l : labels) {
        if (l < 0 || l >= num_clusters) throw DataError("cluster classifier: label out of range");
        ++count[static_cast<std::size_t>(l)];
    }
    if (std::find(count.begin(), count.end(), 0u) != count.end())
        throw DataError("cluster classifier: every cluster needs a member");
    Mlp net(static_cast<int>(X.cols()), config.hidden, num_clusters);
    net.initialize(seed);
    MlpOptions o;
    o.hidden = config.hidden;
    o.epochs = config.epochs;
    o.learning_rate = config.learning_rate;
    net.train(X, labels, o);
    return ClusterClassifier(encoder, std::move(net));
}

inline ClusterClassifier train_cluster_classifier(const Dataset& d_ori, const ClusterModel& model, const DiversityConfig& config,
                                                  std::uint64_t seed) {
    return train_cluster_classifier(model.encoder.encode(d_ori.records()), model.assignments, model.num_clusters(), model.encoder,
                                    config, seed);
}

/// Natural-log entropy of the empirical distribution of `counts`.
inline double cluster_entropy(const std::vector<std::size_t>& counts) {
    double total = 0.0;
    for (auto c : counts) total += static_cast<double>(c);
    if (total <= 0.0) throw DataError("cluster_entropy: zero total count");
    double h = 0.0;
    for (auto c : counts)
        if (c > 0) {
            const double p = static_cast<double>(c) / total;
            h -= p * std::log(p);
        }
    return h;
}

struct DiversityReport {
    std::vector<int> assignments;        // batch records
    std::vector<double> base_proportions;
    std::vector<double> combined_proportions;
    double h_base = 0.0;
    double h_combined = 0.0;
    double delta_h = 0.0;
    double required = 0.0;
    bool accepted = false;
};

inline Json diversity_report_to_json(const DiversityReport& r) {
    return {{"assignments", r.assignments},
            {"base_proportions", r.base_proportions},
            {"combined_proportions", r.combined_proportions},
            {"h_base", r.h_base},
            {"h_combined", r.h_combined},
            {"delta_h", r.delta_h},
            {"required", r.required},
            {"decision", r.accepted ? "accept" : "reject"}};
}

/// Minimum ΔH_c demanded of a batch. relative: θ·H_c(base); headroom:
/// θ·(ln M - H_c(base)); absolute: θ. A zero requirement becomes ΔH_c > 0.
inline double required_gain(const DiversityConfig& config, double h_base, int num_clusters) {
    switch (config.mode) {
        case DiversityConfig::Mode::relative: return config.threshold * h_base;
        case DiversityConfig::Mode::headroom: return config.threshold * (std::log(static_cast<double>(num_clusters)) - h_base);
        case DiversityConfig::Mode::absolute: return config.threshold;
    }
    return config.threshold * h_base;
}

/// Entropy gate given the base dataset's cluster counts.
inline DiversityReport inspect_batch(const std::vector<std::size_t>& base_counts, const std::vector<Record>& batch,
                                     const ClusterClassifier& classifier, const DiversityConfig& config) {
    DiversityReport rep;
    rep.assignments = classifier.predict(batch);
    auto combined = base_counts;
    for (int a : rep.assignments) ++combined[static_cast<std::size_t>(a)];
    auto proportions = [](const std::vector<std::size_t>& c) {
        double total = 0.0;
        for (auto v : c) total += static_cast<double>(v);
        std::vector<double> p;
        for (auto v : c) p.push_back(static_cast<double>(v) / total);
        return p;
    };
    rep.base_proportions = proportions(base_counts);
    rep.combined_proportions = proportions(combined);
    rep.h_base = cluster_entropy(base_counts);
    rep.h_combined = cluster_entropy(combined);
    rep.delta_h = rep.h_combined - rep.h_base;
    rep.required = required_gain(config, rep.h_base, static_cast<int>(base_counts.size()));
    rep.accepted = rep.required > 0.0 ? rep.delta_h >= rep.required : rep.delta_h > 0.0;
    return rep;
}

inline std::vector<std::size_t> cluster_counts(const std::vector<int>& assignments, int num_clusters) {
    std::vector<std::size_t> c(static_cast<std::size_t>(num_clusters), 0);
    for (int a : assignments) ++c.at(static_cast<std::size_t>(a));
    return c;
}

inline DiversityReport inspect_batch(const ClusterModel& model, const std::vector<Record>& batch,
                                     const ClusterClassifier& classifier, const DiversityConfig& config) {
    return inspect_batch(cluster_counts(model.assignments, model.num_clusters()), batch, classifier, config);
}

}  // namespace t2
