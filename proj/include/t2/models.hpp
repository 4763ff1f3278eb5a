#pragma once

#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "t2/encoding.hpp"
#include "t2/error.hpp"
#include "t2/logistic.hpp"
#include "t2/metrics.hpp"
#include "t2/mlp.hpp"
#include "t2/tabular.hpp"

namespace t2 {

struct ModelSpec {
    enum class Family { logistic, feedforward };
    Family family = Family::logistic;
    double lambda = 1.0;
    int hidden = 16;
    int epochs = 500;
    double learning_rate = 0.05;
    std::uint64_t seed = 0;

    static ModelSpec logistic(double lambda = 1.0) {
        ModelSpec s;
        s.lambda = lambda;
        return s;
    }
    static ModelSpec feedforward(int hidden = 16, int epochs = 500, double lr = 0.05, std::uint64_t seed = 0) {
        ModelSpec s;
        s.family = Family::feedforward;
        s.hidden = hidden;
        s.epochs = epochs;
        s.learning_rate = lr;
        s.seed = seed;
        return s;
    }

    std::string name() const { return family == Family::logistic ? "logistic" : "feedforward"; }

    void validate() const {
        if (family == Family::logistic && !(lambda > 0.0)) throw ConfigError("logistic model needs lambda > 0");
        if (family == Family::feedforward && (hidden < 1 || epochs < 1 || !(learning_rate > 0.0)))
            throw ConfigError("feedforward model needs hidden >= 1, epochs >= 1, learning_rate > 0");
    }
};

inline Json model_spec_to_json(const ModelSpec& s) {
    if (s.family == ModelSpec::Family::logistic) return {{"family", "logistic"}, {"lambda", s.lambda}};
    return {{"family", "feedforward"}, {"hidden", s.hidden}, {"epochs", s.epochs},
            {"learning_rate", s.learning_rate}, {"seed", s.seed}};
}

inline ModelSpec model_spec_from_json(const Json& j) {
    try {
        const auto family = j.value("family", std::string("logistic"));
        ModelSpec s;
        if (family == "logistic") {
            s = ModelSpec::logistic(j.value("lambda", 1.0));
        } else if (family == "feedforward") {
            s = ModelSpec::feedforward(j.value("hidden", 16), j.value("epochs", 500), j.value("learning_rate", 0.05),
                                       j.value("seed", std::uint64_t{0}));
        } else {
            throw ConfigError("unknown model family '" + family + "'");
        }
        s.validate();
        return s;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed model spec: ") + e.what());
    }
}

/// A fitted downstream classifier over the full schema label space.
/// Classes absent from the training data receive small but nonzero mass.
class TrainedModel {
public:
    TrainedModel(ModelSpec spec, Encoder encoder, std::variant<LogisticFit, Mlp> fit)
        : spec_(std::move(spec)), encoder_(std::move(encoder)), fit_(std::move(fit)) {}

    const ModelSpec& spec() const noexcept { return spec_; }
    const Encoder& encoder() const noexcept { return encoder_; }
    const std::vector<std::string>& classes() const { return encoder_.schema().classes(); }
    const std::variant<LogisticFit, Mlp>& fit() const noexcept { return fit_; }

    Eigen::VectorXd predict_proba(const Record& r) const { return predict_proba_encoded(encoder_.encode(r)); }

    Eigen::MatrixXd predict_proba(const std::vector<Record>& records) const {
        const Eigen::MatrixXd X = encoder_.encode(records);
        if (const auto* mlp = std::get_if<Mlp>(&fit_)) return mlp->predict_proba(X);
        Eigen::MatrixXd P(X.rows(), static_cast<Eigen::Index>(classes().size()));
        for (Eigen::Index i = 0; i < X.rows(); ++i) P.row(i) = predict_proba_encoded(X.row(i).transpose()).transpose();
        return P;
    }

    std::vector<int> predict(const std::vector<Record>& records) const {
        const Eigen::MatrixXd P = predict_proba(records);
        std::vector<int> out;
        for (Eigen::Index i = 0; i < P.rows(); ++i) {
            Eigen::Index best;
            P.row(i).maxCoeff(&best);
            out.push_back(static_cast<int>(best));
        }
        return out;
    }

private:
    Eigen::VectorXd predict_proba_encoded(const Eigen::VectorXd& x) const {
        if (const auto* lf = std::get_if<LogisticFit>(&fit_)) return lf->probabilities(x);
        return std::get<Mlp>(fit_).predict_proba(x.transpose()).row(0).transpose();
    }

    ModelSpec spec_;
    Encoder encoder_;
    std::variant<LogisticFit, Mlp> fit_;
};

/// Fits `spec` on `dataset` with features encoded by `encoder` (whose
/// statistics normally come from D_ori).
inline TrainedModel train(const ModelSpec& spec, const Dataset& dataset, const Encoder& encoder) {
    spec.validate();
    if (dataset.size() < 2) throw FitError("train: need at least 2 records");
    const auto counts = dataset.class_counts();
    if (std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) < 2)
        throw FitError("train: need at least 2 classes present");
    const Eigen::MatrixXd X = encoder.encode(dataset.records());
    const std::vector<int> y = encoder.labels(dataset.records());
    const int k = static_cast<int>(dataset.schema().num_classes());
    if (spec.family == ModelSpec::Family::logistic) {
        LogisticOptions opts;
        opts.lambda = spec.lambda;
        return TrainedModel(spec, encoder, fit_logistic(X, y, k, opts));
    }
    Mlp mlp(static_cast<int>(X.cols()), spec.hidden, k);
    mlp.initialize(spec.seed);
    MlpOptions opts;
    opts.hidden = spec.hidden;
    opts.epochs = spec.epochs;
    opts.learning_rate = spec.learning_rate;
    mlp.train(X, y, opts);
    return TrainedModel(spec, encoder, std::move(mlp));
}

inline TrainedModel train(const ModelSpec& spec, const Dataset& dataset) {
    return train(spec, dataset, Encoder::fit(dataset));
}

}  // namespace t2
