#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "t2/error.hpp"
#include "t2/tabular.hpp"

namespace t2 {

/// Maps records to numeric vectors: continuous cells z-scored with stored
/// statistics, categorical cells one-hot encoded and multiplied by
/// `categorical_scale`. Statistics come from the dataset passed to `fit`
/// (D_ori throughout the pipeline).
class Encoder {
public:
    Encoder() = default;

    static Encoder fit(const Dataset& reference, double categorical_scale = 1.0, bool standardize = true) {
        Encoder e;
        e.schema_ = reference.schema();
        e.scale_ = categorical_scale;
        const auto d = e.schema_.dimension();
        e.mean_.assign(d, 0.0);
        e.sd_.assign(d, 1.0);
        for (std::size_t j = 0; j < d; ++j) {
            if (!e.schema_.feature(j).is_continuous() || !standardize || reference.empty()) continue;
            double sum = 0.0, sq = 0.0;
            for (const auto& r : reference.records()) sum += r.number(j);
            const double mean = sum / static_cast<double>(reference.size());
            for (const auto& r : reference.records()) sq += (r.number(j) - mean) * (r.number(j) - mean);
            const double sd = std::sqrt(sq / static_cast<double>(reference.size()));
            e.mean_[j] = mean;
            e.sd_[j] = sd > 1e-12 ? sd : 1.0;
        }
        return e;
    }

    /// Same statistics, different categorical scaling.
    Encoder with_categorical_scale(double scale) const {
        Encoder e = *this;
        e.scale_ = scale;
        return e;
    }

    const Schema& schema() const noexcept { return schema_; }
    const std::vector<double>& means() const noexcept { return mean_; }
    const std::vector<double>& sds() const noexcept { return sd_; }
    double categorical_scale() const noexcept { return scale_; }

    std::size_t width() const {
        std::size_t w = 0;
        for (const auto& f : schema_.features()) w += f.is_continuous() ? 1 : f.categories().size();
        return w;
    }

    Eigen::VectorXd encode(const Record& r) const {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width()));
        Eigen::Index pos = 0;
        for (std::size_t j = 0; j < schema_.dimension(); ++j) {
            const auto& f = schema_.feature(j);
            if (f.is_continuous()) {
                x[pos++] = (r.number(j) - mean_[j]) / sd_[j];
            } else {
                auto idx = f.category_index(r.text(j));
                if (!idx) throw DataError("encode: unknown category '" + r.text(j) + "' for '" + f.name + "'");
                x[pos + static_cast<Eigen::Index>(*idx)] = scale_;
                pos += static_cast<Eigen::Index>(f.categories().size());
            }
        }
        return x;
    }

    Eigen::MatrixXd encode(const std::vector<Record>& records) const {
        Eigen::MatrixXd X(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(width()));
        for (std::size_t i = 0; i < records.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = encode(records[i]).transpose();
        return X;
    }

    std::vector<int> labels(const std::vector<Record>& records) const {
        std::vector<int> y;
        y.reserve(records.size());
        for (const auto& r : records) {
            auto c = schema_.class_index(r.label);
            if (!c) throw DataError("unknown label '" + r.label + "'");
            y.push_back(static_cast<int>(*c));
        }
        return y;
    }

private:
    Schema schema_;
    std::vector<double> mean_;
    std::vector<double> sd_;
    double scale_ = 1.0;
};

}  // namespace t2
