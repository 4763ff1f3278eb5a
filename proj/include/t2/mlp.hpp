#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "t2/error.hpp"
#include "t2/random.hpp"

namespace t2 {

struct MlpOptions {
    int hidden = 16;
    int epochs = 500;
    double learning_rate = 0.05;
    double weight_decay = 1e-4;
    /// Training stops early once the mean loss falls below this value.
    double target_loss = 0.0;
};

/// One hidden layer of rectified units with a softmax output, trained on
/// the mean cross-entropy (plus L2 on weights) by full-batch Adam.
/// Parameters are flattened as [W1 (h×p, column-major), b1, W2 (K×h), b2].
class Mlp {
public:
    Mlp() = default;
    Mlp(int inputs, int hidden, int classes) : p_(inputs), h_(hidden), k_(classes) {
        if (inputs < 1 || hidden < 1 || classes < 2) throw FitError("mlp: invalid layer sizes");
        theta_ = Eigen::VectorXd::Zero(size());
    }

    Eigen::Index size() const { return Eigen::Index(h_) * p_ + h_ + Eigen::Index(k_) * h_ + k_; }
    const Eigen::VectorXd& parameters() const { return theta_; }
    void set_parameters(const Eigen::VectorXd& t) {
        if (t.size() != size()) throw FitError("mlp: parameter size mismatch");
        theta_ = t;
    }
    int inputs() const { return p_; }
    int classes() const { return k_; }

    void initialize(std::uint64_t seed) {
        Rng rng(seed);
        std::normal_distribution<double> n1(0.0, std::sqrt(2.0 / p_));
        std::normal_distribution<double> n2(0.0, std::sqrt(1.0 / h_));
        theta_.setZero();
        for (Eigen::Index i = 0; i < Eigen::Index(h_) * p_; ++i) theta_[i] = n1(rng);
        const Eigen::Index w2 = Eigen::Index(h_) * p_ + h_;
        for (Eigen::Index i = 0; i < Eigen::Index(k_) * h_; ++i) theta_[w2 + i] = n2(rng);
    }

    Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& X) const { return forward(theta_, X).probs; }

    /// Mean cross-entropy + ½·decay·‖W‖² and its gradient at `theta`.
    double loss(const Eigen::VectorXd& theta, const Eigen::MatrixXd& X, const std::vector<int>& y, double decay,
                Eigen::VectorXd* grad = nullptr) const {
        const auto n = X.rows();
        if (n == 0 || static_cast<std::size_t>(n) != y.size()) throw FitError("mlp: empty or mismatched data");
        auto fw = forward(theta, X);
        const Views v = views(theta);
        double f = 0.0;
        Eigen::MatrixXd dZ = fw.probs;  // n × K
        for (Eigen::Index i = 0; i < n; ++i) {
            const int c = y[static_cast<std::size_t>(i)];
            f -= std::log(std::max(fw.probs(i, c), 1e-300));
            dZ(i, c) -= 1.0;
        }
        f /= static_cast<double>(n);
        dZ /= static_cast<double>(n);
        f += 0.5 * decay * (v.W1.squaredNorm() + v.W2.squaredNorm());
        if (grad) {
            grad->resize(size());
            Eigen::Map<Eigen::MatrixXd> gW1(grad->data(), h_, p_);
            Eigen::Map<Eigen::VectorXd> gb1(grad->data() + Eigen::Index(h_) * p_, h_);
            Eigen::Map<Eigen::MatrixXd> gW2(grad->data() + Eigen::Index(h_) * p_ + h_, k_, h_);
            Eigen::Map<Eigen::VectorXd> gb2(grad->data() + Eigen::Index(h_) * p_ + h_ + Eigen::Index(k_) * h_, k_);
            gW2 = dZ.transpose() * fw.hidden + decay * v.W2;
            gb2 = dZ.colwise().sum().transpose();
            Eigen::MatrixXd dH = dZ * v.W2;  // n × h
            dH = dH.cwiseProduct((fw.pre.array() > 0.0).cast<double>().matrix());
            gW1 = dH.transpose() * X + decay * v.W1;
            gb1 = dH.colwise().sum().transpose();
        }
        return f;
    }

    /// Full-batch Adam. Returns the final mean loss.
    double train(const Eigen::MatrixXd& X, const std::vector<int>& y, const MlpOptions& opts) {
        Eigen::VectorXd m = Eigen::VectorXd::Zero(size()), s = Eigen::VectorXd::Zero(size()), g;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        double f = loss(theta_, X, y, opts.weight_decay, &g);
        for (int t = 1; t <= opts.epochs; ++t) {
            if (f < opts.target_loss) break;
            m = b1 * m + (1 - b1) * g;
            s = b2 * s + (1 - b2) * g.cwiseProduct(g);
            const double c1 = 1 - std::pow(b1, t), c2 = 1 - std::pow(b2, t);
            theta_ -= opts.learning_rate * ((m / c1).array() / ((s / c2).array().sqrt() + eps)).matrix();
            f = loss(theta_, X, y, opts.weight_decay, &g);
            if (!std::isfinite(f)) throw FitError("mlp: training diverged");
        }
        return f;
    }

private:
    struct Views {
        Eigen::Map<const Eigen::MatrixXd> W1;
        Eigen::Map<const Eigen::VectorXd> b1;
        Eigen::Map<const Eigen::MatrixXd> W2;
        Eigen::Map<const Eigen::VectorXd> b2;
    };
    struct Forward {
        Eigen::MatrixXd pre, hidden, probs;
    };

    Views views(const Eigen::VectorXd& t) const {
        const double* d = t.data();
        const Eigen::Index o1 = Eigen::Index(h_) * p_, o2 = o1 + h_, o3 = o2 + Eigen::Index(k_) * h_;
        return {Eigen::Map<const Eigen::MatrixXd>(d, h_, p_), Eigen::Map<const Eigen::VectorXd>(d + o1, h_),
                Eigen::Map<const Eigen::MatrixXd>(d + o2, k_, h_), Eigen::Map<const Eigen::VectorXd>(d + o3, k_)};
    }

    Forward forward(const Eigen::VectorXd& t, const Eigen::MatrixXd& X) const {
        if (X.cols() != p_) throw FitError("mlp: input width mismatch");
        const Views v = views(t);
        Forward fw;
        fw.pre = (X * v.W1.transpose()).rowwise() + v.b1.transpose();
        fw.hidden = fw.pre.cwiseMax(0.0);
        Eigen::MatrixXd Z = (fw.hidden * v.W2.transpose()).rowwise() + v.b2.transpose();
        Eigen::VectorXd mx = Z.rowwise().maxCoeff();
        Z = (Z.colwise() - mx).array().exp().matrix();
        Eigen::VectorXd sums = Z.rowwise().sum();
        fw.probs = Z.array().colwise() / sums.array();
        return fw;
    }

    int p_ = 0, h_ = 0, k_ = 0;
    Eigen::VectorXd theta_;
};

}  // namespace t2
