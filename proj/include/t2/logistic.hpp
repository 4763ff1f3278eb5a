#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "t2/error.hpp"

namespace t2 {

struct LogisticOptions {
    double lambda = 1.0;              // L2 strength on feature weights
    double intercept_penalty = 1e-4;  // L2 strength on intercepts
    bool fit_intercept = true;
    int max_iterations = 100;
    double tolerance = 1e-8;  // gradient norm
};

/// Multinomial logistic regression with class 0 as the reference class
/// (its logit is fixed at 0). With two classes this is ordinary binary
/// logistic regression. Parameters are flattened as K-1 consecutive blocks
/// [intercept, w_1..w_p].
class LogisticObjective {
public:
    LogisticObjective(const Eigen::MatrixXd& X, std::vector<int> y, int num_classes, LogisticOptions opts)
        : y_(std::move(y)), k_(num_classes), p_(X.cols()), opts_(opts) {
        if (num_classes < 2) throw FitError("logistic: need at least two classes");
        if (static_cast<std::size_t>(X.rows()) != y_.size()) throw FitError("logistic: row/label count mismatch");
        Xt_.resize(X.rows(), block());
        if (opts_.fit_intercept) {
            Xt_.col(0).setOnes();
            Xt_.rightCols(p_) = X;
        } else {
            Xt_ = X;
        }
        Y_ = Eigen::MatrixXd::Zero(X.rows(), k_);
        for (std::size_t i = 0; i < y_.size(); ++i) {
            if (y_[i] < 0 || y_[i] >= k_) throw FitError("logistic: label index out of range");
            Y_(static_cast<Eigen::Index>(i), y_[i]) = 1.0;
        }
    }

    Eigen::Index block() const { return p_ + (opts_.fit_intercept ? 1 : 0); }
    Eigen::Index size() const { return block() * (k_ - 1); }
    int num_classes() const { return k_; }
    const LogisticOptions& options() const { return opts_; }

    static Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
        Eigen::VectorXd p = (z.array() - z.maxCoeff()).exp();
        return p / p.sum();
    }

    /// n × K logits; column 0 (the reference class) is zero.
    Eigen::MatrixXd logits(const Eigen::VectorXd& theta) const {
        Eigen::MatrixXd Z(Xt_.rows(), k_);
        Z.col(0).setZero();
        Z.rightCols(k_ - 1) = Xt_ * Eigen::Map<const Eigen::MatrixXd>(theta.data(), block(), k_ - 1);
        return Z;
    }

    Eigen::MatrixXd probabilities(const Eigen::VectorXd& theta) const {
        Eigen::MatrixXd Z = logits(theta);
        const Eigen::VectorXd mx = Z.rowwise().maxCoeff();
        Z = (Z.colwise() - mx).array().exp().matrix();
        const Eigen::VectorXd sums = Z.rowwise().sum();
        return Z.array().colwise() / sums.array();
    }

    double penalty_weight(Eigen::Index flat) const {
        if (opts_.fit_intercept && flat % block() == 0) return opts_.intercept_penalty;
        return opts_.lambda;
    }

    /// Negative log-likelihood plus the L2 penalty.
    double value(const Eigen::VectorXd& theta) const {
        const Eigen::MatrixXd Z = logits(theta);
        const Eigen::VectorXd mx = Z.rowwise().maxCoeff();
        const Eigen::ArrayXd lse = mx.array() + (Z.colwise() - mx).array().exp().rowwise().sum().log();
        double f = lse.sum() - Z.cwiseProduct(Y_).sum();
        for (Eigen::Index j = 0; j < theta.size(); ++j) f += 0.5 * penalty_weight(j) * theta[j] * theta[j];
        return f;
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const {
        const Eigen::MatrixXd R = (probabilities(theta) - Y_).rightCols(k_ - 1);
        Eigen::MatrixXd G = Xt_.transpose() * R;
        Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(G.data(), G.size());
        for (Eigen::Index j = 0; j < theta.size(); ++j) g[j] += penalty_weight(j) * theta[j];
        return g;
    }

    Eigen::MatrixXd hessian(const Eigen::VectorXd& theta) const {
        Eigen::MatrixXd H = data_hessian(theta);
        for (Eigen::Index j = 0; j < theta.size(); ++j) H(j, j) += penalty_weight(j);
        return H;
    }

    /// Hessian of the negative log-likelihood alone (no penalty).
    Eigen::MatrixXd data_hessian(const Eigen::VectorXd& theta) const {
        const Eigen::Index b = block();
        const Eigen::MatrixXd P = probabilities(theta);
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(size(), size());
        for (int c = 1; c < k_; ++c) {
            for (int d = c; d < k_; ++d) {
                Eigen::VectorXd w = -P.col(c).cwiseProduct(P.col(d));
                if (c == d) w += P.col(c);
                const Eigen::MatrixXd blk = Xt_.transpose() * w.asDiagonal() * Xt_;
                H.block((c - 1) * b, (d - 1) * b, b, b) = blk;
                if (d != c) H.block((d - 1) * b, (c - 1) * b, b, b) = blk.transpose();
            }
        }
        return H;
    }

private:
    Eigen::MatrixXd Xt_;  // design with a leading ones column when fitting intercepts
    Eigen::MatrixXd Y_;   // one-hot labels
    std::vector<int> y_;
    int k_;
    Eigen::Index p_;
    LogisticOptions opts_;
};

struct LogisticFit {
    Eigen::VectorXd theta;
    int num_classes = 2;
    bool fit_intercept = true;
    int iterations = 0;
    double gradient_norm = 0.0;

    Eigen::VectorXd probabilities(const Eigen::VectorXd& x) const {
        const Eigen::Index b = x.size() + (fit_intercept ? 1 : 0);
        const Eigen::Index off = fit_intercept ? 1 : 0;
        Eigen::VectorXd z = Eigen::VectorXd::Zero(num_classes);
        for (int c = 1; c < num_classes; ++c) {
            const Eigen::Index s = (c - 1) * b;
            z[c] = (fit_intercept ? theta[s] : 0.0) + theta.segment(s + off, x.size()).dot(x);
        }
        return LogisticObjective::softmax(z);
    }
};

/// Damped Newton: full Newton step, halved until the objective decreases
/// (Armijo). Near the optimum the decrease drops below floating-point
/// resolution, so a full step that leaves f unchanged to roundoff but shrinks
/// the gradient is also taken. Stops at gradient norm below the tolerance or
/// the iteration cap.
inline LogisticFit fit_logistic(const Eigen::MatrixXd& X, const std::vector<int>& y, int num_classes,
                                const LogisticOptions& opts = {}) {
    LogisticObjective obj(X, y, num_classes, opts);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(obj.size());
    double f = obj.value(theta);
    Eigen::VectorXd g = obj.gradient(theta);
    int it = 0;
    for (; it < opts.max_iterations && g.norm() >= opts.tolerance; ++it) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(obj.hessian(theta));
        const Eigen::VectorXd step = ldlt.solve(g);
        if (!step.allFinite()) throw FitError("logistic: non-finite Newton step");
        const double slope = g.dot(step);
        double t = 1.0;
        Eigen::VectorXd next = theta - step;
        double fn = obj.value(next);
        Eigen::VectorXd gn;
        const bool flat = std::abs(fn - f) <= 1e-12 * std::max(1.0, std::abs(f));
        if (flat && (gn = obj.gradient(next)).norm() < g.norm()) {
            theta = std::move(next);
            f = fn;
            g = std::move(gn);
            continue;
        }
        while (!(fn <= f - 1e-4 * t * slope) && t > 1e-10) {
            t *= 0.5;
            next = theta - t * step;
            fn = obj.value(next);
        }
        if (!std::isfinite(fn)) throw FitError("logistic: objective diverged");
        if (t <= 1e-10) break;  // no further decrease possible at machine precision
        theta = std::move(next);
        f = fn;
        g = obj.gradient(theta);
    }
    if (!theta.allFinite()) throw FitError("logistic: non-finite parameters");
    return {theta, num_classes, opts.fit_intercept, it, g.norm()};
}

/// log det of a symmetric positive definite matrix via Cholesky.
inline double log_det_spd(const Eigen::MatrixXd& A) {
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) throw FitError("log_det: matrix is not positive definite");
    const Eigen::MatrixXd& L = llt.matrixLLT();
    double s = 0.0;
    for (Eigen::Index i = 0; i < L.rows(); ++i) s += std::log(L(i, i));
    return 2.0 * s;
}

}  // namespace t2
