#pragma once

#include "common.hpp"

namespace vitalpain {

struct LogisticParams {
    double learning_rate = 0.1;
    int epochs = 500;
    double l2 = 1e-4;
};

/// Softmax regression: logits = W x + b.
struct LogisticModel {
    Eigen::MatrixXd weights; // classes x features
    Eigen::VectorXd bias;    // classes

    static LogisticModel zeros(std::size_t n_classes, std::size_t n_features) {
        return {Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_classes), static_cast<Eigen::Index>(n_features)),
                Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_classes))};
    }

    /// Row-wise class probabilities, computed with max-subtraction.
    Eigen::MatrixXd probabilities(const FeatureMatrix& x) const {
        Eigen::MatrixXd logits = x * weights.transpose();
        logits.rowwise() += bias.transpose();
        const Eigen::VectorXd m = logits.rowwise().maxCoeff();
        logits = (logits.colwise() - m).array().exp().matrix();
        const Eigen::VectorXd total = logits.rowwise().sum();
        logits.array().colwise() /= total.array();
        return logits;
    }

    /// Mean cross-entropy plus (l2/2)·||W||². The bias is not penalised.
    double loss(const FeatureMatrix& x, std::span<const int> y, double l2) const {
        const Eigen::MatrixXd p = probabilities(x);
        double ce = 0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) ce -= std::log(std::max(p(i, y[static_cast<std::size_t>(i)]), 1e-300));
        return ce / static_cast<double>(x.rows()) + 0.5 * l2 * weights.squaredNorm();
    }

    /// Analytic gradient of loss() with respect to (W, b).
    std::pair<Eigen::MatrixXd, Eigen::VectorXd> gradient(const FeatureMatrix& x, std::span<const int> y, double l2) const {
        Eigen::MatrixXd residual = probabilities(x);
        for (Eigen::Index i = 0; i < x.rows(); ++i) residual(i, y[static_cast<std::size_t>(i)]) -= 1.0;
        const double inv_n = 1.0 / static_cast<double>(x.rows());
        Eigen::MatrixXd gw = inv_n * residual.transpose() * x + l2 * weights;
        Eigen::VectorXd gb = inv_n * residual.colwise().sum().transpose();
        return {std::move(gw), std::move(gb)};
    }

    static LogisticModel fit(const FeatureMatrix& x, std::span<const int> y, std::size_t n_classes,
                             const LogisticParams& params) {
        auto model = zeros(n_classes, static_cast<std::size_t>(x.cols()));
        for (int epoch = 0; epoch < params.epochs; ++epoch) {
            auto [gw, gb] = model.gradient(x, y, params.l2);
            model.weights -= params.learning_rate * gw;
            model.bias -= params.learning_rate * gb;
        }
        return model;
    }

    int predict(std::span<const double> q) const {
        Eigen::Map<const Eigen::VectorXd> v(q.data(), static_cast<Eigen::Index>(q.size()));
        const Eigen::VectorXd logits = weights * v + bias;
        return argmax_smallest(std::span<const double>(logits.data(), static_cast<std::size_t>(logits.size())));
    }

    nlohmann::json to_json() const {
        return {{"weights", matrix_to_json(weights)},
                {"bias", std::vector<double>(bias.data(), bias.data() + bias.size())}};
    }

    static LogisticModel from_json(const nlohmann::json& j) {
        LogisticModel m;
        m.weights = matrix_from_json(j.at("weights"));
        const auto b = j.at("bias").get<std::vector<double>>();
        m.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
        return m;
    }
};

/// Largest relative disagreement between the analytic gradient and central
/// differences with step h, over every weight and bias. The denominator is
/// max(|analytic|, |numeric|, 1e-6) so exactly-zero gradients compare on an
/// absolute scale.
inline double softmax_gradient_check(const LogisticModel& model, const FeatureMatrix& x, std::span<const int> y,
                                     double l2, double h = 1e-5) {
    const auto [gw, gb] = model.gradient(x, y, l2);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); };
    double worst = 0;
    LogisticModel probe = model;
    for (Eigen::Index r = 0; r < model.weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < model.weights.cols(); ++c) {
            const double w0 = model.weights(r, c);
            probe.weights(r, c) = w0 + h;
            const double up = probe.loss(x, y, l2);
            probe.weights(r, c) = w0 - h;
            const double down = probe.loss(x, y, l2);
            probe.weights(r, c) = w0;
            worst = std::max(worst, rel(gw(r, c), (up - down) / (2 * h)));
        }
        const double b0 = model.bias(r);
        probe.bias(r) = b0 + h;
        const double up = probe.loss(x, y, l2);
        probe.bias(r) = b0 - h;
        const double down = probe.loss(x, y, l2);
        probe.bias(r) = b0;
        worst = std::max(worst, rel(gb(r), (up - down) / (2 * h)));
    }
    return worst;
}

} // namespace vitalpain
