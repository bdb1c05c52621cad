#pragma once

#include <numeric>

#include "../util.hpp"
#include "common.hpp"

namespace vitalpain {

struct SvmParams {
    double lambda = 1e-4;
    int epochs = 500;
};

/// One-vs-rest linear SVM. Each class has a weight vector whose last entry
/// multiplies a constant 1 (bias folded into the regularised weights).
struct SvmModel {
    Eigen::MatrixXd weights; // classes x (features + 1)

    /// Stochastic subgradient descent on the regularised hinge loss
    /// (lambda/2)||w||² + mean(max(0, 1 - y w·x)). Each epoch visits the rows
    /// in a seeded shuffled order; step t uses 1/(lambda t) with t counting
    /// every update, followed by projection onto the ball of radius 1/sqrt(lambda).
    static SvmModel fit(const FeatureMatrix& x, std::span<const int> y, std::size_t n_classes, const SvmParams& params,
                        std::uint64_t seed = 0) {
        const Eigen::Index n = x.rows();
        const Eigen::Index d = x.cols();
        FeatureMatrix xa(n, d + 1);
        xa.leftCols(d) = x;
        xa.col(d).setOnes();

        SvmModel m;
        m.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_classes), d + 1);
        const double radius = 1.0 / std::sqrt(params.lambda);
        std::vector<std::size_t> order(static_cast<std::size_t>(n));
        std::vector<double> sq(static_cast<std::size_t>(n));
        const auto cols = static_cast<std::size_t>(d + 1);
        for (Eigen::Index i = 0; i < n; ++i) sq[static_cast<std::size_t>(i)] = xa.row(i).squaredNorm();
        std::vector<double> w(cols);
        for (std::size_t k = 0; k < n_classes; ++k) {
            Rng rng = derive_rng(seed, 0x73766du, k);
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::fill(w.begin(), w.end(), 0.0);
            // the iterate is scale * w, so the shrink step is O(1); norm2 tracks ||scale * w||²
            double scale = 1.0, norm2 = 0.0;
            std::uint64_t t = 0;
            for (int epoch = 0; epoch < params.epochs; ++epoch) {
                std::shuffle(order.begin(), order.end(), rng);
                for (std::size_t i : order) {
                    ++t;
                    const double eta = 1.0 / (params.lambda * static_cast<double>(t));
                    const double sign = y[i] == static_cast<int>(k) ? 1.0 : -1.0;
                    const double* row = xa.data() + i * cols;
                    double dot = 0;
                    for (std::size_t c = 0; c < cols; ++c) dot += row[c] * w[c];
                    const double margin = sign * scale * dot;
                    const double shrink = 1.0 - eta * params.lambda;
                    if (shrink <= 0.0) {
                        std::fill(w.begin(), w.end(), 0.0);
                        scale = 1.0;
                        norm2 = 0.0;
                        dot = 0.0;
                    } else {
                        scale *= shrink;
                        norm2 *= shrink * shrink;
                    }
                    if (margin < 1.0) {
                        const double step = eta * sign;
                        const double a = step / scale;
                        for (std::size_t c = 0; c < cols; ++c) w[c] += a * row[c];
                        norm2 += 2.0 * step * scale * dot + step * step * sq[i];
                    }
                    if (norm2 > radius * radius) {
                        const double r = radius / std::sqrt(norm2);
                        scale *= r;
                        norm2 = radius * radius;
                    }
                }
                for (double& v : w) v *= scale;
                scale = 1.0;
                norm2 = 0.0;
                for (double v : w) norm2 += v * v;
            }
            for (std::size_t c = 0; c < cols; ++c) m.weights(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = w[c];
        }
        return m;
    }

    /// Class with the largest margin.
    int predict(std::span<const double> q) const {
        const Eigen::Index d = weights.cols() - 1;
        Eigen::Map<const Eigen::VectorXd> v(q.data(), d);
        const Eigen::VectorXd scores = weights.leftCols(d) * v + weights.col(d);
        return argmax_smallest(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())));
    }

    nlohmann::json to_json() const { return {{"weights", matrix_to_json(weights)}}; }

    static SvmModel from_json(const nlohmann::json& j) { return {matrix_from_json(j.at("weights"))}; }
};

} // namespace vitalpain
