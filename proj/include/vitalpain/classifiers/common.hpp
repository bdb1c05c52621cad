#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "../core.hpp"

namespace vitalpain {

/// Row-major sample matrix; one row per record.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::span<const double> row_span(const FeatureMatrix& x, Eigen::Index i) {
    return {x.data() + i * x.cols(), static_cast<std::size_t>(x.cols())};
}

/// Per-feature z-scoring fitted on a training matrix. Population sd; constant
/// features keep sd = 1.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> sd;

    static Standardizer fit(const FeatureMatrix& x) {
        Standardizer s;
        const auto d = static_cast<std::size_t>(x.cols());
        s.mean.assign(d, 0.0);
        s.sd.assign(d, 1.0);
        const double n = static_cast<double>(x.rows());
        for (std::size_t j = 0; j < d; ++j) {
            const auto col = x.col(static_cast<Eigen::Index>(j));
            const double mu = col.sum() / n;
            const double var = (col.array() - mu).square().sum() / n;
            s.mean[j] = mu;
            if (var > 0.0 && std::sqrt(var) > 1e-12 * std::max(1.0, std::abs(mu))) s.sd[j] = std::sqrt(var);
        }
        return s;
    }

    static Standardizer identity(std::size_t d) { return {std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)}; }

    FeatureMatrix apply(const FeatureMatrix& x) const {
        FeatureMatrix out(x.rows(), x.cols());
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index j = 0; j < x.cols(); ++j)
                out(i, j) = (x(i, j) - mean[static_cast<std::size_t>(j)]) / sd[static_cast<std::size_t>(j)];
        return out;
    }

    void apply(std::span<const double> in, std::span<double> out) const {
        for (std::size_t j = 0; j < in.size(); ++j) out[j] = (in[j] - mean[j]) / sd[j];
    }
};

/// Index of the largest count; ties go to the smallest index.
inline int argmax_smallest(std::span<const int> counts) {
    int best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c)
        if (counts[c] > counts[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
    return best;
}

inline int argmax_smallest(std::span<const double> scores) {
    int best = 0;
    for (std::size_t c = 1; c < scores.size(); ++c)
        if (scores[c] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
    return best;
}

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
        rows.push_back(r);
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(j[static_cast<std::size_t>(i)].size()) != cols)
            throw data_error("ragged matrix in model file");
        for (Eigen::Index j2 = 0; j2 < cols; ++j2)
            m(i, j2) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(j2)].get<double>();
    }
    return m;
}

} // namespace vitalpain
