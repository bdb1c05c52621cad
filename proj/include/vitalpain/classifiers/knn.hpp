#pragma once

#include <algorithm>
#include <numeric>
#include <utility>

#include "common.hpp"

namespace vitalpain {

/// Brute-force k-nearest-neighbour vote over the stored training set.
struct KnnModel {
    int k = 5;
    std::size_t n_classes = 0;
    FeatureMatrix points;
    std::vector<int> classes; // class index per training row

    static KnnModel fit(const FeatureMatrix& x, std::span<const int> y, std::size_t n_classes, int k) {
        return KnnModel{k, n_classes, x, std::vector<int>(y.begin(), y.end())};
    }

    /// Distance ties go to the lower training index, vote ties to the smaller class.
    int predict(std::span<const double> q) const {
        const auto n = static_cast<std::size_t>(points.rows());
        const auto d = static_cast<std::size_t>(points.cols());
        std::vector<std::pair<double, std::size_t>> dist(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double* p = points.data() + i * d;
            double s = 0;
            for (std::size_t j = 0; j < d; ++j) {
                const double t = p[j] - q[j];
                s += t * t;
            }
            dist[i] = {s, i};
        }
        const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), n);
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
        std::vector<int> votes(n_classes, 0);
        for (std::size_t i = 0; i < kk; ++i) ++votes[static_cast<std::size_t>(classes[dist[i].second])];
        return argmax_smallest(std::span<const int>(votes));
    }

    nlohmann::json to_json() const {
        return {{"k", k}, {"points", matrix_to_json(points)}, {"classes", classes}};
    }

    static KnnModel from_json(const nlohmann::json& j, std::size_t n_classes) {
        KnnModel m;
        m.k = j.at("k").get<int>();
        m.n_classes = n_classes;
        m.points = matrix_from_json(j.at("points"));
        m.classes = j.at("classes").get<std::vector<int>>();
        return m;
    }
};

} // namespace vitalpain
