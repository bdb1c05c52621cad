#pragma once

#include <algorithm>
#include <numeric>
#include <optional>

#include "../util.hpp"
#include "common.hpp"

namespace vitalpain {

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int label = 0; // majority class at this node

    bool operator==(const TreeNode&) const = default;
};

struct TreeParams {
    std::optional<int> max_depth;  // unlimited when empty
    int min_samples_split = 2;
    std::size_t max_features = 0;  // candidate features per split; 0 means all
};

namespace detail {

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double impurity = INFINITY;
};

} // namespace detail

/// CART classification tree with Gini impurity and binary threshold splits.
struct TreeModel {
    std::size_t n_classes = 0;
    std::vector<TreeNode> nodes;

    /// `rows` selects (possibly repeated) training rows. When
    /// params.max_features is below the feature count, `rng` draws the
    /// candidate set at each node.
    static TreeModel fit(const FeatureMatrix& x, std::span<const int> y, std::size_t n_classes, const TreeParams& params,
                         std::vector<std::size_t> rows, Rng* rng = nullptr) {
        TreeModel tree;
        tree.n_classes = n_classes;
        const auto d = static_cast<std::size_t>(x.cols());
        const std::size_t m = (params.max_features == 0 || params.max_features >= d) ? d : params.max_features;

        struct Task {
            int node;
            int depth;
            std::size_t begin, end;
        };
        std::vector<std::size_t> idx = std::move(rows);
        std::vector<Task> stack;
        tree.nodes.emplace_back();
        stack.push_back({0, 0, 0, idx.size()});

        std::vector<int> counts(n_classes), left(n_classes);
        std::vector<std::size_t> features(d);
        std::vector<std::pair<double, int>> sorted;

        while (!stack.empty()) {
            const Task task = stack.back();
            stack.pop_back();
            const int n = static_cast<int>(task.end - task.begin);

            std::fill(counts.begin(), counts.end(), 0);
            for (std::size_t i = task.begin; i < task.end; ++i) ++counts[static_cast<std::size_t>(y[idx[i]])];
            const int majority = argmax_smallest(std::span<const int>(counts));
            tree.nodes[static_cast<std::size_t>(task.node)].label = majority;

            const bool pure = counts[static_cast<std::size_t>(majority)] == n;
            const bool depth_capped = params.max_depth && task.depth >= *params.max_depth;
            if (pure || depth_capped || n < params.min_samples_split) continue;

            std::iota(features.begin(), features.end(), std::size_t{0});
            if (m < d) {
                // partial Fisher-Yates for the candidate subset, then ascending for tie order
                for (std::size_t i = 0; i < m; ++i) {
                    std::uniform_int_distribution<std::size_t> pick(i, d - 1);
                    std::swap(features[i], features[pick(*rng)]);
                }
                std::sort(features.begin(), features.begin() + static_cast<std::ptrdiff_t>(m));
            }

            detail::SplitChoice best;
            for (std::size_t fi = 0; fi < m; ++fi) {
                const auto f = static_cast<Eigen::Index>(features[fi]);
                sorted.clear();
                for (std::size_t i = task.begin; i < task.end; ++i)
                    sorted.emplace_back(x(static_cast<Eigen::Index>(idx[i]), f), y[idx[i]]);
                std::sort(sorted.begin(), sorted.end());
                std::fill(left.begin(), left.end(), 0);
                for (int i = 0; i + 1 < n; ++i) {
                    ++left[static_cast<std::size_t>(sorted[static_cast<std::size_t>(i)].second)];
                    const double a = sorted[static_cast<std::size_t>(i)].first;
                    const double b = sorted[static_cast<std::size_t>(i) + 1].first;
                    if (!(a < b)) continue;
                    const int nl = i + 1, nr = n - nl;
                    double gl = 0, gr = 0;
                    for (std::size_t c = 0; c < n_classes; ++c) {
                        const double pl = static_cast<double>(left[c]) / nl;
                        const double pr = static_cast<double>(counts[c] - left[c]) / nr;
                        gl += pl * pl;
                        gr += pr * pr;
                    }
                    const double impurity = (nl * (1.0 - gl) + nr * (1.0 - gr)) / n;
                    if (impurity < best.impurity - 1e-12) {
                        double mid = a + (b - a) / 2.0;
                        if (!(mid < b)) mid = a;
                        best = {static_cast<int>(f), mid, impurity};
                    }
                }
            }
            if (best.feature < 0) continue; // all candidate features constant here

            auto mid_it = std::stable_partition(
                idx.begin() + static_cast<std::ptrdiff_t>(task.begin), idx.begin() + static_cast<std::ptrdiff_t>(task.end),
                [&](std::size_t r) { return x(static_cast<Eigen::Index>(r), best.feature) <= best.threshold; });
            const auto split = static_cast<std::size_t>(mid_it - idx.begin());

            const int l = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            auto& node = tree.nodes[static_cast<std::size_t>(task.node)];
            node.feature = best.feature;
            node.threshold = best.threshold;
            node.left = l;
            node.right = l + 1;
            stack.push_back({l + 1, task.depth + 1, split, task.end});
            stack.push_back({l, task.depth + 1, task.begin, split});
        }
        return tree;
    }

    static TreeModel fit(const FeatureMatrix& x, std::span<const int> y, std::size_t n_classes, const TreeParams& params) {
        std::vector<std::size_t> rows(static_cast<std::size_t>(x.rows()));
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        return fit(x, y, n_classes, params, std::move(rows));
    }

    int predict(std::span<const double> q) const {
        std::size_t i = 0;
        while (nodes[i].feature >= 0) {
            const auto& n = nodes[i];
            i = static_cast<std::size_t>(q[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
        }
        return nodes[i].label;
    }

    int depth() const {
        std::vector<std::pair<std::size_t, int>> stack{{0, 0}};
        int best = 0;
        while (!stack.empty()) {
            auto [i, dd] = stack.back();
            stack.pop_back();
            best = std::max(best, dd);
            if (nodes[i].feature >= 0) {
                stack.emplace_back(static_cast<std::size_t>(nodes[i].left), dd + 1);
                stack.emplace_back(static_cast<std::size_t>(nodes[i].right), dd + 1);
            }
        }
        return best;
    }

    bool operator==(const TreeModel&) const = default;

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& n : nodes) arr.push_back({n.feature, n.threshold, n.left, n.right, n.label});
        return {{"nodes", arr}};
    }

    static TreeModel from_json(const nlohmann::json& j, std::size_t n_classes) {
        TreeModel t;
        t.n_classes = n_classes;
        for (const auto& n : j.at("nodes"))
            t.nodes.push_back({n[0].get<int>(), n[1].get<double>(), n[2].get<int>(), n[3].get<int>(), n[4].get<int>()});
        return t;
    }
};

} // namespace vitalpain
