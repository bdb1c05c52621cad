#pragma once

#include "../util.hpp"
#include "tree.hpp"

namespace vitalpain {

/// n draws with replacement for tree `tree_index`; the stream is a pure
/// function of (seed, tree_index).
inline std::vector<std::size_t> bootstrap_indices(std::uint64_t seed, std::size_t tree_index, std::size_t n) {
    Rng rng = derive_rng(seed, 0x7265u, tree_index);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = pick(rng);
    return rows;
}

/// Bagged CART trees with per-split feature sampling and majority vote.
struct ForestModel {
    std::size_t n_classes = 0;
    std::vector<TreeModel> trees;

    static ForestModel fit(const FeatureMatrix& x, std::span<const int> y, std::size_t n_classes, int n_trees,
                           const TreeParams& params, std::uint64_t seed) {
        ForestModel f;
        f.n_classes = n_classes;
        f.trees.resize(static_cast<std::size_t>(n_trees));
        const auto n = static_cast<std::size_t>(x.rows());
        parallel_for(f.trees.size(), [&](std::size_t t) {
            Rng split_rng = derive_rng(seed, 0x6665u, t);
            f.trees[t] = TreeModel::fit(x, y, n_classes, params, bootstrap_indices(seed, t, n), &split_rng);
        });
        return f;
    }

    int predict(std::span<const double> q) const {
        std::vector<int> votes(n_classes, 0);
        for (const auto& t : trees) ++votes[static_cast<std::size_t>(t.predict(q))];
        return argmax_smallest(std::span<const int>(votes));
    }

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& t : trees) arr.push_back(t.to_json());
        return {{"trees", arr}};
    }

    static ForestModel from_json(const nlohmann::json& j, std::size_t n_classes) {
        ForestModel f;
        f.n_classes = n_classes;
        for (const auto& t : j.at("trees")) f.trees.push_back(TreeModel::from_json(t, n_classes));
        return f;
    }
};

} // namespace vitalpain
