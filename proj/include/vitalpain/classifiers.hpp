#pragma once

#include <variant>

#include "classifiers/common.hpp"
#include "classifiers/forest.hpp"
#include "classifiers/knn.hpp"
#include "classifiers/logistic.hpp"
#include "classifiers/svm.hpp"
#include "classifiers/tree.hpp"

namespace vitalpain {

enum class Family { KNN, DecisionTree, RandomForest, MultinomialLogistic, LinearSVM };

/// Column order used by the report tables.
inline constexpr std::array<Family, 5> kAllFamilies = {Family::LinearSVM, Family::DecisionTree, Family::KNN,
                                                       Family::MultinomialLogistic, Family::RandomForest};

inline std::string_view family_key(Family f) {
    switch (f) {
    case Family::KNN: return "knn";
    case Family::DecisionTree: return "dt";
    case Family::RandomForest: return "rf";
    case Family::MultinomialLogistic: return "mlr";
    case Family::LinearSVM: return "svm";
    }
    return "?";
}

inline std::string_view family_label(Family f) {
    switch (f) {
    case Family::KNN: return "kNN";
    case Family::DecisionTree: return "DT";
    case Family::RandomForest: return "RF";
    case Family::MultinomialLogistic: return "MLR";
    case Family::LinearSVM: return "SVM";
    }
    return "?";
}

inline Family family_from_string(std::string_view s) {
    for (Family f : kAllFamilies)
        if (s == family_key(f) || s == family_label(f)) return f;
    throw usage_error("unknown classifier family '" + std::string(s) + "'");
}

struct ClassifierSpec {
    Family family = Family::DecisionTree;
    int k = 5;
    std::optional<int> max_depth;
    int min_samples_split = 2;
    int n_trees = 100;
    std::size_t max_features = 0; // forests: 0 means floor(sqrt(d))
    LogisticParams logistic;
    SvmParams svm;
    bool standardize = true;
    std::uint64_t rng_seed = 0;

    void validate() const {
        auto bad = [](const std::string& what) { throw usage_error("invalid hyperparameter: " + what); };
        if (k < 1) bad("k must be >= 1");
        if (max_depth && *max_depth < 1) bad("max_depth must be >= 1 or unlimited");
        if (min_samples_split < 2) bad("min_samples_split must be >= 2");
        if (n_trees < 1) bad("n_trees must be >= 1");
        if (!(logistic.learning_rate > 0)) bad("learning_rate must be > 0");
        if (logistic.epochs < 1 || svm.epochs < 1) bad("epochs must be >= 1");
        if (logistic.l2 < 0) bad("l2 must be >= 0");
        if (!(svm.lambda > 0)) bad("svm lambda must be > 0");
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["family"] = family_key(family);
        j["k"] = k;
        j["max_depth"] = max_depth ? nlohmann::json(*max_depth) : nlohmann::json(nullptr);
        j["min_samples_split"] = min_samples_split;
        j["n_trees"] = n_trees;
        j["max_features"] = max_features;
        j["learning_rate"] = logistic.learning_rate;
        j["epochs"] = logistic.epochs;
        j["l2"] = logistic.l2;
        j["svm_lambda"] = svm.lambda;
        j["svm_epochs"] = svm.epochs;
        j["standardize"] = standardize;
        j["rng_seed"] = rng_seed;
        return j;
    }

    static ClassifierSpec from_json(const nlohmann::json& j) {
        ClassifierSpec s;
        if (j.is_string()) {
            s.family = family_from_string(j.get<std::string>());
            return s;
        }
        s.family = family_from_string(j.at("family").get<std::string>());
        s.k = j.value("k", s.k);
        if (j.contains("max_depth") && !j.at("max_depth").is_null()) s.max_depth = j.at("max_depth").get<int>();
        s.min_samples_split = j.value("min_samples_split", s.min_samples_split);
        s.n_trees = j.value("n_trees", s.n_trees);
        s.max_features = j.value("max_features", s.max_features);
        s.logistic.learning_rate = j.value("learning_rate", s.logistic.learning_rate);
        s.logistic.epochs = j.value("epochs", s.logistic.epochs);
        s.logistic.l2 = j.value("l2", s.logistic.l2);
        s.svm.lambda = j.value("svm_lambda", s.svm.lambda);
        s.svm.epochs = j.value("svm_epochs", s.svm.epochs);
        s.standardize = j.value("standardize", s.standardize);
        s.rng_seed = j.value("rng_seed", s.rng_seed);
        s.validate();
        return s;
    }
};

inline constexpr int kModelFormatVersion = 1;

/// A trained classifier of any family. Inputs are z-scored with the
/// training-split statistics before reaching the family model.
class ClassifierModel {
public:
    using Impl = std::variant<std::monostate, KnnModel, TreeModel, ForestModel, LogisticModel, SvmModel>;

    ClassifierModel() = default;

    const ClassifierSpec& spec() const { return spec_; }
    const std::vector<int>& labels() const { return labels_; }
    const Standardizer& standardizer() const { return standardizer_; }
    std::size_t n_features() const { return n_features_; }
    bool is_constant() const { return std::holds_alternative<std::monostate>(impl_); }
    const std::vector<std::string>& warnings() const { return warnings_; }
    const Impl& impl() const { return impl_; }

    int predict(std::span<const double> features) const {
        if (features.size() != n_features_)
            throw std::invalid_argument("feature vector has " + std::to_string(features.size()) + " entries, model expects " +
                                        std::to_string(n_features_));
        for (double v : features)
            if (!std::isfinite(v)) throw data_error("non-finite feature value at prediction time");
        if (is_constant()) return labels_.front();
        std::vector<double> z(n_features_);
        standardizer_.apply(features, z);
        const int cls = std::visit(
            [&](const auto& m) -> int {
                if constexpr (std::is_same_v<std::decay_t<decltype(m)>, std::monostate>) return 0;
                else return m.predict(z);
            },
            impl_);
        return labels_[static_cast<std::size_t>(cls)];
    }

    std::vector<int> predict(const FeatureMatrix& x) const {
        std::vector<int> out(static_cast<std::size_t>(x.rows()));
        for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = predict(row_span(x, i));
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["format"] = "vitalpain-model";
        j["version"] = kModelFormatVersion;
        j["family"] = family_key(spec_.family);
        j["hyperparameters"] = spec_.to_json();
        j["labels"] = labels_;
        j["n_features"] = n_features_;
        j["standardization"] = {{"mean", standardizer_.mean}, {"sd", standardizer_.sd}};
        j["constant"] = is_constant();
        std::visit(
            [&](const auto& m) {
                if constexpr (std::is_same_v<std::decay_t<decltype(m)>, std::monostate>) j["parameters"] = nullptr;
                else j["parameters"] = m.to_json();
            },
            impl_);
        return j;
    }

    static ClassifierModel from_json(const nlohmann::json& j) {
        if (j.value("format", std::string()) != "vitalpain-model") throw data_error("not a vitalpain model file");
        if (j.value("version", 0) != kModelFormatVersion)
            throw data_error("unsupported model version " + std::to_string(j.value("version", 0)));
        ClassifierModel m;
        m.spec_ = ClassifierSpec::from_json(j.at("hyperparameters"));
        m.labels_ = j.at("labels").get<std::vector<int>>();
        m.n_features_ = j.at("n_features").get<std::size_t>();
        m.standardizer_.mean = j.at("standardization").at("mean").get<std::vector<double>>();
        m.standardizer_.sd = j.at("standardization").at("sd").get<std::vector<double>>();
        if (j.at("constant").get<bool>()) return m;
        const auto& p = j.at("parameters");
        const std::size_t k = m.labels_.size();
        switch (m.spec_.family) {
        case Family::KNN: m.impl_ = KnnModel::from_json(p, k); break;
        case Family::DecisionTree: m.impl_ = TreeModel::from_json(p, k); break;
        case Family::RandomForest: m.impl_ = ForestModel::from_json(p, k); break;
        case Family::MultinomialLogistic: m.impl_ = LogisticModel::from_json(p); break;
        case Family::LinearSVM: m.impl_ = SvmModel::from_json(p); break;
        }
        return m;
    }

    friend ClassifierModel train(const ClassifierSpec& spec, const FeatureMatrix& x, std::span<const int> labels);

private:
    ClassifierSpec spec_;
    std::vector<int> labels_; // sorted; class index i means labels_[i]
    Standardizer standardizer_;
    std::size_t n_features_ = 0;
    Impl impl_;
    std::vector<std::string> warnings_;
};

inline ClassifierModel train(const ClassifierSpec& spec, const FeatureMatrix& x, std::span<const int> labels) {
    spec.validate();
    if (x.rows() == 0) throw data_error("cannot train on an empty training set");
    if (static_cast<std::size_t>(x.rows()) != labels.size())
        throw std::invalid_argument("feature rows and labels differ in length");
    if (!x.allFinite()) throw data_error("training features contain NaN or infinite values");

    ClassifierModel m;
    m.spec_ = spec;
    m.n_features_ = static_cast<std::size_t>(x.cols());
    m.labels_.assign(labels.begin(), labels.end());
    std::sort(m.labels_.begin(), m.labels_.end());
    m.labels_.erase(std::unique(m.labels_.begin(), m.labels_.end()), m.labels_.end());
    m.standardizer_ = spec.standardize ? Standardizer::fit(x) : Standardizer::identity(m.n_features_);

    if (m.labels_.size() == 1) {
        m.warnings_.push_back("single-class training set; model predicts label " + std::to_string(m.labels_[0]));
        return m;
    }

    std::vector<int> cls(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        cls[i] = static_cast<int>(std::lower_bound(m.labels_.begin(), m.labels_.end(), labels[i]) - m.labels_.begin());
    const std::size_t k = m.labels_.size();
    const FeatureMatrix z = m.standardizer_.apply(x);

    TreeParams tree{spec.max_depth, spec.min_samples_split, 0};
    switch (spec.family) {
    case Family::KNN: m.impl_ = KnnModel::fit(z, cls, k, spec.k); break;
    case Family::DecisionTree: m.impl_ = TreeModel::fit(z, cls, k, tree); break;
    case Family::RandomForest: {
        tree.max_features = spec.max_features ? spec.max_features
                                              : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(x.cols()))));
        m.impl_ = ForestModel::fit(z, cls, k, spec.n_trees, tree, spec.rng_seed);
        break;
    }
    case Family::MultinomialLogistic: m.impl_ = LogisticModel::fit(z, cls, k, spec.logistic); break;
    case Family::LinearSVM: m.impl_ = SvmModel::fit(z, cls, k, spec.svm, spec.rng_seed); break;
    }
    return m;
}

/// Convenience overload for row vectors; rejects ragged input.
inline ClassifierModel train(const ClassifierSpec& spec, std::span<const std::vector<double>> rows, std::span<const int> labels) {
    if (rows.empty()) throw data_error("cannot train on an empty training set");
    const std::size_t d = rows.front().size();
    FeatureMatrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != d) throw data_error("inconsistent feature lengths in training set");
        for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return train(spec, x, labels);
}

} // namespace vitalpain
