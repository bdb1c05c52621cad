#include <gtest/gtest.h>

#include "support.hpp"

using namespace vptest;

namespace {

FeatureMatrix matrix(const std::vector<std::vector<double>>& rows) {
    FeatureMatrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return x;
}

FeatureMatrix gaussian(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    FeatureMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = z(rng);
    return x;
}

// three classes separated along the first two axes
std::vector<int> blob_labels(const FeatureMatrix& x) {
    std::vector<int> y(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) y[static_cast<std::size_t>(i)] = x(i, 0) > 0.5 ? 2 : (x(i, 1) > 0 ? 1 : 0);
    return y;
}

double train_accuracy(const ClassifierModel& m, const FeatureMatrix& x, std::span<const int> y) {
    const auto p = m.predict(x);
    return accuracy(p, y);
}

ClassifierSpec spec_of(Family f) {
    ClassifierSpec s;
    s.family = f;
    return s;
}

// Weighted Gini of the best threshold split on the first feature, by exhaustion.
double brute_best_gini(const FeatureMatrix& x, std::span<const int> y, Eigen::Index f, double& threshold) {
    std::vector<double> values;
    for (Eigen::Index i = 0; i < x.rows(); ++i) values.push_back(x(i, f));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    double best = INFINITY;
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
        const double t = (values[k] + values[k + 1]) / 2;
        std::map<int, double> l, r;
        double nl = 0, nr = 0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            if (x(i, f) <= t) {
                l[y[static_cast<std::size_t>(i)]] += 1;
                nl += 1;
            } else {
                r[y[static_cast<std::size_t>(i)]] += 1;
                nr += 1;
            }
        }
        auto gini = [](const std::map<int, double>& c, double n) {
            double g = 1;
            for (const auto& [k, v] : c) g -= (v / n) * (v / n);
            return g;
        };
        const double w = (nl * gini(l, nl) + nr * gini(r, nr)) / (nl + nr);
        if (w < best) {
            best = w;
            threshold = t;
        }
    }
    return best;
}

} // namespace

TEST(Standardizer, ZeroMeanUnitSd) {
    const FeatureMatrix x = gaussian(500, 4, 1) * 7.0;
    const auto s = Standardizer::fit(x);
    const auto z = s.apply(x);
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        const double mu = z.col(j).mean();
        const double sd = std::sqrt((z.col(j).array() - mu).square().mean());
        EXPECT_LT(std::abs(mu), 1e-9);
        EXPECT_NEAR(sd, 1.0, 1e-9);
    }
}

TEST(Standardizer, ConstantFeatureKeepsUnitScale) {
    auto x = gaussian(50, 2, 3);
    x.col(1).setConstant(4.0);
    const auto s = Standardizer::fit(x);
    EXPECT_EQ(s.sd[1], 1.0);
    EXPECT_EQ(s.apply(x)(0, 1), 0.0);
}

TEST(Knn, OneNeighbourMemorises) {
    const auto x = gaussian(200, 3, 2);
    std::vector<int> y(200);
    std::mt19937_64 rng(1);
    for (auto& v : y) v = static_cast<int>(rng() % 4);
    auto spec = spec_of(Family::KNN);
    spec.k = 1;
    const auto m = train(spec, x, y);
    EXPECT_EQ(train_accuracy(m, x, y), 1.0);
}

TEST(Knn, DistanceTiesGoToLowerIndexVoteTiesToSmallerLabel) {
    // query at 0 is equidistant from both points
    const auto x = matrix({{-1.0}, {1.0}});
    const std::vector<int> y{5, 2};
    auto spec = spec_of(Family::KNN);
    spec.standardize = false;
    spec.k = 1;
    const double q0[] = {0.0};
    EXPECT_EQ(train(spec, x, y).predict(q0), 5);
    spec.k = 2;
    EXPECT_EQ(train(spec, x, y).predict(q0), 2);
}

TEST(Knn, UniformScalingInvariantWithoutStandardize) {
    const auto x = gaussian(150, 3, 4);
    const auto y = blob_labels(x);
    auto spec = spec_of(Family::KNN);
    spec.standardize = false;
    const auto a = train(spec, x, y);
    const FeatureMatrix scaled = x * 13.0;
    const auto b = train(spec, scaled, y);
    const auto q = gaussian(100, 3, 5);
    const FeatureMatrix qs = q * 13.0;
    EXPECT_EQ(a.predict(q), b.predict(qs));
}

TEST(Knn, PerFeatureScalingInvariantWithStandardize) {
    const auto x = gaussian(150, 3, 4);
    const auto y = blob_labels(x);
    FeatureMatrix xs = x;
    xs.col(0) *= 1000.0;
    xs.col(2) *= 0.01;
    const auto a = train(spec_of(Family::KNN), x, y);
    const auto b = train(spec_of(Family::KNN), xs, y);
    auto q = gaussian(80, 3, 6);
    FeatureMatrix qs = q;
    qs.col(0) *= 1000.0;
    qs.col(2) *= 0.01;
    EXPECT_EQ(a.predict(q), b.predict(qs));
}

TEST(Tree, DepthOneOnSeparableFixture) {
    // only feature 1 separates the classes, at 2.5
    const auto x = matrix({{5, 1, 0}, {1, 2, 9}, {4, 3, 1}, {2, 4, 8}, {3, 0, 2}, {6, 5, 7}});
    const std::vector<int> y{0, 0, 1, 1, 0, 1};
    auto spec = spec_of(Family::DecisionTree);
    spec.standardize = false;
    const auto m = train(spec, x, y);
    const auto& tree = std::get<TreeModel>(m.impl());
    EXPECT_EQ(tree.depth(), 1);
    EXPECT_EQ(tree.nodes[0].feature, 1);
    EXPECT_DOUBLE_EQ(tree.nodes[0].threshold, 2.5);
    EXPECT_EQ(train_accuracy(m, x, y), 1.0);
}

TEST(Tree, TiesPreferLowestFeature) {
    // features 0 and 1 are identical, so both give the same split
    const auto x = matrix({{1, 1}, {2, 2}, {3, 3}, {4, 4}});
    const std::vector<int> y{0, 0, 1, 1};
    auto spec = spec_of(Family::DecisionTree);
    spec.standardize = false;
    const auto m = train(spec, x, y);
    EXPECT_EQ(std::get<TreeModel>(m.impl()).nodes[0].feature, 0);
}

TEST(Tree, RootSplitMatchesExhaustiveGini) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto x = gaussian(60, 1, seed);
        std::vector<int> y(60);
        std::mt19937_64 rng(seed);
        for (std::size_t i = 0; i < 60; ++i) y[i] = x(static_cast<Eigen::Index>(i), 0) + 0.5 * std::normal_distribution<double>()(rng) > 0;
        double t = 0;
        brute_best_gini(x, y, 0, t);
        const auto tree = TreeModel::fit(x, y, 2, {});
        EXPECT_DOUBLE_EQ(tree.nodes[0].threshold, t) << seed;
    }
}

TEST(Tree, ConsistentOnDistinctPoints) {
    const auto x = gaussian(300, 4, 8);
    std::vector<int> y(300);
    std::mt19937_64 rng(3);
    for (auto& v : y) v = static_cast<int>(rng() % 11);
    EXPECT_EQ(train_accuracy(train(spec_of(Family::DecisionTree), x, y), x, y), 1.0);
}

TEST(Tree, ConflictingDuplicatesTakeMajorityThenSmallest) {
    const auto x = matrix({{1}, {1}, {1}, {2}, {2}});
    const std::vector<int> y{3, 1, 3, 4, 0};
    const auto t = TreeModel::fit(x, y, 5, {});
    const double a[] = {1.0}, b[] = {2.0};
    EXPECT_EQ(t.predict(a), 3);
    EXPECT_EQ(t.predict(b), 0);
}

TEST(Tree, MaxDepthAndMinSplitRespected) {
    const auto x = gaussian(200, 3, 9);
    const auto y = blob_labels(x);
    TreeParams p;
    p.max_depth = 2;
    EXPECT_LE(TreeModel::fit(x, y, 3, p).depth(), 2);
    TreeParams q;
    q.min_samples_split = 500;
    EXPECT_EQ(TreeModel::fit(x, y, 3, q).nodes.size(), 1u);
}

TEST(Forest, SingleFullFeatureTreeEqualsTreeOnBootstrap) {
    const auto x = gaussian(120, 3, 10);
    const auto y = blob_labels(x);
    TreeParams p;
    p.max_features = 3;
    const auto f = ForestModel::fit(x, y, 3, 1, p, 77);
    const auto rows = bootstrap_indices(77, 0, 120);
    const auto t = TreeModel::fit(x, y, 3, TreeParams{}, rows);
    EXPECT_TRUE(f.trees[0] == t);
}

TEST(Forest, SeededAndSeedSensitive) {
    const auto x = gaussian(150, 4, 11);
    const auto y = blob_labels(x);
    auto spec = spec_of(Family::RandomForest);
    spec.n_trees = 15;
    spec.rng_seed = 5;
    const auto a = train(spec, x, y).to_json();
    const auto b = train(spec, x, y).to_json();
    spec.rng_seed = 6;
    const auto c = train(spec, x, y).to_json();
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
}

TEST(Logistic, ProbabilitiesSumToOne) {
    const FeatureMatrix x = gaussian(50, 3, 12) * 30.0;
    auto m = LogisticModel::zeros(4, 3);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z;
    for (Eigen::Index i = 0; i < m.weights.size(); ++i) m.weights.data()[i] = 5 * z(rng);
    const auto p = m.probabilities(x);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-9);
        EXPECT_GE(p.row(i).minCoeff(), 0.0);
    }
}

TEST(Logistic, BinaryBoundaryAgreesWithNewtonFit) {
    // six points, overlapping classes so the optimum is finite
    const auto x = matrix({{-3}, {-2}, {-1}, {1}, {2}, {3}});
    const std::vector<int> y{0, 0, 1, 0, 1, 1};
    // independent fit: Newton-Raphson on the binary log-likelihood with the same L2 on the slope
    const double l2 = 1e-4;
    double w = 0, b = 0;
    for (int it = 0; it < 100; ++it) {
        double gw = l2 * w, gb = 0, hww = l2, hwb = 0, hbb = 0;
        for (int i = 0; i < 6; ++i) {
            const double xi = x(i, 0);
            const double p = 1 / (1 + std::exp(-(w * xi + b)));
            gw += (p - y[static_cast<std::size_t>(i)]) * xi / 6;
            gb += (p - y[static_cast<std::size_t>(i)]) / 6;
            const double s = p * (1 - p) / 6;
            hww += s * xi * xi;
            hwb += s * xi;
            hbb += s;
        }
        const double det = hww * hbb - hwb * hwb;
        w -= (hbb * gw - hwb * gb) / det;
        b -= (hww * gb - hwb * gw) / det;
    }
    LogisticParams params;
    params.l2 = l2;
    const auto m = LogisticModel::fit(x, y, 2, params);
    const double mw = m.weights(1, 0) - m.weights(0, 0);
    const double mb = m.bias(1) - m.bias(0);
    EXPECT_GT(mw * w, 0.0);
    for (double q = -4; q <= 4; q += 0.25) {
        const double oracle = w * q + b;
        if (std::abs(oracle) < 0.25) continue;
        EXPECT_EQ(mw * q + mb > 0, oracle > 0) << q;
    }
}

TEST(Logistic, GradientCheck) {
    const auto x = gaussian(40, 3, 13);
    const auto y = blob_labels(x);
    EXPECT_LT(softmax_gradient_check(LogisticModel::zeros(3, 3), x, y, 1e-4), 1e-4);

    auto m = LogisticModel::zeros(3, 3);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    for (Eigen::Index i = 0; i < m.weights.size(); ++i) m.weights.data()[i] = z(rng);
    for (Eigen::Index i = 0; i < m.bias.size(); ++i) m.bias(i) = z(rng);
    EXPECT_LT(softmax_gradient_check(m, x, y, 1e-2), 1e-4);

    const FeatureMatrix one = x.topRows(1);
    EXPECT_LT(softmax_gradient_check(m, one, std::span<const int>(y).first(1), 1e-4), 1e-4);
}

TEST(Logistic, LossDecreasesDuringFit) {
    const auto x = gaussian(200, 3, 14);
    const auto y = blob_labels(x);
    LogisticParams few;
    few.epochs = 5;
    const double start = LogisticModel::zeros(3, 3).loss(x, y, 1e-4);
    const double early = LogisticModel::fit(x, y, 3, few).loss(x, y, 1e-4);
    const double late = LogisticModel::fit(x, y, 3, {}).loss(x, y, 1e-4);
    EXPECT_LT(early, start);
    EXPECT_LT(late, early);
}

TEST(Svm, SeparableBlobs) {
    const auto x = gaussian(300, 3, 15);
    const auto y = blob_labels(x);
    const auto m = train(spec_of(Family::LinearSVM), x, y);
    EXPECT_GT(train_accuracy(m, x, y), 0.9);
}

TEST(Svm, WeightsStayInsideProjectionBall) {
    const auto x = gaussian(100, 2, 16);
    const auto y = blob_labels(x);
    SvmParams p;
    p.lambda = 0.5;
    const auto m = SvmModel::fit(x, y, 3, p, 1);
    for (Eigen::Index k = 0; k < 3; ++k) EXPECT_LE(m.weights.row(k).norm(), 1 / std::sqrt(0.5) + 1e-9);
}

TEST(AllFamilies, ConstantLabelPredictsIt) {
    const auto x = gaussian(30, 2, 17);
    const std::vector<int> y(30, 6);
    for (Family f : kAllFamilies) {
        const auto m = train(spec_of(f), x, y);
        EXPECT_TRUE(m.is_constant());
        EXPECT_FALSE(m.warnings().empty());
        const double q[] = {100.0, -100.0};
        EXPECT_EQ(m.predict(q), 6);
    }
}

TEST(AllFamilies, JsonRoundTripPreservesPredictions) {
    const auto x = gaussian(120, 3, 18);
    const auto y = blob_labels(x);
    const auto q = gaussian(50, 3, 19);
    for (Family f : kAllFamilies) {
        auto spec = spec_of(f);
        spec.n_trees = 10;
        const auto m = train(spec, x, y);
        const auto back = ClassifierModel::from_json(nlohmann::json::parse(m.to_json().dump()));
        EXPECT_EQ(m.predict(q), back.predict(q)) << family_key(f);
    }
}

TEST(AllFamilies, NonContiguousLabelsMapBack) {
    const auto x = gaussian(120, 3, 20);
    auto y = blob_labels(x);
    for (auto& v : y) v = v * 3 + 1; // 1, 4, 7
    for (Family f : kAllFamilies) {
        auto spec = spec_of(f);
        spec.n_trees = 10;
        const auto p = train(spec, x, y).predict(x);
        for (int v : p) EXPECT_TRUE(v == 1 || v == 4 || v == 7);
    }
}

TEST(Errors, InputValidation) {
    const auto x = gaussian(10, 2, 21);
    const std::vector<int> y(10, 1);
    EXPECT_THROW(train(spec_of(Family::KNN), FeatureMatrix(0, 2), std::vector<int>{}), data_error);
    EXPECT_THROW(train(spec_of(Family::KNN), x, std::vector<int>(3, 1)), std::invalid_argument);
    FeatureMatrix bad = x;
    bad(2, 1) = NAN;
    EXPECT_THROW(train(spec_of(Family::KNN), bad, y), data_error);
    const std::vector<std::vector<double>> ragged{{1, 2}, {3}};
    EXPECT_THROW(train(spec_of(Family::KNN), std::span<const std::vector<double>>(ragged), std::vector<int>{0, 1}), data_error);
    const auto m = train(spec_of(Family::DecisionTree), x, std::vector<int>{0, 1, 0, 1, 0, 1, 0, 1, 0, 1});
    const double short_q[] = {1.0};
    EXPECT_THROW(m.predict(short_q), std::invalid_argument);
    const double nan_q[] = {1.0, NAN};
    EXPECT_THROW(m.predict(nan_q), data_error);
    auto spec = spec_of(Family::KNN);
    spec.k = 0;
    EXPECT_THROW(train(spec, x, y), usage_error);
    EXPECT_THROW(family_from_string("xgboost"), usage_error);
}
