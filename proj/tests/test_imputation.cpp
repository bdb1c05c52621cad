#include <gtest/gtest.h>

#include "support.hpp"

using namespace vptest;

namespace {

std::optional<double> cell(const VitalRecord& r, std::size_t c) {
    if (c < kNumVitals) return r.vitals[c];
    if (r.pain_score) return static_cast<double>(*r.pain_score);
    return std::nullopt;
}

// systolic = 2 * spo2 exactly; the other columns are unrelated noise.
std::vector<VitalRecord> exact_linear(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::vector<VitalRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = 90 + 8 * std::uniform_real_distribution<double>()(rng);
        out.push_back(record("P", static_cast<std::int64_t>(i), {x, 2 * x, 80 + z(rng), 90 + z(rng), 16 + z(rng), 98 + z(rng)},
                             static_cast<int>(rng() % 11), i));
    }
    return out;
}

} // namespace

TEST(Mice, NoMissingIsIdentity) {
    const auto recs = random_records(200, 4, 1);
    const auto out = mice_impute(recs, {});
    for (std::size_t i = 0; i < recs.size(); ++i) {
        EXPECT_EQ(out.records[i].vitals, recs[i].vitals);
        EXPECT_EQ(out.records[i].pain_score, recs[i].pain_score);
    }
    for (double t : out.trace) EXPECT_EQ(t, 0.0);
}

TEST(Mice, ExactLinearRelationRecovered) {
    auto recs = exact_linear(50, 3);
    const double x0 = *recs[17].vitals[0];
    recs[17].vitals[1].reset();
    const auto out = mice_impute(recs, {});
    EXPECT_NEAR(*out.records[17].vitals[1], 2 * x0, 1e-9);
    ASSERT_GE(out.trace.size(), 2u);
    EXPECT_GT(out.trace[0], 0.0);
    for (std::size_t k = 1; k < out.trace.size(); ++k) EXPECT_NEAR(out.trace[k], 0.0, 1e-9) << k;
}

TEST(Mice, TraceSettlesOnRandomMcar) {
    const auto recs = random_records(600, 6, 11, 0.3);
    ImputationConfig cfg;
    cfg.n_iterations = 15;
    const auto out = mice_impute(recs, cfg);
    for (std::size_t k = 3; k < out.trace.size(); ++k) EXPECT_LE(out.trace[k], out.trace[k - 1] + 1e-6) << k;
}

TEST(Mice, ObservedCellsPreservedAndFillsValid) {
    const auto recs = random_records(800, 8, 21, 0.25);
    const auto out = mice_impute(recs, {});
    const auto stats = out.model;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        for (std::size_t c = 0; c < kNumMeasured; ++c) {
            const auto before = cell(recs[i], c);
            const auto after = cell(out.records[i], c);
            ASSERT_TRUE(after.has_value());
            if (before) {
                EXPECT_EQ(*before, *after);
                EXPECT_FALSE(out.mask[i][c]);
            } else {
                EXPECT_TRUE(out.mask[i][c]);
                EXPECT_GE(*after, stats.lo[c]);
                EXPECT_LE(*after, stats.hi[c]);
            }
        }
        EXPECT_EQ(out.records[i].pain_imputed, !recs[i].pain_score.has_value());
        EXPECT_GE(*out.records[i].pain_score, 0);
        EXPECT_LE(*out.records[i].pain_score, 10);
    }
}

TEST(Mice, DeterministicAndIdempotent) {
    const auto recs = random_records(400, 5, 8, 0.2);
    const auto a = mice_impute(recs, {});
    const auto b = mice_impute(recs, {});
    EXPECT_EQ(write_csv(a.records, {}, true), write_csv(b.records, {}, true));
    EXPECT_EQ(a.trace, b.trace);
    const auto again = mice_impute(a.records, {});
    EXPECT_EQ(write_csv(again.records, {}, true), write_csv(a.records, {}, true));
}

TEST(Mice, StochasticResidualsFollowSeed) {
    const auto recs = random_records(300, 5, 8, 0.2);
    ImputationConfig cfg;
    cfg.stochastic_residuals = true;
    cfg.rng_seed = 1;
    const auto a = mice_impute(recs, cfg);
    const auto b = mice_impute(recs, cfg);
    cfg.rng_seed = 2;
    const auto c = mice_impute(recs, cfg);
    EXPECT_EQ(write_csv(a.records, {}), write_csv(b.records, {}));
    EXPECT_NE(write_csv(a.records, {}), write_csv(c.records, {}));
}

TEST(Mice, ClampOffAllowsExtrapolation) {
    auto recs = exact_linear(40, 5);
    recs[3].vitals[0] = 200; // far outside the others, so 2x lands outside observed systolic range
    recs[3].vitals[1].reset();
    ImputationConfig off;
    off.clamp_to_observed_range = false;
    const auto clamped = mice_impute(recs, {});
    const auto free = mice_impute(recs, off);
    EXPECT_LE(*clamped.records[3].vitals[1], clamped.model.hi[1]);
    EXPECT_GT(*free.records[3].vitals[1], clamped.model.hi[1]);
}

TEST(Mice, PatientLabelsChangeFills) {
    // patient offsets dominate pulse; conditioning on patient identity must matter
    std::vector<VitalRecord> recs;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z;
    for (int i = 0; i < 300; ++i) {
        const int p = i % 3;
        recs.push_back(record("P" + std::to_string(p), i, {97 + z(rng), 120 + z(rng), 80 + z(rng), 70.0 + 20 * p + z(rng),
                                                           16 + z(rng), 98 + z(rng)},
                              static_cast<int>(rng() % 11), static_cast<std::size_t>(i)));
        if (i % 10 == 0) recs.back().vitals[3].reset();
    }
    ImputationConfig with;
    with.with_patient_labels = true;
    const auto a = mice_impute(recs, {});
    const auto b = mice_impute(recs, with);
    double diff = 0, err_with = 0;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        if (recs[i].vitals[3]) continue;
        diff += std::abs(*a.records[i].vitals[3] - *b.records[i].vitals[3]);
        const double truth = 70.0 + 20 * (static_cast<int>(i) % 3);
        err_with += std::abs(*b.records[i].vitals[3] - truth);
    }
    EXPECT_GT(diff, 1.0);
    EXPECT_LT(err_with / 30.0, 3.0);
}

TEST(Mice, PainExcludedLeavesPainMissing) {
    const auto recs = random_records(300, 3, 6, 0.2);
    ImputationConfig cfg;
    cfg.include_pain_as_variable = false;
    const auto out = mice_impute(recs, cfg);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        EXPECT_EQ(out.records[i].pain_score, recs[i].pain_score);
        EXPECT_FALSE(out.records[i].pain_imputed);
        for (const auto& v : out.records[i].vitals) EXPECT_TRUE(v.has_value());
    }
}

TEST(Mice, ColumnWithoutObservationsRejected) {
    auto recs = random_records(20, 2, 1);
    for (auto& r : recs) r.vitals[5].reset();
    EXPECT_THROW(mice_impute(recs, {}), data_error);
}

TEST(Mice, SingularDesignWarnsOnce) {
    auto recs = random_records(100, 2, 1, 0.1);
    for (auto& r : recs) r.vitals[4] = 16.0; // constant predictor
    const auto out = mice_impute(recs, {});
    std::set<std::string> unique(out.warnings.begin(), out.warnings.end());
    EXPECT_EQ(unique.size(), out.warnings.size());
    EXPECT_FALSE(out.warnings.empty());
}

TEST(Mice, ApplyToHeldOutRows) {
    auto train_recs = exact_linear(60, 9);
    const auto fitted = mice_impute(train_recs, {});
    auto held = exact_linear(5, 10);
    const double x0 = *held[2].vitals[0];
    held[2].vitals[1].reset();
    ImputationConfig free;
    free.clamp_to_observed_range = false;
    const auto out = apply_imputation(fitted.model, free, held);
    EXPECT_NEAR(*out[2].vitals[1], 2 * x0, 1e-6);
    EXPECT_EQ(out[0].vitals, held[0].vitals);
}

TEST(Mice, SummaryCountsMissingCells) {
    auto recs = exact_linear(30, 2);
    recs[0].vitals[1].reset();
    recs[1].pain_score.reset();
    const auto j = imputation_summary(mice_impute(recs, {}));
    EXPECT_EQ(j["missing_cells"]["systolic_bp"], 1);
    EXPECT_EQ(j["missing_cells"]["pain_score"], 1);
    EXPECT_EQ(j["rows"], 30);
}
