#include <gtest/gtest.h>

#include "support.hpp"

using namespace vptest;

namespace {

SynthConfig small(SignalModel s, std::uint64_t seed = 7) {
    SynthConfig c;
    c.n_patients = 12;
    c.records_per_patient = {40, 60};
    c.signal = s;
    c.rng_seed = seed;
    return c;
}

} // namespace

TEST(Synth, SameSeedSameBytes) {
    auto cfg = small(SignalModel::Global);
    cfg.missing_rate.fill(0.1);
    const auto a = generate(cfg);
    const auto b = generate(cfg);
    EXPECT_EQ(write_csv(a.data.records, a.data.manifest), write_csv(b.data.records, b.data.manifest));
    EXPECT_EQ(truth_csv(a.truth), truth_csv(b.truth));
    cfg.rng_seed = 8;
    EXPECT_NE(truth_csv(generate(cfg).truth), truth_csv(a.truth));
}

TEST(Synth, RecordCountsAndIdentifiers) {
    const auto out = generate(small(SignalModel::Null));
    std::map<std::string, int> per;
    for (const auto& r : out.data.records) ++per[r.patient_id];
    EXPECT_EQ(per.size(), 12u);
    for (const auto& [id, n] : per) {
        EXPECT_GE(n, 40) << id;
        EXPECT_LE(n, 60 + 5) << id; // the last visit may overrun the target
        EXPECT_EQ(id.size(), 3u);
    }
}

TEST(Synth, NoMissingnessIsComplete) {
    const auto out = generate(small(SignalModel::Global));
    EXPECT_EQ(completeness_stats(out.data).fraction_complete, 1.0);
    EXPECT_EQ(out.data.records.size(), out.truth.rows.size());
}

TEST(Synth, PainIntegersInRange) {
    for (auto s : {SignalModel::Global, SignalModel::PerPatient, SignalModel::Null}) {
        const auto out = generate(small(s));
        for (const auto& t : out.truth.rows) {
            EXPECT_GE(t.pain, 0);
            EXPECT_LE(t.pain, 10);
        }
    }
}

TEST(Synth, TargetCompletenessHit) {
    SynthConfig cfg;
    cfg.n_patients = 100;
    cfg.records_per_patient = {100, 100};
    cfg.target_completeness = 0.076;
    const auto out = generate(cfg);
    EXPECT_GE(out.data.records.size(), 9000u);
    EXPECT_NEAR(completeness_stats(out.data).fraction_complete, 0.076, 0.01);
}

TEST(Synth, VisitProportionsFollowMix) {
    SynthConfig cfg;
    cfg.n_patients = 80;
    cfg.records_per_patient = {80, 80};
    auto out = generate(cfg);
    const auto visits = assign_visits(out.data.records);
    ASSERT_GE(visits.size(), 1000u);
    const auto d = visit_distribution(visits);
    for (std::size_t t = 0; t < kNumVisitTypes; ++t)
        EXPECT_NEAR(static_cast<double>(d.totals[t]) / static_cast<double>(d.total_visits()), cfg.visit_mix[t], 0.05) << t;
}

TEST(Synth, SegmentedVisitTypesMatchTruth) {
    auto out = generate(small(SignalModel::Null, 3));
    assign_visits(out.data.records);
    for (const auto& r : out.data.records) EXPECT_EQ(*r.visit_type, out.truth.rows[r.sequence].visit_type);
}

TEST(Synth, TruthFollowsTheRule) {
    const auto g = generate(small(SignalModel::Global));
    ASSERT_TRUE(g.truth.global_rule);
    for (const auto& t : g.truth.rows) {
        int count = 0;
        for (auto [v, thr] : g.truth.global_rule->thresholds) count += t.vitals[v] > thr;
        EXPECT_EQ(t.pain, std::min(count, 10));
    }
    const auto p = generate(small(SignalModel::PerPatient));
    EXPECT_EQ(p.truth.patient_rules.size(), 12u);
    for (const auto& t : p.truth.rows) EXPECT_EQ(t.pain, p.truth.patient_rules.at(t.patient_id).apply(t.vitals));
    for (const auto& r : p.data.records) EXPECT_EQ(*r.pain_score, p.truth.rows[r.sequence].pain);
}

TEST(Synth, LabelNoiseChangesSomeScores) {
    auto cfg = small(SignalModel::Global);
    const auto clean = generate(cfg);
    cfg.label_noise = 0.3;
    const auto noisy = generate(cfg);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < clean.truth.rows.size(); ++i) changed += clean.truth.rows[i].pain != noisy.truth.rows[i].pain;
    const double frac = static_cast<double>(changed) / static_cast<double>(clean.truth.rows.size());
    EXPECT_GT(frac, 0.15);
    EXPECT_LT(frac, 0.35);
}

TEST(Synth, InfeasibleConfigsRejected) {
    auto bad = small(SignalModel::Global);
    bad.visit_mix = {0.5, 0.5, 0.5};
    EXPECT_THROW(generate(bad), infeasible_error);
    bad = small(SignalModel::Global);
    bad.records_per_patient = {10, 5};
    EXPECT_THROW(generate(bad), infeasible_error);
    bad = small(SignalModel::Global);
    bad.missing_rate.fill(0.5);
    bad.target_completeness = 0.9;
    EXPECT_THROW(generate(bad), infeasible_error);
    EXPECT_THROW(SynthConfig::from_json(nlohmann::json::parse(R"({"n_patients": 0})")), infeasible_error);
}

TEST(Synth, ConfigJsonRoundTrip) {
    auto cfg = small(SignalModel::PerPatient);
    cfg.missing_rate[3] = 0.2;
    cfg.target_completeness = std::nullopt;
    EXPECT_EQ(SynthConfig::from_json(cfg.to_json()).to_json(), cfg.to_json());
}

TEST(Verify, NothingMissingGivesEmptyReport) {
    const auto out = generate(small(SignalModel::Global));
    EXPECT_TRUE(verify_against_truth(mice_impute(out.data.records, {}), out.truth).columns.empty());
}

TEST(Verify, MiceBeatsMeanFillOnCorrelatedVitals) {
    SynthConfig cfg;
    cfg.n_patients = 40;
    cfg.records_per_patient = {50, 50};
    cfg.missing_rate.fill(0.1);
    const auto out = generate(cfg);
    ASSERT_GE(out.data.records.size(), 1900u);
    const auto rep = verify_against_truth(mice_impute(out.data.records, {}), out.truth);
    ASSERT_EQ(rep.columns.size(), kNumMeasured);
    for (const auto& [name, e] : rep.columns) {
        EXPECT_GT(e.missing, 100u) << name;
        EXPECT_LT(e.mae_mice, e.mae_mean_fill) << name;
    }
}

TEST(Verify, IndependentColumnsMatchMeanFill) {
    SynthConfig cfg;
    cfg.n_patients = 40;
    cfg.records_per_patient = {50, 50};
    cfg.signal = SignalModel::Null;
    cfg.latent_loading = 0;
    cfg.baseline_sd = 0;
    cfg.missing_rate.fill(0.1);
    const auto out = generate(cfg);
    const auto rep = verify_against_truth(mice_impute(out.data.records, {}), out.truth);
    for (const auto& [name, e] : rep.columns) EXPECT_NEAR(e.mae_mice / e.mae_mean_fill, 1.0, 0.05) << name;
}

TEST(Verify, MismatchedTruthRejected) {
    auto cfg = small(SignalModel::Global);
    cfg.missing_rate.fill(0.1);
    const auto out = generate(cfg);
    auto other = generate(small(SignalModel::Global, 99));
    EXPECT_THROW(verify_against_truth(mice_impute(out.data.records, {}), other.truth), data_error);
}
