#include <gtest/gtest.h>

#include "support.hpp"

using namespace vptest;

namespace {

// Bin index per score, read straight off the published category ranges.
const int kP6[11] = {0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5};
const int kP4[11] = {0, 1, 1, 1, 2, 2, 2, 3, 3, 3, 3};
const int kP2[11] = {0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1};

} // namespace

TEST(Binning, MatchesCategoryRanges) {
    for (int s = 0; s <= 10; ++s) {
        EXPECT_EQ(bin_pain(s, PainScale::Points11), s);
        EXPECT_EQ(bin_pain(s, PainScale::Points6), kP6[s]) << s;
        EXPECT_EQ(bin_pain(s, PainScale::Points4), kP4[s]) << s;
        EXPECT_EQ(bin_pain(s, PainScale::Points2), kP2[s]) << s;
    }
}

TEST(Binning, NamedExamples) {
    EXPECT_EQ(bin_pain(7, PainScale::Points11), 7);
    EXPECT_EQ(bin_name(PainScale::Points2, bin_pain(5, PainScale::Points2)), "No/mild pain");
    EXPECT_EQ(bin_name(PainScale::Points2, bin_pain(6, PainScale::Points2)), "Severe pain");
    EXPECT_EQ(bin_name(PainScale::Points6, bin_pain(2, PainScale::Points6)), "Very mild");
    EXPECT_EQ(bin_name(PainScale::Points4, bin_pain(4, PainScale::Points4)), "Moderate");
}

TEST(Binning, MonotoneAndSurjective) {
    for (PainScale sc : kAllScales) {
        std::vector<int> seen(static_cast<std::size_t>(points(sc)), 0);
        int prev = -1;
        for (int s = 0; s <= 10; ++s) {
            const int b = bin_pain(s, sc);
            EXPECT_GE(b, prev);
            prev = b;
            ++seen[static_cast<std::size_t>(b)];
        }
        for (int c : seen) EXPECT_GT(c, 0);
    }
}

TEST(Binning, RejectsOutOfRange) {
    EXPECT_THROW(bin_pain(-1, PainScale::Points11), data_error);
    EXPECT_THROW(bin_pain(11, PainScale::Points4), data_error);
    EXPECT_THROW(scale_from_points(5), usage_error);
}

TEST(Features, VitalsOnly) {
    auto r = record("A", 0, {97, 120, 80, 90, 18, 98.6}, 4);
    const auto enc = fit_encoder(std::vector<const VitalRecord*>{&r}, false, false);
    const auto f = build_features(r, enc);
    ASSERT_EQ(f.size(), 6u);
    EXPECT_EQ(f, (std::vector<double>{97, 120, 80, 90, 18, 98.6}));
}

TEST(Features, VisitOneHot) {
    auto r = record("A", 0, {97, 120, 80, 90, 18, 98.6}, 4);
    r.visit_type = VisitType::Inpatient;
    const auto enc = fit_encoder(std::vector<const VitalRecord*>{&r}, true, false);
    const auto f = build_features(r, enc);
    ASSERT_EQ(f.size(), 9u);
    EXPECT_EQ(f[6], 0.0);
    EXPECT_EQ(f[7], 1.0);
    EXPECT_EQ(f[8], 0.0);
}

TEST(Features, PatientBlockFor47Patients) {
    std::vector<VitalRecord> recs;
    for (int p = 0; p < 47; ++p) {
        recs.push_back(record("P" + std::to_string(p), 0, {97, 120, 80, 90, 18, 98.6}, 1));
        recs.back().visit_type = VisitType::Outpatient;
    }
    std::vector<const VitalRecord*> ptrs;
    for (auto& r : recs) ptrs.push_back(&r);
    const auto enc = fit_encoder(ptrs, true, true);
    EXPECT_EQ(enc.width(), 56u);
    for (const auto& r : recs) {
        const auto f = build_features(r, enc);
        ASSERT_EQ(f.size(), 56u);
        double block = 0;
        for (std::size_t i = 9; i < 56; ++i) block += f[i];
        EXPECT_EQ(block, 1.0);
        // block order follows sorted patient ids
        EXPECT_EQ(f[9 + *enc.patient_index(r.patient_id)], 1.0);
    }
    EXPECT_TRUE(std::is_sorted(enc.patients.begin(), enc.patients.end()));
}

TEST(Features, UnknownPatientGetsZeroBlock) {
    auto a = record("A", 0, {97, 120, 80, 90, 18, 98.6}, 1);
    auto b = record("B", 0, {97, 120, 80, 90, 18, 98.6}, 1);
    const auto enc = fit_encoder(std::vector<const VitalRecord*>{&a}, false, true);
    const auto f = build_features(b, enc);
    EXPECT_EQ(f.back(), 0.0);
}

TEST(Features, MissingVitalNamesField) {
    auto r = record("A", 0, {97, 120, 80, 90, 18, 98.6}, 1);
    r.vitals[3].reset();
    const auto enc = fit_encoder(std::vector<const VitalRecord*>{&r}, false, false);
    try {
        build_features(r, enc);
        FAIL();
    } catch (const data_error& e) {
        EXPECT_NE(std::string(e.what()).find("pulse"), std::string::npos);
    }
}

TEST(Features, MissingVisitTypeRejected) {
    auto r = record("A", 0, {97, 120, 80, 90, 18, 98.6}, 1);
    const auto enc = fit_encoder(std::vector<const VitalRecord*>{&r}, true, false);
    EXPECT_THROW(build_features(r, enc), data_error);
}

TEST(Util, DerivedStreamsAreIndependentAndStable) {
    auto a = derive_rng(42, 1, 0);
    auto b = derive_rng(42, 1, 0);
    auto c = derive_rng(42, 2, 0);
    const auto va = a();
    EXPECT_EQ(va, b());
    EXPECT_NE(va, c());
}

TEST(Util, ParallelForVisitsEveryIndexOnce) {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; });
    for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(Util, ParallelForPropagatesExceptions) {
    EXPECT_THROW(parallel_for(10, [](std::size_t i) {
                     if (i == 7) throw data_error("boom");
                 }),
                 data_error);
}
