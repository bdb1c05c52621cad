#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vitalpain {

// Error taxonomy. The CLI maps these onto exit codes 1, 2 and 3.
struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct infeasible_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kNumVitals = 6;

enum class Vital : std::size_t { SpO2 = 0, SystolicBP, DiastolicBP, Pulse, Resp, Temp };

inline constexpr std::array<std::string_view, kNumVitals> kVitalNames = {
    "spo2", "systolic_bp", "diastolic_bp", "pulse", "resp", "temp"};

/// Declared one-hot order: outpatient, inpatient, outpatient evaluation.
enum class VisitType : int { Outpatient = 0, Inpatient = 1, OutpatientEvaluation = 2 };

inline constexpr std::size_t kNumVisitTypes = 3;

inline std::string_view to_string(VisitType t) {
    switch (t) {
    case VisitType::Outpatient: return "outpatient";
    case VisitType::Inpatient: return "inpatient";
    case VisitType::OutpatientEvaluation: return "outpatient_evaluation";
    }
    return "unknown";
}

inline VisitType visit_type_from_string(std::string_view s) {
    if (s == "outpatient") return VisitType::Outpatient;
    if (s == "inpatient") return VisitType::Inpatient;
    if (s == "outpatient_evaluation") return VisitType::OutpatientEvaluation;
    throw data_error("unknown visit type '" + std::string(s) + "'");
}

struct VitalRecord {
    std::string patient_id;
    std::string timestamp;          // original text, re-emitted verbatim
    std::int64_t day = 0;           // calendar-day ordinal
    std::int32_t second_of_day = 0; // 0 for date-only timestamps
    std::size_t sequence = 0;       // data-row index in the source file
    std::array<std::optional<double>, kNumVitals> vitals{};
    std::optional<int> pain_score;
    bool pain_imputed = false;
    std::optional<VisitType> visit_type;

    std::optional<double>& vital(Vital v) { return vitals[static_cast<std::size_t>(v)]; }
    const std::optional<double>& vital(Vital v) const { return vitals[static_cast<std::size_t>(v)]; }

    bool has_any_measurement() const {
        return pain_score.has_value() ||
               std::any_of(vitals.begin(), vitals.end(), [](const auto& v) { return v.has_value(); });
    }

    bool is_complete() const {
        return pain_score.has_value() &&
               std::all_of(vitals.begin(), vitals.end(), [](const auto& v) { return v.has_value(); });
    }
};

/// Time order within a patient: day, then time of day, then file order.
inline bool time_less(const VitalRecord& a, const VitalRecord& b) {
    if (a.day != b.day) return a.day < b.day;
    if (a.second_of_day != b.second_of_day) return a.second_of_day < b.second_of_day;
    return a.sequence < b.sequence;
}

// ---------------------------------------------------------------------------
// Pain scales

enum class PainScale { Points11, Points6, Points4, Points2 };

inline constexpr std::array<PainScale, 4> kAllScales = {PainScale::Points11, PainScale::Points6,
                                                        PainScale::Points4, PainScale::Points2};

namespace detail {

struct ScaleTable {
    // upper[i] is the inclusive upper score of bin i
    std::vector<int> upper;
    std::vector<std::string_view> names;
};

inline const ScaleTable& scale_table(PainScale scale) {
    static const ScaleTable p11{{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10},
                                {"0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "10"}};
    static const ScaleTable p6{{0, 2, 4, 6, 8, 10},
                               {"None", "Very mild", "Mild", "Moderate", "Severe", "Very severe"}};
    static const ScaleTable p4{{0, 3, 6, 10}, {"None", "Mild", "Moderate", "Severe"}};
    static const ScaleTable p2{{5, 10}, {"No/mild pain", "Severe pain"}};
    switch (scale) {
    case PainScale::Points11: return p11;
    case PainScale::Points6: return p6;
    case PainScale::Points4: return p4;
    case PainScale::Points2: return p2;
    }
    return p11;
}

} // namespace detail

inline int points(PainScale scale) { return static_cast<int>(detail::scale_table(scale).upper.size()); }

inline PainScale scale_from_points(int n) {
    switch (n) {
    case 11: return PainScale::Points11;
    case 6: return PainScale::Points6;
    case 4: return PainScale::Points4;
    case 2: return PainScale::Points2;
    default: throw usage_error("unsupported pain scale: " + std::to_string(n) + " points");
    }
}

inline std::string_view bin_name(PainScale scale, int bin) {
    const auto& t = detail::scale_table(scale);
    if (bin < 0 || bin >= static_cast<int>(t.names.size())) throw std::out_of_range("pain bin out of range");
    return t.names[static_cast<std::size_t>(bin)];
}

/// Maps a 0-10 score to its bin index on `scale`.
inline int bin_pain(int score, PainScale scale) {
    if (score < 0 || score > 10) throw data_error("pain score out of range [0,10]: " + std::to_string(score));
    const auto& upper = detail::scale_table(scale).upper;
    auto it = std::lower_bound(upper.begin(), upper.end(), score);
    return static_cast<int>(it - upper.begin());
}

// ---------------------------------------------------------------------------
// Feature construction

/// Categorical encoder state; the patient list is fitted on training records only.
struct FeatureEncoder {
    bool include_visit = false;
    bool include_patient = false;
    std::vector<std::string> patients; // sorted, unique

    std::size_t width() const {
        return kNumVitals + (include_visit ? kNumVisitTypes : 0) + (include_patient ? patients.size() : 0);
    }

    std::optional<std::size_t> patient_index(std::string_view id) const {
        auto it = std::lower_bound(patients.begin(), patients.end(), id);
        if (it == patients.end() || *it != id) return std::nullopt;
        return static_cast<std::size_t>(it - patients.begin());
    }
};

inline FeatureEncoder fit_encoder(std::span<const VitalRecord* const> training, bool include_visit,
                                  bool include_patient) {
    FeatureEncoder enc{include_visit, include_patient, {}};
    if (include_patient) {
        for (const auto* r : training) enc.patients.push_back(r->patient_id);
        std::sort(enc.patients.begin(), enc.patients.end());
        enc.patients.erase(std::unique(enc.patients.begin(), enc.patients.end()), enc.patients.end());
    }
    return enc;
}

/// Writes the feature vector for `record` into `out` (size encoder.width()).
/// Patients unseen by the encoder get an all-zero patient block.
inline void build_features(const VitalRecord& record, const FeatureEncoder& enc, std::span<double> out) {
    if (out.size() != enc.width()) throw std::invalid_argument("feature buffer has wrong width");
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t v = 0; v < kNumVitals; ++v) {
        if (!record.vitals[v]) {
            throw data_error("cannot build features: missing " + std::string(kVitalNames[v]) + " for patient " +
                             record.patient_id + " (row " + std::to_string(record.sequence) + ")");
        }
        out[v] = *record.vitals[v];
    }
    std::size_t offset = kNumVitals;
    if (enc.include_visit) {
        if (!record.visit_type)
            throw data_error("cannot build features: missing visit_type for row " + std::to_string(record.sequence));
        out[offset + static_cast<std::size_t>(*record.visit_type)] = 1.0;
        offset += kNumVisitTypes;
    }
    if (enc.include_patient) {
        if (auto idx = enc.patient_index(record.patient_id)) out[offset + *idx] = 1.0;
    }
}

inline std::vector<double> build_features(const VitalRecord& record, const FeatureEncoder& enc) {
    std::vector<double> out(enc.width());
    build_features(record, enc, out);
    return out;
}

} // namespace vitalpain
