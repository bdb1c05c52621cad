#pragma once

#include <map>
#include <numeric>

#include "core.hpp"
#include "util.hpp"

namespace vitalpain {

/// Records further apart than this many calendar days start a new visit.
inline constexpr std::int64_t kVisitGapDays = 2;

struct Visit {
    std::string patient_id;
    std::vector<std::size_t> records; // indices into the dataset, in time order
    std::int64_t start_day = 0;
    std::int64_t end_day = 0;
    std::size_t n_recordings = 0;
    VisitType visit_type = VisitType::Outpatient;

    std::int64_t span_days() const { return end_day - start_day; }
};

/// A visit spanning a day boundary is inpatient (consecutive-day stay); a
/// single-day visit is outpatient with at most two recordings, outpatient
/// evaluation with more.
inline VisitType classify_visit(std::int64_t span_days, std::size_t n_recordings) {
    if (span_days >= 1) return VisitType::Inpatient;
    return n_recordings <= 2 ? VisitType::Outpatient : VisitType::OutpatientEvaluation;
}

inline VisitType classify_visit(const Visit& v) { return classify_visit(v.span_days(), v.n_recordings); }

/// Greedy left-to-right grouping of one patient's records. `order` lists
/// dataset indices already sorted by time.
inline std::vector<Visit> segment_visits(std::span<const VitalRecord> records, std::span<const std::size_t> order) {
    std::vector<Visit> visits;
    for (std::size_t idx : order) {
        const auto& r = records[idx];
        if (visits.empty() || r.day - visits.back().end_day >= kVisitGapDays) {
            Visit v;
            v.patient_id = r.patient_id;
            v.start_day = r.day;
            visits.push_back(std::move(v));
        }
        auto& v = visits.back();
        v.records.push_back(idx);
        v.end_day = r.day;
    }
    for (auto& v : visits) {
        v.n_recordings = v.records.size();
        v.visit_type = classify_visit(v);
    }
    return visits;
}

/// Day-only convenience overload, mostly for tests.
inline std::vector<std::vector<std::int64_t>> segment_days(std::span<const std::int64_t> days) {
    std::vector<std::vector<std::int64_t>> out;
    for (std::size_t i = 0; i < days.size(); ++i) {
        if (out.empty() || days[i] - out.back().back() >= kVisitGapDays) out.emplace_back();
        out.back().push_back(days[i]);
    }
    return out;
}

/// Per-patient index lists sorted by time. Patients keyed by id.
inline std::map<std::string, std::vector<std::size_t>> patient_timelines(std::span<const VitalRecord> records) {
    std::map<std::string, std::vector<std::size_t>> by_patient;
    for (std::size_t i = 0; i < records.size(); ++i) by_patient[records[i].patient_id].push_back(i);
    for (auto& [id, idx] : by_patient)
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return time_less(records[a], records[b]); });
    return by_patient;
}

/// Segments every patient and writes the visit type back onto each record.
inline std::vector<Visit> assign_visits(std::vector<VitalRecord>& records) {
    std::vector<Visit> all;
    for (const auto& [id, order] : patient_timelines(records)) {
        auto visits = segment_visits(records, order);
        for (auto& v : visits) {
            for (std::size_t idx : v.records) records[idx].visit_type = v.visit_type;
            all.push_back(std::move(v));
        }
    }
    return all;
}

struct VisitDistribution {
    std::map<std::string, std::array<std::size_t, kNumVisitTypes>> per_patient;
    std::array<std::size_t, kNumVisitTypes> totals{};

    std::size_t total_visits() const { return std::accumulate(totals.begin(), totals.end(), std::size_t{0}); }
};

inline VisitDistribution visit_distribution(std::span<const Visit> visits) {
    VisitDistribution d;
    for (const auto& v : visits) {
        auto& row = d.per_patient[v.patient_id];
        ++row[static_cast<std::size_t>(v.visit_type)];
        ++d.totals[static_cast<std::size_t>(v.visit_type)];
    }
    return d;
}

/// CSV: patient_id, visit_index, start_day, end_day, n_recordings, visit_type.
/// visit_index counts from 0 within each patient.
inline std::string visits_csv(std::span<const Visit> visits) {
    std::string out = "patient_id,visit_index,start_day,end_day,n_recordings,visit_type\n";
    std::string current;
    std::size_t index = 0;
    for (const auto& v : visits) {
        if (v.patient_id != current) {
            current = v.patient_id;
            index = 0;
        }
        out += csv_escape(v.patient_id) + "," + std::to_string(index++) + "," + std::to_string(v.start_day) + "," +
               std::to_string(v.end_day) + "," + std::to_string(v.n_recordings) + "," +
               std::string(to_string(v.visit_type)) + "\n";
    }
    return out;
}

} // namespace vitalpain
