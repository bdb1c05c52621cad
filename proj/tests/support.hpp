#pragma once

#include <random>

#include <vitalpain/vitalpain.hpp>

namespace vptest {

using namespace vitalpain;

inline VitalRecord record(std::string patient, std::int64_t day, std::array<double, kNumVitals> v,
                          std::optional<int> pain, std::size_t seq = 0) {
    VitalRecord r;
    r.patient_id = std::move(patient);
    r.day = day;
    r.timestamp = std::to_string(day);
    r.sequence = seq;
    for (std::size_t i = 0; i < kNumVitals; ++i) r.vitals[i] = v[i];
    r.pain_score = pain;
    return r;
}

// Correlated vitals around plausible means; pain loosely tied to pulse.
inline std::vector<VitalRecord> random_records(std::size_t n, std::size_t n_patients, std::uint64_t seed,
                                               double missing = 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u;
    std::vector<VitalRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double latent = z(rng);
        std::array<double, kNumVitals> v{97 - 1.5 * latent + z(rng), 125 + 10 * latent + 5 * z(rng),
                                         76 + 6 * latent + 4 * z(rng), 88 + 10 * latent + 5 * z(rng),
                                         18 + 2 * latent + z(rng), 98.4 + 0.3 * latent + 0.3 * z(rng)};
        const int pain = std::clamp(static_cast<int>(std::lround(5 + 2 * latent + z(rng))), 0, 10);
        auto r = record("P" + std::to_string(i % n_patients), static_cast<std::int64_t>(i / n_patients) * 3, v, pain, i);
        for (auto& x : r.vitals)
            if (u(rng) < missing) x.reset();
        if (u(rng) < missing) r.pain_score.reset();
        if (r.has_any_measurement()) out.push_back(std::move(r));
    }
    return out;
}

inline std::string csv_of(const std::vector<std::string>& lines) {
    std::string s;
    for (const auto& l : lines) s += l + "\n";
    return s;
}

inline const char* kHeader = "patient_id,timestamp,spo2,systolic_bp,diastolic_bp,pulse,resp,temp,pain_score";

} // namespace vptest
