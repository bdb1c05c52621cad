#pragma once

#include <chrono>
#include <cmath>

#include <nlohmann/json.hpp>

#include "core.hpp"
#include "imputation.hpp"
#include "ingestion.hpp"
#include "util.hpp"
#include "visits.hpp"

namespace vitalpain {

enum class SignalModel { Global, PerPatient, Null };

inline std::string_view to_string(SignalModel s) {
    switch (s) {
    case SignalModel::Global: return "global";
    case SignalModel::PerPatient: return "per_patient";
    case SignalModel::Null: return "null";
    }
    return "?";
}

inline SignalModel signal_from_string(std::string_view s) {
    if (s == "global") return SignalModel::Global;
    if (s == "per_patient") return SignalModel::PerPatient;
    if (s == "null") return SignalModel::Null;
    throw usage_error("unknown signal model '" + std::string(s) + "'");
}

struct IntRange {
    int min = 0;
    int max = 0;
};

struct SynthConfig {
    int n_patients = 47;
    IntRange records_per_patient{60, 110};
    // visit type proportions: outpatient, inpatient, outpatient evaluation
    std::array<double, kNumVisitTypes> visit_mix{0.4, 0.35, 0.25};
    IntRange inpatient_days{2, 6};
    IntRange inpatient_recordings_per_day{1, 4};
    IntRange evaluation_recordings{3, 6};
    IntRange gap_days{2, 45};
    SignalModel signal = SignalModel::Global;
    double latent_loading = 1.0; // strength of the shared factor across vitals
    double baseline_sd = 1.0;    // spread of per-patient baselines
    double noise_sd = 0.5;       // per-record idiosyncratic noise
    double label_noise = 0.0;    // probability a pain score is replaced by a uniform draw
    std::array<double, kNumMeasured> missing_rate{}; // six vitals, then pain
    std::optional<double> target_completeness;
    std::uint64_t rng_seed = 42;

    void validate() const {
        auto bad = [](const std::string& what) { throw infeasible_error("invalid synth config: " + what); };
        if (n_patients < 1) bad("n_patients must be >= 1");
        auto check_range = [&](IntRange r, int lo, const char* name) {
            if (r.min < lo || r.max < r.min) bad(std::string(name) + " range is malformed");
        };
        check_range(records_per_patient, 1, "records_per_patient");
        check_range(inpatient_days, 2, "inpatient_days");
        check_range(inpatient_recordings_per_day, 1, "inpatient_recordings_per_day");
        check_range(evaluation_recordings, 3, "evaluation_recordings");
        check_range(gap_days, 2, "gap_days");
        double mix = 0;
        for (double p : visit_mix) {
            if (p < 0 || p > 1) bad("visit_mix entries must lie in [0,1]");
            mix += p;
        }
        if (std::abs(mix - 1.0) > 1e-9) bad("visit_mix must sum to 1");
        for (double p : missing_rate)
            if (p < 0 || p > 1) bad("missing rates must lie in [0,1]");
        if (label_noise < 0 || label_noise > 1) bad("label_noise must lie in [0,1]");
        if (baseline_sd < 0 || noise_sd < 0 || latent_loading < 0) bad("spreads must be non-negative");
        if (target_completeness) {
            const double c = *target_completeness;
            if (!(c > 0 && c <= 1)) bad("target_completeness must lie in (0,1]");
            const bool any_rate = std::any_of(missing_rate.begin(), missing_rate.end(), [](double p) { return p > 0; });
            if (any_rate && std::abs(retained_completeness(missing_rate) - c) > 0.01)
                bad("target_completeness " + format_double(c) + " is incompatible with the per-column missing rates (implied " +
                    format_fixed(retained_completeness(missing_rate), 3) + ")");
        }
    }

    /// Expected complete fraction among retained rows under independent MCAR.
    static double retained_completeness(const std::array<double, kNumMeasured>& rates) {
        double all_present = 1, all_missing = 1;
        for (double p : rates) {
            all_present *= 1 - p;
            all_missing *= p;
        }
        return all_missing >= 1 ? 0.0 : all_present / (1 - all_missing);
    }

    /// Per-column rates actually used by the generator.
    std::array<double, kNumMeasured> effective_missing_rates() const {
        const bool any_rate = std::any_of(missing_rate.begin(), missing_rate.end(), [](double p) { return p > 0; });
        if (!target_completeness || any_rate) return missing_rate;
        // common rate r with retained completeness equal to the target; monotone in r
        double lo = 0, hi = 1;
        for (int it = 0; it < 200; ++it) {
            const double mid = (lo + hi) / 2;
            std::array<double, kNumMeasured> r;
            r.fill(mid);
            if (retained_completeness(r) > *target_completeness) lo = mid;
            else hi = mid;
        }
        std::array<double, kNumMeasured> r;
        r.fill((lo + hi) / 2);
        return r;
    }

    nlohmann::json to_json() const {
        auto range = [](IntRange r) { return nlohmann::json::array({r.min, r.max}); };
        nlohmann::json j;
        j["n_patients"] = n_patients;
        j["records_per_patient"] = range(records_per_patient);
        j["visit_mix"] = {{"outpatient", visit_mix[0]}, {"inpatient", visit_mix[1]}, {"outpatient_evaluation", visit_mix[2]}};
        j["inpatient_days"] = range(inpatient_days);
        j["inpatient_recordings_per_day"] = range(inpatient_recordings_per_day);
        j["evaluation_recordings"] = range(evaluation_recordings);
        j["gap_days"] = range(gap_days);
        j["signal"] = to_string(signal);
        j["latent_loading"] = latent_loading;
        j["baseline_sd"] = baseline_sd;
        j["noise_sd"] = noise_sd;
        j["label_noise"] = label_noise;
        nlohmann::json miss;
        for (std::size_t c = 0; c < kNumMeasured; ++c) miss[std::string(measured_name(c))] = missing_rate[c];
        j["missing_rate"] = miss;
        j["target_completeness"] = target_completeness ? nlohmann::json(*target_completeness) : nlohmann::json(nullptr);
        j["rng_seed"] = rng_seed;
        return j;
    }

    static SynthConfig from_json(const nlohmann::json& j) {
        SynthConfig c;
        auto range = [&](const char* key, IntRange& r) {
            if (!j.contains(key)) return;
            const auto& v = j.at(key);
            r = {v.at(0).get<int>(), v.at(1).get<int>()};
        };
        c.n_patients = j.value("n_patients", c.n_patients);
        range("records_per_patient", c.records_per_patient);
        if (j.contains("visit_mix")) {
            const auto& m = j.at("visit_mix");
            c.visit_mix = {m.value("outpatient", 0.0), m.value("inpatient", 0.0), m.value("outpatient_evaluation", 0.0)};
        }
        range("inpatient_days", c.inpatient_days);
        range("inpatient_recordings_per_day", c.inpatient_recordings_per_day);
        range("evaluation_recordings", c.evaluation_recordings);
        range("gap_days", c.gap_days);
        if (j.contains("signal")) c.signal = signal_from_string(j.at("signal").get<std::string>());
        c.latent_loading = j.value("latent_loading", c.latent_loading);
        c.baseline_sd = j.value("baseline_sd", c.baseline_sd);
        c.noise_sd = j.value("noise_sd", c.noise_sd);
        c.label_noise = j.value("label_noise", c.label_noise);
        if (j.contains("missing_rate")) {
            const auto& m = j.at("missing_rate");
            if (m.is_number()) c.missing_rate.fill(m.get<double>());
            else
                for (std::size_t k = 0; k < kNumMeasured; ++k) c.missing_rate[k] = m.value(std::string(measured_name(k)), 0.0);
        }
        if (j.contains("target_completeness") && !j.at("target_completeness").is_null())
            c.target_completeness = j.at("target_completeness").get<double>();
        c.rng_seed = j.value("rng_seed", c.rng_seed);
        c.validate();
        return c;
    }
};

/// pain = min(10, number of (vital, threshold) pairs with vital > threshold).
struct ThresholdRule {
    std::vector<std::pair<std::size_t, double>> thresholds;
    bool descending = false; // count vital < threshold instead

    int apply(const std::array<double, kNumVitals>& v) const {
        int s = 0;
        for (auto [vital, t] : thresholds) s += descending ? v[vital] < t : v[vital] > t;
        return std::min(s, 10);
    }

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (auto [vital, t] : thresholds) arr.push_back({{"vital", kVitalNames[vital]}, {"threshold", t}});
        return {{"thresholds", arr}, {"direction", descending ? "below" : "above"}};
    }
};

struct TruthRow {
    std::size_t sequence = 0;
    std::string patient_id;
    std::string timestamp;
    std::array<double, kNumVitals> vitals{};
    int pain = 0;
    VisitType visit_type = VisitType::Outpatient;
};

struct GroundTruth {
    SignalModel signal = SignalModel::Null;
    std::optional<ThresholdRule> global_rule;
    std::map<std::string, ThresholdRule> patient_rules;
    std::vector<TruthRow> rows; // indexed by sequence

    nlohmann::json rule_json() const {
        nlohmann::json j;
        j["signal"] = to_string(signal);
        if (global_rule) j["rule"] = global_rule->to_json();
        for (const auto& [id, r] : patient_rules) j["patient_rules"][id] = r.to_json();
        return j;
    }
};

struct SynthOutput {
    RawDataset data;
    GroundTruth truth;
};

namespace detail {

struct VitalProfile {
    double mean, spread, loading;
    int decimals;
    double lo, hi;
};

// loading: response to the shared distress factor
inline const std::array<VitalProfile, kNumVitals>& vital_profiles() {
    static const std::array<VitalProfile, kNumVitals> p{{
        {97.0, 1.8, -0.6, 0, 70.0, 100.0}, // spo2
        {125.0, 14.0, 0.7, 0, 70.0, 220.0}, // systolic
        {76.0, 9.0, 0.7, 0, 35.0, 140.0},   // diastolic
        {88.0, 14.0, 0.9, 0, 40.0, 190.0},  // pulse
        {18.0, 3.0, 0.8, 0, 8.0, 45.0},     // resp
        {98.4, 0.7, 0.4, 1, 95.0, 104.5},   // temp, F
    }};
    return p;
}

inline double round_to(double v, int decimals) {
    const double scale = std::pow(10.0, decimals);
    return std::round(v * scale) / scale;
}

inline std::string format_timestamp(std::int64_t day, int minute_of_day) {
    const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{day}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), minute_of_day / 60,
                  minute_of_day % 60);
    return buf;
}

/// Thresholds at the k/(n+1) empirical quantiles of `values`, placed halfway
/// to the next distinct value so that the rule never ties a sample.
inline std::vector<double> quantile_thresholds(std::vector<double> values, int n) {
    std::sort(values.begin(), values.end());
    std::vector<double> out;
    for (int k = 1; k <= n; ++k) {
        const auto pos = static_cast<std::size_t>(std::floor(static_cast<double>(k) * values.size() / (n + 1)));
        const double v = values[std::min(pos, values.size() - 1)];
        auto next = std::upper_bound(values.begin(), values.end(), v);
        out.push_back(next == values.end() ? v + 0.5 : (v + *next) / 2);
    }
    return out;
}

inline int uniform_int(Rng& rng, IntRange r) { return std::uniform_int_distribution<int>(r.min, r.max)(rng); }

} // namespace detail

/// Seeded synthetic cohort: visit-structured timelines, vitals from
/// per-patient baselines plus a shared distress factor, pain from the signal
/// model, then MCAR missingness. Ground truth stays separate from the data.
inline SynthOutput generate(const SynthConfig& config) {
    config.validate();
    const auto& prof = detail::vital_profiles();
    const std::int64_t base_day =
        std::chrono::sys_days{std::chrono::year{2015} / std::chrono::January / 1}.time_since_epoch().count();

    SynthOutput out;
    out.truth.signal = config.signal;
    auto& truth = out.truth.rows;

    Rng rng = derive_rng(config.rng_seed, 1);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::discrete_distribution<int> pick_type(config.visit_mix.begin(), config.visit_mix.end());

    const int width = std::max(2, static_cast<int>(std::to_string(config.n_patients).size()));
    std::vector<std::string> ids;
    for (int p = 0; p < config.n_patients; ++p) {
        std::string num = std::to_string(p + 1);
        ids.push_back("P" + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num);
    }

    for (const auto& id : ids) {
        std::array<double, kNumVitals> baseline{};
        for (std::size_t v = 0; v < kNumVitals; ++v)
            baseline[v] = prof[v].mean + config.baseline_sd * 0.5 * prof[v].spread * gauss(rng);

        const int target = detail::uniform_int(rng, config.records_per_patient);
        std::int64_t day = base_day + std::uniform_int_distribution<int>(0, 30)(rng);
        int produced = 0;
        while (produced < target) {
            const auto type = static_cast<VisitType>(pick_type(rng));
            std::vector<int> per_day;
            switch (type) {
            case VisitType::Outpatient: per_day = {std::uniform_int_distribution<int>(1, 2)(rng)}; break;
            case VisitType::OutpatientEvaluation: per_day = {detail::uniform_int(rng, config.evaluation_recordings)}; break;
            case VisitType::Inpatient: {
                const int days = detail::uniform_int(rng, config.inpatient_days);
                for (int d = 0; d < days; ++d) per_day.push_back(detail::uniform_int(rng, config.inpatient_recordings_per_day));
                break;
            }
            }
            for (std::size_t d = 0; d < per_day.size(); ++d, ++day) {
                int minute = 6 * 60 + std::uniform_int_distribution<int>(0, 120)(rng);
                for (int k = 0; k < per_day[d]; ++k) {
                    TruthRow row;
                    row.sequence = truth.size();
                    row.patient_id = id;
                    row.timestamp = detail::format_timestamp(day, minute);
                    row.visit_type = type;
                    const double distress = gauss(rng);
                    for (std::size_t v = 0; v < kNumVitals; ++v) {
                        const double value = baseline[v] + prof[v].spread * (config.latent_loading * prof[v].loading * distress +
                                                                             config.noise_sd * gauss(rng));
                        row.vitals[v] = detail::round_to(std::clamp(value, prof[v].lo, prof[v].hi), prof[v].decimals);
                    }
                    truth.push_back(std::move(row));
                    minute = std::min(minute + std::uniform_int_distribution<int>(20, 240)(rng), 23 * 60 + 59);
                    ++produced;
                }
            }
            day += detail::uniform_int(rng, config.gap_days) - 1;
        }
    }

    // pain from the signal model, evaluated on the complete vitals
    Rng pain_rng = derive_rng(config.rng_seed, 2);
    std::uniform_int_distribution<int> any_score(0, 10);
    auto column = [&](std::size_t v, auto&& keep) {
        std::vector<double> values;
        for (const auto& r : truth)
            if (keep(r)) values.push_back(r.vitals[v]);
        return values;
    };
    switch (config.signal) {
    case SignalModel::Global: {
        ThresholdRule rule;
        const auto pulse = column(static_cast<std::size_t>(Vital::Pulse), [](const TruthRow&) { return true; });
        const auto resp = column(static_cast<std::size_t>(Vital::Resp), [](const TruthRow&) { return true; });
        for (double t : detail::quantile_thresholds(pulse, 6)) rule.thresholds.emplace_back(static_cast<std::size_t>(Vital::Pulse), t);
        for (double t : detail::quantile_thresholds(resp, 4)) rule.thresholds.emplace_back(static_cast<std::size_t>(Vital::Resp), t);
        for (auto& r : truth) r.pain = rule.apply(r.vitals);
        out.truth.global_rule = std::move(rule);
        break;
    }
    case SignalModel::PerPatient: {
        // each patient reads pain off one vital, in its own direction
        constexpr std::array<Vital, 4> candidates = {Vital::SystolicBP, Vital::DiastolicBP, Vital::Pulse, Vital::Resp};
        Rng rule_rng = derive_rng(config.rng_seed, 3);
        for (const auto& id : ids) {
            ThresholdRule rule;
            const auto v = static_cast<std::size_t>(candidates[std::uniform_int_distribution<std::size_t>(0, 3)(rule_rng)]);
            rule.descending = std::uniform_int_distribution<int>(0, 1)(rule_rng) == 1;
            const auto values = column(v, [&](const TruthRow& r) { return r.patient_id == id; });
            auto thr = detail::quantile_thresholds(values, 10);
            if (rule.descending) {
                // mirror so that counting values below thresholds spreads pain evenly
                std::vector<double> neg(values.size());
                std::transform(values.begin(), values.end(), neg.begin(), [](double x) { return -x; });
                thr = detail::quantile_thresholds(neg, 10);
                for (double& t : thr) t = -t;
            }
            for (double t : thr) rule.thresholds.emplace_back(v, t);
            out.truth.patient_rules[id] = std::move(rule);
        }
        for (auto& r : truth) r.pain = out.truth.patient_rules.at(r.patient_id).apply(r.vitals);
        break;
    }
    case SignalModel::Null:
        for (auto& r : truth) r.pain = any_score(pain_rng);
        break;
    }
    if (config.label_noise > 0)
        for (auto& r : truth)
            if (unit(pain_rng) < config.label_noise) r.pain = any_score(pain_rng);

    // MCAR missingness
    const auto rates = config.effective_missing_rates();
    Rng miss_rng = derive_rng(config.rng_seed, 4);
    RawDataset& ds = out.data;
    ds.manifest.temp_unit = "F";
    ds.manifest.provenance = "synthetic cohort, seed " + std::to_string(config.rng_seed);
    ds.source_rows = truth.size();
    for (const auto& t : truth) {
        VitalRecord rec;
        rec.patient_id = t.patient_id;
        rec.timestamp = t.timestamp;
        auto parsed = detail::parse_timestamp(t.timestamp);
        rec.day = parsed->day;
        rec.second_of_day = parsed->second;
        rec.sequence = t.sequence;
        for (std::size_t v = 0; v < kNumVitals; ++v)
            if (!(unit(miss_rng) < rates[v])) rec.vitals[v] = t.vitals[v];
        if (!(unit(miss_rng) < rates[kPainColumn])) rec.pain_score = t.pain;
        ds.records.push_back(std::move(rec));
    }
    out.data = retain_nonempty(std::move(ds));
    return out;
}

inline std::string truth_csv(const GroundTruth& truth) {
    std::string out = "row,patient_id,timestamp";
    for (auto n : kVitalNames) out += "," + std::string(n);
    out += ",pain_score,visit_type\n";
    for (const auto& r : truth.rows) {
        out += std::to_string(r.sequence) + "," + csv_escape(r.patient_id) + "," + r.timestamp;
        for (double v : r.vitals) out += "," + format_double(v);
        out += "," + std::to_string(r.pain) + "," + std::string(to_string(r.visit_type)) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Imputation error against ground truth

struct ColumnError {
    std::size_t missing = 0;
    double mae_mice = 0.0;
    double mae_mean_fill = 0.0;
};

struct ImputationErrorReport {
    std::map<std::string, ColumnError> columns; // only columns with missing cells

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [name, e] : columns)
            j[name] = {{"missing", e.missing}, {"mae_mice", e.mae_mice}, {"mae_mean_fill", e.mae_mean_fill}};
        return j;
    }
};

/// Per-column MAE on originally-missing cells, for the imputed values and for
/// the observed-mean fill computed from the same table.
inline ImputationErrorReport verify_against_truth(const ImputedDataset& imputed, const GroundTruth& truth) {
    if (imputed.mask.size() != imputed.records.size()) throw data_error("imputed dataset mask does not match its records");
    std::array<double, kNumMeasured> sum{}, mean_fill{};
    std::array<std::size_t, kNumMeasured> observed{};
    auto value = [](const VitalRecord& r, std::size_t c) {
        return c < kNumVitals ? *r.vitals[c] : static_cast<double>(*r.pain_score);
    };
    for (std::size_t i = 0; i < imputed.records.size(); ++i) {
        const auto& r = imputed.records[i];
        if (r.sequence >= truth.rows.size() || truth.rows[r.sequence].patient_id != r.patient_id ||
            truth.rows[r.sequence].timestamp != r.timestamp)
            throw data_error("imputed record " + std::to_string(r.sequence) + " has no matching ground-truth row");
        for (std::size_t c = 0; c < kNumMeasured; ++c)
            if (!imputed.mask[i][c]) {
                sum[c] += value(r, c);
                ++observed[c];
            }
    }
    for (std::size_t c = 0; c < kNumMeasured; ++c) mean_fill[c] = observed[c] ? sum[c] / static_cast<double>(observed[c]) : 0.0;

    ImputationErrorReport rep;
    std::array<ColumnError, kNumMeasured> acc{};
    for (std::size_t i = 0; i < imputed.records.size(); ++i) {
        const auto& r = imputed.records[i];
        const auto& t = truth.rows[r.sequence];
        for (std::size_t c = 0; c < kNumMeasured; ++c) {
            if (!imputed.mask[i][c]) continue;
            if (c == kPainColumn && !r.pain_score) continue;
            const double tv = c < kNumVitals ? t.vitals[c] : static_cast<double>(t.pain);
            ++acc[c].missing;
            acc[c].mae_mice += std::abs(value(r, c) - tv);
            acc[c].mae_mean_fill += std::abs(mean_fill[c] - tv);
        }
    }
    for (std::size_t c = 0; c < kNumMeasured; ++c) {
        if (acc[c].missing == 0) continue;
        acc[c].mae_mice /= static_cast<double>(acc[c].missing);
        acc[c].mae_mean_fill /= static_cast<double>(acc[c].missing);
        rep.columns[std::string(measured_name(c))] = acc[c];
    }
    return rep;
}

} // namespace vitalpain
