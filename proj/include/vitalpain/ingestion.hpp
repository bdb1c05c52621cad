#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "core.hpp"
#include "util.hpp"

namespace vitalpain {

/// Column mapping and dataset metadata. `columns` maps logical names
/// (patient_id, timestamp, spo2 ... temp, pain_score, pain_imputed) onto CSV
/// header names; unmapped names default to themselves.
struct Manifest {
    std::map<std::string, std::string> columns;
    std::string temp_unit = "F";
    std::vector<std::string> missing_tokens; // in addition to the empty cell
    std::string provenance;

    std::string header_for(const std::string& logical) const {
        auto it = columns.find(logical);
        return it == columns.end() ? logical : it->second;
    }

    static Manifest from_json(const nlohmann::json& j) {
        Manifest m;
        if (!j.is_object()) throw data_error("manifest must be a JSON object");
        if (j.contains("columns")) {
            for (auto& [k, v] : j.at("columns").items()) m.columns[k] = v.get<std::string>();
        }
        m.temp_unit = j.value("temp_unit", std::string("F"));
        if (m.temp_unit != "F" && m.temp_unit != "C")
            throw data_error("manifest temp_unit must be \"F\" or \"C\", got \"" + m.temp_unit + "\"");
        if (j.contains("missing_tokens")) m.missing_tokens = j.at("missing_tokens").get<std::vector<std::string>>();
        m.provenance = j.value("provenance", std::string());
        return m;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["columns"] = columns;
        j["temp_unit"] = temp_unit;
        j["missing_tokens"] = missing_tokens;
        j["provenance"] = provenance;
        return j;
    }
};

inline Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open manifest: " + path);
    try {
        return Manifest::from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw data_error("malformed manifest " + path + ": " + e.what());
    }
}

struct RawDataset {
    std::vector<VitalRecord> records;
    Manifest manifest;
    std::vector<std::string> warnings;
    std::size_t source_rows = 0;   // data rows read from the file
    std::size_t dropped_empty = 0; // rows with no measurement at all
};

// ---------------------------------------------------------------------------
// CSV reading

namespace detail {

inline std::vector<std::vector<std::string>> split_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, field_started = false;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
        row.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
        case '"':
            if (!field_started && field.empty()) quoted = true;
            else field += c;
            field_started = true;
            break;
        case ',': end_field(); break;
        case '\r': break;
        case '\n': end_row(); break;
        default:
            field += c;
            field_started = true;
        }
    }
    if (quoted) throw data_error("unterminated quoted field in CSV");
    if (!field.empty() || !row.empty()) end_row();
    return rows;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

template <class Int>
bool parse_int(std::string_view s, Int& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

inline bool parse_double(std::string_view s, double& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size() && std::isfinite(out);
}

struct ParsedTime {
    std::int64_t day;
    std::int32_t second;
};

/// Accepts an integer day ordinal, YYYY-MM-DD, or YYYY-MM-DD[T ]HH:MM[:SS[.frac]][Z].
inline std::optional<ParsedTime> parse_timestamp(std::string_view s) {
    std::int64_t ordinal = 0;
    if (parse_int(s, ordinal)) return ParsedTime{ordinal, 0};
    if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    int y = 0;
    unsigned mo = 0, d = 0;
    if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), mo) || !parse_int(s.substr(8, 2), d))
        return std::nullopt;
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{d}};
    if (!ymd.ok()) return std::nullopt;
    const std::int64_t day = std::chrono::sys_days{ymd}.time_since_epoch().count();
    if (s.size() == 10) return ParsedTime{day, 0};
    if (s[10] != 'T' && s[10] != ' ') return std::nullopt;
    auto rest = s.substr(11);
    if (!rest.empty() && rest.back() == 'Z') rest.remove_suffix(1);
    if (rest.size() < 5 || rest[2] != ':') return std::nullopt;
    int hh = 0, mm = 0, ss = 0;
    if (!parse_int(rest.substr(0, 2), hh) || !parse_int(rest.substr(3, 2), mm)) return std::nullopt;
    if (rest.size() > 5) {
        if (rest[5] != ':' || rest.size() < 8 || !parse_int(rest.substr(6, 2), ss)) return std::nullopt;
        if (rest.size() > 8 && rest[8] != '.') return std::nullopt;
    }
    if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
    return ParsedTime{day, hh * 3600 + mm * 60 + ss};
}

inline void range_warnings(const VitalRecord& r, std::size_t row, std::vector<std::string>& warnings) {
    auto warn = [&](Vital v, const char* what) {
        warnings.push_back("row " + std::to_string(row) + ": implausible " +
                           std::string(kVitalNames[static_cast<std::size_t>(v)]) + " " +
                           format_double(*r.vital(v)) + " (" + what + ")");
    };
    if (auto& s = r.vital(Vital::SpO2); s && (*s <= 0.0 || *s > 100.0)) warn(Vital::SpO2, "expected (0,100]");
    for (Vital v : {Vital::SystolicBP, Vital::DiastolicBP, Vital::Pulse, Vital::Resp})
        if (auto& x = r.vital(v); x && *x <= 0.0) warn(v, "expected > 0");
}

} // namespace detail

/// Drops rows with no vital and no pain score. Patients left with no rows
/// disappear with them.
inline RawDataset retain_nonempty(RawDataset ds) {
    auto keep = std::stable_partition(ds.records.begin(), ds.records.end(),
                                      [](const VitalRecord& r) { return r.has_any_measurement(); });
    ds.dropped_empty += static_cast<std::size_t>(ds.records.end() - keep);
    ds.records.erase(keep, ds.records.end());
    return ds;
}

/// Parses CSV text. Cells equal to "" (after trimming) or a manifest missing
/// token are missing. Implausible vitals are kept and reported as warnings.
/// Rows without any measurement are removed via retain_nonempty.
inline RawDataset parse_csv(std::string_view text, const Manifest& manifest) {
    auto rows = detail::split_csv(text);
    if (rows.empty()) throw data_error("CSV has no header row");
    const auto& header = rows.front();

    auto locate = [&](const std::string& logical, bool required) -> std::optional<std::size_t> {
        const std::string name = manifest.header_for(logical);
        for (std::size_t c = 0; c < header.size(); ++c)
            if (detail::trim(header[c]) == name) return c;
        if (required)
            throw data_error("missing required column '" + name + "'" +
                             (name == logical ? std::string() : " (logical " + logical + ")"));
        return std::nullopt;
    };

    const std::size_t col_patient = *locate("patient_id", true);
    const std::size_t col_time = *locate("timestamp", true);
    std::array<std::size_t, kNumVitals> col_vital{};
    for (std::size_t v = 0; v < kNumVitals; ++v) col_vital[v] = *locate(std::string(kVitalNames[v]), true);
    const std::size_t col_pain = *locate("pain_score", true);
    const auto col_imputed = locate("pain_imputed", false);

    RawDataset ds;
    ds.manifest = manifest;
    ds.source_rows = rows.size() - 1;
    ds.records.reserve(ds.source_rows);

    auto is_missing = [&](std::string_view cell) {
        if (cell.empty()) return true;
        return std::find(manifest.missing_tokens.begin(), manifest.missing_tokens.end(), cell) !=
               manifest.missing_tokens.end();
    };

    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::size_t line = r + 1; // 1-based, header is line 1
        auto cell = [&](std::size_t c) -> std::string_view {
            return c < row.size() ? detail::trim(row[c]) : std::string_view{};
        };
        auto fail = [&](const std::string& column, const std::string& why) -> data_error {
            return data_error("line " + std::to_string(line) + ", column '" + column + "': " + why);
        };

        VitalRecord rec;
        rec.sequence = r - 1;
        rec.patient_id = std::string(cell(col_patient));
        if (rec.patient_id.empty()) throw fail(manifest.header_for("patient_id"), "empty patient id");

        rec.timestamp = std::string(cell(col_time));
        auto ts = detail::parse_timestamp(rec.timestamp);
        if (!ts) throw fail(manifest.header_for("timestamp"), "unparseable timestamp '" + rec.timestamp + "'");
        rec.day = ts->day;
        rec.second_of_day = ts->second;

        for (std::size_t v = 0; v < kNumVitals; ++v) {
            auto text_cell = cell(col_vital[v]);
            if (is_missing(text_cell)) continue;
            double value = 0;
            if (!detail::parse_double(text_cell, value))
                throw fail(manifest.header_for(std::string(kVitalNames[v])),
                           "malformed number '" + std::string(text_cell) + "'");
            rec.vitals[v] = value;
        }

        if (auto p = cell(col_pain); !is_missing(p)) {
            double value = 0;
            if (!detail::parse_double(p, value) || value != std::floor(value))
                throw fail(manifest.header_for("pain_score"), "pain score is not an integer: '" + std::string(p) + "'");
            if (value < 0 || value > 10)
                throw fail(manifest.header_for("pain_score"), "pain score outside [0,10]: '" + std::string(p) + "'");
            rec.pain_score = static_cast<int>(value);
        }

        if (col_imputed) {
            auto f = cell(*col_imputed);
            if (f == "1" || f == "true") rec.pain_imputed = true;
            else if (!(f.empty() || f == "0" || f == "false"))
                throw fail(manifest.header_for("pain_imputed"), "expected 0/1, got '" + std::string(f) + "'");
        }

        detail::range_warnings(rec, line, ds.warnings);
        ds.records.push_back(std::move(rec));
    }
    return retain_nonempty(std::move(ds));
}

inline RawDataset load_csv(const std::string& path, const Manifest& manifest) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open data file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), manifest);
}

// ---------------------------------------------------------------------------
// CSV writing

/// Emits records with the manifest's header names. Numbers use the shortest
/// round-tripping representation.
inline std::string write_csv(std::span<const VitalRecord> records, const Manifest& manifest,
                             bool with_imputed_flag = false) {
    std::string out;
    out += csv_escape(manifest.header_for("patient_id")) + "," + csv_escape(manifest.header_for("timestamp"));
    for (auto name : kVitalNames) out += "," + csv_escape(manifest.header_for(std::string(name)));
    out += "," + csv_escape(manifest.header_for("pain_score"));
    if (with_imputed_flag) out += "," + csv_escape(manifest.header_for("pain_imputed"));
    out += '\n';
    for (const auto& r : records) {
        out += csv_escape(r.patient_id) + "," + csv_escape(r.timestamp);
        for (const auto& v : r.vitals) {
            out += ',';
            if (v) out += format_double(*v);
        }
        out += ',';
        if (r.pain_score) out += std::to_string(*r.pain_score);
        if (with_imputed_flag) out += r.pain_imputed ? ",1" : ",0";
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Completeness

inline constexpr std::size_t kNumMeasured = kNumVitals + 1; // six vitals + pain

struct CompletenessStats {
    std::size_t rows = 0;
    std::size_t complete_rows = 0;
    double fraction_complete = 0.0;
    std::array<double, kNumMeasured> missing_rate{}; // vitals in declared order, then pain
    std::map<std::string, std::size_t> per_patient;

    /// Fraction rounded to three decimals, as reported.
    double fraction_complete_reported() const { return std::round(fraction_complete * 1000.0) / 1000.0; }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["rows"] = rows;
        j["complete_rows"] = complete_rows;
        j["fraction_complete"] = format_fixed(fraction_complete, 3);
        nlohmann::json miss;
        for (std::size_t v = 0; v < kNumVitals; ++v) miss[std::string(kVitalNames[v])] = missing_rate[v];
        miss["pain_score"] = missing_rate[kNumVitals];
        j["missing_rate"] = miss;
        j["per_patient"] = per_patient;
        return j;
    }
};

inline CompletenessStats completeness_stats(std::span<const VitalRecord> records) {
    if (records.empty()) throw data_error("completeness statistics need a non-empty dataset");
    CompletenessStats s;
    s.rows = records.size();
    std::array<std::size_t, kNumMeasured> missing{};
    for (const auto& r : records) {
        if (r.is_complete()) ++s.complete_rows;
        for (std::size_t v = 0; v < kNumVitals; ++v)
            if (!r.vitals[v]) ++missing[v];
        if (!r.pain_score) ++missing[kNumVitals];
        ++s.per_patient[r.patient_id];
    }
    s.fraction_complete = static_cast<double>(s.complete_rows) / static_cast<double>(s.rows);
    for (std::size_t c = 0; c < kNumMeasured; ++c)
        s.missing_rate[c] = static_cast<double>(missing[c]) / static_cast<double>(s.rows);
    return s;
}

inline CompletenessStats completeness_stats(const RawDataset& ds) { return completeness_stats(ds.records); }

} // namespace vitalpain
