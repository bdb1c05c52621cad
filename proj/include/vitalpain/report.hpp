#pragma once

#include <set>

#include <nlohmann/json.hpp>

#include "evaluation.hpp"
#include "ingestion.hpp"
#include "util.hpp"

namespace vitalpain {

// ---------------------------------------------------------------------------
// Plan files
//
// {
//   "seed": 42, "folds": 10, "strict_cv": false, "include_imputed_labels": false,
//   "imputation": {...}, "correlation": true,
//   "experiments": [
//     {"name": "...", "level": "inter", "cases": [1,2,3,4],
//      "classifiers": ["svm", "dt", {"family": "knn", "k": 7}],
//      "scales": [11, 6, 4, 2], "feature_sets": ["vitals", "vitals+visit"],
//      "target": "pain" | "pain_change", "min_records_per_patient": 20}
//   ]
// }

struct PlanFile {
    std::uint64_t seed = 42;
    int folds = 10;
    bool strict_cv = false;
    bool include_imputed_labels = false;
    bool correlation = true;
    ImputationConfig imputation;
    nlohmann::json source; // normalised echo

    struct Experiment {
        std::string name;
        Level level = Level::Inter;
        std::vector<int> cases{4};
        std::vector<ClassifierSpec> classifiers;
        std::vector<PainScale> scales{PainScale::Points11};
        std::vector<bool> feature_sets{false};
        Target target = Target::PainScore;
        int min_records_per_patient = 20;
    };
    std::vector<Experiment> experiments;

    static PlanFile from_json(const nlohmann::json& j) {
        try {
            return parse(j);
        } catch (const nlohmann::json::exception& e) {
            throw usage_error(std::string("malformed plan: ") + e.what());
        }
    }

    /// One ExperimentPlan per (case, scale, feature set), classifiers grouped.
    std::vector<ExperimentPlan> expand() const {
        std::vector<ExperimentPlan> out;
        for (const auto& e : experiments) {
            const std::vector<int> cases = e.level == Level::Intra ? std::vector<int>{0} : e.cases;
            for (int c : cases)
                for (PainScale s : e.scales)
                    for (bool visit : e.feature_sets) {
                        ExperimentPlan p;
                        p.level = e.level;
                        p.case_id = c;
                        p.classifiers = e.classifiers;
                        p.scale = s;
                        p.include_visit = visit;
                        p.target = e.target;
                        p.folds = folds;
                        p.rng_seed = seed;
                        p.min_records_per_patient = e.min_records_per_patient;
                        p.strict_cv = strict_cv;
                        p.include_imputed_labels = include_imputed_labels;
                        p.imputation = imputation;
                        p.validate();
                        out.push_back(std::move(p));
                    }
        }
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["seed"] = seed;
        j["folds"] = folds;
        j["strict_cv"] = strict_cv;
        j["include_imputed_labels"] = include_imputed_labels;
        j["correlation"] = correlation;
        j["imputation"] = imputation.to_json();
        nlohmann::json ex = nlohmann::json::array();
        for (const auto& e : experiments) {
            nlohmann::json je;
            je["name"] = e.name;
            je["level"] = to_string(e.level);
            je["cases"] = e.cases;
            nlohmann::json cls = nlohmann::json::array();
            for (const auto& c : e.classifiers) cls.push_back(c.to_json());
            je["classifiers"] = cls;
            std::vector<int> sc;
            for (auto s : e.scales) sc.push_back(points(s));
            je["scales"] = sc;
            std::vector<std::string> fs;
            for (bool v : e.feature_sets) fs.push_back(feature_set_name(v));
            je["feature_sets"] = fs;
            je["target"] = to_string(e.target);
            je["min_records_per_patient"] = e.min_records_per_patient;
            ex.push_back(je);
        }
        j["experiments"] = ex;
        return j;
    }

private:
    static PlanFile parse(const nlohmann::json& j) {
        PlanFile p;
        if (!j.is_object()) throw usage_error("plan must be a JSON object");
        p.seed = j.value("seed", p.seed);
        p.folds = j.value("folds", p.folds);
        p.strict_cv = j.value("strict_cv", p.strict_cv);
        p.include_imputed_labels = j.value("include_imputed_labels", p.include_imputed_labels);
        p.correlation = j.value("correlation", p.correlation);
        if (j.contains("imputation")) p.imputation = ImputationConfig::from_json(j.at("imputation"));
        if (!j.contains("experiments") || j.at("experiments").empty()) throw usage_error("plan lists no experiments");
        for (const auto& je : j.at("experiments")) {
            Experiment e;
            e.name = je.value("name", std::string());
            const auto level = je.value("level", std::string("inter"));
            if (level == "inter") e.level = Level::Inter;
            else if (level == "intra") e.level = Level::Intra;
            else throw usage_error("unknown level '" + level + "'");
            if (je.contains("cases")) e.cases = je.at("cases").get<std::vector<int>>();
            for (int c : e.cases)
                if (c < 1 || c > 4) throw usage_error("case must be 1..4");
            if (je.contains("classifiers")) {
                for (const auto& c : je.at("classifiers")) e.classifiers.push_back(ClassifierSpec::from_json(c));
            } else {
                for (Family f : kAllFamilies) {
                    ClassifierSpec spec;
                    spec.family = f;
                    e.classifiers.push_back(spec);
                }
            }
            if (je.contains("scales")) {
                e.scales.clear();
                for (int s : je.at("scales").get<std::vector<int>>()) e.scales.push_back(scale_from_points(s));
            }
            if (je.contains("feature_sets")) {
                e.feature_sets.clear();
                for (const auto& s : je.at("feature_sets").get<std::vector<std::string>>()) {
                    if (s == "vitals") e.feature_sets.push_back(false);
                    else if (s == "vitals+visit") e.feature_sets.push_back(true);
                    else throw usage_error("unknown feature set '" + s + "'");
                }
            }
            const auto target = je.value("target", std::string("pain"));
            if (target == "pain") e.target = Target::PainScore;
            else if (target == "pain_change") e.target = Target::PainChange;
            else throw usage_error("unknown target '" + target + "'");
            e.min_records_per_patient = je.value("min_records_per_patient", e.min_records_per_patient);
            p.experiments.push_back(std::move(e));
        }
        p.expand(); // validates every combination
        p.source = p.to_json();
        return p;
    }
};

// ---------------------------------------------------------------------------
// Report

inline constexpr int kReportFormatVersion = 1;

struct ExperimentReport {
    nlohmann::json config;
    std::optional<CompletenessStats> completeness;
    std::optional<CorrelationMatrix> correlation;
    std::vector<CellResult> cells;
    std::vector<IntraResult> intra;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["format"] = "vitalpain-report";
        j["version"] = kReportFormatVersion;
        j["config"] = config;
        if (completeness) j["completeness"] = completeness->to_json();
        if (correlation) j["correlation"] = correlation->to_json();
        nlohmann::json cs = nlohmann::json::array();
        for (const auto& c : cells) {
            nlohmann::json jc;
            jc["level"] = to_string(c.level);
            jc["case"] = c.case_id;
            jc["classifier"] = family_key(c.family);
            jc["scale"] = points(c.scale);
            jc["feature_set"] = feature_set_name(c.include_visit);
            jc["target"] = to_string(c.target);
            jc["cv_mode"] = c.strict_cv ? "strict" : "impute_then_split";
            jc["accuracy"] = c.accuracy;
            jc["correct"] = c.correct;
            jc["total"] = c.total;
            nlohmann::json folds = nlohmann::json::array();
            for (const auto& f : c.folds) folds.push_back({{"correct", f.correct}, {"total", f.total}});
            jc["folds"] = folds;
            jc["majority_baseline"] = c.majority_baseline;
            jc["chance_baseline"] = c.chance_baseline;
            cs.push_back(jc);
        }
        j["cells"] = cs;
        nlohmann::json in = nlohmann::json::array();
        for (const auto& r : intra) {
            nlohmann::json ji;
            ji["classifier"] = family_key(r.family);
            ji["scale"] = points(r.scale);
            ji["feature_set"] = feature_set_name(r.include_visit);
            ji["target"] = to_string(r.target);
            nlohmann::json ps = nlohmann::json::array();
            for (const auto& p : r.patients)
                ps.push_back({{"patient_id", p.patient_id}, {"correct", p.correct}, {"total", p.total}, {"accuracy", p.accuracy}});
            ji["patients"] = ps;
            nlohmann::json ex = nlohmann::json::array();
            for (const auto& [id, why] : r.excluded) ex.push_back({{"patient_id", id}, {"reason", why}});
            ji["excluded"] = ex;
            ji["min"] = r.min;
            ji["max"] = r.max;
            ji["mean"] = r.mean;
            ji["weighted_mean"] = r.weighted_mean;
            ji["chance_baseline"] = r.chance_baseline;
            in.push_back(ji);
        }
        j["intra"] = in;
        j["warnings"] = warnings;
        return j;
    }

    static ExperimentReport from_json(const nlohmann::json& j) {
        if (j.value("format", std::string()) != "vitalpain-report") throw data_error("not a vitalpain report");
        ExperimentReport r;
        r.config = j.value("config", nlohmann::json::object());
        if (j.contains("correlation")) r.correlation = CorrelationMatrix::from_json(j.at("correlation"));
        if (j.contains("completeness")) {
            const auto& c = j.at("completeness");
            CompletenessStats s;
            s.rows = c.at("rows").get<std::size_t>();
            s.complete_rows = c.at("complete_rows").get<std::size_t>();
            s.fraction_complete = s.rows ? static_cast<double>(s.complete_rows) / static_cast<double>(s.rows) : 0.0;
            for (std::size_t k = 0; k < kNumMeasured; ++k)
                s.missing_rate[k] = c.at("missing_rate").at(std::string(measured_name(k))).get<double>();
            s.per_patient = c.at("per_patient").get<std::map<std::string, std::size_t>>();
            r.completeness = s;
        }
        auto target_of = [](const std::string& t) { return t == "pain" ? Target::PainScore : Target::PainChange; };
        for (const auto& jc : j.at("cells")) {
            CellResult c;
            c.level = jc.at("level").get<std::string>() == "intra" ? Level::Intra : Level::Inter;
            c.case_id = jc.at("case").get<int>();
            c.family = family_from_string(jc.at("classifier").get<std::string>());
            c.scale = scale_from_points(jc.at("scale").get<int>());
            c.include_visit = jc.at("feature_set").get<std::string>() == "vitals+visit";
            c.target = target_of(jc.at("target").get<std::string>());
            c.strict_cv = jc.at("cv_mode").get<std::string>() == "strict";
            c.accuracy = jc.at("accuracy").get<double>();
            c.correct = jc.at("correct").get<std::size_t>();
            c.total = jc.at("total").get<std::size_t>();
            for (const auto& f : jc.at("folds")) c.folds.push_back({f.at("correct").get<std::size_t>(), f.at("total").get<std::size_t>()});
            c.majority_baseline = jc.at("majority_baseline").get<double>();
            c.chance_baseline = jc.at("chance_baseline").get<double>();
            r.cells.push_back(std::move(c));
        }
        for (const auto& ji : j.at("intra")) {
            IntraResult ir;
            ir.family = family_from_string(ji.at("classifier").get<std::string>());
            ir.scale = scale_from_points(ji.at("scale").get<int>());
            ir.include_visit = ji.at("feature_set").get<std::string>() == "vitals+visit";
            ir.target = target_of(ji.at("target").get<std::string>());
            for (const auto& p : ji.at("patients"))
                ir.patients.push_back({p.at("patient_id").get<std::string>(), p.at("correct").get<std::size_t>(),
                                       p.at("total").get<std::size_t>(), p.at("accuracy").get<double>()});
            for (const auto& e : ji.at("excluded"))
                ir.excluded.emplace_back(e.at("patient_id").get<std::string>(), e.at("reason").get<std::string>());
            ir.min = ji.at("min").get<double>();
            ir.max = ji.at("max").get<double>();
            ir.mean = ji.at("mean").get<double>();
            ir.weighted_mean = ji.at("weighted_mean").get<double>();
            ir.chance_baseline = ji.at("chance_baseline").get<double>();
            r.intra.push_back(std::move(ir));
        }
        r.warnings = j.value("warnings", std::vector<std::string>{});
        return r;
    }
};

/// Runs every expanded plan against `raw`, sharing imputations across cells.
inline ExperimentReport run_eval(const PlanFile& plan, const RawDataset& raw) {
    ExperimentReport report;
    report.config = plan.source.is_null() ? plan.to_json() : plan.source;
    report.completeness = completeness_stats(raw);
    report.warnings = raw.warnings;
    Evaluator ev(raw);
    if (plan.correlation) {
        try {
            report.correlation = correlation_matrix(ev.records());
        } catch (const data_error& e) {
            report.warnings.push_back(std::string("correlation screen skipped: ") + e.what());
        }
    }
    if (plan.strict_cv && plan.include_imputed_labels)
        report.warnings.push_back("include_imputed_labels is ignored in strict cross-validation");
    for (const auto& p : plan.expand()) {
        if (p.level == Level::Inter) {
            auto cells = ev.run_inter(p);
            report.cells.insert(report.cells.end(), cells.begin(), cells.end());
        } else {
            auto res = ev.run_intra(p);
            report.intra.insert(report.intra.end(), res.begin(), res.end());
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Rendering

struct RenderedTables {
    std::string text;
    std::string csv;
};

namespace detail {

struct Grid {
    std::string title;
    std::vector<std::string> columns;
    std::vector<std::string> row_names;
    std::vector<std::vector<std::optional<double>>> values;
    std::vector<std::pair<std::string, std::vector<std::optional<double>>>> footer;
    std::vector<std::string> notes;
    bool flag_best = true;
};

inline std::string cell_text(const std::optional<double>& v) { return v ? format_fixed(*v, 3) : std::string("-"); }

inline void render_grid(const Grid& g, RenderedTables& out) {
    std::size_t w0 = 0;
    for (const auto& r : g.row_names) w0 = std::max(w0, r.size());
    for (const auto& [name, vals] : g.footer) w0 = std::max(w0, name.size());
    const std::size_t w = std::max<std::size_t>(7, [&] {
        std::size_t m = 0;
        for (const auto& c : g.columns) m = std::max(m, c.size() + 1);
        return m;
    }());

    auto pad = [](std::string s, std::size_t width) {
        if (s.size() < width) s.insert(0, width - s.size(), ' ');
        return s;
    };
    auto line = [&](const std::string& name, const std::vector<std::optional<double>>& vals, bool flag) {
        double best = -INFINITY;
        if (flag)
            for (const auto& v : vals)
                if (v) best = std::max(best, *v);
        std::string s = name + std::string(w0 - name.size(), ' ');
        for (const auto& v : vals) s += " " + pad(cell_text(v) + (flag && v && *v == best ? "*" : " "), w + 1);
        return s + "\n";
    };

    out.text += g.title + "\n";
    std::string head(w0, ' ');
    for (const auto& c : g.columns) head += " " + pad(c + " ", w + 1);
    out.text += head + "\n";
    out.text += std::string(head.size(), '-') + "\n";
    for (std::size_t r = 0; r < g.row_names.size(); ++r) out.text += line(g.row_names[r], g.values[r], g.flag_best);
    if (!g.footer.empty()) {
        out.text += std::string(head.size(), '-') + "\n";
        for (const auto& [name, vals] : g.footer) out.text += line(name, vals, false);
    }
    for (const auto& n : g.notes) out.text += n + "\n";
    out.text += "\n";

    out.csv += csv_escape(g.title) + "\n";
    out.csv += "row";
    for (const auto& c : g.columns) out.csv += "," + csv_escape(c);
    out.csv += ",best\n";
    auto csv_line = [&](const std::string& name, const std::vector<std::optional<double>>& vals, bool flag) {
        out.csv += csv_escape(name);
        double best = -INFINITY;
        std::string best_cols;
        for (std::size_t c = 0; c < vals.size(); ++c) {
            out.csv += ",";
            if (vals[c]) {
                out.csv += format_fixed(*vals[c], 3);
                best = std::max(best, *vals[c]);
            }
        }
        if (flag)
            for (std::size_t c = 0; c < vals.size(); ++c)
                if (vals[c] && *vals[c] == best) best_cols += (best_cols.empty() ? "" : ";") + g.columns[c];
        out.csv += "," + csv_escape(best_cols) + "\n";
    };
    for (std::size_t r = 0; r < g.row_names.size(); ++r) csv_line(g.row_names[r], g.values[r], g.flag_best);
    for (const auto& [name, vals] : g.footer) csv_line(name, vals, false);
    out.csv += "\n";
}

inline std::string scale_title(PainScale s) { return std::to_string(points(s)) + "-point scale"; }

inline std::string feature_title(bool visit) { return visit ? "Vitals + Visit" : "Vitals"; }

inline std::vector<Family> families_in_order(const std::set<Family>& present) {
    std::vector<Family> out;
    for (Family f : kAllFamilies)
        if (present.count(f)) out.push_back(f);
    return out;
}

} // namespace detail

/// Plain-text and CSV tables: inter results as cases x classifiers per
/// (target, scale, feature set); intra results as per-patient grids with a
/// min/max/mean footer plus a feature-set summary. Best cell per row gets '*'.
inline RenderedTables render_tables(const ExperimentReport& report) {
    RenderedTables out;

    if (report.completeness) {
        const auto& c = *report.completeness;
        out.text += "Records: " + std::to_string(c.rows) + ", complete: " + std::to_string(c.complete_rows) +
                    " (fraction " + format_fixed(c.fraction_complete, 3) + "), patients: " +
                    std::to_string(c.per_patient.size()) + "\n\n";
    }

    // inter
    using GroupKey = std::tuple<int, int, int, bool, bool>; // target, -points, visit, strict
    std::map<GroupKey, std::vector<const CellResult*>> groups;
    for (const auto& c : report.cells)
        groups[{static_cast<int>(c.target), -points(c.scale), c.include_visit, c.strict_cv, false}].push_back(&c);
    for (const auto& [key, cells] : groups) {
        const auto* first = cells.front();
        std::set<Family> fams;
        std::set<int> cases;
        for (const auto* c : cells) {
            fams.insert(c->family);
            cases.insert(c->case_id);
        }
        detail::Grid g;
        g.title = std::string(first->target == Target::PainChange ? "Pain change prediction results (accuracy)"
                                                                   : "Inter-individual pain prediction results (accuracy)") +
                  " | " + (first->target == Target::PainChange ? std::string("3 classes") : detail::scale_title(first->scale)) +
                  " | " + detail::feature_title(first->include_visit) +
                  (first->strict_cv ? " | strict CV" : "");
        const auto order = detail::families_in_order(fams);
        for (Family f : order) g.columns.emplace_back(family_label(f));
        g.columns.emplace_back("Majority");
        for (int cs : cases) {
            g.row_names.push_back("Case " + std::to_string(cs));
            std::vector<std::optional<double>> row(order.size() + 1);
            for (const auto* c : cells) {
                if (c->case_id != cs) continue;
                const auto pos = static_cast<std::size_t>(std::find(order.begin(), order.end(), c->family) - order.begin());
                row[pos] = c->accuracy;
                row[order.size()] = c->majority_baseline;
            }
            g.values.push_back(row);
        }
        g.flag_best = true;
        // the majority column is a reference, not a contender
        detail::Grid shown = g;
        for (auto& row : shown.values) row.pop_back();
        shown.columns.pop_back();
        std::vector<std::optional<double>> majority;
        for (const auto& row : g.values) majority.push_back(row.back());
        shown.notes.push_back("chance baseline: " + format_fixed(first->chance_baseline, 3) +
                              (first->target == Target::PainChange ? " (1/3)" : ""));
        std::string maj = "majority-class baseline:";
        for (std::size_t r = 0; r < majority.size(); ++r)
            maj += " " + shown.row_names[r] + "=" + detail::cell_text(majority[r]);
        shown.notes.push_back(maj);
        detail::render_grid(shown, out);
    }

    // intra: summary (feature sets x classifiers) per (target, scale), then per-patient detail
    using IntraKey = std::tuple<int, int>;
    std::map<IntraKey, std::vector<const IntraResult*>> intra_groups;
    for (const auto& r : report.intra) intra_groups[{static_cast<int>(r.target), -points(r.scale)}].push_back(&r);
    for (const auto& [key, results] : intra_groups) {
        const auto* first = results.front();
        std::set<Family> fams;
        std::set<bool> visits;
        for (const auto* r : results) {
            fams.insert(r->family);
            visits.insert(r->include_visit);
        }
        const auto order = detail::families_in_order(fams);
        const std::string what = first->target == Target::PainChange ? std::string("3 classes") : detail::scale_title(first->scale);

        detail::Grid summary;
        summary.title = "Intra-individual pain prediction results (mean accuracy) | " + what;
        for (Family f : order) summary.columns.emplace_back(family_label(f));
        for (bool v : visits) {
            summary.row_names.push_back(detail::feature_title(v));
            std::vector<std::optional<double>> row(order.size());
            for (const auto* r : results)
                if (r->include_visit == v)
                    row[static_cast<std::size_t>(std::find(order.begin(), order.end(), r->family) - order.begin())] = r->mean;
            summary.values.push_back(row);
        }
        detail::render_grid(summary, out);

        for (bool v : visits) {
            detail::Grid g;
            g.title = "Intra-individual accuracy per patient | " + what + " | " + detail::feature_title(v);
            for (Family f : order) g.columns.emplace_back(family_label(f));
            std::vector<const IntraResult*> cols(order.size(), nullptr);
            for (const auto* r : results)
                if (r->include_visit == v)
                    cols[static_cast<std::size_t>(std::find(order.begin(), order.end(), r->family) - order.begin())] = r;
            const IntraResult* any = nullptr;
            for (const auto* c : cols)
                if (c) any = c;
            for (std::size_t p = 0; p < any->patients.size(); ++p) {
                g.row_names.push_back(any->patients[p].patient_id);
                std::vector<std::optional<double>> row(order.size());
                for (std::size_t c = 0; c < cols.size(); ++c)
                    if (cols[c] && p < cols[c]->patients.size()) row[c] = cols[c]->patients[p].accuracy;
                g.values.push_back(row);
            }
            auto stat = [&](auto get) {
                std::vector<std::optional<double>> row(order.size());
                for (std::size_t c = 0; c < cols.size(); ++c)
                    if (cols[c]) row[c] = get(*cols[c]);
                return row;
            };
            g.footer.emplace_back("min", stat([](const IntraResult& r) { return r.min; }));
            g.footer.emplace_back("max", stat([](const IntraResult& r) { return r.max; }));
            g.footer.emplace_back("mean", stat([](const IntraResult& r) { return r.mean; }));
            g.footer.emplace_back("weighted mean", stat([](const IntraResult& r) { return r.weighted_mean; }));
            for (const auto& [id, why] : any->excluded) g.notes.push_back("excluded " + id + ": " + why);
            detail::render_grid(g, out);
        }
    }

    if (report.correlation) {
        const auto& cm = *report.correlation;
        detail::Grid g;
        g.title = "Pearson correlation (complete rows: " + std::to_string(cm.rows_used) + ")";
        g.columns = cm.names;
        g.row_names = cm.names;
        g.values = cm.r;
        g.flag_best = false;
        detail::render_grid(g, out);
    }
    return out;
}

} // namespace vitalpain
