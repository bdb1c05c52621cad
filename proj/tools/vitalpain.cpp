#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <vitalpain/vitalpain.hpp>

namespace fs = std::filesystem;
using namespace vitalpain;
using nlohmann::json;

namespace {

struct Options {
    std::string data;
    std::string manifest;
    std::string plan;
    std::string config;
    std::string report;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    bool strict_cv = false;
    bool include_imputed_labels = false;
    bool with_patient_labels = false;
};

json read_json(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw usage_error(std::string("cannot open ") + what + ": " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw usage_error(std::string("malformed ") + what + " " + path + ": " + e.what());
    }
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path.string());
    out << text;
    if (!out) throw data_error("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

fs::path output_dir(const Options& o) {
    fs::path dir(o.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw data_error("cannot create output directory " + o.out + ": " + ec.message());
    return dir;
}

void echo_config(const std::string& command, const Options& o, const json& resolved) {
    json j;
    j["format"] = "vitalpain-config-echo";
    j["command"] = command;
    j["inputs"] = {{"data", o.data}, {"manifest", o.manifest}, {"plan", o.plan}, {"config", o.config}, {"report", o.report}};
    j["out"] = o.out;
    j["seed"] = o.seed ? json(*o.seed) : json(nullptr);
    j["strict_cv"] = o.strict_cv;
    j["include_imputed_labels"] = o.include_imputed_labels;
    j["threads"] = worker_count();
    j["resolved"] = resolved;
    write_json(output_dir(o) / "config_echo.json", j);
}

void require(const std::string& value, const char* flag) {
    if (value.empty()) throw usage_error(std::string(flag) + " is required");
}

RawDataset load_input(const Options& o) {
    require(o.data, "--data");
    const Manifest m = o.manifest.empty() ? Manifest{} : load_manifest(o.manifest);
    return load_csv(o.data, m);
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

ImputationConfig imputation_config(const Options& o) {
    ImputationConfig c = o.config.empty() ? ImputationConfig{} : ImputationConfig::from_json(read_json(o.config, "config"));
    if (o.seed) c.rng_seed = *o.seed;
    if (o.with_patient_labels) c.with_patient_labels = true;
    return c;
}

void cmd_synth(const Options& o) {
    SynthConfig c = o.config.empty() ? SynthConfig{} : SynthConfig::from_json(read_json(o.config, "config"));
    if (o.seed) c.rng_seed = *o.seed;
    c.validate();
    echo_config("synth", o, c.to_json());
    const auto dir = output_dir(o);
    const auto out = generate(c);
    write_file(dir / "data.csv", write_csv(out.data.records, out.data.manifest));
    write_json(dir / "manifest.json", out.data.manifest.to_json());
    write_file(dir / "truth.csv", truth_csv(out.truth));
    write_json(dir / "truth_rules.json", out.truth.rule_json());
    std::cout << "wrote " << out.data.records.size() << " records for " << c.n_patients << " patients to " << o.out << "\n";
}

void cmd_ingest(const Options& o) {
    echo_config("ingest", o, json::object());
    const auto raw = load_input(o);
    print_warnings(raw.warnings);
    const auto dir = output_dir(o);
    write_file(dir / "retained.csv", write_csv(raw.records, raw.manifest));
    json j;
    j["source_rows"] = raw.source_rows;
    j["retained_rows"] = raw.records.size();
    j["dropped_empty"] = raw.dropped_empty;
    j["completeness"] = completeness_stats(raw).to_json();
    j["warnings"] = raw.warnings;
    write_json(dir / "ingest_report.json", j);
    std::cout << "retained " << raw.records.size() << " of " << raw.source_rows << " rows, fraction complete "
              << format_fixed(completeness_stats(raw).fraction_complete, 3) << "\n";
}

void cmd_segment(const Options& o) {
    echo_config("segment", o, json::object());
    auto raw = load_input(o);
    const auto visits = assign_visits(raw.records);
    const auto dist = visit_distribution(visits);
    const auto dir = output_dir(o);
    write_file(dir / "visits.csv", visits_csv(visits));
    json j;
    for (std::size_t t = 0; t < kNumVisitTypes; ++t)
        j["totals"][std::string(to_string(static_cast<VisitType>(t)))] = dist.totals[t];
    for (const auto& [id, counts] : dist.per_patient)
        for (std::size_t t = 0; t < kNumVisitTypes; ++t)
            j["per_patient"][id][std::string(to_string(static_cast<VisitType>(t)))] = counts[t];
    write_json(dir / "visits.json", j);
    std::cout << dist.total_visits() << " visits\n";
}

void cmd_impute(const Options& o) {
    const auto cfg = imputation_config(o);
    echo_config("impute", o, cfg.to_json());
    const auto raw = load_input(o);
    print_warnings(raw.warnings);
    const auto ds = mice_impute(raw, cfg);
    print_warnings(ds.warnings);
    const auto dir = output_dir(o);
    write_file(dir / "imputed.csv", write_csv(ds.records, raw.manifest, true));
    write_json(dir / "imputed.json", imputation_summary(ds));
    write_json(dir / "manifest.json", raw.manifest.to_json());
    std::cout << "imputed " << ds.records.size() << " rows\n";
}

// Training config: {"classifier": {...}, "scale": 11, "feature_set": "vitals",
// "patient_features": false, "imputation": {...}}
void cmd_train(const Options& o) {
    require(o.config, "--config");
    const json cfg = read_json(o.config, "config");
    ClassifierSpec spec;
    PainScale scale = PainScale::Points11;
    bool include_visit = false;
    bool patient_features = false;
    ImputationConfig imp;
    try {
        spec = ClassifierSpec::from_json(cfg.at("classifier"));
        scale = scale_from_points(cfg.value("scale", 11));
        const auto fs_name = cfg.value("feature_set", std::string("vitals"));
        if (fs_name != "vitals" && fs_name != "vitals+visit") throw usage_error("unknown feature set '" + fs_name + "'");
        include_visit = fs_name == "vitals+visit";
        patient_features = cfg.value("patient_features", false);
        if (cfg.contains("imputation")) imp = ImputationConfig::from_json(cfg.at("imputation"));
    } catch (const json::exception& e) {
        throw usage_error(std::string("malformed training config: ") + e.what());
    }
    if (o.seed) {
        spec.rng_seed = *o.seed;
        imp.rng_seed = *o.seed;
    }
    json resolved = {{"classifier", spec.to_json()},
                     {"scale", points(scale)},
                     {"feature_set", feature_set_name(include_visit)},
                     {"patient_features", patient_features},
                     {"imputation", imp.to_json()},
                     {"include_imputed_labels", o.include_imputed_labels}};
    echo_config("train", o, resolved);

    auto raw = load_input(o);
    print_warnings(raw.warnings);
    assign_visits(raw.records);
    auto ds = mice_impute(raw.records, imp);
    print_warnings(ds.warnings);

    std::vector<const VitalRecord*> rows;
    std::vector<int> labels;
    for (const auto& r : ds.records)
        if (r.pain_score && (o.include_imputed_labels || !r.pain_imputed)) {
            rows.push_back(&r);
            labels.push_back(bin_pain(*r.pain_score, scale));
        }
    if (rows.empty()) throw infeasible_error("no labelled records to train on");
    const auto enc = fit_encoder(rows, include_visit, patient_features);
    FeatureMatrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(enc.width()));
    for (std::size_t i = 0; i < rows.size(); ++i) build_features(*rows[i], enc, {x.data() + i * enc.width(), enc.width()});
    const auto model = train(spec, x, labels);
    print_warnings(model.warnings());

    json j = model.to_json();
    j["encoder"] = {{"include_visit", enc.include_visit}, {"include_patient", enc.include_patient}, {"patients", enc.patients}};
    j["scale"] = points(scale);
    write_json(output_dir(o) / "model.json", j);
    std::cout << "trained " << family_label(spec.family) << " on " << rows.size() << " records\n";
}

void cmd_eval(const Options& o) {
    require(o.plan, "--plan");
    PlanFile plan = PlanFile::from_json(read_json(o.plan, "plan"));
    if (o.seed) plan.seed = *o.seed;
    if (o.strict_cv) plan.strict_cv = true;
    if (o.include_imputed_labels) plan.include_imputed_labels = true;
    plan.source = plan.to_json();
    echo_config("eval", o, plan.source);
    const auto raw = load_input(o);
    print_warnings(raw.warnings);
    const auto report = run_eval(plan, raw);
    const auto tables = render_tables(report);
    const auto dir = output_dir(o);
    write_json(dir / "report.json", report.to_json());
    write_file(dir / "tables.txt", tables.text);
    write_file(dir / "tables.csv", tables.csv);
    std::cout << tables.text;
}

void cmd_report(const Options& o) {
    require(o.report, "--report");
    echo_config("report", o, json::object());
    const auto report = ExperimentReport::from_json(read_json(o.report, "report"));
    const auto tables = render_tables(report);
    const auto dir = output_dir(o);
    write_file(dir / "tables.txt", tables.text);
    write_file(dir / "tables.csv", tables.csv);
    std::cout << tables.text;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pain-score prediction from vital signs"};
    app.require_subcommand(1);
    Options o;

    auto add_io = [&](CLI::App* sub, bool data, bool manifest) {
        if (data) sub->add_option("--data", o.data, "input CSV");
        if (manifest) sub->add_option("--manifest", o.manifest, "column manifest JSON");
        sub->add_option("--out", o.out, "output directory")->capture_default_str();
    };

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset with ground truth");
    add_io(synth, false, false);
    synth->add_option("--config", o.config, "generator config JSON");
    synth->add_option("--seed", o.seed, "rng seed");

    auto* ingest = app.add_subcommand("ingest", "validate a CSV and report completeness");
    add_io(ingest, true, true);

    auto* segment = app.add_subcommand("segment", "segment records into visits");
    add_io(segment, true, true);

    auto* impute = app.add_subcommand("impute", "fill missing cells by chained equations");
    add_io(impute, true, true);
    impute->add_option("--config", o.config, "imputation config JSON");
    impute->add_option("--seed", o.seed, "rng seed");
    impute->add_flag("--with-patient-labels", o.with_patient_labels, "condition on patient identity");

    auto* trainc = app.add_subcommand("train", "fit one classifier and save it");
    add_io(trainc, true, true);
    trainc->add_option("--config", o.config, "training config JSON");
    trainc->add_option("--seed", o.seed, "rng seed");
    trainc->add_flag("--include-imputed-labels", o.include_imputed_labels, "train on imputed pain scores too");

    auto* eval = app.add_subcommand("eval", "run an experiment plan");
    add_io(eval, true, true);
    eval->add_option("--plan", o.plan, "plan JSON");
    eval->add_option("--seed", o.seed, "rng seed");
    eval->add_flag("--strict-cv", o.strict_cv, "impute inside each training fold");
    eval->add_flag("--include-imputed-labels", o.include_imputed_labels, "score imputed pain labels too");

    auto* report = app.add_subcommand("report", "render tables from a saved report");
    report->add_option("--report,--data", o.report, "report JSON");
    report->add_option("--out", o.out, "output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    const std::map<CLI::App*, void (*)(const Options&)> handlers{
        {synth, cmd_synth}, {ingest, cmd_ingest}, {segment, cmd_segment}, {impute, cmd_impute},
        {trainc, cmd_train}, {eval, cmd_eval}, {report, cmd_report}};
    try {
        for (const auto& [sub, fn] : handlers)
            if (sub->parsed()) fn(o);
    } catch (const usage_error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const infeasible_error& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
