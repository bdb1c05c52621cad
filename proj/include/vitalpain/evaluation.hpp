#pragma once

#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "classifiers.hpp"
#include "core.hpp"
#include "imputation.hpp"
#include "ingestion.hpp"
#include "util.hpp"
#include "visits.hpp"

namespace vitalpain {

enum class Level { Intra, Inter };
enum class Target { PainScore, PainChange };

/// Pain-change classes.
enum class PainChange : int { Increase = 0, Decrease = 1, NoChange = 2 };

inline constexpr int kNumPainChangeClasses = 3;

inline std::string_view to_string(Level l) { return l == Level::Intra ? "intra" : "inter"; }
inline std::string_view to_string(Target t) { return t == Target::PainScore ? "pain" : "pain_change"; }
inline std::string_view to_string(PainChange c) {
    switch (c) {
    case PainChange::Increase: return "increase";
    case PainChange::Decrease: return "decrease";
    case PainChange::NoChange: return "no_change";
    }
    return "?";
}

inline std::string feature_set_name(bool include_visit) { return include_visit ? "vitals+visit" : "vitals"; }

/// Cases 1 and 2 impute with patient labels; cases 1 and 3 predict with them.
inline bool case_imputes_with_labels(int case_id) { return case_id == 1 || case_id == 2; }
inline bool case_predicts_with_labels(int case_id) { return case_id == 1 || case_id == 3; }

struct ExperimentPlan {
    Level level = Level::Inter;
    int case_id = 4; // 1..4 at the inter level, 0 at the intra level
    std::vector<ClassifierSpec> classifiers;
    PainScale scale = PainScale::Points11;
    bool include_visit = false;
    Target target = Target::PainScore;
    int folds = 10;
    std::uint64_t rng_seed = 42;
    int min_records_per_patient = 20;
    bool strict_cv = false;              // fit imputation on training folds only
    bool include_imputed_labels = false; // score against imputed pain as well
    ImputationConfig imputation;

    void validate() const {
        if (folds < 2) throw usage_error("folds must be >= 2");
        if (level == Level::Inter && (case_id < 1 || case_id > 4)) throw usage_error("inter-level case must be 1..4");
        if (level == Level::Intra && case_id != 0) throw usage_error("cases apply only at the inter level");
        if (classifiers.empty()) throw usage_error("experiment plan lists no classifiers");
        if (min_records_per_patient < 1) throw usage_error("min_records_per_patient must be >= 1");
        for (const auto& c : classifiers) c.validate();
    }

    int n_classes() const { return target == Target::PainChange ? kNumPainChangeClasses : points(scale); }
};

// ---------------------------------------------------------------------------
// Primitive operations

/// Shuffled k-way partition of 0..n-1; fold sizes differ by at most one.
inline std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw usage_error("k-fold split needs k >= 2");
    if (n < k)
        throw infeasible_error("cannot split " + std::to_string(n) + " records into " + std::to_string(k) + " folds");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = derive_rng(seed, 0x666f6c64u);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> folds(k);
    for (std::size_t i = 0; i < n; ++i) folds[i % k].push_back(order[i]);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

inline double accuracy(std::span<const int> predictions, std::span<const int> truths) {
    if (predictions.size() != truths.size()) throw std::invalid_argument("accuracy: length mismatch");
    if (truths.empty()) throw data_error("accuracy of an empty prediction set is undefined");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) hit += predictions[i] == truths[i];
    return static_cast<double>(hit) / static_cast<double>(truths.size());
}

/// sign(pain[t+1] - pain[t]) for each consecutive pair.
inline std::vector<PainChange> label_pain_change(std::span<const int> pains) {
    std::vector<PainChange> out;
    for (std::size_t t = 0; t + 1 < pains.size(); ++t) {
        const int d = pains[t + 1] - pains[t];
        out.push_back(d > 0 ? PainChange::Increase : d < 0 ? PainChange::Decrease : PainChange::NoChange);
    }
    return out;
}

inline constexpr double pain_change_chance_baseline() { return 1.0 / kNumPainChangeClasses; }

/// Product-moment correlation via centred sums. Empty when either input is
/// constant.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
    if (x.size() < 2) throw data_error("pearson needs at least two observations");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct CorrelationMatrix {
    std::vector<std::string> names;
    std::vector<std::vector<std::optional<double>>> r;
    std::size_t rows_used = 0;

    nlohmann::json to_json() const {
        nlohmann::json m = nlohmann::json::array();
        for (const auto& row : r) {
            nlohmann::json jr = nlohmann::json::array();
            for (const auto& v : row) jr.push_back(v ? nlohmann::json(*v) : nlohmann::json("undefined"));
            m.push_back(jr);
        }
        return {{"variables", names}, {"rows_used", rows_used}, {"r", m}};
    }

    static CorrelationMatrix from_json(const nlohmann::json& j) {
        CorrelationMatrix c;
        c.names = j.at("variables").get<std::vector<std::string>>();
        c.rows_used = j.at("rows_used").get<std::size_t>();
        for (const auto& row : j.at("r")) {
            auto& out = c.r.emplace_back();
            for (const auto& v : row) out.push_back(v.is_number() ? std::optional<double>(v.get<double>()) : std::nullopt);
        }
        return c;
    }
};

/// Correlations among the six vitals and the visit type (ordinal code in
/// declared order), over rows where all of them are observed.
inline CorrelationMatrix correlation_matrix(std::span<const VitalRecord> records) {
    CorrelationMatrix cm;
    for (auto n : kVitalNames) cm.names.emplace_back(n);
    cm.names.emplace_back("visit_type");
    const std::size_t p = cm.names.size();
    std::vector<std::vector<double>> cols(p);
    for (const auto& rec : records) {
        const bool complete = rec.visit_type && std::all_of(rec.vitals.begin(), rec.vitals.end(), [](auto& v) { return v.has_value(); });
        if (!complete) continue;
        for (std::size_t v = 0; v < kNumVitals; ++v) cols[v].push_back(*rec.vitals[v]);
        cols[kNumVitals].push_back(static_cast<double>(*rec.visit_type));
    }
    cm.rows_used = cols[0].size();
    if (cm.rows_used < 2) throw data_error("correlation screen needs at least two complete rows");
    cm.r.assign(p, std::vector<std::optional<double>>(p));
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = a; b < p; ++b) {
            std::optional<double> r = pearson(cols[a], cols[b]);
            if (a == b && r) r = 1.0;
            cm.r[a][b] = cm.r[b][a] = r;
        }
    }
    return cm;
}

// ---------------------------------------------------------------------------
// Results

struct FoldCount {
    std::size_t correct = 0;
    std::size_t total = 0;
};

struct CellResult {
    Level level = Level::Inter;
    int case_id = 0;
    Family family = Family::DecisionTree;
    PainScale scale = PainScale::Points11;
    bool include_visit = false;
    Target target = Target::PainScore;
    bool strict_cv = false;
    std::vector<FoldCount> folds;
    std::size_t correct = 0;
    std::size_t total = 0;
    double accuracy = 0.0;
    double majority_baseline = 0.0;
    double chance_baseline = 0.0;

    std::string key() const {
        return std::string(to_string(level)) + "/case" + std::to_string(case_id) + "/" + std::string(family_key(family)) +
               "/" + std::to_string(points(scale)) + "/" + feature_set_name(include_visit) + "/" +
               std::string(to_string(target));
    }
};

struct PatientAccuracy {
    std::string patient_id;
    std::size_t correct = 0;
    std::size_t total = 0;
    double accuracy = 0.0;
};

struct IntraResult {
    Family family = Family::DecisionTree;
    PainScale scale = PainScale::Points11;
    bool include_visit = false;
    Target target = Target::PainScore;
    std::vector<PatientAccuracy> patients;
    std::vector<std::pair<std::string, std::string>> excluded; // id, reason
    double min = 0, max = 0, mean = 0, weighted_mean = 0;
    double chance_baseline = 0.0;
};

// ---------------------------------------------------------------------------
// Experiment engine

/// One labelled example: the record whose features are used, and its class.
struct Sample {
    std::size_t record;
    int label;
};

/// Training and test design for one fold.
struct FoldData {
    FeatureMatrix train_x, test_x;
    std::vector<int> train_y, test_y;
    FeatureEncoder encoder;
    std::optional<ImputationModel> imputation; // strict mode only
};

namespace detail {

inline FeatureMatrix features_for(std::span<const VitalRecord> records, std::span<const std::size_t> rows,
                                  const FeatureEncoder& enc) {
    FeatureMatrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(enc.width()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        build_features(records[rows[i]], enc, {x.data() + i * enc.width(), enc.width()});
    return x;
}

inline std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold, Family f) {
    Rng rng = derive_rng(seed, 0x636c66u + static_cast<std::uint64_t>(f), fold);
    return rng();
}

} // namespace detail

/// Runs experiment plans against one retained dataset. Visits are assigned
/// once; completed tables are cached per imputation configuration.
class Evaluator {
public:
    explicit Evaluator(const RawDataset& raw) : raw_(raw.records) { visits_ = assign_visits(raw_); }
    explicit Evaluator(std::vector<VitalRecord> records) : raw_(std::move(records)) { visits_ = assign_visits(raw_); }

    const std::vector<VitalRecord>& records() const { return raw_; }
    const std::vector<Visit>& visits() const { return visits_; }

    const ImputedDataset& imputed(const ImputationConfig& config) {
        const std::string key = config.to_json().dump();
        auto it = cache_.find(key);
        if (it == cache_.end()) it = cache_.emplace(key, mice_impute(raw_, config)).first;
        return it->second;
    }

    static ImputationConfig imputation_for(const ExperimentPlan& plan) {
        ImputationConfig c = plan.imputation;
        c.with_patient_labels = plan.level == Level::Inter && case_imputes_with_labels(plan.case_id);
        return c;
    }

    /// Labelled examples over `records`. Pain is taken from `records` unless
    /// observed-only labelling is requested, in which case `raw` decides.
    static std::vector<Sample> samples(std::span<const VitalRecord> records, const ExperimentPlan& plan, bool allow_imputed) {
        std::vector<Sample> out;
        auto usable = [&](const VitalRecord& r) { return r.pain_score && (allow_imputed || !r.pain_imputed); };
        if (plan.target == Target::PainScore) {
            for (std::size_t i = 0; i < records.size(); ++i)
                if (usable(records[i])) out.push_back({i, bin_pain(*records[i].pain_score, plan.scale)});
            return out;
        }
        // pain change: consecutive pairs inside one visit, label at the earlier record
        std::vector<VitalRecord> tmp(records.begin(), records.end());
        for (const auto& v : assign_visits(tmp)) {
            for (std::size_t t = 0; t + 1 < v.records.size(); ++t) {
                const auto& a = records[v.records[t]];
                const auto& b = records[v.records[t + 1]];
                if (!usable(a) || !usable(b)) continue;
                const int pair[2] = {*a.pain_score, *b.pain_score};
                out.push_back({v.records[t], static_cast<int>(label_pain_change(pair).front())});
            }
        }
        std::sort(out.begin(), out.end(), [](const Sample& x, const Sample& y) { return x.record < y.record; });
        return out;
    }

    /// Builds the fold design. In strict mode imputation is fitted on every
    /// record outside the test fold and applied, pain hidden, to the test rows.
    FoldData prepare_fold(const ExperimentPlan& plan, std::span<const VitalRecord> imputed_records,
                          std::span<const Sample> all, std::span<const std::vector<std::size_t>> folds, std::size_t f) const {
        return prepare_fold_on(raw_, plan, imputed_records, all, folds, f);
    }

    static FoldData prepare_fold_on(std::span<const VitalRecord> raw, const ExperimentPlan& plan,
                                    std::span<const VitalRecord> imputed_records, std::span<const Sample> all,
                                    std::span<const std::vector<std::size_t>> folds, std::size_t f) {
        const bool with_patient = plan.level == Level::Inter && case_predicts_with_labels(plan.case_id);
        FoldData fd;
        std::vector<std::size_t> train_rows, test_rows;
        for (std::size_t g = 0; g < folds.size(); ++g) {
            for (std::size_t s : folds[g]) {
                if (g == f) {
                    test_rows.push_back(all[s].record);
                    fd.test_y.push_back(all[s].label);
                } else {
                    train_rows.push_back(all[s].record);
                    fd.train_y.push_back(all[s].label);
                }
            }
        }

        if (!plan.strict_cv) {
            std::vector<const VitalRecord*> train_ptrs;
            for (auto r : train_rows) train_ptrs.push_back(&imputed_records[r]);
            fd.encoder = fit_encoder(train_ptrs, plan.include_visit, with_patient);
            fd.train_x = detail::features_for(imputed_records, train_rows, fd.encoder);
            fd.test_x = detail::features_for(imputed_records, test_rows, fd.encoder);
            return fd;
        }

        // strict: the training pool is every record not used as a test example
        std::vector<char> is_test(raw.size(), 0);
        for (auto r : test_rows) is_test[r] = 1;
        std::vector<VitalRecord> pool;
        std::vector<std::size_t> pool_pos(raw.size(), 0);
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (is_test[i]) continue;
            pool_pos[i] = pool.size();
            pool.push_back(raw[i]);
        }
        ImputationConfig ic = imputation_for(plan);
        ImputedDataset train_imp = mice_impute(pool, ic);
        std::vector<VitalRecord> test_recs;
        for (auto r : test_rows) {
            VitalRecord rec = raw[r];
            rec.pain_score.reset();
            test_recs.push_back(std::move(rec));
        }
        auto test_imp = apply_imputation(train_imp.model, ic, test_recs);

        std::vector<std::size_t> train_local;
        std::vector<const VitalRecord*> train_ptrs;
        for (auto r : train_rows) {
            train_local.push_back(pool_pos[r]);
            train_ptrs.push_back(&train_imp.records[pool_pos[r]]);
        }
        fd.encoder = fit_encoder(train_ptrs, plan.include_visit, with_patient);
        fd.train_x = detail::features_for(train_imp.records, train_local, fd.encoder);
        std::vector<std::size_t> test_local(test_imp.size());
        std::iota(test_local.begin(), test_local.end(), std::size_t{0});
        fd.test_x = detail::features_for(test_imp, test_local, fd.encoder);
        fd.imputation = std::move(train_imp.model);
        return fd;
    }

    /// Cross-validated accuracy for every classifier of an inter-level plan.
    std::vector<CellResult> run_inter(const ExperimentPlan& plan) {
        plan.validate();
        if (plan.level != Level::Inter) throw usage_error("run_inter needs an inter-level plan");
        const ImputationConfig ic = imputation_for(plan);
        std::span<const VitalRecord> feature_records = raw_;
        if (!plan.strict_cv) feature_records = imputed(ic).records;
        const auto all = samples(feature_records, plan, plan.include_imputed_labels && !plan.strict_cv);
        return cross_validate(raw_, plan, feature_records, all, plan.case_id, Level::Inter);
    }

    /// Per-patient models, each imputed and cross-validated on that patient alone.
    std::vector<IntraResult> run_intra(const ExperimentPlan& plan) const {
        plan.validate();
        if (plan.level != Level::Intra) throw usage_error("run_intra needs an intra-level plan");
        std::vector<IntraResult> results(plan.classifiers.size());
        for (std::size_t c = 0; c < results.size(); ++c) {
            results[c].family = plan.classifiers[c].family;
            results[c].scale = plan.scale;
            results[c].include_visit = plan.include_visit;
            results[c].target = plan.target;
            results[c].chance_baseline = 1.0 / plan.n_classes();
        }
        ImputationConfig ic = plan.imputation;
        ic.with_patient_labels = false;

        for (const auto& [id, order] : patient_timelines(raw_)) {
            std::vector<VitalRecord> mine;
            for (auto i : order) mine.push_back(raw_[i]);
            auto exclude = [&](const std::string& why) {
                for (auto& r : results) r.excluded.emplace_back(id, why);
            };
            const auto observed = samples(mine, plan, false);
            if (observed.size() < static_cast<std::size_t>(plan.min_records_per_patient)) {
                exclude(std::to_string(observed.size()) + " labelled records, below minimum " +
                        std::to_string(plan.min_records_per_patient));
                continue;
            }
            if (observed.size() < static_cast<std::size_t>(plan.folds)) {
                exclude("fewer labelled records than folds");
                continue;
            }
            std::vector<VitalRecord> feature_records;
            std::vector<Sample> all;
            try {
                if (plan.strict_cv) {
                    feature_records = mine;
                    all = observed;
                } else {
                    feature_records = mice_impute(mine, ic).records;
                    all = samples(feature_records, plan, plan.include_imputed_labels);
                }
            } catch (const data_error& e) {
                exclude(std::string("imputation infeasible: ") + e.what());
                continue;
            }
            std::vector<CellResult> cells;
            try {
                cells = cross_validate(mine, plan, feature_records, all, 0, Level::Intra);
            } catch (const data_error& e) {
                exclude(std::string("evaluation infeasible: ") + e.what());
                continue;
            }
            for (std::size_t c = 0; c < cells.size(); ++c)
                results[c].patients.push_back({id, cells[c].correct, cells[c].total, cells[c].accuracy});
        }
        if (results.front().patients.empty()) throw infeasible_error("no patient qualifies for intra-individual analysis");
        for (auto& r : results) {
            double sum = 0, lo = 1, hi = 0;
            std::size_t correct = 0, total = 0;
            for (const auto& p : r.patients) {
                sum += p.accuracy;
                lo = std::min(lo, p.accuracy);
                hi = std::max(hi, p.accuracy);
                correct += p.correct;
                total += p.total;
            }
            r.min = lo;
            r.max = hi;
            r.mean = sum / static_cast<double>(r.patients.size());
            r.weighted_mean = static_cast<double>(correct) / static_cast<double>(total);
        }
        return results;
    }

private:
    static std::vector<CellResult> cross_validate(std::span<const VitalRecord> raw, const ExperimentPlan& plan,
                                                  std::span<const VitalRecord> feature_records,
                                                  std::span<const Sample> all, int case_id, Level level) {
        const auto folds = kfold_split(all.size(), static_cast<std::size_t>(plan.folds), plan.rng_seed);
        const std::size_t n_cls = plan.classifiers.size();
        std::vector<std::vector<FoldCount>> counts(n_cls, std::vector<FoldCount>(folds.size()));

        parallel_for(folds.size(), [&](std::size_t f) {
            const FoldData fd = prepare_fold_on(raw, plan, feature_records, all, folds, f);
            for (std::size_t c = 0; c < n_cls; ++c) {
                ClassifierSpec spec = plan.classifiers[c];
                spec.rng_seed = detail::fold_seed(plan.rng_seed, f, spec.family);
                const auto model = train(spec, fd.train_x, fd.train_y);
                const auto pred = model.predict(fd.test_x);
                FoldCount fc{0, fd.test_y.size()};
                for (std::size_t i = 0; i < pred.size(); ++i) fc.correct += pred[i] == fd.test_y[i];
                counts[c][f] = fc;
            }
        });

        std::vector<std::size_t> freq(static_cast<std::size_t>(plan.n_classes()), 0);
        for (const auto& s : all) ++freq[static_cast<std::size_t>(s.label)];
        const double majority =
            static_cast<double>(*std::max_element(freq.begin(), freq.end())) / static_cast<double>(all.size());

        std::vector<CellResult> out;
        for (std::size_t c = 0; c < n_cls; ++c) {
            CellResult r;
            r.level = level;
            r.case_id = case_id;
            r.family = plan.classifiers[c].family;
            r.scale = plan.scale;
            r.include_visit = plan.include_visit;
            r.target = plan.target;
            r.strict_cv = plan.strict_cv;
            r.folds = counts[c];
            for (const auto& fc : r.folds) {
                r.correct += fc.correct;
                r.total += fc.total;
            }
            r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
            r.majority_baseline = majority;
            r.chance_baseline = 1.0 / plan.n_classes();
            out.push_back(std::move(r));
        }
        return out;
    }

    std::vector<VitalRecord> raw_;
    std::vector<Visit> visits_;
    std::map<std::string, ImputedDataset> cache_;
};

inline std::vector<CellResult> run_inter(const ExperimentPlan& plan, const RawDataset& raw) {
    Evaluator ev(raw);
    return ev.run_inter(plan);
}

inline std::vector<IntraResult> run_intra(const ExperimentPlan& plan, const RawDataset& raw) {
    Evaluator ev(raw);
    return ev.run_intra(plan);
}

} // namespace vitalpain
