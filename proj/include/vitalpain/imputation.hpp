#pragma once

#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "core.hpp"
#include "ingestion.hpp"
#include "util.hpp"

namespace vitalpain {

struct ImputationConfig {
    int n_iterations = 10;
    bool with_patient_labels = false;
    std::uint64_t rng_seed = 0;
    bool clamp_to_observed_range = true;
    // When false, pain is neither imputed nor used as a predictor; records
    // missing pain keep it missing.
    bool include_pain_as_variable = true;
    // Adds a N(0, residual sd) draw to each regression fill. Off by default.
    bool stochastic_residuals = false;

    void validate() const {
        if (n_iterations < 1) throw usage_error("imputation n_iterations must be >= 1");
    }

    nlohmann::json to_json() const {
        return {{"n_iterations", n_iterations},
                {"with_patient_labels", with_patient_labels},
                {"rng_seed", rng_seed},
                {"clamp_to_observed_range", clamp_to_observed_range},
                {"include_pain_as_variable", include_pain_as_variable},
                {"stochastic_residuals", stochastic_residuals}};
    }

    static ImputationConfig from_json(const nlohmann::json& j) {
        ImputationConfig c;
        c.n_iterations = j.value("n_iterations", c.n_iterations);
        c.with_patient_labels = j.value("with_patient_labels", c.with_patient_labels);
        c.rng_seed = j.value("rng_seed", c.rng_seed);
        c.clamp_to_observed_range = j.value("clamp_to_observed_range", c.clamp_to_observed_range);
        c.include_pain_as_variable = j.value("include_pain_as_variable", c.include_pain_as_variable);
        c.stochastic_residuals = j.value("stochastic_residuals", c.stochastic_residuals);
        c.validate();
        return c;
    }
};

/// Column index of pain within the imputation matrix.
inline constexpr std::size_t kPainColumn = kNumVitals;

inline std::string_view measured_name(std::size_t col) {
    return col < kNumVitals ? kVitalNames[col] : std::string_view("pain_score");
}

/// Fitted chained equations, reusable on rows the engine never saw.
struct ImputationModel {
    std::size_t n_columns = kNumMeasured;
    std::vector<std::string> patients;      // sorted; dummies for all but the first
    std::array<double, kNumMeasured> mean{}; // observed means
    std::array<double, kNumMeasured> lo{}, hi{};
    // coefficients[c]: intercept, then every other column ascending, then patient dummies
    std::array<std::vector<double>, kNumMeasured> coefficients;
    std::array<double, kNumMeasured> residual_sd{};
};

using MissingMask = std::array<bool, kNumMeasured>; // true where the input cell was missing

struct ImputedDataset {
    std::vector<VitalRecord> records;
    std::vector<MissingMask> mask;
    ImputationConfig config;
    std::vector<double> trace; // mean |change| of imputed cells per iteration
    std::vector<std::string> warnings;
    ImputationModel model;

    std::array<std::size_t, kNumMeasured> missing_counts() const {
        std::array<std::size_t, kNumMeasured> counts{};
        for (const auto& m : mask)
            for (std::size_t c = 0; c < kNumMeasured; ++c) counts[c] += m[c];
        return counts;
    }
};

inline std::vector<double> convergence_trace(const ImputedDataset& ds) { return ds.trace; }

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kRidgeLambda = 1e-6;

/// Least squares with a ridge fallback for rank-deficient designs.
inline Eigen::VectorXd solve_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, bool& used_ridge) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() == x.cols()) {
        used_ridge = false;
        return qr.solve(y);
    }
    used_ridge = true;
    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += kRidgeLambda;
    return gram.ldlt().solve(x.transpose() * y);
}

inline double finish_value(std::size_t col, double v, const ImputationModel& m, bool clamp) {
    if (col == kPainColumn) return std::clamp(std::round(v), 0.0, 10.0);
    if (clamp) return std::clamp(v, m.lo[col], m.hi[col]);
    return v;
}

class ChainedEngine {
public:
    ChainedEngine(std::span<const VitalRecord> records, const ImputationConfig& config)
        : config_(config), n_(records.size()) {
        n_cols_ = config.include_pain_as_variable ? kNumMeasured : kNumVitals;
        values_ = RowMatrix::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_cols_));
        mask_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            const auto& r = records[i];
            for (std::size_t c = 0; c < kNumVitals; ++c) {
                mask_[i][c] = !r.vitals[c].has_value();
                if (r.vitals[c]) values_(i, c) = *r.vitals[c];
            }
            mask_[i][kPainColumn] = !r.pain_score.has_value();
            if (config.include_pain_as_variable && r.pain_score) values_(i, kPainColumn) = *r.pain_score;
        }
        if (config.with_patient_labels) {
            for (const auto& r : records) model_.patients.push_back(r.patient_id);
            std::sort(model_.patients.begin(), model_.patients.end());
            model_.patients.erase(std::unique(model_.patients.begin(), model_.patients.end()), model_.patients.end());
            patient_of_.resize(n_);
            for (std::size_t i = 0; i < n_; ++i) {
                auto it = std::lower_bound(model_.patients.begin(), model_.patients.end(), records[i].patient_id);
                patient_of_[i] = static_cast<std::size_t>(it - model_.patients.begin());
            }
        }
        model_.n_columns = n_cols_;
    }

    void run(std::vector<double>& trace, std::vector<std::string>& warnings) {
        std::size_t total_missing = 0;
        for (std::size_t c = 0; c < n_cols_; ++c) {
            std::size_t observed = 0;
            double sum = 0, lo = INFINITY, hi = -INFINITY;
            for (std::size_t i = 0; i < n_; ++i) {
                if (mask_[i][c]) continue;
                ++observed;
                const double v = values_(i, c);
                sum += v;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            const std::size_t missing = n_ - observed;
            total_missing += missing;
            if (missing > 0 && observed < 2)
                throw data_error("cannot impute column " + std::string(measured_name(c)) + ": " +
                                 std::to_string(observed) + " observed value(s), need at least 2");
            model_.mean[c] = observed ? sum / static_cast<double>(observed) : 0.0;
            model_.lo[c] = lo;
            model_.hi[c] = hi;
            for (std::size_t i = 0; i < n_; ++i)
                if (mask_[i][c]) values_(i, c) = finish_value(c, model_.mean[c], model_, config_.clamp_to_observed_range);
        }

        for (int iter = 0; iter < config_.n_iterations; ++iter) {
            double change = 0;
            for (std::size_t c = 0; c < n_cols_; ++c) {
                if (!has_missing(c)) continue;
                change += sweep_column(c, iter, warnings);
            }
            trace.push_back(total_missing ? change / static_cast<double>(total_missing) : 0.0);
        }
        // Columns without missing cells still get equations, for out-of-sample use.
        for (std::size_t c = 0; c < n_cols_; ++c)
            if (!has_missing(c) && n_ >= 2) fit_column(c, warnings);
    }

    const RowMatrix& values() const { return values_; }
    const std::vector<MissingMask>& mask() const { return mask_; }
    ImputationModel& model() { return model_; }

private:
    bool has_missing(std::size_t c) const {
        return std::any_of(mask_.begin(), mask_.end(), [c](const MissingMask& m) { return m[c]; });
    }

    std::size_t design_width() const {
        return 1 + (n_cols_ - 1) + (config_.with_patient_labels && !model_.patients.empty() ? model_.patients.size() - 1 : 0);
    }

    void design_row(std::size_t i, std::size_t target, double* out) const {
        std::size_t k = 0;
        out[k++] = 1.0;
        for (std::size_t c = 0; c < n_cols_; ++c)
            if (c != target) out[k++] = values_(i, c);
        if (config_.with_patient_labels) {
            for (std::size_t p = 1; p < model_.patients.size(); ++p) out[k++] = patient_of_[i] == p ? 1.0 : 0.0;
        }
    }

    static std::string ridge_warning(std::size_t c) {
        return "singular design for column " + std::string(measured_name(c)) + "; used ridge solve with lambda=1e-6";
    }

    const std::vector<double>& fit_column(std::size_t c, std::vector<std::string>& warnings) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < n_; ++i)
            if (!mask_[i][c]) rows.push_back(i);
        const auto width = static_cast<Eigen::Index>(design_width());
        Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), width);
        Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
        std::vector<double> buf(static_cast<std::size_t>(width));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            design_row(rows[r], c, buf.data());
            for (Eigen::Index k = 0; k < width; ++k) x(static_cast<Eigen::Index>(r), k) = buf[static_cast<std::size_t>(k)];
            y(static_cast<Eigen::Index>(r)) = values_(rows[r], c);
        }
        bool ridge = false;
        Eigen::VectorXd beta = solve_least_squares(x, y, ridge);
        if (ridge && std::find(warnings.begin(), warnings.end(), ridge_warning(c)) == warnings.end())
            warnings.push_back(ridge_warning(c));
        const Eigen::VectorXd resid = y - x * beta;
        const double dof = std::max<double>(1.0, static_cast<double>(rows.size()) - static_cast<double>(width));
        model_.residual_sd[c] = std::sqrt(resid.squaredNorm() / dof);
        model_.coefficients[c].assign(beta.data(), beta.data() + beta.size());
        return model_.coefficients[c];
    }

    double sweep_column(std::size_t c, int iter, std::vector<std::string>& warnings) {
        const auto& beta = fit_column(c, warnings);
        Rng rng = derive_rng(config_.rng_seed, c, static_cast<std::uint64_t>(iter));
        std::normal_distribution<double> noise(0.0, model_.residual_sd[c]);
        std::vector<double> buf(beta.size());
        double change = 0;
        for (std::size_t i = 0; i < n_; ++i) {
            if (!mask_[i][c]) continue;
            design_row(i, c, buf.data());
            double pred = std::inner_product(buf.begin(), buf.end(), beta.begin(), 0.0);
            if (config_.stochastic_residuals) pred += noise(rng);
            pred = finish_value(c, pred, model_, config_.clamp_to_observed_range);
            change += std::abs(pred - values_(i, c));
            values_(i, c) = pred;
        }
        return change;
    }

    ImputationConfig config_;
    std::size_t n_;
    std::size_t n_cols_ = kNumMeasured;
    RowMatrix values_;
    std::vector<MissingMask> mask_;
    std::vector<std::size_t> patient_of_;
    ImputationModel model_;
};

inline void write_back(std::span<const VitalRecord> input, const RowMatrix& values, const std::vector<MissingMask>& mask,
                       bool with_pain, std::vector<VitalRecord>& out) {
    out.assign(input.begin(), input.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (std::size_t c = 0; c < kNumVitals; ++c)
            if (mask[i][c]) out[i].vitals[c] = values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
        if (with_pain && mask[i][kPainColumn]) {
            out[i].pain_score = static_cast<int>(values(static_cast<Eigen::Index>(i), kPainColumn));
            out[i].pain_imputed = true;
        }
    }
}

} // namespace detail

/// Chained-equation imputation producing one completed table. Observed cells
/// are copied through untouched; pain fills are rounded and clamped to [0,10].
inline ImputedDataset mice_impute(std::span<const VitalRecord> records, const ImputationConfig& config) {
    config.validate();
    if (records.empty()) throw data_error("cannot impute an empty dataset");
    detail::ChainedEngine engine(records, config);
    ImputedDataset out;
    out.config = config;
    engine.run(out.trace, out.warnings);
    detail::write_back(records, engine.values(), engine.mask(), config.include_pain_as_variable, out.records);
    out.mask = engine.mask();
    out.model = std::move(engine.model());
    return out;
}

inline ImputedDataset mice_impute(const RawDataset& ds, const ImputationConfig& config) {
    return mice_impute(ds.records, config);
}

/// Fills `records` with equations fitted elsewhere: missing cells start at the
/// fitted means and are swept n_iterations times with fixed coefficients.
/// Patients the model never saw take the reference (first) patient's offset.
inline std::vector<VitalRecord> apply_imputation(const ImputationModel& model, const ImputationConfig& config,
                                                 std::span<const VitalRecord> records) {
    const std::size_t n_cols = model.n_columns;
    const std::size_t n = records.size();
    detail::RowMatrix values = detail::RowMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n_cols));
    std::vector<MissingMask> mask(n);
    std::vector<std::size_t> patient_of(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = records[i];
        for (std::size_t c = 0; c < kNumVitals; ++c) {
            mask[i][c] = !r.vitals[c];
            values(i, c) = r.vitals[c] ? *r.vitals[c] : detail::finish_value(c, model.mean[c], model, config.clamp_to_observed_range);
        }
        mask[i][kPainColumn] = !r.pain_score;
        if (n_cols > kNumVitals)
            values(i, kPainColumn) = r.pain_score ? *r.pain_score : detail::finish_value(kPainColumn, model.mean[kPainColumn], model, true);
        if (config.with_patient_labels) {
            auto it = std::lower_bound(model.patients.begin(), model.patients.end(), r.patient_id);
            if (it != model.patients.end() && *it == r.patient_id) patient_of[i] = static_cast<std::size_t>(it - model.patients.begin());
        }
    }
    std::vector<double> row;
    for (int iter = 0; iter < config.n_iterations; ++iter) {
        for (std::size_t c = 0; c < n_cols; ++c) {
            const auto& beta = model.coefficients[c];
            if (beta.empty()) continue;
            row.resize(beta.size());
            for (std::size_t i = 0; i < n; ++i) {
                if (!mask[i][c]) continue;
                std::size_t k = 0;
                row[k++] = 1.0;
                for (std::size_t o = 0; o < n_cols; ++o)
                    if (o != c) row[k++] = values(i, o);
                if (config.with_patient_labels)
                    for (std::size_t p = 1; p < model.patients.size(); ++p) row[k++] = patient_of[i] == p ? 1.0 : 0.0;
                const double pred = std::inner_product(row.begin(), row.end(), beta.begin(), 0.0);
                values(i, c) = detail::finish_value(c, pred, model, config.clamp_to_observed_range);
            }
        }
    }
    std::vector<VitalRecord> out;
    detail::write_back(records, values, mask, n_cols > kNumVitals, out);
    return out;
}

/// JSON sidecar: config echo, per-column missing counts, convergence trace.
inline nlohmann::json imputation_summary(const ImputedDataset& ds) {
    nlohmann::json j;
    j["config"] = ds.config.to_json();
    nlohmann::json mask;
    const auto counts = ds.missing_counts();
    for (std::size_t c = 0; c < kNumMeasured; ++c) mask[std::string(measured_name(c))] = counts[c];
    j["missing_cells"] = mask;
    j["rows"] = ds.records.size();
    j["convergence_trace"] = ds.trace;
    j["warnings"] = ds.warnings;
    return j;
}

} // namespace vitalpain
