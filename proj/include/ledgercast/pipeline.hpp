#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ledgercast/baseline.hpp"
#include "ledgercast/closure.hpp"
#include "ledgercast/core.hpp"
#include "ledgercast/eval.hpp"
#include "ledgercast/forecast.hpp"
#include "ledgercast/lags.hpp"
#include "ledgercast/synthgen.hpp"
#include "ledgercast/tune.hpp"
#include "ledgercast/windows.hpp"

namespace ledgercast::pipeline {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class Variant { h1, h2 };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name); // throws ValidationError

struct EvalConfig {
    int folds = 3;
    int windows = 2; // successive forecast anchors, one horizon apart
    double alpha = 0.5;
    int min_train_weeks = 26;
    // Fold weights are parametrized as normalized cumulative sums of
    // positive increments, which keeps them positive and nondecreasing
    // under tuning. Unit increments reproduce the default f / sum(1..F).
    std::vector<double> fold_weight_increments;

    std::vector<double> fold_weights() const; // normalized, nondecreasing
};

struct WindowsConfig {
    bool enabled = true;
    int short_weeks = 4;
    int long_weeks = 13;
};

struct LagsConfig {
    bool enabled = true;
    int max_lag = 13;
    double threshold = 0.05;
};

struct PipelineConfig {
    Date fiscal_start = Date(18267); // 2020-01-06
    Variant variant = Variant::h2;
    std::uint64_t seed = 1;
    std::string invoices_path = "invoices.csv";
    std::string support_path = "support.csv";
    int horizon_weeks = 13;
    closure::GbtParams gbt;
    WindowsConfig windows;
    LagsConfig lags;
    forecast::ForecastConfig forecaster;
    forecast::RidgeConfig ridge;
    baseline::Method univariate = baseline::Method::holt_winters_additive;
    int season_length = 13;
    bool pure_univariate = false; // bare H1: univariate projection only
    EvalConfig eval;
    std::map<std::string, std::vector<int>> events; // name -> absolute weeks
    int tune_budget = 40;
    tune::SearchMode tune_mode = tune::SearchMode::gp_ei;

    void validate() const;
    static PipelineConfig load(const std::string& path);      // JSON file
    static PipelineConfig parse(const std::string& json_text); // JSON text
    std::string to_json() const; // canonical echo, round-trips via parse
};

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

struct Dataset {
    std::vector<Invoice> invoices;
    std::map<std::string, WeeklySeries> support;
    FiscalCalendar cal;
};

// Reads and validates the CSV pair. Row-level problems are collected and
// reported together with their line numbers in a single DataError.
Dataset ingest(const std::string& invoices_path, const std::string& support_path,
               const FiscalCalendar& cal);

// Adapter for in-process synthetic data.
Dataset from_synth(const synth::Dataset& generated);

// ---------------------------------------------------------------------------
// Walk-forward instrumentation
// ---------------------------------------------------------------------------

struct LeakageViolation {
    std::string stage;
    std::string detail;
};

// Records every timestamp handed to a pipeline stage and flags any datum
// dated after the anchor. Production runs pass nullptr; tests assert
// zero violations over a positive number of checks.
struct LeakageAudit {
    int anchor_week = 0;
    Date anchor_date;
    std::size_t checks = 0;
    std::vector<LeakageViolation> violations;

    void check_date(const std::string& stage, Date d, const std::string& what);
    void check_week(const std::string& stage, int week, const std::string& what);
};

// View of the dataset as knowable at the end of anchor_week: invoices
// issued later vanish, payments dated later revert to open, support
// series are truncated at the anchor week.
Dataset as_of(const Dataset& data, int anchor_week, LeakageAudit* audit = nullptr);

// ---------------------------------------------------------------------------
// Fitting engine
// ---------------------------------------------------------------------------

// One fitted forecast at an anchor, with everything the reports need.
struct FitResult {
    int anchor_week = 0;
    closure::GbtModel closure_model;
    forecast::AdditiveModel model;
    forecast::RegressorSet regressors; // columns covering train span + horizon
    forecast::EventSet events;
    std::map<std::string, lags::LagSpec> lag_specs; // lagged variants only
    WeeklySeries forecast;                          // (anchor, anchor + horizon]
};

// Shared H1/H2 engine. H1 columns: univariate view of the augmented
// aggregate plus each support series raw (both extended past the anchor
// univariately). H2 swaps in the walk-forward windowed simulations and
// the lag-selected support columns; disabling windows and lags in the
// config makes run_h2 take the H1 path exactly, which is the degeneracy
// the compare() contract relies on.
FitResult fit_forecast(const Dataset& data, const PipelineConfig& config, Variant variant,
                       int anchor_week, LeakageAudit* audit = nullptr);

// ---------------------------------------------------------------------------
// Evaluation and reports
// ---------------------------------------------------------------------------

struct FoldResult {
    int window_index = 0; // 1-based
    int fold_index = 0;   // 1-based within its window
    eval::Fold fold;
    double mape = 0.0;
};

struct EvaluationResult {
    std::vector<double> window_scores; // variance-weighted, per window
    double final_score = 0.0;
    std::vector<FoldResult> folds;
    std::size_t leakage_checks = 0;
    std::size_t leakage_violations = 0;
};

// k rolling windows of F expanding folds each; every fold refits the full
// variant as of its train end and scores MAPE on the next horizon.
EvaluationResult evaluate_variant(const Dataset& data, const PipelineConfig& config,
                                  Variant variant);

struct RunReport {
    Variant variant = Variant::h2;
    std::uint64_t seed = 1;
    int anchor_week = 0;
    EvaluationResult evaluation;
    WeeklySeries forecast;
    std::map<std::string, double> component_shares;
    std::map<std::string, lags::LagSpec> lag_specs;
    std::vector<eval::DeviationSummary> deviation_summary;
    std::string config_echo;                // canonical config JSON
    std::map<std::string, double> stage_ms; // informational; excluded from JSON

    std::string to_json() const; // byte-deterministic for fixed config+seed
    std::string to_markdown() const;
};

RunReport run_h1(const Dataset& data, const PipelineConfig& config);
RunReport run_h2(const Dataset& data, const PipelineConfig& config);

struct ComparisonReport {
    RunReport h1;
    RunReport h2;
    double uplift = 0.0; // percent, positive when H2 beats H1

    std::string to_json() const;
    std::string to_markdown() const;
};

// H1 and H2 on identical folds and windows.
ComparisonReport compare(const Dataset& data, const PipelineConfig& config);

// ---------------------------------------------------------------------------
// Tuning glue
// ---------------------------------------------------------------------------

// Tunable dimensions of the H2 pipeline with their documented ranges.
tune::ParamSpace pipeline_space();

// Base config with one trial's parameters substituted in.
PipelineConfig apply_params(const PipelineConfig& base, const tune::Params& params);

// Objective: custom loss (weighted fold MAPEs, alpha dial) of the H2
// pipeline over the sliding folds at the final anchor window. The base
// config's own parameters seed trial 0, so the tuned loss can never
// exceed the default loss.
tune::TuneResult tune_pipeline(const Dataset& data, const PipelineConfig& base, int budget,
                               std::uint64_t seed);

} // namespace ledgercast::pipeline
