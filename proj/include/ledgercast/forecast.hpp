#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ledgercast/core.hpp"

namespace ledgercast::forecast {

struct SeasonalBlock {
    std::string name;
    double period_weeks = 52.0;
    int fourier_order = 1;
};

struct SeasonalityConfig {
    std::vector<SeasonalBlock> blocks;

    // weekly granularity: quarterly + yearly blocks, no weekly block
    static SeasonalityConfig defaults() {
        return {{{"quarterly", 13.0, 2}, {"yearly", 52.0, 3}}};
    }
};

// Per-group ridge strengths; the trend columns (intercept, slope) are
// never penalized.
struct RidgeConfig {
    double changepoint = 10.0;
    double seasonal = 1.0;
    double regressor = 1.0;
    double event = 1.0;
};

struct ForecastConfig {
    SeasonalityConfig seasonality = SeasonalityConfig::defaults();
    int n_changepoints = 8; // uniformly spaced over the first 80% of history
};

struct FittedBlock {
    std::string name;
    double period_weeks = 0.0;
    int fourier_order = 0;
    std::vector<double> sin_coef;
    std::vector<double> cos_coef;
};

struct FittedRegressor {
    std::string name;
    double mean = 0.0; // training-span standardization
    double std = 1.0;
    double coefficient = 0.0; // on the standardized column

    double effect_per_unit() const { return coefficient / std; }
};

struct FittedEvent {
    std::string name;
    double coefficient = 0.0;
};

// Additive model: ŷ(w) = trend(w) + Σ seasonal(w) + Σ regressor(w) +
// Σ event(w). The trend is piecewise linear and continuous (hinge basis);
// Fourier phases use the absolute week so seasonality stays anchored to
// the fiscal calendar.
struct AdditiveModel {
    ForecastConfig config;
    RidgeConfig ridge;
    int train_start = 0; // t = week - train_start
    int train_end = 0;
    double intercept = 0.0;
    double slope = 0.0;
    std::vector<int> changepoint_weeks; // absolute weeks
    std::vector<double> changepoint_deltas;
    std::vector<FittedBlock> blocks;
    std::vector<FittedRegressor> regressors;
    std::vector<FittedEvent> events;

    std::string serialize() const; // JSON
    static AdditiveModel deserialize(const std::string& text);
};

using RegressorSet = std::map<std::string, WeeklySeries>;
using EventSet = std::map<std::string, std::set<int>>; // name -> absolute weeks

// Design matrix over the given contiguous ascending weeks. Column order:
// [1, t, hinge(t - c_1..c_n), per block k=1..K (sin, cos), regressors in
// name order (standardized over these weeks), events in name order].
// Changepoints and standardization derive from the weeks given, i.e. the
// weeks are treated as the training span.
Eigen::MatrixXd design_matrix(const std::vector<int>& weeks, const ForecastConfig& config,
                              const RegressorSet& regressors, const EventSet& events);

// Penalized least squares over the series span. Every regressor must
// cover the span; events outside it are ignored.
AdditiveModel fit(const WeeklySeries& series, const ForecastConfig& config,
                  const RegressorSet& regressors, const EventSet& events,
                  const RidgeConfig& ridge = {});

// Additive prediction over [first_week, first_week + n_weeks). Regressor
// values must cover every requested week; the trend extrapolates the
// final segment slope.
WeeklySeries predict(const AdditiveModel& model, int first_week, int n_weeks,
                     const RegressorSet& regressors, const EventSet& events);

// Component series ("trend", "seasonal:<block>", "regressor:<name>",
// "event:<name>") plus mean-|value| shares. Components sum to the
// prediction week by week.
struct Decomposition {
    std::map<std::string, WeeklySeries> components;
    std::map<std::string, double> shares; // sums to 1 unless all components vanish
};

Decomposition decompose(const AdditiveModel& model, int first_week, int n_weeks,
                        const RegressorSet& regressors, const EventSet& events);

} // namespace ledgercast::forecast
