#pragma once

#include <map>
#include <string>
#include <vector>

#include "ledgercast/closure.hpp"
#include "ledgercast/core.hpp"
#include "ledgercast/forecast.hpp"

namespace ledgercast::baseline {

enum class Method { seasonal_naive, holt_winters_additive };

// Univariate seasonal state-space fit. Forecast of week last_week + h
// adds h * trend to the level and repeats the final season of states.
struct UnivariateModel {
    Method method = Method::holt_winters_additive;
    int season_length = 13;
    int origin_week = 0;
    int last_week = 0;
    double level = 0.0;
    double trend = 0.0;
    std::vector<double> seasonal; // final season of states, length == season_length
    double alpha = 0.0, beta = 0.0, gamma = 0.0;
    WeeklySeries fitted; // in-sample one-step predictions (first season backcast)
};

// Needs at least two seasons of history. Holt-Winters smoothing weights
// are grid searched on in-sample one-step squared error.
UnivariateModel fit_univariate(const WeeklySeries& series, Method method, int season_length = 13);

WeeklySeries forecast_univariate(const UnivariateModel& model, int horizon);

struct H1Config {
    int horizon = 13;
    Method univariate = Method::holt_winters_additive;
    int season_length = 13;
    // restrict to the univariate projection alone (the bare baseline of
    // record), skipping the regressor-bearing forecaster
    bool pure_univariate = false;
    forecast::ForecastConfig forecaster;
    forecast::RidgeConfig ridge;
};

// Baseline pipeline: closure predictions of open invoices are aggregated
// weekly with realized payments, a univariate model projects that
// aggregate, each support series is projected univariately, and the
// additive forecaster combines them with the support entering raw
// (unlagged, no rolling windows). Returns the horizon forecast starting
// the week after the last closed payment.
WeeklySeries h1_forecast(const std::vector<Invoice>& invoices,
                         const std::map<std::string, WeeklySeries>& support,
                         const forecast::EventSet& events, const closure::GbtModel& closure_model,
                         const FiscalCalendar& cal, const H1Config& config);

} // namespace ledgercast::baseline
