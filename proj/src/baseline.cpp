#include "ledgercast/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ledgercast/errors.hpp"
#include "ledgercast/windows.hpp"

namespace ledgercast::baseline {

namespace {

struct HwRun {
    double sse = 0.0;
    double level = 0.0;
    double trend = 0.0;
    std::vector<double> seasonal_tail;
    std::vector<double> fitted;
};

// Additive Holt-Winters with trend-adjusted seasonal initialization; the
// first season's fitted values are backcast from the initial states.
HwRun run_holt_winters(const std::vector<double>& y, int m, double alpha, double beta,
                       double gamma) {
    const int n = static_cast<int>(y.size());
    const double center = (m - 1) / 2.0;

    double level0 = 0.0;
    for (int i = 0; i < m; ++i) level0 += y[static_cast<std::size_t>(i)];
    level0 /= m;
    double trend0 = 0.0;
    for (int i = 0; i < m; ++i) {
        trend0 += y[static_cast<std::size_t>(m + i)] - y[static_cast<std::size_t>(i)];
    }
    trend0 /= static_cast<double>(m) * m;

    std::vector<double> s(y.size(), 0.0);
    for (int i = 0; i < m; ++i) {
        s[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)] - (level0 + (i - center) * trend0);
    }

    HwRun run;
    run.fitted.resize(y.size());
    for (int i = 0; i < m; ++i) {
        run.fitted[static_cast<std::size_t>(i)] =
            level0 + (i - center) * trend0 + s[static_cast<std::size_t>(i)];
    }

    double level = level0 + (m - 1 - center) * trend0; // trend line at index m-1
    double trend = trend0;
    for (int t = m; t < n; ++t) {
        const double s_prev = s[static_cast<std::size_t>(t - m)];
        const double pred = level + trend + s_prev;
        run.fitted[static_cast<std::size_t>(t)] = pred;
        const double err = y[static_cast<std::size_t>(t)] - pred;
        run.sse += err * err;
        const double level_new = alpha * (y[static_cast<std::size_t>(t)] - s_prev) + (1.0 - alpha) * (level + trend);
        trend = beta * (level_new - level) + (1.0 - beta) * trend;
        s[static_cast<std::size_t>(t)] = gamma * (y[static_cast<std::size_t>(t)] - level_new) + (1.0 - gamma) * s_prev;
        level = level_new;
    }
    run.level = level;
    run.trend = trend;
    run.seasonal_tail.assign(s.end() - m, s.end());
    return run;
}

} // namespace

UnivariateModel fit_univariate(const WeeklySeries& series, Method method, int season_length) {
    if (season_length < 1) throw ValidationError("fit_univariate: season_length must be >= 1");
    const int m = season_length;
    const int n = static_cast<int>(series.size());
    if (n < 2 * m) {
        throw DataError("fit_univariate: need at least two seasons (" + std::to_string(2 * m) +
                        " weeks), got " + std::to_string(n));
    }

    UnivariateModel model;
    model.method = method;
    model.season_length = m;
    model.origin_week = series.start_week();
    model.last_week = series.end_week();
    const auto& y = series.values();

    if (method == Method::seasonal_naive) {
        model.seasonal.assign(y.end() - m, y.end());
        std::vector<double> fitted(y.size());
        for (int t = 0; t < n; ++t) {
            fitted[static_cast<std::size_t>(t)] =
                t < m ? y[static_cast<std::size_t>(t)] : y[static_cast<std::size_t>(t - m)];
        }
        model.fitted = WeeklySeries(series.start_week(), std::move(fitted));
        return model;
    }

    static const std::vector<double> alpha_grid = {0.05, 0.15, 0.25, 0.35, 0.45,
                                                   0.55, 0.65, 0.75, 0.85, 0.95};
    static const std::vector<double> beta_grid = {0.01, 0.05, 0.1, 0.2, 0.4};
    static const std::vector<double> gamma_grid = alpha_grid;

    double best_sse = std::numeric_limits<double>::infinity();
    double best_a = alpha_grid.front(), best_b = beta_grid.front(), best_g = gamma_grid.front();
    for (double a : alpha_grid) {
        for (double b : beta_grid) {
            for (double g : gamma_grid) {
                const double sse = run_holt_winters(y, m, a, b, g).sse;
                if (sse < best_sse) {
                    best_sse = sse;
                    best_a = a;
                    best_b = b;
                    best_g = g;
                }
            }
        }
    }

    HwRun run = run_holt_winters(y, m, best_a, best_b, best_g);
    model.level = run.level;
    model.trend = run.trend;
    model.seasonal = std::move(run.seasonal_tail);
    model.alpha = best_a;
    model.beta = best_b;
    model.gamma = best_g;
    model.fitted = WeeklySeries(series.start_week(), std::move(run.fitted));
    return model;
}

WeeklySeries forecast_univariate(const UnivariateModel& model, int horizon) {
    if (horizon < 1) throw ValidationError("forecast_univariate: horizon must be >= 1");
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(horizon));
    const int m = model.season_length;
    for (int h = 1; h <= horizon; ++h) {
        const double seasonal = model.seasonal[static_cast<std::size_t>((h - 1) % m)];
        if (model.method == Method::seasonal_naive) {
            values.push_back(seasonal);
        } else {
            values.push_back(model.level + h * model.trend + seasonal);
        }
    }
    return WeeklySeries(model.last_week + 1, std::move(values));
}

WeeklySeries h1_forecast(const std::vector<Invoice>& invoices,
                         const std::map<std::string, WeeklySeries>& support,
                         const forecast::EventSet& events, const closure::GbtModel& closure_model,
                         const FiscalCalendar& cal, const H1Config& config) {
    if (config.horizon < 1) throw ValidationError("h1_forecast: horizon must be >= 1");

    int anchor = 0;
    bool any_closed = false;
    for (const auto& inv : invoices) {
        if (!inv.closed()) continue;
        anchor = std::max(anchor, cal.week_of(*inv.payment_date).absolute_week);
        any_closed = true;
    }
    if (!any_closed) throw DataError("h1_forecast: no closed invoices");

    const closure::ProfileSource profiles(invoices);
    const auto augmented =
        windows::simulate_partial(invoices, closure_model, profiles, anchor, config.horizon, cal);
    const WeeklySeries& aug = augmented.series;
    const int last_target = anchor + config.horizon;

    const UnivariateModel collections_uni = fit_univariate(aug, config.univariate, config.season_length);

    if (config.pure_univariate) {
        // bare projection: augmented values where they exist, univariate
        // extrapolation beyond
        std::vector<double> values;
        values.reserve(static_cast<std::size_t>(config.horizon));
        const auto tail = forecast_univariate(collections_uni, std::max(1, last_target - aug.end_week()));
        for (int w = anchor + 1; w <= last_target; ++w) {
            values.push_back(aug.contains_week(w) ? aug.at_week(w) : tail.at_week(w));
        }
        return WeeklySeries(anchor + 1, std::move(values));
    }

    // regressors: univariate view of collections plus each support series
    // raw, each extended past the anchor by its own univariate projection
    forecast::RegressorSet regressors;
    {
        std::vector<double> values(collections_uni.fitted.values());
        const auto tail = forecast_univariate(collections_uni, last_target - aug.end_week() > 0
                                                                   ? last_target - aug.end_week()
                                                                   : 1);
        for (int w = aug.end_week() + 1; w <= last_target; ++w) values.push_back(tail.at_week(w));
        regressors.emplace("collections_univariate", WeeklySeries(aug.start_week(), std::move(values)));
    }

    int train_start = aug.start_week();
    for (const auto& [name, series] : support) train_start = std::max(train_start, series.start_week());

    for (const auto& [name, series] : support) {
        const int hist_end = std::min(series.end_week(), anchor);
        const WeeklySeries hist = series.slice(series.start_week(), hist_end);
        std::vector<double> values(hist.values());
        if (hist_end < last_target) {
            const auto uni = fit_univariate(hist, config.univariate, config.season_length);
            const auto tail = forecast_univariate(uni, last_target - hist_end);
            for (int w = hist_end + 1; w <= last_target; ++w) values.push_back(tail.at_week(w));
        }
        regressors.emplace(name, WeeklySeries(hist.start_week(), std::move(values)));
    }

    const WeeklySeries y_train = aug.slice(train_start, anchor);
    const auto model = forecast::fit(y_train, config.forecaster, regressors, events, config.ridge);
    return forecast::predict(model, anchor + 1, config.horizon, regressors, events);
}

} // namespace ledgercast::baseline
