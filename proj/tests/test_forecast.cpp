#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ledgercast/forecast.hpp"
#include "ledgercast/rng.hpp"

#include <cmath>
#include <numbers>
#include <vector>

using namespace ledgercast;
using namespace ledgercast::forecast;

namespace {

constexpr int kStart = 10;
constexpr int kWeeks = 104;

struct Planted {
    double intercept = 120.0;
    double slope = 0.9;
    std::vector<int> cp_weeks;                 // taken from the library's schedule
    std::vector<double> cp_deltas{-0.4, 0.7};  // applied to the first two changepoints
    double sin1 = 8.0, cos1 = -5.0;            // quarterly order-2 block
    double sin2 = 3.0, cos2 = 2.0;
    double reg_effect_per_unit = 0.05;
    double event_effect = 25.0;
};

// The changepoint schedule is part of the fit contract (uniform over the
// first 80% of history), so a probe fit on a throwaway series reveals the
// hinge locations the real fit will use.
std::vector<int> changepoint_schedule(const ForecastConfig& config) {
    std::vector<double> flat(kWeeks, 1.0);
    const AdditiveModel probe =
        fit(WeeklySeries(kStart, std::move(flat)), config, {}, {}, RidgeConfig{1, 1, 1, 1});
    return probe.changepoint_weeks;
}

double planted_value(const Planted& p, int w, double z_standardized_effect) {
    const double t = static_cast<double>(w - kStart);
    double v = p.intercept + p.slope * t;
    for (std::size_t j = 0; j < p.cp_weeks.size(); ++j) {
        v += p.cp_deltas[j] * std::max(0.0, t - static_cast<double>(p.cp_weeks[j] - kStart));
    }
    const double base = 2.0 * std::numbers::pi * static_cast<double>(w) / 13.0;
    v += p.sin1 * std::sin(base) + p.cos1 * std::cos(base);
    v += p.sin2 * std::sin(2.0 * base) + p.cos2 * std::cos(2.0 * base);
    return v + z_standardized_effect;
}

} // namespace

TEST_CASE("design_matrix layout") {
    ForecastConfig config;
    config.n_changepoints = 3;
    config.seasonality.blocks = {{"quarterly", 13.0, 2}};

    Rng rng(1);
    std::vector<double> rv;
    for (int i = 0; i < 30; ++i) rv.push_back(rng.normal());
    RegressorSet regs{{"driver", WeeklySeries(1, rv)}};
    EventSet events{{"holiday", {5, 9}}};

    std::vector<int> weeks;
    for (int w = 1; w <= 30; ++w) weeks.push_back(w);
    const Eigen::MatrixXd D = design_matrix(weeks, config, regs, events);

    REQUIRE(D.rows() == 30);
    REQUIRE(D.cols() == 2 + 3 + 4 + 1 + 1);
    for (int i = 0; i < 30; ++i) {
        CHECK(D(i, 0) == 1.0);
        CHECK(D(i, 1) == static_cast<double>(i));
    }
    // Standardized regressor column: zero mean, unit population std.
    const Eigen::Index rc = 9;
    CHECK(D.col(rc).mean() == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(D.col(rc).squaredNorm() / 30.0 == doctest::Approx(1.0).epsilon(1e-12));
    // Event indicator at weeks 5 and 9 only.
    CHECK(D.col(10).sum() == 2.0);
    CHECK(D(4, 10) == 1.0);
    CHECK(D(8, 10) == 1.0);

    CHECK_THROWS_AS(design_matrix({1, 3, 4}, config, {}, {}), ValidationError);
    CHECK_THROWS_AS(design_matrix({}, config, {}, {}), ValidationError);
    config.n_changepoints = -1;
    CHECK_THROWS_AS(design_matrix(weeks, config, {}, {}), ValidationError);
}

TEST_CASE("noise-free planted model is recovered exactly") {
    ForecastConfig config;
    config.n_changepoints = 2;
    config.seasonality.blocks = {{"quarterly", 13.0, 2}};

    Planted p;
    p.cp_weeks = changepoint_schedule(config);
    REQUIRE(p.cp_weeks.size() == 2);

    // Regressor uncorrelated with the structure; its true effect is per
    // raw unit, applied exactly as the fitted model would.
    Rng rng(314);
    std::vector<double> zv;
    for (int i = 0; i < kWeeks; ++i) zv.push_back(400.0 + 60.0 * rng.normal());
    const WeeklySeries z(kStart, zv);
    RegressorSet regs{{"driver", z}};

    EventSet events{{"promo", {kStart + 30, kStart + 71}}};

    std::vector<double> yv;
    for (int w = kStart; w < kStart + kWeeks; ++w) {
        double v = planted_value(p, w, p.reg_effect_per_unit * z.at_week(w));
        if (events.at("promo").count(w)) v += p.event_effect;
        yv.push_back(v);
    }
    const WeeklySeries y(kStart, std::move(yv));

    const AdditiveModel m = fit(y, config, regs, events, RidgeConfig{0, 0, 0, 0});

    double max_err = 0.0;
    auto track = [&](double got, double want) {
        max_err = std::max(max_err, std::abs(got - want));
    };
    track(m.intercept, p.intercept + p.reg_effect_per_unit * m.regressors[0].mean);
    track(m.slope, p.slope);
    REQUIRE(m.changepoint_weeks == p.cp_weeks);
    track(m.changepoint_deltas[0], p.cp_deltas[0]);
    track(m.changepoint_deltas[1], p.cp_deltas[1]);
    REQUIRE(m.blocks.size() == 1);
    track(m.blocks[0].sin_coef[0], p.sin1);
    track(m.blocks[0].cos_coef[0], p.cos1);
    track(m.blocks[0].sin_coef[1], p.sin2);
    track(m.blocks[0].cos_coef[1], p.cos2);
    REQUIRE(m.regressors.size() == 1);
    track(m.regressors[0].effect_per_unit(), p.reg_effect_per_unit);
    REQUIRE(m.events.size() == 1);
    track(m.events[0].coefficient, p.event_effect);
    CHECK(max_err < 1e-6);

    // In-sample predictions reproduce the series.
    const WeeklySeries yhat = predict(m, kStart, kWeeks, regs, events);
    for (int w = kStart; w < kStart + kWeeks; ++w) {
        CHECK(yhat.at_week(w) == doctest::Approx(y.at_week(w)).scale(100.0).epsilon(1e-9));
    }
}

TEST_CASE("decomposition components sum to the prediction") {
    ForecastConfig config;
    config.n_changepoints = 4;

    Rng rng(55);
    std::vector<double> yv, zv;
    for (int i = 0; i < 90; ++i) {
        zv.push_back(50.0 + 10.0 * rng.normal());
        yv.push_back(200.0 + 1.5 * i + 20.0 * std::sin(2.0 * std::numbers::pi * i / 13.0) +
                     0.4 * zv.back() + 5.0 * rng.normal());
    }
    const WeeklySeries y(1, yv);
    RegressorSet regs{{"driver", WeeklySeries(1, zv)}};
    EventSet events{{"audit", {30}}};

    const AdditiveModel m = fit(y, config, regs, events);
    const Decomposition d = decompose(m, 1, 90, regs, events);
    const WeeklySeries yhat = predict(m, 1, 90, regs, events);

    REQUIRE(d.components.count("trend") == 1);
    REQUIRE(d.components.count("seasonal:quarterly") == 1);
    REQUIRE(d.components.count("seasonal:yearly") == 1);
    REQUIRE(d.components.count("regressor:driver") == 1);
    REQUIRE(d.components.count("event:audit") == 1);

    for (int w = 1; w <= 90; ++w) {
        double sum = 0.0;
        for (const auto& [name, comp] : d.components) sum += comp.at_week(w);
        CHECK(sum == doctest::Approx(yhat.at_week(w)).scale(100.0).epsilon(1e-9));
    }

    double share_sum = 0.0;
    for (const auto& [name, s] : d.shares) {
        CHECK(s >= 0.0);
        share_sum += s;
    }
    CHECK(share_sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("trend extrapolates the final segment slope") {
    ForecastConfig config;
    config.n_changepoints = 0;
    config.seasonality.blocks.clear();

    std::vector<double> yv;
    for (int i = 0; i < 40; ++i) yv.push_back(10.0 + 2.5 * i);
    const AdditiveModel m = fit(WeeklySeries(1, std::move(yv)), config, {}, {});

    CHECK(m.intercept == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(m.slope == doctest::Approx(2.5).epsilon(1e-9));
    const WeeklySeries ahead = predict(m, 41, 5, {}, {});
    for (int w = 41; w <= 45; ++w) {
        CHECK(ahead.at_week(w) == doctest::Approx(10.0 + 2.5 * (w - 1)).epsilon(1e-9));
    }
}

TEST_CASE("stronger ridge shrinks the penalized groups") {
    Rng rng(12);
    std::vector<double> yv, zv;
    for (int i = 0; i < 80; ++i) {
        zv.push_back(rng.normal());
        yv.push_back(100.0 + 15.0 * std::sin(2.0 * std::numbers::pi * i / 13.0) +
                     4.0 * zv.back() + rng.normal());
    }
    const WeeklySeries y(1, yv);
    RegressorSet regs{{"z", WeeklySeries(1, zv)}};

    ForecastConfig config;
    config.n_changepoints = 0;
    config.seasonality.blocks = {{"quarterly", 13.0, 1}};

    const AdditiveModel loose = fit(y, config, regs, {}, RidgeConfig{10, 0.01, 0.01, 1});
    const AdditiveModel tight = fit(y, config, regs, {}, RidgeConfig{10, 500.0, 500.0, 1});

    const double loose_amp = std::hypot(loose.blocks[0].sin_coef[0], loose.blocks[0].cos_coef[0]);
    const double tight_amp = std::hypot(tight.blocks[0].sin_coef[0], tight.blocks[0].cos_coef[0]);
    CHECK(tight_amp < loose_amp);
    CHECK(std::abs(tight.regressors[0].coefficient) < std::abs(loose.regressors[0].coefficient));
}

TEST_CASE("fit and predict validate coverage") {
    ForecastConfig config;
    const WeeklySeries y(1, std::vector<double>(60, 5.0));

    // Regressor covering only part of the span.
    RegressorSet partial{{"z", WeeklySeries(1, std::vector<double>(30, 1.0))}};
    CHECK_THROWS_AS(fit(y, config, partial, {}), DataError);

    Rng rng(9);
    std::vector<double> zv;
    for (int i = 0; i < 60; ++i) zv.push_back(rng.normal());
    RegressorSet regs{{"z", WeeklySeries(1, zv)}};
    const AdditiveModel m = fit(y, config, regs, {});

    CHECK_THROWS_AS(predict(m, 55, 10, regs, {}), DataError); // weeks 61+ uncovered
    CHECK_THROWS_AS(predict(m, 1, 10, {}, {}), DataError);    // regressor missing entirely
    CHECK_THROWS_AS(predict(m, 1, 0, regs, {}), ValidationError);

    // Unpenalized fit demands more rows than columns.
    const WeeklySeries tiny(1, std::vector<double>(10, 1.0));
    ForecastConfig wide;
    wide.n_changepoints = 8;
    CHECK_THROWS_AS(fit(tiny, wide, {}, {}, RidgeConfig{0, 0, 0, 0}), ValidationError);
}

TEST_CASE("model serialization round trip") {
    Rng rng(33);
    std::vector<double> yv, zv;
    for (int i = 0; i < 90; ++i) zv.push_back(rng.normal());
    for (int i = 0; i < 70; ++i) yv.push_back(50.0 + i + 3.0 * zv[static_cast<std::size_t>(i)] + rng.normal());
    RegressorSet regs{{"z", WeeklySeries(5, zv)}};
    EventSet events{{"e", {20}}};
    const AdditiveModel m = fit(WeeklySeries(5, std::move(yv)), ForecastConfig{}, regs, events);

    const std::string text = m.serialize();
    const AdditiveModel back = AdditiveModel::deserialize(text);
    CHECK(back.serialize() == text);

    const WeeklySeries a = predict(m, 75, 8, regs, events);
    const WeeklySeries b = predict(back, 75, 8, regs, events);
    for (int w = 75; w < 83; ++w) CHECK(a.at_week(w) == b.at_week(w));

    CHECK_THROWS_AS(AdditiveModel::deserialize("{\"model\":\"gbt\"}"), ValidationError);
}
