#include "ledgercast/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <nlohmann/json.hpp>

#include "ledgercast/errors.hpp"

namespace ledgercast::forecast {

using json = nlohmann::ordered_json;

namespace {

// column layout shared by fit-time and predict-time paths
struct Plan {
    int origin = 0;
    std::vector<int> cp_offsets; // t units, strictly inside the span
    std::vector<SeasonalBlock> blocks;
    std::vector<std::string> regressor_names;
    std::vector<double> reg_mean;
    std::vector<double> reg_std;
    std::vector<std::string> event_names;

    Eigen::Index cols() const {
        Eigen::Index n = 2 + static_cast<Eigen::Index>(cp_offsets.size());
        for (const auto& b : blocks) n += 2 * b.fourier_order;
        n += static_cast<Eigen::Index>(regressor_names.size() + event_names.size());
        return n;
    }
};

std::vector<int> changepoint_offsets(int n_weeks, int n_changepoints) {
    std::set<int> unique;
    for (int j = 1; j <= n_changepoints; ++j) {
        const int off = static_cast<int>(
            std::llround(0.8 * static_cast<double>(n_weeks - 1) * j / (n_changepoints + 1)));
        if (off > 0 && off < n_weeks - 1) unique.insert(off);
    }
    return {unique.begin(), unique.end()};
}

void check_regressor_coverage(const std::string& name, const WeeklySeries& series, int first_week,
                              int last_week) {
    std::string missing;
    for (int w = first_week; w <= last_week; ++w) {
        if (!series.contains_week(w)) missing += (missing.empty() ? "" : ", ") + std::to_string(w);
    }
    if (!missing.empty()) {
        throw DataError("regressor '" + name + "' missing weeks " + missing);
    }
}

Plan make_plan(const std::vector<int>& weeks, const ForecastConfig& config,
               const RegressorSet& regressors, const EventSet& events) {
    if (weeks.empty()) throw ValidationError("design_matrix: no weeks");
    for (std::size_t i = 1; i < weeks.size(); ++i) {
        if (weeks[i] != weeks[i - 1] + 1) {
            throw ValidationError("design_matrix: weeks must be contiguous ascending");
        }
    }
    for (const auto& b : config.seasonality.blocks) {
        if (b.fourier_order < 1 || b.period_weeks <= 0.0) {
            throw ValidationError("seasonality block '" + b.name + "': need order >= 1, period > 0");
        }
    }
    if (config.n_changepoints < 0) throw ValidationError("n_changepoints must be >= 0");

    Plan plan;
    plan.origin = weeks.front();
    plan.cp_offsets = changepoint_offsets(static_cast<int>(weeks.size()), config.n_changepoints);
    plan.blocks = config.seasonality.blocks;
    for (const auto& [name, series] : regressors) {
        check_regressor_coverage(name, series, weeks.front(), weeks.back());
        double mean = 0.0;
        for (int w : weeks) mean += series.at_week(w);
        mean /= static_cast<double>(weeks.size());
        double var = 0.0;
        for (int w : weeks) {
            const double d = series.at_week(w) - mean;
            var += d * d;
        }
        const double std = std::sqrt(var / static_cast<double>(weeks.size()));
        plan.regressor_names.push_back(name);
        plan.reg_mean.push_back(mean);
        plan.reg_std.push_back(std > 1e-12 ? std : 1.0);
    }
    for (const auto& [name, _] : events) plan.event_names.push_back(name);
    return plan;
}

Eigen::MatrixXd build_matrix(const Plan& plan, const std::vector<int>& weeks,
                             const RegressorSet& regressors, const EventSet& events) {
    const Eigen::Index n = static_cast<Eigen::Index>(weeks.size());
    Eigen::MatrixXd D(n, plan.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const int w = weeks[static_cast<std::size_t>(i)];
        const double t = static_cast<double>(w - plan.origin);
        Eigen::Index c = 0;
        D(i, c++) = 1.0;
        D(i, c++) = t;
        for (int off : plan.cp_offsets) D(i, c++) = std::max(0.0, t - static_cast<double>(off));
        for (const auto& b : plan.blocks) {
            for (int k = 1; k <= b.fourier_order; ++k) {
                const double phase = 2.0 * std::numbers::pi * k * static_cast<double>(w) / b.period_weeks;
                D(i, c++) = std::sin(phase);
                D(i, c++) = std::cos(phase);
            }
        }
        for (std::size_t r = 0; r < plan.regressor_names.size(); ++r) {
            const double x = regressors.at(plan.regressor_names[r]).at_week(w);
            D(i, c++) = (x - plan.reg_mean[r]) / plan.reg_std[r];
        }
        for (const auto& name : plan.event_names) {
            const auto it = events.find(name);
            D(i, c++) = (it != events.end() && it->second.count(w)) ? 1.0 : 0.0;
        }
    }
    return D;
}

std::vector<int> span_weeks(int first_week, int n_weeks) {
    if (n_weeks <= 0) throw ValidationError("forecast span must be positive");
    std::vector<int> weeks(static_cast<std::size_t>(n_weeks));
    for (int i = 0; i < n_weeks; ++i) weeks[static_cast<std::size_t>(i)] = first_week + i;
    return weeks;
}


void check_predict_inputs(const AdditiveModel& model, int first_week, int last_week,
                          const RegressorSet& regressors) {
    for (const auto& r : model.regressors) {
        const auto it = regressors.find(r.name);
        if (it == regressors.end()) throw DataError("predict: regressor '" + r.name + "' not supplied");
        check_regressor_coverage(r.name, it->second, first_week, last_week);
    }
}

} // namespace

Eigen::MatrixXd design_matrix(const std::vector<int>& weeks, const ForecastConfig& config,
                              const RegressorSet& regressors, const EventSet& events) {
    return build_matrix(make_plan(weeks, config, regressors, events), weeks, regressors, events);
}

AdditiveModel fit(const WeeklySeries& series, const ForecastConfig& config,
                  const RegressorSet& regressors, const EventSet& events,
                  const RidgeConfig& ridge) {
    if (series.empty()) throw DataError("fit: empty series");
    if (ridge.changepoint < 0 || ridge.seasonal < 0 || ridge.regressor < 0 || ridge.event < 0) {
        throw ValidationError("fit: ridge strengths must be >= 0");
    }
    std::vector<int> weeks = span_weeks(series.start_week(), static_cast<int>(series.size()));
    const Plan plan = make_plan(weeks, config, regressors, events);
    const Eigen::MatrixXd D = build_matrix(plan, weeks, regressors, events);

    Eigen::VectorXd penalties = Eigen::VectorXd::Zero(plan.cols());
    {
        Eigen::Index c = 2; // intercept and slope stay unpenalized
        for (std::size_t j = 0; j < plan.cp_offsets.size(); ++j) penalties(c++) = ridge.changepoint;
        for (const auto& b : plan.blocks) {
            for (int k = 0; k < 2 * b.fourier_order; ++k) penalties(c++) = ridge.seasonal;
        }
        for (std::size_t j = 0; j < plan.regressor_names.size(); ++j) penalties(c++) = ridge.regressor;
        for (std::size_t j = 0; j < plan.event_names.size(); ++j) penalties(c++) = ridge.event;
    }

    const bool fully_penalized = plan.cols() <= 2 || penalties.tail(plan.cols() - 2).minCoeff() > 0.0;
    if (!fully_penalized && static_cast<Eigen::Index>(weeks.size()) <= plan.cols()) {
        throw ValidationError("fit: series length must exceed column count when a group ridge is 0");
    }

    Eigen::MatrixXd gram = D.transpose() * D;
    gram.diagonal() += penalties;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gram);
    if (qr.rank() < gram.cols()) {
        throw NumericalError("fit: singular system (collinear unpenalized columns)");
    }
    const Eigen::Map<const Eigen::VectorXd> y(series.values().data(),
                                              static_cast<Eigen::Index>(series.size()));
    const Eigen::VectorXd beta = qr.solve(D.transpose() * y);

    AdditiveModel model;
    model.config = config;
    model.ridge = ridge;
    model.train_start = series.start_week();
    model.train_end = series.end_week();
    Eigen::Index c = 0;
    model.intercept = beta(c++);
    model.slope = beta(c++);
    for (int off : plan.cp_offsets) {
        model.changepoint_weeks.push_back(plan.origin + off);
        model.changepoint_deltas.push_back(beta(c++));
    }
    for (const auto& b : plan.blocks) {
        FittedBlock fb;
        fb.name = b.name;
        fb.period_weeks = b.period_weeks;
        fb.fourier_order = b.fourier_order;
        for (int k = 1; k <= b.fourier_order; ++k) {
            fb.sin_coef.push_back(beta(c++));
            fb.cos_coef.push_back(beta(c++));
        }
        model.blocks.push_back(std::move(fb));
    }
    for (std::size_t r = 0; r < plan.regressor_names.size(); ++r) {
        model.regressors.push_back(
            {plan.regressor_names[r], plan.reg_mean[r], plan.reg_std[r], beta(c++)});
    }
    for (const auto& name : plan.event_names) model.events.push_back({name, beta(c++)});
    return model;
}

namespace {

double trend_at(const AdditiveModel& model, int week) {
    const double t = static_cast<double>(week - model.train_start);
    double v = model.intercept + model.slope * t;
    for (std::size_t j = 0; j < model.changepoint_weeks.size(); ++j) {
        v += model.changepoint_deltas[j] *
             std::max(0.0, t - static_cast<double>(model.changepoint_weeks[j] - model.train_start));
    }
    return v;
}

double block_at(const FittedBlock& b, int week) {
    double v = 0.0;
    for (int k = 1; k <= b.fourier_order; ++k) {
        const double phase = 2.0 * std::numbers::pi * k * static_cast<double>(week) / b.period_weeks;
        v += b.sin_coef[static_cast<std::size_t>(k - 1)] * std::sin(phase) +
             b.cos_coef[static_cast<std::size_t>(k - 1)] * std::cos(phase);
    }
    return v;
}

} // namespace

WeeklySeries predict(const AdditiveModel& model, int first_week, int n_weeks,
                     const RegressorSet& regressors, const EventSet& events) {
    const std::vector<int> weeks = span_weeks(first_week, n_weeks);
    check_predict_inputs(model, first_week, weeks.back(), regressors);

    std::vector<double> values;
    values.reserve(weeks.size());
    for (int w : weeks) {
        double v = trend_at(model, w);
        for (const auto& b : model.blocks) v += block_at(b, w);
        for (const auto& r : model.regressors) {
            v += r.coefficient * (regressors.at(r.name).at_week(w) - r.mean) / r.std;
        }
        for (const auto& e : model.events) {
            const auto it = events.find(e.name);
            if (it != events.end() && it->second.count(w)) v += e.coefficient;
        }
        values.push_back(v);
    }
    return WeeklySeries(first_week, std::move(values));
}

Decomposition decompose(const AdditiveModel& model, int first_week, int n_weeks,
                        const RegressorSet& regressors, const EventSet& events) {
    const std::vector<int> weeks = span_weeks(first_week, n_weeks);
    check_predict_inputs(model, first_week, weeks.back(), regressors);

    Decomposition out;
    auto add_component = [&](const std::string& name, std::vector<double> values) {
        out.components.emplace(name, WeeklySeries(first_week, std::move(values)));
    };

    std::vector<double> trend;
    trend.reserve(weeks.size());
    for (int w : weeks) trend.push_back(trend_at(model, w));
    add_component("trend", std::move(trend));

    for (const auto& b : model.blocks) {
        std::vector<double> vals;
        vals.reserve(weeks.size());
        for (int w : weeks) vals.push_back(block_at(b, w));
        add_component("seasonal:" + b.name, std::move(vals));
    }
    for (const auto& r : model.regressors) {
        std::vector<double> vals;
        vals.reserve(weeks.size());
        for (int w : weeks) {
            vals.push_back(r.coefficient * (regressors.at(r.name).at_week(w) - r.mean) / r.std);
        }
        add_component("regressor:" + r.name, std::move(vals));
    }
    for (const auto& e : model.events) {
        std::vector<double> vals;
        vals.reserve(weeks.size());
        for (int w : weeks) {
            const auto it = events.find(e.name);
            vals.push_back(it != events.end() && it->second.count(w) ? e.coefficient : 0.0);
        }
        add_component("event:" + e.name, std::move(vals));
    }

    double total = 0.0;
    std::map<std::string, double> mean_abs;
    for (const auto& [name, series] : out.components) {
        double m = 0.0;
        for (double v : series.values()) m += std::abs(v);
        m /= static_cast<double>(series.size());
        mean_abs[name] = m;
        total += m;
    }
    for (const auto& [name, m] : mean_abs) out.shares[name] = total > 0.0 ? m / total : 0.0;
    return out;
}

std::string AdditiveModel::serialize() const {
    json j;
    j["model"] = "additive";
    j["train_start"] = train_start;
    j["train_end"] = train_end;
    j["n_changepoints"] = config.n_changepoints;
    j["ridge"] = {{"changepoint", ridge.changepoint},
                  {"seasonal", ridge.seasonal},
                  {"regressor", ridge.regressor},
                  {"event", ridge.event}};
    j["intercept"] = intercept;
    j["slope"] = slope;
    j["changepoint_weeks"] = changepoint_weeks;
    j["changepoint_deltas"] = changepoint_deltas;
    json blocks_j = json::array();
    for (const auto& b : blocks) {
        blocks_j.push_back({{"name", b.name},
                            {"period_weeks", b.period_weeks},
                            {"fourier_order", b.fourier_order},
                            {"sin", b.sin_coef},
                            {"cos", b.cos_coef}});
    }
    j["blocks"] = std::move(blocks_j);
    json regs_j = json::array();
    for (const auto& r : regressors) {
        regs_j.push_back(
            {{"name", r.name}, {"mean", r.mean}, {"std", r.std}, {"coefficient", r.coefficient}});
    }
    j["regressors"] = std::move(regs_j);
    json events_j = json::array();
    for (const auto& e : events) events_j.push_back({{"name", e.name}, {"coefficient", e.coefficient}});
    j["events"] = std::move(events_j);
    return j.dump(2);
}

AdditiveModel AdditiveModel::deserialize(const std::string& text) {
    json j = json::parse(text);
    if (j.value("model", "") != std::string("additive")) {
        throw ValidationError("deserialize: not an additive model record");
    }
    AdditiveModel m;
    m.train_start = j.at("train_start").get<int>();
    m.train_end = j.at("train_end").get<int>();
    m.config.n_changepoints = j.at("n_changepoints").get<int>();
    const auto& rj = j.at("ridge");
    m.ridge.changepoint = rj.at("changepoint").get<double>();
    m.ridge.seasonal = rj.at("seasonal").get<double>();
    m.ridge.regressor = rj.at("regressor").get<double>();
    m.ridge.event = rj.at("event").get<double>();
    m.intercept = j.at("intercept").get<double>();
    m.slope = j.at("slope").get<double>();
    m.changepoint_weeks = j.at("changepoint_weeks").get<std::vector<int>>();
    m.changepoint_deltas = j.at("changepoint_deltas").get<std::vector<double>>();
    m.config.seasonality.blocks.clear();
    for (const auto& bj : j.at("blocks")) {
        FittedBlock b;
        b.name = bj.at("name").get<std::string>();
        b.period_weeks = bj.at("period_weeks").get<double>();
        b.fourier_order = bj.at("fourier_order").get<int>();
        b.sin_coef = bj.at("sin").get<std::vector<double>>();
        b.cos_coef = bj.at("cos").get<std::vector<double>>();
        m.config.seasonality.blocks.push_back({b.name, b.period_weeks, b.fourier_order});
        m.blocks.push_back(std::move(b));
    }
    for (const auto& rjj : j.at("regressors")) {
        m.regressors.push_back({rjj.at("name").get<std::string>(), rjj.at("mean").get<double>(),
                                rjj.at("std").get<double>(), rjj.at("coefficient").get<double>()});
    }
    for (const auto& ej : j.at("events")) {
        m.events.push_back({ej.at("name").get<std::string>(), ej.at("coefficient").get<double>()});
    }
    return m;
}

} // namespace ledgercast::forecast
