#include "ledgercast/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ledgercast/errors.hpp"
#include "ledgercast/log.hpp"

namespace ledgercast::pipeline {

using ordered_json = nlohmann::ordered_json;

namespace {

// Rethrows module errors with the pipeline stage prepended.
template <typename F>
auto stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string(name) + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(std::string(name) + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(name) + ": " + e.what());
    }
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    const auto d = std::chrono::steady_clock::now() - since;
    return std::chrono::duration<double, std::milli>(d).count();
}

} // namespace

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

std::string variant_name(Variant v) { return v == Variant::h1 ? "h1" : "h2"; }

Variant parse_variant(const std::string& name) {
    if (name == "h1") return Variant::h1;
    if (name == "h2") return Variant::h2;
    throw ValidationError("unknown variant '" + name + "' (expected h1 or h2)");
}

std::vector<double> EvalConfig::fold_weights() const {
    std::vector<double> inc = fold_weight_increments;
    if (inc.empty()) inc.assign(static_cast<std::size_t>(folds), 1.0);
    if (static_cast<int>(inc.size()) != folds) {
        throw ValidationError("eval: fold_weight_increments size " + std::to_string(inc.size()) +
                              " does not match folds " + std::to_string(folds));
    }
    std::vector<double> w(inc.size());
    double running = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < inc.size(); ++i) {
        if (!(inc[i] > 0.0) || !std::isfinite(inc[i])) {
            throw ValidationError("eval: fold weight increments must be positive");
        }
        running += inc[i];
        w[i] = running;
        total += running;
    }
    for (auto& v : w) v /= total;
    return w;
}

void PipelineConfig::validate() const {
    if (horizon_weeks < 1) throw ValidationError("config: horizon_weeks must be >= 1");
    if (season_length < 1) throw ValidationError("config: season_length must be >= 1");
    if (eval.folds < 1) throw ValidationError("config: eval.folds must be >= 1");
    if (eval.windows < 1) throw ValidationError("config: eval.windows must be >= 1");
    if (eval.alpha < 0.0 || eval.alpha > 1.0) {
        throw ValidationError("config: eval.alpha must lie in [0, 1]");
    }
    if (eval.min_train_weeks < 1) throw ValidationError("config: eval.min_train_weeks must be >= 1");
    (void)eval.fold_weights();
    if (gbt.n_trees < 1 || gbt.max_depth < 1 || gbt.min_samples_leaf < 1 ||
        !(gbt.learning_rate > 0.0)) {
        throw ValidationError("config: invalid closure parameters");
    }
    if (windows.short_weeks < 1 || windows.long_weeks < 1) {
        throw ValidationError("config: window lengths must be >= 1");
    }
    if (lags.max_lag < 0) throw ValidationError("config: lags.max_lag must be >= 0");
    if (lags.threshold < 0.0 || lags.threshold > 1.0) {
        throw ValidationError("config: lags.threshold must lie in [0, 1]");
    }
    if (forecaster.n_changepoints < 0) {
        throw ValidationError("config: n_changepoints must be >= 0");
    }
    for (const auto& block : forecaster.seasonality.blocks) {
        if (block.name.empty() || block.period_weeks <= 0.0 || block.fourier_order < 1) {
            throw ValidationError("config: invalid seasonality block");
        }
    }
    if (ridge.changepoint < 0.0 || ridge.seasonal < 0.0 || ridge.regressor < 0.0 ||
        ridge.event < 0.0) {
        throw ValidationError("config: ridge strengths must be >= 0");
    }
    if (tune_budget < 1) throw ValidationError("config: tune_budget must be >= 1");
    for (const auto& [name, weeks] : events) {
        if (name.empty()) throw ValidationError("config: event with empty name");
        for (int w : weeks) {
            if (w < 1) throw ValidationError("config: event '" + name + "' has week < 1");
        }
    }
}

namespace {

void expect_keys(const ordered_json& obj, const char* where,
                 const std::set<std::string>& allowed) {
    for (const auto& item : obj.items()) {
        if (allowed.find(item.key()) == allowed.end()) {
            throw ValidationError(std::string("config: unknown key '") + item.key() + "' in " +
                                  where);
        }
    }
}

baseline::Method parse_method(const std::string& name) {
    if (name == "holt_winters") return baseline::Method::holt_winters_additive;
    if (name == "seasonal_naive") return baseline::Method::seasonal_naive;
    throw ValidationError("config: unknown univariate method '" + name + "'");
}

std::string method_name(baseline::Method m) {
    return m == baseline::Method::holt_winters_additive ? "holt_winters" : "seasonal_naive";
}

} // namespace

PipelineConfig PipelineConfig::parse(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        throw ValidationError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("config: top level must be an object");
    expect_keys(j, "top level",
                {"fiscal_start", "variant", "seed", "paths", "horizon_weeks", "closure", "windows",
                 "lags", "forecaster", "baseline", "eval", "events", "tune"});

    PipelineConfig c;
    if (j.contains("fiscal_start")) c.fiscal_start = Date::parse_iso(j.at("fiscal_start"));
    if (j.contains("variant")) c.variant = parse_variant(j.at("variant"));
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("horizon_weeks")) c.horizon_weeks = j.at("horizon_weeks").get<int>();

    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        expect_keys(p, "paths", {"invoices", "support"});
        if (p.contains("invoices")) c.invoices_path = p.at("invoices").get<std::string>();
        if (p.contains("support")) c.support_path = p.at("support").get<std::string>();
    }
    if (j.contains("closure")) {
        const auto& p = j.at("closure");
        expect_keys(p, "closure", {"n_trees", "max_depth", "learning_rate", "min_samples_leaf"});
        if (p.contains("n_trees")) c.gbt.n_trees = p.at("n_trees").get<int>();
        if (p.contains("max_depth")) c.gbt.max_depth = p.at("max_depth").get<int>();
        if (p.contains("learning_rate")) c.gbt.learning_rate = p.at("learning_rate").get<double>();
        if (p.contains("min_samples_leaf")) {
            c.gbt.min_samples_leaf = p.at("min_samples_leaf").get<int>();
        }
    }
    if (j.contains("windows")) {
        const auto& p = j.at("windows");
        expect_keys(p, "windows", {"enabled", "short_weeks", "long_weeks"});
        if (p.contains("enabled")) c.windows.enabled = p.at("enabled").get<bool>();
        if (p.contains("short_weeks")) c.windows.short_weeks = p.at("short_weeks").get<int>();
        if (p.contains("long_weeks")) c.windows.long_weeks = p.at("long_weeks").get<int>();
    }
    if (j.contains("lags")) {
        const auto& p = j.at("lags");
        expect_keys(p, "lags", {"enabled", "max_lag", "threshold"});
        if (p.contains("enabled")) c.lags.enabled = p.at("enabled").get<bool>();
        if (p.contains("max_lag")) c.lags.max_lag = p.at("max_lag").get<int>();
        if (p.contains("threshold")) c.lags.threshold = p.at("threshold").get<double>();
    }
    if (j.contains("forecaster")) {
        const auto& p = j.at("forecaster");
        expect_keys(p, "forecaster", {"n_changepoints", "seasonality", "ridge"});
        if (p.contains("n_changepoints")) {
            c.forecaster.n_changepoints = p.at("n_changepoints").get<int>();
        }
        if (p.contains("seasonality")) {
            c.forecaster.seasonality.blocks.clear();
            for (const auto& b : p.at("seasonality")) {
                expect_keys(b, "seasonality block", {"name", "period_weeks", "fourier_order"});
                c.forecaster.seasonality.blocks.push_back({b.at("name").get<std::string>(),
                                                           b.at("period_weeks").get<double>(),
                                                           b.at("fourier_order").get<int>()});
            }
        }
        if (p.contains("ridge")) {
            const auto& r = p.at("ridge");
            expect_keys(r, "ridge", {"changepoint", "seasonal", "regressor", "event"});
            if (r.contains("changepoint")) c.ridge.changepoint = r.at("changepoint").get<double>();
            if (r.contains("seasonal")) c.ridge.seasonal = r.at("seasonal").get<double>();
            if (r.contains("regressor")) c.ridge.regressor = r.at("regressor").get<double>();
            if (r.contains("event")) c.ridge.event = r.at("event").get<double>();
        }
    }
    if (j.contains("baseline")) {
        const auto& p = j.at("baseline");
        expect_keys(p, "baseline", {"method", "season_length", "pure_univariate"});
        if (p.contains("method")) c.univariate = parse_method(p.at("method"));
        if (p.contains("season_length")) c.season_length = p.at("season_length").get<int>();
        if (p.contains("pure_univariate")) c.pure_univariate = p.at("pure_univariate").get<bool>();
    }
    if (j.contains("eval")) {
        const auto& p = j.at("eval");
        expect_keys(p, "eval",
                    {"folds", "windows", "alpha", "min_train_weeks", "fold_weight_increments"});
        if (p.contains("folds")) c.eval.folds = p.at("folds").get<int>();
        if (p.contains("windows")) c.eval.windows = p.at("windows").get<int>();
        if (p.contains("alpha")) c.eval.alpha = p.at("alpha").get<double>();
        if (p.contains("min_train_weeks")) c.eval.min_train_weeks = p.at("min_train_weeks").get<int>();
        if (p.contains("fold_weight_increments")) {
            c.eval.fold_weight_increments =
                p.at("fold_weight_increments").get<std::vector<double>>();
        }
    }
    if (j.contains("events")) {
        for (const auto& item : j.at("events").items()) {
            c.events[item.key()] = item.value().get<std::vector<int>>();
        }
    }
    if (j.contains("tune")) {
        const auto& p = j.at("tune");
        expect_keys(p, "tune", {"budget", "mode"});
        if (p.contains("budget")) c.tune_budget = p.at("budget").get<int>();
        if (p.contains("mode")) {
            const std::string mode = p.at("mode").get<std::string>();
            if (mode == "gp") {
                c.tune_mode = tune::SearchMode::gp_ei;
            } else if (mode == "random") {
                c.tune_mode = tune::SearchMode::random_search;
            } else {
                throw ValidationError("config: unknown tune mode '" + mode + "'");
            }
        }
    }
    c.validate();
    return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string PipelineConfig::to_json() const {
    ordered_json j;
    j["fiscal_start"] = fiscal_start.to_iso();
    j["variant"] = variant_name(variant);
    j["seed"] = seed;
    j["paths"] = {{"invoices", invoices_path}, {"support", support_path}};
    j["horizon_weeks"] = horizon_weeks;
    j["closure"] = {{"n_trees", gbt.n_trees},
                    {"max_depth", gbt.max_depth},
                    {"learning_rate", gbt.learning_rate},
                    {"min_samples_leaf", gbt.min_samples_leaf}};
    j["windows"] = {{"enabled", windows.enabled},
                    {"short_weeks", windows.short_weeks},
                    {"long_weeks", windows.long_weeks}};
    j["lags"] = {{"enabled", lags.enabled}, {"max_lag", lags.max_lag}, {"threshold", lags.threshold}};
    ordered_json seas = ordered_json::array();
    for (const auto& b : forecaster.seasonality.blocks) {
        seas.push_back({{"name", b.name},
                        {"period_weeks", b.period_weeks},
                        {"fourier_order", b.fourier_order}});
    }
    j["forecaster"] = {{"n_changepoints", forecaster.n_changepoints},
                       {"seasonality", seas},
                       {"ridge",
                        {{"changepoint", ridge.changepoint},
                         {"seasonal", ridge.seasonal},
                         {"regressor", ridge.regressor},
                         {"event", ridge.event}}}};
    j["baseline"] = {{"method", method_name(univariate)},
                     {"season_length", season_length},
                     {"pure_univariate", pure_univariate}};
    j["eval"] = {{"folds", eval.folds},
                 {"windows", eval.windows},
                 {"alpha", eval.alpha},
                 {"min_train_weeks", eval.min_train_weeks},
                 {"fold_weight_increments",
                  eval.fold_weight_increments.empty()
                      ? std::vector<double>(static_cast<std::size_t>(eval.folds), 1.0)
                      : eval.fold_weight_increments}};
    ordered_json ev = ordered_json::object();
    for (const auto& [name, weeks] : events) ev[name] = weeks;
    j["events"] = ev;
    j["tune"] = {{"budget", tune_budget},
                 {"mode", tune_mode == tune::SearchMode::gp_ei ? "gp" : "random"}};
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
    // Plain comma split: the schemas guarantee comma-free fields.
    std::vector<std::string> out;
    std::size_t begin = 0;
    while (true) {
        const std::size_t comma = line.find(',', begin);
        if (comma == std::string::npos) {
            out.push_back(line.substr(begin));
            break;
        }
        out.push_back(line.substr(begin, comma - begin));
        begin = comma + 1;
    }
    return out;
}

int parse_int_field(const std::string& text) {
    std::size_t pos = 0;
    int v = 0;
    try {
        v = std::stoi(text, &pos);
    } catch (const std::exception&) {
        throw ValidationError("not an integer: '" + text + "'");
    }
    if (pos != text.size()) throw ValidationError("not an integer: '" + text + "'");
    return v;
}

double parse_double_field(const std::string& text) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &pos);
    } catch (const std::exception&) {
        throw ValidationError("not a number: '" + text + "'");
    }
    if (pos != text.size() || !std::isfinite(v)) throw ValidationError("not a number: '" + text + "'");
    return v;
}

[[noreturn]] void throw_row_errors(const std::string& file, const std::vector<std::string>& errors) {
    std::ostringstream msg;
    msg << file << ": " << errors.size() << " invalid row" << (errors.size() == 1 ? "" : "s");
    const std::size_t shown = std::min<std::size_t>(errors.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) msg << "\n  " << errors[i];
    if (shown < errors.size()) msg << "\n  ... " << (errors.size() - shown) << " more";
    throw DataError(msg.str());
}

} // namespace

Dataset ingest(const std::string& invoices_path, const std::string& support_path,
               const FiscalCalendar& cal) {
    Dataset out;
    out.cal = cal;

    const auto invoice_lines = read_lines(invoices_path);
    if (invoice_lines.empty()) throw DataError(invoices_path + ": empty file");
    const std::string invoice_header =
        "invoice_id,customer_id,segment,issue_date,due_date,amount,payment_date,payment_terms_days";
    if (invoice_lines.front() != invoice_header) {
        throw DataError(invoices_path + ": line 1: expected header '" + invoice_header + "'");
    }
    std::vector<std::string> errors;
    std::set<std::string> seen_ids;
    for (std::size_t i = 1; i < invoice_lines.size(); ++i) {
        const std::string& line = invoice_lines[i];
        if (line.empty()) continue;
        const auto f = split_fields(line);
        const std::string where = "line " + std::to_string(i + 1) + ": ";
        if (f.size() != 8) {
            errors.push_back(where + "expected 8 fields, got " + std::to_string(f.size()));
            continue;
        }
        try {
            Invoice inv;
            inv.invoice_id = f[0];
            inv.customer_id = f[1];
            inv.segment = parse_segment(f[2]);
            inv.issue_date = Date::parse_iso(f[3]);
            inv.due_date = Date::parse_iso(f[4]);
            inv.amount = Money::parse(f[5]);
            if (!f[6].empty()) inv.payment_date = Date::parse_iso(f[6]);
            inv.payment_terms_days = parse_int_field(f[7]);
            inv.validate();
            cal.week_of(inv.issue_date);
            if (inv.closed()) cal.week_of(*inv.payment_date);
            if (!seen_ids.insert(inv.invoice_id).second) {
                throw ValidationError("duplicate invoice_id '" + inv.invoice_id + "'");
            }
            out.invoices.push_back(std::move(inv));
        } catch (const std::exception& e) {
            errors.push_back(where + e.what());
        }
    }
    if (!errors.empty()) throw_row_errors(invoices_path, errors);
    if (out.invoices.empty()) throw DataError(invoices_path + ": no invoice rows");

    const auto support_lines = read_lines(support_path);
    if (support_lines.empty()) throw DataError(support_path + ": empty file");
    const std::string support_header = "date,series_name,value";
    if (support_lines.front() != support_header) {
        throw DataError(support_path + ": line 1: expected header '" + support_header + "'");
    }
    std::map<std::string, std::map<int, double>> acc;
    for (std::size_t i = 1; i < support_lines.size(); ++i) {
        const std::string& line = support_lines[i];
        if (line.empty()) continue;
        const auto f = split_fields(line);
        const std::string where = "line " + std::to_string(i + 1) + ": ";
        if (f.size() != 3) {
            errors.push_back(where + "expected 3 fields, got " + std::to_string(f.size()));
            continue;
        }
        try {
            const Date date = Date::parse_iso(f[0]);
            if (f[1].empty()) throw ValidationError("empty series_name");
            const double value = parse_double_field(f[2]);
            acc[f[1]][cal.week_of(date).absolute_week] += value;
        } catch (const std::exception& e) {
            errors.push_back(where + e.what());
        }
    }
    if (!errors.empty()) throw_row_errors(support_path, errors);
    for (const auto& [name, by_week] : acc) out.support.emplace(name, WeeklySeries::from_map(by_week));

    return out;
}

Dataset from_synth(const synth::Dataset& generated) {
    Dataset out;
    out.invoices = generated.invoices;
    out.support = generated.support;
    out.cal = generated.calendar();
    return out;
}

// ---------------------------------------------------------------------------
// As-of views and audit
// ---------------------------------------------------------------------------

void LeakageAudit::check_date(const std::string& stage_name, Date d, const std::string& what) {
    ++checks;
    if (d > anchor_date) {
        violations.push_back(
            {stage_name, what + " dated " + d.to_iso() + " after anchor " + anchor_date.to_iso()});
    }
}

void LeakageAudit::check_week(const std::string& stage_name, int week, const std::string& what) {
    ++checks;
    if (week > anchor_week) {
        violations.push_back({stage_name, what + " at week " + std::to_string(week) +
                                              " after anchor week " + std::to_string(anchor_week)});
    }
}

Dataset as_of(const Dataset& data, int anchor_week, LeakageAudit* audit) {
    const Date cutoff = data.cal.last_date_of(anchor_week);
    Dataset view;
    view.cal = data.cal;
    view.invoices.reserve(data.invoices.size());
    for (const auto& inv : data.invoices) {
        if (inv.issue_date > cutoff) continue;
        Invoice copy = inv;
        if (copy.payment_date.has_value() && *copy.payment_date > cutoff) copy.payment_date.reset();
        if (audit != nullptr) {
            audit->check_date("as_of", copy.issue_date, "invoice " + copy.invoice_id + " issue");
            if (copy.closed()) {
                audit->check_date("as_of", *copy.payment_date,
                                  "invoice " + copy.invoice_id + " payment");
            }
        }
        view.invoices.push_back(std::move(copy));
    }
    for (const auto& [name, series] : data.support) {
        if (series.start_week() > anchor_week) continue;
        WeeklySeries cut = series.slice(series.start_week(), std::min(series.end_week(), anchor_week));
        if (audit != nullptr) audit->check_week("as_of", cut.end_week(), "support '" + name + "' end");
        view.support.emplace(name, std::move(cut));
    }
    return view;
}

// ---------------------------------------------------------------------------
// Fitting engine
// ---------------------------------------------------------------------------

namespace {

std::vector<Invoice> invoices_as_of(const std::vector<Invoice>& invoices, const FiscalCalendar& cal,
                                    int anchor_week) {
    const Date cutoff = cal.last_date_of(anchor_week);
    std::vector<Invoice> out;
    out.reserve(invoices.size());
    for (const auto& inv : invoices) {
        if (inv.issue_date > cutoff) continue;
        Invoice copy = inv;
        if (copy.payment_date.has_value() && *copy.payment_date > cutoff) copy.payment_date.reset();
        out.push_back(std::move(copy));
    }
    return out;
}

// Walk-forward stitched simulation: history weeks take their value from
// the rollback anchor whose window covers them (information as of that
// anchor), the horizon block comes from the simulation at the outer
// anchor, and weeks before the earliest anchor stay realized.
WeeklySeries stitched_sim(const Dataset& view, const closure::GbtModel& model,
                          const closure::ProfileSource& profiles, int anchor, int window_len,
                          const WeeklySeries& realized, const windows::WindowedRegressor& horizon_sim,
                          int last_target, LeakageAudit* audit) {
    const FiscalCalendar& cal = view.cal;
    int first_issue_week = 0;
    bool have_issue = false;
    for (const auto& inv : view.invoices) {
        const int w = cal.week_of(inv.issue_date).absolute_week;
        if (!have_issue || w < first_issue_week) {
            first_issue_week = w;
            have_issue = true;
        }
    }
    const int max_steps = (anchor - realized.start_week()) / window_len + 2;
    const auto anchors = windows::rollback_anchors(anchor, window_len, max_steps, first_issue_week);

    std::map<int, double> vals;
    for (int a : anchors) {
        if (a == anchor) continue;
        if (audit != nullptr) audit->check_week("windows", a, "stitch anchor");
        bool have_sim = false;
        windows::WindowedRegressor sim;
        try {
            sim = windows::simulate_partial(invoices_as_of(view.invoices, cal, a), model, profiles,
                                            a, window_len, cal);
            have_sim = true;
        } catch (const DataError&) {
            // nothing observable at this anchor; the block stays realized
        }
        for (int w = a + 1; w <= std::min(a + window_len, anchor); ++w) {
            double v = 0.0;
            if (have_sim && sim.series.contains_week(w)) {
                v = sim.series.at_week(w);
            } else if (!have_sim && realized.contains_week(w)) {
                v = realized.at_week(w);
            }
            if (w >= realized.start_week()) vals[w] = v;
        }
    }
    const int lowest_block_start = anchors.back() + 1; // anchors descend
    for (int w = realized.start_week(); w < lowest_block_start; ++w) vals[w] = realized.at_week(w);
    for (int w = anchor + 1; w <= last_target; ++w) {
        vals[w] = horizon_sim.series.contains_week(w) ? horizon_sim.series.at_week(w) : 0.0;
    }
    return WeeklySeries::from_map(vals);
}

forecast::EventSet event_set(const PipelineConfig& config) {
    forecast::EventSet events;
    for (const auto& [name, weeks] : config.events) {
        events[name] = std::set<int>(weeks.begin(), weeks.end());
    }
    return events;
}

} // namespace

FitResult fit_forecast(const Dataset& data, const PipelineConfig& config, Variant variant,
                       int anchor_week, LeakageAudit* audit) {
    config.validate();
    const FiscalCalendar& cal = data.cal;
    const int horizon = config.horizon_weeks;
    const int last_target = anchor_week + horizon;
    if (audit != nullptr) {
        audit->anchor_week = anchor_week;
        audit->anchor_date = cal.last_date_of(anchor_week);
    }
    if (variant == Variant::h2 && data.support.empty()) {
        throw ValidationError("at least one support series required");
    }

    const Dataset view = as_of(data, anchor_week, audit);

    FitResult result;
    result.anchor_week = anchor_week;

    const auto training =
        stage("closure", [&] { return closure::build_training_data(view.invoices, cal); });
    result.closure_model =
        stage("closure", [&] { return closure::fit(training.rows, training.targets, config.gbt); });
    const closure::ProfileSource profiles(view.invoices);

    std::vector<std::pair<Date, Money>> payments;
    for (const auto& inv : view.invoices) {
        if (inv.closed()) payments.emplace_back(*inv.payment_date, inv.amount);
    }
    const WeeklySeries y = aggregate_weekly(payments, cal);
    if (audit != nullptr) audit->check_week("target", y.end_week(), "realized collections end");

    // Extends a truncated series through the horizon with its own
    // univariate projection.
    auto extend_univariate = [&](const WeeklySeries& hist) {
        if (hist.end_week() >= last_target) return hist.slice(hist.start_week(), last_target);
        const auto uni = stage("baseline", [&] {
            return baseline::fit_univariate(hist, config.univariate, config.season_length);
        });
        const auto tail = baseline::forecast_univariate(uni, last_target - hist.end_week());
        std::vector<double> values(hist.values());
        for (int w = hist.end_week() + 1; w <= last_target; ++w) values.push_back(tail.at_week(w));
        return WeeklySeries(hist.start_week(), std::move(values));
    };

    // H2 with windows and lags both disabled degenerates to the H1
    // construction on purpose; compare() relies on the equality.
    const bool h1_path =
        variant == Variant::h1 || (!config.windows.enabled && !config.lags.enabled);

    forecast::RegressorSet regressors;

    if (h1_path || !config.windows.enabled) {
        const auto augmented = stage("windows", [&] {
            return windows::simulate_partial(view.invoices, result.closure_model, profiles,
                                             anchor_week, horizon, cal);
        });
        const auto uni = stage("baseline", [&] {
            return baseline::fit_univariate(augmented.series, config.univariate,
                                            config.season_length);
        });

        if (variant == Variant::h1 && config.pure_univariate) {
            const auto tail = baseline::forecast_univariate(
                uni, std::max(1, last_target - augmented.series.end_week()));
            std::vector<double> values;
            values.reserve(static_cast<std::size_t>(horizon));
            for (int w = anchor_week + 1; w <= last_target; ++w) {
                values.push_back(augmented.series.contains_week(w) ? augmented.series.at_week(w)
                                                                   : tail.at_week(w));
            }
            result.forecast = WeeklySeries(anchor_week + 1, std::move(values));
            result.events = event_set(config);
            return result;
        }

        std::vector<double> values(uni.fitted.values());
        if (augmented.series.end_week() < last_target) {
            const auto tail =
                baseline::forecast_univariate(uni, last_target - augmented.series.end_week());
            for (int w = augmented.series.end_week() + 1; w <= last_target; ++w) {
                values.push_back(tail.at_week(w));
            }
        }
        regressors.emplace("collections_univariate",
                           WeeklySeries(augmented.series.start_week(), std::move(values)));
    } else {
        const auto horizon_sim = stage("windows", [&] {
            return windows::simulate_partial(view.invoices, result.closure_model, profiles,
                                             anchor_week, horizon, cal);
        });
        regressors.emplace("sim_short", stage("windows", [&] {
                               return stitched_sim(view, result.closure_model, profiles,
                                                   anchor_week, config.windows.short_weeks, y,
                                                   horizon_sim, last_target, audit);
                           }));
        regressors.emplace("sim_long", stage("windows", [&] {
                               return stitched_sim(view, result.closure_model, profiles,
                                                   anchor_week, config.windows.long_weeks, y,
                                                   horizon_sim, last_target, audit);
                           }));
    }

    const bool lag_support = !h1_path && config.lags.enabled;
    for (const auto& [name, series] : view.support) {
        if (audit != nullptr) audit->check_week("lags", series.end_week(), "support '" + name + "'");
        if (lag_support) {
            const auto spec = stage("lags", [&] {
                return lags::select_lags(series, y, cal, config.lags.max_lag, config.lags.threshold);
            });
            const WeeklySeries extended = extend_univariate(series);
            regressors.emplace(name, stage("lags", [&] {
                                   return lags::apply_lags(extended, spec, cal);
                               }));
            result.lag_specs.emplace(name, spec);
        } else {
            regressors.emplace(name, extend_univariate(series));
        }
    }

    int train_start = y.start_week();
    for (const auto& [name, series] : regressors) {
        train_start = std::max(train_start, series.start_week());
    }
    const int train_end = std::min(anchor_week, y.end_week());
    if (train_start > train_end) {
        throw DataError("forecaster: empty training span after regressor alignment");
    }
    const WeeklySeries y_train = y.slice(train_start, train_end);
    if (audit != nullptr) audit->check_week("forecaster", y_train.end_week(), "training target end");

    result.events = event_set(config);
    result.model = stage("forecaster", [&] {
        return forecast::fit(y_train, config.forecaster, regressors, result.events, config.ridge);
    });
    result.forecast = stage("forecaster", [&] {
        return forecast::predict(result.model, anchor_week + 1, horizon, regressors, result.events);
    });
    result.regressors = std::move(regressors);
    return result;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

WeeklySeries realized_collections(const Dataset& data) {
    std::vector<std::pair<Date, Money>> payments;
    for (const auto& inv : data.invoices) {
        if (inv.closed()) payments.emplace_back(*inv.payment_date, inv.amount);
    }
    if (payments.empty()) throw DataError("evaluation: no closed invoices");
    return aggregate_weekly(payments, data.cal);
}

} // namespace

EvaluationResult evaluate_variant(const Dataset& data, const PipelineConfig& config,
                                  Variant variant) {
    config.validate();
    const WeeklySeries actual = realized_collections(data);
    const int horizon = config.horizon_weeks;
    const int k = config.eval.windows;
    const auto weights = config.eval.fold_weights();

    EvaluationResult out;
    for (int win = 1; win <= k; ++win) {
        const int window_end = actual.end_week() - (k - win) * horizon;
        if (window_end <= actual.start_week()) {
            throw DataError("evaluation: series too short for " + std::to_string(k) +
                            " rolling windows");
        }
        const WeeklySeries window_series = actual.slice(actual.start_week(), window_end);
        const auto folds = eval::sliding_folds(window_series, config.eval.folds, horizon,
                                               config.eval.min_train_weeks);
        std::vector<eval::FoldScore> scores;
        for (std::size_t i = 0; i < folds.size(); ++i) {
            eval::Fold fold = folds[i];
            fold.weight = weights[i];
            LeakageAudit audit;
            const FitResult fit = fit_forecast(data, config, variant, fold.train_end_week, &audit);
            const WeeklySeries fold_actual = actual.slice(fold.test_start_week, fold.test_end_week);
            const WeeklySeries fold_pred =
                fit.forecast.slice(fold.test_start_week, fold.test_end_week);
            const double m = eval::mape(fold_actual, fold_pred);
            out.folds.push_back({win, static_cast<int>(i) + 1, fold, m});
            scores.push_back({static_cast<int>(i) + 1, m, weights[i]});
            out.leakage_checks += audit.checks;
            out.leakage_violations += audit.violations.size();
            for (const auto& v : audit.violations) {
                log::error("leakage[" + v.stage + "]: " + v.detail);
            }
        }
        out.window_scores.push_back(eval::variance_weighted_score(scores, config.eval.alpha));
    }
    out.final_score = eval::final_score(out.window_scores);
    return out;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace {

ordered_json series_json(const WeeklySeries& s) {
    ordered_json j;
    j["start_week"] = s.start_week();
    j["values"] = s.values();
    return j;
}

ordered_json lag_spec_json(const lags::LagSpec& spec) {
    auto regime = [](const std::vector<lags::ScoredLag>& lags_vec) {
        ordered_json arr = ordered_json::array();
        for (const auto& l : lags_vec) {
            arr.push_back({{"lag_weeks", l.lag_weeks},
                           {"coefficient", l.coefficient},
                           {"score", l.score}});
        }
        return arr;
    };
    ordered_json j;
    j["non_q4"] = regime(spec.non_q4);
    j["q4"] = regime(spec.q4);
    j["max_lag"] = spec.max_lag;
    j["selection_threshold"] = spec.selection_threshold;
    j["q4_fell_back"] = spec.q4_fell_back;
    return j;
}

ordered_json evaluation_json(const EvaluationResult& evaluation) {
    ordered_json j;
    j["final_score"] = evaluation.final_score;
    j["window_scores"] = evaluation.window_scores;
    ordered_json folds = ordered_json::array();
    for (const auto& f : evaluation.folds) {
        folds.push_back({{"window", f.window_index},
                         {"fold_index", f.fold_index},
                         {"train_start_week", f.fold.train_start_week},
                         {"train_end_week", f.fold.train_end_week},
                         {"test_start_week", f.fold.test_start_week},
                         {"test_end_week", f.fold.test_end_week},
                         {"weight", f.fold.weight},
                         {"mape", f.mape}});
    }
    j["folds"] = folds;
    j["leakage"] = {{"checks", evaluation.leakage_checks},
                    {"violations", evaluation.leakage_violations}};
    return j;
}

ordered_json report_json(const RunReport& report) {
    ordered_json j;
    j["variant"] = variant_name(report.variant);
    j["seed"] = report.seed;
    j["anchor_week"] = report.anchor_week;
    j["evaluation"] = evaluation_json(report.evaluation);
    j["forecast"] = series_json(report.forecast);
    ordered_json shares = ordered_json::object();
    for (const auto& [name, share] : report.component_shares) shares[name] = share;
    j["component_shares"] = shares;
    ordered_json specs = ordered_json::object();
    for (const auto& [name, spec] : report.lag_specs) specs[name] = lag_spec_json(spec);
    j["lag_specs"] = specs;
    ordered_json deltas = ordered_json::array();
    for (const auto& d : report.deviation_summary) {
        deltas.push_back({{"segment", segment_name(d.segment)},
                          {"n", d.n},
                          {"mean_delta_days", d.mean_delta},
                          {"mean_abs_delta_days", d.mean_abs_delta},
                          {"std_delta_days", d.std_delta}});
    }
    j["delta_t_summary"] = deltas;
    j["config"] = ordered_json::parse(report.config_echo);
    return j;
}

void markdown_evaluation(std::ostringstream& md, const EvaluationResult& evaluation) {
    md << "| window | fold | train weeks | test weeks | weight | MAPE % |\n";
    md << "|-------:|-----:|------------:|-----------:|-------:|-------:|\n";
    md.precision(4);
    for (const auto& f : evaluation.folds) {
        md << "| " << f.window_index << " | " << f.fold_index << " | "
           << f.fold.train_start_week << "-" << f.fold.train_end_week << " | "
           << f.fold.test_start_week << "-" << f.fold.test_end_week << " | " << f.fold.weight
           << " | " << f.mape << " |\n";
    }
    md << "\nWindow scores:";
    for (double s : evaluation.window_scores) md << " " << s;
    md << "\n\n**Final score: " << evaluation.final_score << "**\n";
}

} // namespace

std::string RunReport::to_json() const { return report_json(*this).dump(2) + "\n"; }

std::string RunReport::to_markdown() const {
    std::ostringstream md;
    md << "# ledgercast run report (" << variant_name(variant) << ")\n\n";
    md << "Seed " << seed << ", anchor week " << anchor_week << ".\n\n";
    md << "## Walk-forward evaluation\n\n";
    markdown_evaluation(md, evaluation);
    md << "\n## Forecast\n\n";
    md << "Weeks " << forecast.start_week() << "-" << forecast.end_week() << ", total "
       << forecast.total() << ".\n";
    if (!component_shares.empty()) {
        md << "\n## Component shares\n\n";
        for (const auto& [name, share] : component_shares) {
            md << "- " << name << ": " << share << "\n";
        }
    }
    if (!lag_specs.empty()) {
        md << "\n## Selected lags\n\n";
        for (const auto& [name, spec] : lag_specs) {
            md << "- " << name << " non-Q4:";
            for (const auto& l : spec.non_q4) md << " " << l.lag_weeks << "w";
            md << "; Q4:";
            for (const auto& l : spec.q4) md << " " << l.lag_weeks << "w";
            if (spec.q4_fell_back) md << " (fell back)";
            md << "\n";
        }
    }
    if (!deviation_summary.empty()) {
        md << "\n## Payment deviation (days past due)\n\n";
        md << "| segment | n | mean | mean abs | std |\n";
        md << "|---------|--:|-----:|---------:|----:|\n";
        for (const auto& d : deviation_summary) {
            md << "| " << segment_name(d.segment) << " | " << d.n << " | " << d.mean_delta << " | "
               << d.mean_abs_delta << " | " << d.std_delta << " |\n";
        }
    }
    if (!stage_ms.empty()) {
        md << "\n## Timings\n\n";
        for (const auto& [name, ms] : stage_ms) md << "- " << name << ": " << ms << " ms\n";
    }
    return md.str();
}

namespace {

RunReport run_variant(const Dataset& data, const PipelineConfig& config, Variant variant) {
    config.validate();
    RunReport report;
    report.variant = variant;
    report.seed = config.seed;
    report.config_echo = config.to_json();

    auto t0 = std::chrono::steady_clock::now();
    report.evaluation = evaluate_variant(data, config, variant);
    report.stage_ms["evaluation"] = elapsed_ms(t0);

    t0 = std::chrono::steady_clock::now();
    const WeeklySeries actual = realized_collections(data);
    const int anchor = actual.end_week();
    const FitResult fit = fit_forecast(data, config, variant, anchor);
    report.stage_ms["fit"] = elapsed_ms(t0);

    report.anchor_week = anchor;
    report.forecast = fit.forecast;
    report.lag_specs = fit.lag_specs;
    const bool bare = variant == Variant::h1 && config.pure_univariate;
    if (!bare) {
        const auto dec = forecast::decompose(fit.model, anchor + 1, config.horizon_weeks,
                                             fit.regressors, fit.events);
        report.component_shares = dec.shares;
    }
    report.deviation_summary = eval::payment_deviation_summary(data.invoices);
    return report;
}

} // namespace

RunReport run_h1(const Dataset& data, const PipelineConfig& config) {
    if (config.variant != Variant::h1) {
        throw ValidationError("run_h1: config variant is " + variant_name(config.variant));
    }
    return run_variant(data, config, Variant::h1);
}

RunReport run_h2(const Dataset& data, const PipelineConfig& config) {
    if (config.variant != Variant::h2) {
        throw ValidationError("run_h2: config variant is " + variant_name(config.variant));
    }
    return run_variant(data, config, Variant::h2);
}

std::string ComparisonReport::to_json() const {
    ordered_json j;
    j["uplift_percent"] = uplift;
    j["h1"] = report_json(h1);
    j["h2"] = report_json(h2);
    return j.dump(2) + "\n";
}

std::string ComparisonReport::to_markdown() const {
    std::ostringstream md;
    md << "# ledgercast comparison\n\n";
    md.precision(6);
    md << "H1 final score: " << h1.evaluation.final_score << "\n\n";
    md << "H2 final score: " << h2.evaluation.final_score << "\n\n";
    md << "**Accuracy uplift: " << uplift << "%**\n\n";
    md << "## H1 folds\n\n";
    std::ostringstream tmp1;
    markdown_evaluation(tmp1, h1.evaluation);
    md << tmp1.str();
    md << "\n## H2 folds\n\n";
    std::ostringstream tmp2;
    markdown_evaluation(tmp2, h2.evaluation);
    md << tmp2.str();
    return md.str();
}

ComparisonReport compare(const Dataset& data, const PipelineConfig& config) {
    config.validate();
    ComparisonReport report;
    report.h1 = run_variant(data, config, Variant::h1);
    report.h2 = run_variant(data, config, Variant::h2);
    report.uplift =
        eval::accuracy_uplift(report.h1.evaluation.final_score, report.h2.evaluation.final_score);
    return report;
}

// ---------------------------------------------------------------------------
// Tuning glue
// ---------------------------------------------------------------------------

tune::ParamSpace pipeline_space() {
    using tune::Dimension;
    tune::ParamSpace space;
    space.dimensions = {
        Dimension::real("alpha", 0.0, 1.0),
        Dimension::real("w_inc_1", 0.05, 1.0),
        Dimension::real("w_inc_2", 0.05, 1.0),
        Dimension::real("w_inc_3", 0.05, 1.0),
        Dimension::whole("n_changepoints", 0, 12),
        Dimension::whole("quarterly_order", 1, 4),
        Dimension::whole("yearly_order", 1, 6),
        Dimension::real("changepoint_ridge_log10", -2.0, 2.0),
        Dimension::real("seasonal_ridge_log10", -2.0, 1.0),
        Dimension::real("regressor_ridge_log10", -2.0, 1.0),
        Dimension::real("event_ridge_log10", -2.0, 1.0),
        Dimension::whole("n_trees", 20, 120),
        Dimension::whole("max_depth", 2, 4),
        Dimension::real("learning_rate", 0.02, 0.3),
        Dimension::whole("min_samples_leaf", 2, 8),
        Dimension::whole("short_weeks", 2, 6),
        Dimension::whole("long_weeks", 8, 16),
        Dimension::real("lag_threshold", 0.01, 0.5),
    };
    return space;
}

PipelineConfig apply_params(const PipelineConfig& base, const tune::Params& params) {
    PipelineConfig c = base;
    auto get = [&](const char* name, double& out) {
        auto it = params.find(name);
        if (it != params.end()) out = it->second;
    };
    auto get_int = [&](const char* name, int& out) {
        auto it = params.find(name);
        if (it != params.end()) out = static_cast<int>(std::llround(it->second));
    };

    get("alpha", c.eval.alpha);
    std::vector<double> inc;
    for (int i = 1;; ++i) {
        auto it = params.find("w_inc_" + std::to_string(i));
        if (it == params.end()) break;
        inc.push_back(it->second);
    }
    if (!inc.empty()) {
        if (static_cast<int>(inc.size()) != c.eval.folds) {
            throw ValidationError("apply_params: " + std::to_string(inc.size()) +
                                  " weight increments for " + std::to_string(c.eval.folds) +
                                  " folds");
        }
        c.eval.fold_weight_increments = inc;
    }
    get_int("n_changepoints", c.forecaster.n_changepoints);
    for (auto& block : c.forecaster.seasonality.blocks) {
        if (block.name == "quarterly") get_int("quarterly_order", block.fourier_order);
        if (block.name == "yearly") get_int("yearly_order", block.fourier_order);
    }
    auto get_log10 = [&](const char* name, double& out) {
        auto it = params.find(name);
        if (it != params.end()) out = std::pow(10.0, it->second);
    };
    get_log10("changepoint_ridge_log10", c.ridge.changepoint);
    get_log10("seasonal_ridge_log10", c.ridge.seasonal);
    get_log10("regressor_ridge_log10", c.ridge.regressor);
    get_log10("event_ridge_log10", c.ridge.event);
    get_int("n_trees", c.gbt.n_trees);
    get_int("max_depth", c.gbt.max_depth);
    get("learning_rate", c.gbt.learning_rate);
    get_int("min_samples_leaf", c.gbt.min_samples_leaf);
    get_int("short_weeks", c.windows.short_weeks);
    get_int("long_weeks", c.windows.long_weeks);
    get("lag_threshold", c.lags.threshold);
    return c;
}

namespace {

tune::Params params_of(const PipelineConfig& config) {
    tune::Params p;
    p["alpha"] = config.eval.alpha;
    const auto inc = config.eval.fold_weight_increments.empty()
                         ? std::vector<double>(static_cast<std::size_t>(config.eval.folds), 1.0)
                         : config.eval.fold_weight_increments;
    for (std::size_t i = 0; i < inc.size(); ++i) {
        p["w_inc_" + std::to_string(i + 1)] = inc[i];
    }
    p["n_changepoints"] = config.forecaster.n_changepoints;
    for (const auto& block : config.forecaster.seasonality.blocks) {
        if (block.name == "quarterly") p["quarterly_order"] = block.fourier_order;
        if (block.name == "yearly") p["yearly_order"] = block.fourier_order;
    }
    p["changepoint_ridge_log10"] = std::log10(std::max(1e-2, config.ridge.changepoint));
    p["seasonal_ridge_log10"] = std::log10(std::max(1e-2, config.ridge.seasonal));
    p["regressor_ridge_log10"] = std::log10(std::max(1e-2, config.ridge.regressor));
    p["event_ridge_log10"] = std::log10(std::max(1e-2, config.ridge.event));
    p["n_trees"] = config.gbt.n_trees;
    p["max_depth"] = config.gbt.max_depth;
    p["learning_rate"] = config.gbt.learning_rate;
    p["min_samples_leaf"] = config.gbt.min_samples_leaf;
    p["short_weeks"] = config.windows.short_weeks;
    p["long_weeks"] = config.windows.long_weeks;
    p["lag_threshold"] = config.lags.threshold;
    return p;
}

} // namespace

tune::TuneResult tune_pipeline(const Dataset& data, const PipelineConfig& base, int budget,
                               std::uint64_t seed) {
    if (budget < 1) throw ValidationError("tune_pipeline: budget must be >= 1");
    base.validate();

    // Fold feasibility is checked before any trial runs.
    const WeeklySeries actual = realized_collections(data);
    (void)eval::sliding_folds(actual, base.eval.folds, base.horizon_weeks,
                              base.eval.min_train_weeks);

    const tune::ParamSpace space = pipeline_space();
    if (base.eval.folds != 3) {
        throw ValidationError("tune_pipeline: the search space assumes 3 folds, config has " +
                              std::to_string(base.eval.folds));
    }

    const auto objective = [&](const tune::Params& params) {
        PipelineConfig cfg = apply_params(base, params);
        cfg.variant = Variant::h2;
        const auto folds = eval::sliding_folds(actual, cfg.eval.folds, cfg.horizon_weeks,
                                               cfg.eval.min_train_weeks);
        std::vector<double> errors;
        errors.reserve(folds.size());
        for (const auto& fold : folds) {
            const FitResult fit = fit_forecast(data, cfg, Variant::h2, fold.train_end_week);
            const WeeklySeries fold_actual =
                actual.slice(fold.test_start_week, fold.test_end_week);
            const WeeklySeries fold_pred =
                fit.forecast.slice(fold.test_start_week, fold.test_end_week);
            errors.push_back(eval::mape(fold_actual, fold_pred));
        }
        eval::LossWeights weights;
        weights.w = cfg.eval.fold_weights();
        weights.alpha = cfg.eval.alpha;
        return eval::custom_loss(errors, weights);
    };

    return tune::optimize(objective, space, budget, seed, base.tune_mode, params_of(base));
}

} // namespace ledgercast::pipeline
