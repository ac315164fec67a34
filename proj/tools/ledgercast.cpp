// ledgercast command line: synthetic data generation, training, forecasting,
// evaluation, H1/H2 comparison, hyperparameter tuning, and reporting.
//
// Exit codes: 0 success, 2 validation/usage error, 3 data error,
// 4 numerical error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ledgercast/errors.hpp"
#include "ledgercast/pipeline.hpp"
#include "ledgercast/synthgen.hpp"
#include "ledgercast/tune.hpp"

namespace {

using ledgercast::DataError;
using ledgercast::FiscalCalendar;
using ledgercast::IoError;
using ledgercast::NumericalError;
using ledgercast::ValidationError;
namespace pipeline = ledgercast::pipeline;
namespace synth = ledgercast::synth;
namespace tune = ledgercast::tune;
using ordered_json = nlohmann::ordered_json;

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    std::optional<std::string> variant;
};

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
}

pipeline::PipelineConfig load_config(const Options& opts) {
    if (opts.config_path.empty()) throw ValidationError("--config is required");
    auto config = pipeline::PipelineConfig::load(opts.config_path);
    if (opts.seed.has_value()) config.seed = *opts.seed;
    if (opts.variant.has_value()) config.variant = pipeline::parse_variant(*opts.variant);
    return config;
}

pipeline::Dataset load_dataset(const pipeline::PipelineConfig& config) {
    return pipeline::ingest(config.invoices_path, config.support_path,
                            FiscalCalendar(config.fiscal_start));
}

std::filesystem::path ensure_out(const Options& opts) {
    std::filesystem::path dir(opts.out_dir);
    std::filesystem::create_directories(dir);
    return dir;
}

int cmd_generate(const Options& opts) {
    if (opts.config_path.empty()) throw ValidationError("--config is required");
    auto config = synth::load_config(opts.config_path);
    if (opts.seed.has_value()) config.seed = *opts.seed;
    const auto dataset = synth::generate(config);
    const auto dir = ensure_out(opts);
    synth::export_csv(dataset, dir.string());
    std::cout << "wrote " << (dir / "invoices.csv").string() << " (" << dataset.invoices.size()
              << " invoices) and " << (dir / "support.csv").string() << " ("
              << dataset.support.size() << " series)\n";
    return 0;
}

int cmd_train(const Options& opts) {
    const auto config = load_config(opts);
    const auto data = load_dataset(config);
    const auto dir = ensure_out(opts);

    std::vector<std::pair<ledgercast::Date, ledgercast::Money>> payments;
    for (const auto& inv : data.invoices) {
        if (inv.closed()) payments.emplace_back(*inv.payment_date, inv.amount);
    }
    if (payments.empty()) throw DataError("train: no closed invoices");
    const int anchor = ledgercast::aggregate_weekly(payments, data.cal).end_week();

    const auto fit = pipeline::fit_forecast(data, config, config.variant, anchor);
    write_file(dir / "closure_model.json", fit.closure_model.serialize());
    if (!(config.variant == pipeline::Variant::h1 && config.pure_univariate)) {
        write_file(dir / "forecaster.json", fit.model.serialize());
    }
    write_file(dir / "config.json", config.to_json());
    std::cout << "trained at anchor week " << anchor << "; closure trees: "
              << fit.closure_model.trees().size() << "\n";
    return 0;
}

int cmd_forecast(const Options& opts) {
    const auto config = load_config(opts);
    const auto data = load_dataset(config);
    const auto dir = ensure_out(opts);

    std::vector<std::pair<ledgercast::Date, ledgercast::Money>> payments;
    for (const auto& inv : data.invoices) {
        if (inv.closed()) payments.emplace_back(*inv.payment_date, inv.amount);
    }
    if (payments.empty()) throw DataError("forecast: no closed invoices");
    const int anchor = ledgercast::aggregate_weekly(payments, data.cal).end_week();

    const auto fit = pipeline::fit_forecast(data, config, config.variant, anchor);
    std::ostringstream csv;
    csv << "week,week_start,value\n";
    csv.precision(17);
    for (int w = fit.forecast.start_week(); w <= fit.forecast.end_week(); ++w) {
        csv << w << ',' << data.cal.first_date_of(w).to_iso() << ',' << fit.forecast.at_week(w)
            << '\n';
    }
    write_file(dir / "forecast.csv", csv.str());
    ordered_json j;
    j["variant"] = pipeline::variant_name(config.variant);
    j["anchor_week"] = anchor;
    j["start_week"] = fit.forecast.start_week();
    j["values"] = fit.forecast.values();
    write_file(dir / "forecast.json", j.dump(2) + "\n");
    std::cout << "forecast weeks " << fit.forecast.start_week() << "-" << fit.forecast.end_week()
              << ", total " << fit.forecast.total() << "\n";
    return 0;
}

int cmd_evaluate(const Options& opts) {
    const auto config = load_config(opts);
    const auto data = load_dataset(config);
    const auto dir = ensure_out(opts);
    const auto evaluation = pipeline::evaluate_variant(data, config, config.variant);

    ordered_json j;
    j["variant"] = pipeline::variant_name(config.variant);
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
    write_file(dir / "evaluation.json", j.dump(2) + "\n");
    std::cout << "final score (" << pipeline::variant_name(config.variant)
              << "): " << evaluation.final_score << "\n";
    return 0;
}

int cmd_compare(const Options& opts) {
    const auto config = load_config(opts);
    const auto data = load_dataset(config);
    const auto dir = ensure_out(opts);
    const auto report = pipeline::compare(data, config);
    write_file(dir / "comparison.json", report.to_json());
    write_file(dir / "comparison.md", report.to_markdown());
    std::cout << "H1 " << report.h1.evaluation.final_score << ", H2 "
              << report.h2.evaluation.final_score << ", uplift " << report.uplift << "%\n";
    return 0;
}

int cmd_tune(const Options& opts) {
    const auto config = load_config(opts);
    const auto data = load_dataset(config);
    const auto dir = ensure_out(opts);
    const auto result = pipeline::tune_pipeline(data, config, config.tune_budget, config.seed);

    write_file(dir / "tune_history.csv", tune::history_csv(pipeline::pipeline_space(), result));
    ordered_json j;
    j["best_loss"] = result.best_loss;
    ordered_json best = ordered_json::object();
    for (const auto& [name, value] : result.best_params) best[name] = value;
    j["best_params"] = best;
    j["budget"] = result.budget;
    j["seed"] = result.seed;
    write_file(dir / "tune_result.json", j.dump(2) + "\n");
    write_file(dir / "tuned_config.json",
               pipeline::apply_params(config, result.best_params).to_json());
    std::cout << "best loss " << result.best_loss << " after " << result.budget << " trials\n";
    return 0;
}

int cmd_report(const Options& opts) {
    const auto config = load_config(opts);
    const auto data = load_dataset(config);
    const auto dir = ensure_out(opts);
    const auto report = config.variant == pipeline::Variant::h1 ? pipeline::run_h1(data, config)
                                                                : pipeline::run_h2(data, config);
    write_file(dir / "report.json", report.to_json());
    write_file(dir / "report.md", report.to_markdown());
    std::cout << "final score " << report.evaluation.final_score << ", leakage violations "
              << report.evaluation.leakage_violations << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ledgercast: sparse-ledger collections forecasting"};
    app.require_subcommand(1);
    app.fallthrough();

    Options opts;
    app.add_option("--config", opts.config_path, "configuration file (JSON)");
    app.add_option("--seed", opts.seed, "override the config seed");
    app.add_option("--out", opts.out_dir, "output directory")->capture_default_str();
    app.add_option("--variant", opts.variant, "pipeline variant (h1|h2)")
        ->check(CLI::IsMember({"h1", "h2"}));

    auto* generate = app.add_subcommand("generate", "generate a synthetic dataset");
    auto* train = app.add_subcommand("train", "fit the closure model and forecaster");
    auto* forecast = app.add_subcommand("forecast", "produce the horizon forecast");
    auto* evaluate = app.add_subcommand("evaluate", "walk-forward evaluation of one variant");
    auto* compare = app.add_subcommand("compare", "evaluate H1 and H2 on identical folds");
    auto* tune_cmd = app.add_subcommand("tune", "hyperparameter search over the H2 pipeline");
    auto* report = app.add_subcommand("report", "full run report (JSON + markdown)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    }

    try {
        if (generate->parsed()) return cmd_generate(opts);
        if (train->parsed()) return cmd_train(opts);
        if (forecast->parsed()) return cmd_forecast(opts);
        if (evaluate->parsed()) return cmd_evaluate(opts);
        if (compare->parsed()) return cmd_compare(opts);
        if (tune_cmd->parsed()) return cmd_tune(opts);
        if (report->parsed()) return cmd_report(opts);
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
