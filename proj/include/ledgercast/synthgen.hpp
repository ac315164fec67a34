#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ledgercast/core.hpp"

namespace ledgercast::synth {

// Per-segment payment delay model. Delays are drawn from a normal
// distribution (rounded to whole days, truncated at -payment_terms_days)
// keyed on the regime of the payment week: Q4 weeks use the override.
struct DelayDist {
    double mean_days = 5.0;
    double std_days = 3.0;
    double q4_mean_days = 5.0;
    double q4_std_days = 3.0;
};

struct PlantedLag {
    int lag_weeks = 0;
    double coefficient = 0.0; // at most two decimals so collections stay on the cents grid
};

// Separate lag sets for the two fiscal regimes.
struct RegimeLags {
    std::vector<PlantedLag> non_q4;
    std::vector<PlantedLag> q4;
};

// Deterministic weekly support series: level + trend + annual sine plus
// optional Gaussian noise, rounded to whole dollars. Whole-dollar values
// combined with two-decimal lag coefficients keep the planted collections
// series exact in cents.
struct SupportSpec {
    std::string name;
    double level = 100.0;
    double trend_per_week = 0.0;
    double seasonal_amplitude = 0.0;
    double noise_frac = 0.0; // std as a fraction of level
};

struct HolidayWeek {
    int absolute_week = 0;
    double multiplier = 1.0;
};

struct SynthConfig {
    std::uint64_t seed = 1;
    std::array<int, kNumSegments> n_customers_per_segment{4, 4, 4};
    int weeks = 156;      // published collections span
    int start_week = 53;  // first collections week; the lead year absorbs backdated issue dates
    Date fiscal_start = Date(18267); // 2020-01-06, week 1 of the synthetic calendar
    std::array<DelayDist, kNumSegments> delay_distributions{};
    RegimeLags planted_lags; // applied to the first support series
    std::vector<HolidayWeek> holiday_weeks;
    double noise_std = 0.0;     // weekly collections noise, dollars
    double invoice_rate = 0.25; // mean invoices per customer per payment week
    int open_window_weeks = 4;  // payments landing past the span stay open
    std::vector<SupportSpec> support_series;

    void validate() const; // throws ValidationError
};

// Read a SynthConfig from a JSON file (key set mirrors the struct).
SynthConfig load_config(const std::string& path);

// Planted parameters plus ground truth hidden from the exported files.
struct Truth {
    RegimeLags planted_lags;
    std::string driver_series;
    WeeklySeries collections; // planted weekly totals over the published span
    // aggregate of every kept invoice at its true payment week, including
    // the hidden payments of open invoices (extends into the open tail)
    WeeklySeries full_collections;
    std::map<std::string, Date> open_payment_dates; // true close dates of open invoices
};

struct Dataset {
    std::vector<Invoice> invoices;
    std::map<std::string, WeeklySeries> support;
    Date fiscal_start;
    int start_week = 0;
    int weeks = 0;
    Truth truth;

    FiscalCalendar calendar() const { return FiscalCalendar(fiscal_start); }
};

// Deterministic generation: equal configs produce equal datasets.
Dataset generate(const SynthConfig& config);

// Write invoices.csv and support.csv into directory (created if absent).
void export_csv(const Dataset& dataset, const std::string& directory);

} // namespace ledgercast::synth
