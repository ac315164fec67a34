#include "ledgercast/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "ledgercast/errors.hpp"
#include "ledgercast/rng.hpp"

namespace ledgercast::synth {

namespace {

// payment terms per segment, days
constexpr std::array<int, kNumSegments> kTermsBySegment = {15, 30, 60};
constexpr std::array<const char*, kNumSegments> kCustomerPrefix = {"CSB", "COM", "ENT"};

std::int64_t coefficient_cents(double coefficient) {
    const double scaled = coefficient * 100.0;
    const std::int64_t cents = std::llround(scaled);
    if (std::abs(scaled - static_cast<double>(cents)) > 1e-6) {
        throw ValidationError("synth config: lag coefficient " + std::to_string(coefficient) +
                              " has more than two decimals; collections would leave the cents grid");
    }
    return cents;
}

int max_planted_lag(const RegimeLags& lags) {
    int max_lag = 0;
    for (const auto& l : lags.non_q4) max_lag = std::max(max_lag, l.lag_weeks);
    for (const auto& l : lags.q4) max_lag = std::max(max_lag, l.lag_weeks);
    return max_lag;
}

void check_lag_set(const std::vector<PlantedLag>& lags, const char* regime) {
    for (const auto& l : lags) {
        if (l.lag_weeks < 0) {
            throw ValidationError(std::string("synth config: negative lag in ") + regime);
        }
        if (!std::isfinite(l.coefficient)) {
            throw ValidationError(std::string("synth config: non-finite coefficient in ") + regime);
        }
        coefficient_cents(l.coefficient);
    }
}

// Largest-remainder split of total cents into weighted shares; shares sum
// to the total exactly and every share is at least one cent.
std::vector<std::int64_t> split_cents(std::int64_t total, const std::vector<double>& weights) {
    const std::size_t n = weights.size();
    double weight_sum = 0.0;
    for (double w : weights) weight_sum += w;

    std::vector<std::int64_t> shares(n, 0);
    std::vector<std::pair<double, std::size_t>> remainders(n);
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double exact = static_cast<double>(total) * weights[i] / weight_sum;
        shares[i] = static_cast<std::int64_t>(std::floor(exact));
        remainders[i] = {exact - std::floor(exact), i};
        assigned += shares[i];
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first; // biggest remainder first
        return a.second < b.second;                       // then lowest index
    });
    for (std::int64_t k = 0; k < total - assigned; ++k) {
        shares[remainders[static_cast<std::size_t>(k) % n].second] += 1;
    }
    // no zero-amount invoices: take cents from the largest share
    for (std::size_t i = 0; i < n; ++i) {
        while (shares[i] < 1) {
            const auto largest = std::max_element(shares.begin(), shares.end());
            if (*largest <= 1) throw DataError("synth: weekly collections too small to split");
            *largest -= 1;
            shares[i] += 1;
        }
    }
    return shares;
}

std::string zero_padded(int value, int width) {
    std::string digits = std::to_string(value);
    if (static_cast<int>(digits.size()) < width) {
        digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
    }
    return digits;
}

std::string format_double(double v) { return nlohmann::json(v).dump(); }

} // namespace

void SynthConfig::validate() const {
    for (int count : n_customers_per_segment) {
        if (count <= 0) throw ValidationError("synth config: customer counts must be positive");
    }
    if (weeks <= 0) throw ValidationError("synth config: weeks must be positive");
    if (start_week < 1) throw ValidationError("synth config: start_week must be >= 1");
    if (noise_std < 0.0) throw ValidationError("synth config: noise_std must be >= 0");
    if (invoice_rate <= 0.0) throw ValidationError("synth config: invoice_rate must be positive");
    if (open_window_weeks < 0) throw ValidationError("synth config: open_window_weeks must be >= 0");
    if (support_series.empty()) {
        throw ValidationError("synth config: at least one support series is required");
    }
    for (const auto& s : support_series) {
        if (s.name.empty()) throw ValidationError("synth config: support series need names");
        if (s.noise_frac < 0.0) throw ValidationError("synth config: support noise_frac must be >= 0");
    }
    for (const auto& h : holiday_weeks) {
        if (h.multiplier <= 0.0) throw ValidationError("synth config: holiday multipliers must be > 0");
    }
    check_lag_set(planted_lags.non_q4, "non_q4");
    check_lag_set(planted_lags.q4, "q4");
    const int max_lag = max_planted_lag(planted_lags);
    if (weeks < max_lag + 10) {
        throw ValidationError("synth config: weeks (" + std::to_string(weeks) +
                              ") too short to recover planted lags; need at least max lag + 10 = " +
                              std::to_string(max_lag + 10));
    }
    for (const auto& d : delay_distributions) {
        if (d.std_days < 0.0 || d.q4_std_days < 0.0) {
            throw ValidationError("synth config: delay std must be >= 0");
        }
    }
}

Dataset generate(const SynthConfig& config) {
    config.validate();

    const FiscalCalendar cal(config.fiscal_start);
    Rng rng(config.seed);

    const int max_lag = max_planted_lag(config.planted_lags);
    const int first_published = config.start_week;
    const int last_published = config.start_week + config.weeks - 1;
    const int last_payment_week = last_published + config.open_window_weeks;
    const int first_internal = first_published - max_lag;

    // --- support series, whole dollars --------------------------------------
    std::map<std::string, std::vector<std::int64_t>> internal_support; // first_internal..last_payment_week
    for (const auto& spec : config.support_series) {
        std::vector<std::int64_t> values;
        values.reserve(static_cast<std::size_t>(last_payment_week - first_internal + 1));
        for (int w = first_internal; w <= last_payment_week; ++w) {
            const double t = static_cast<double>(w - first_published);
            double v = spec.level + spec.trend_per_week * t +
                       spec.seasonal_amplitude *
                           std::sin(2.0 * std::numbers::pi * static_cast<double>(w % 52) / 52.0);
            if (spec.noise_frac > 0.0) v += spec.noise_frac * spec.level * rng.normal();
            values.push_back(std::max<std::int64_t>(std::llround(v), 0));
        }
        internal_support.emplace(spec.name, std::move(values));
    }
    const auto& driver = internal_support.at(config.support_series.front().name);
    auto driver_at = [&](int week) { return driver[static_cast<std::size_t>(week - first_internal)]; };

    // --- weekly collections, exact cents ------------------------------------
    std::map<int, double> holiday_mult;
    for (const auto& h : config.holiday_weeks) holiday_mult[h.absolute_week] = h.multiplier;

    std::vector<std::int64_t> collections_cents; // first_published..last_payment_week
    for (int w = first_published; w <= last_payment_week; ++w) {
        const auto& lags = cal.is_q4(w) ? config.planted_lags.q4 : config.planted_lags.non_q4;
        std::int64_t cents = 0;
        for (const auto& l : lags) cents += coefficient_cents(l.coefficient) * driver_at(w - l.lag_weeks);
        if (config.noise_std > 0.0) {
            cents += std::llround(config.noise_std * 100.0 * rng.normal());
        }
        if (auto it = holiday_mult.find(w); it != holiday_mult.end()) {
            cents = std::llround(static_cast<double>(cents) * it->second);
        }
        collections_cents.push_back(std::max<std::int64_t>(cents, 100));
    }
    auto collections_at = [&](int week) {
        return collections_cents[static_cast<std::size_t>(week - first_published)];
    };

    // --- customers -----------------------------------------------------------
    struct Customer {
        std::string id;
        Segment segment;
    };
    std::vector<Customer> customers;
    for (int s = 0; s < kNumSegments; ++s) {
        for (int i = 1; i <= config.n_customers_per_segment[static_cast<std::size_t>(s)]; ++i) {
            customers.push_back({std::string(kCustomerPrefix[static_cast<std::size_t>(s)]) + "-" +
                                     zero_padded(i, 4),
                                 static_cast<Segment>(s)});
        }
    }

    // --- invoices, generated backward from their payment week ----------------
    Dataset out;
    out.fiscal_start = config.fiscal_start;
    out.start_week = config.start_week;
    out.weeks = config.weeks;
    out.truth.planted_lags = config.planted_lags;
    out.truth.driver_series = config.support_series.front().name;

    const Date cutoff = cal.last_date_of(last_published);
    std::vector<std::pair<Date, Money>> true_payments;
    int next_invoice = 1;

    for (int w = first_published; w <= last_payment_week; ++w) {
        std::vector<std::size_t> payers; // customer index per invoice
        for (std::size_t c = 0; c < customers.size(); ++c) {
            const int k = rng.poisson(config.invoice_rate);
            for (int i = 0; i < k; ++i) payers.push_back(c);
        }
        if (payers.empty()) {
            payers.push_back(static_cast<std::size_t>(w - first_published) % customers.size());
        }

        std::vector<double> weights;
        weights.reserve(payers.size());
        for (std::size_t i = 0; i < payers.size(); ++i) weights.push_back(0.2 + 0.8 * rng.uniform());
        const auto amounts = split_cents(collections_at(w), weights);

        for (std::size_t i = 0; i < payers.size(); ++i) {
            const Customer& cust = customers[payers[i]];
            const int seg = static_cast<int>(cust.segment);
            const int terms = kTermsBySegment[static_cast<std::size_t>(seg)];
            const auto& dist = config.delay_distributions[static_cast<std::size_t>(seg)];
            const double mean = cal.is_q4(w) ? dist.q4_mean_days : dist.mean_days;
            const double std_days = cal.is_q4(w) ? dist.q4_std_days : dist.std_days;

            const Date payment = cal.first_date_of(w).plus_days(static_cast<std::int64_t>(rng.below(7)));
            std::int64_t delay = 0;
            for (int attempt = 0;; ++attempt) {
                delay = std::llround(mean + std_days * rng.normal());
                if (delay >= -terms) break;
                if (attempt >= 1000) {
                    delay = -terms;
                    break;
                }
            }
            const Date due = payment.plus_days(-delay);
            const Date issue = due.plus_days(-terms);
            if (issue < config.fiscal_start) {
                throw ValidationError(
                    "synth: invoice issued before the fiscal calendar start; raise start_week");
            }

            Invoice inv;
            inv.invoice_id = "INV-" + zero_padded(next_invoice++, 6);
            inv.customer_id = cust.id;
            inv.segment = cust.segment;
            inv.issue_date = issue;
            inv.due_date = due;
            inv.amount = Money(amounts[i]);
            inv.payment_terms_days = terms;
            if (w > last_published) {
                if (issue > cutoff) continue; // never observed
                out.truth.open_payment_dates.emplace(inv.invoice_id, payment);
            } else {
                inv.payment_date = payment;
            }
            true_payments.emplace_back(payment, inv.amount);
            inv.validate();
            out.invoices.push_back(std::move(inv));
        }
    }

    // --- published series ----------------------------------------------------
    for (const auto& spec : config.support_series) {
        const auto& internal = internal_support.at(spec.name);
        std::vector<double> published;
        published.reserve(static_cast<std::size_t>(config.weeks));
        for (int w = first_published; w <= last_published; ++w) {
            published.push_back(
                static_cast<double>(internal[static_cast<std::size_t>(w - first_internal)]));
        }
        out.support.emplace(spec.name, WeeklySeries(first_published, std::move(published)));
    }
    {
        std::vector<double> truth_values;
        truth_values.reserve(static_cast<std::size_t>(config.weeks));
        for (int w = first_published; w <= last_published; ++w) {
            truth_values.push_back(static_cast<double>(collections_at(w)) / 100.0);
        }
        out.truth.collections = WeeklySeries(first_published, std::move(truth_values));
    }
    out.truth.full_collections = aggregate_weekly(true_payments, cal);
    return out;
}

void export_csv(const Dataset& dataset, const std::string& directory) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(directory, ec);
    if (ec) throw IoError("export: cannot create directory " + directory + ": " + ec.message());

    {
        std::ofstream f(fs::path(directory) / "invoices.csv");
        if (!f) throw IoError("export: cannot open invoices.csv for writing");
        f << "invoice_id,customer_id,segment,issue_date,due_date,amount,payment_date,"
             "payment_terms_days\n";
        for (const auto& inv : dataset.invoices) {
            f << inv.invoice_id << ',' << inv.customer_id << ',' << segment_name(inv.segment) << ','
              << inv.issue_date.to_iso() << ',' << inv.due_date.to_iso() << ','
              << inv.amount.to_string() << ','
              << (inv.payment_date ? inv.payment_date->to_iso() : std::string()) << ','
              << inv.payment_terms_days << '\n';
        }
        if (!f.good()) throw IoError("export: write to invoices.csv failed");
    }
    {
        std::ofstream f(fs::path(directory) / "support.csv");
        if (!f) throw IoError("export: cannot open support.csv for writing");
        f << "date,series_name,value\n";
        const FiscalCalendar cal = dataset.calendar();
        for (const auto& [name, series] : dataset.support) {
            for (int w = series.start_week(); w <= series.end_week(); ++w) {
                f << cal.first_date_of(w).to_iso() << ',' << name << ','
                  << format_double(series.at_week(w)) << '\n';
            }
        }
        if (!f.good()) throw IoError("export: write to support.csv failed");
    }
}

SynthConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("synth config: cannot open " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("synth config: parse error in " + path + ": " + e.what());
    }

    SynthConfig c;
    try {
        c.seed = j.value("seed", c.seed);
        c.weeks = j.value("weeks", c.weeks);
        c.start_week = j.value("start_week", c.start_week);
        if (j.contains("fiscal_start")) {
            c.fiscal_start = Date::parse_iso(j.at("fiscal_start").get<std::string>());
        }
        if (j.contains("n_customers_per_segment")) {
            const auto& m = j.at("n_customers_per_segment");
            for (int s = 0; s < kNumSegments; ++s) {
                const std::string key = segment_name(static_cast<Segment>(s));
                if (m.contains(key)) {
                    c.n_customers_per_segment[static_cast<std::size_t>(s)] = m.at(key).get<int>();
                }
            }
        }
        if (j.contains("delay_distributions")) {
            const auto& m = j.at("delay_distributions");
            for (int s = 0; s < kNumSegments; ++s) {
                const std::string key = segment_name(static_cast<Segment>(s));
                if (!m.contains(key)) continue;
                const auto& d = m.at(key);
                auto& dist = c.delay_distributions[static_cast<std::size_t>(s)];
                dist.mean_days = d.value("mean_days", dist.mean_days);
                dist.std_days = d.value("std_days", dist.std_days);
                dist.q4_mean_days = d.value("q4_mean_days", dist.mean_days);
                dist.q4_std_days = d.value("q4_std_days", dist.std_days);
            }
        }
        auto read_lags = [](const nlohmann::json& arr) {
            std::vector<PlantedLag> lags;
            for (const auto& e : arr) {
                lags.push_back({e.at("lag_weeks").get<int>(), e.at("coefficient").get<double>()});
            }
            return lags;
        };
        if (j.contains("planted_lags")) {
            const auto& p = j.at("planted_lags");
            if (p.contains("non_q4")) c.planted_lags.non_q4 = read_lags(p.at("non_q4"));
            if (p.contains("q4")) c.planted_lags.q4 = read_lags(p.at("q4"));
        }
        if (j.contains("holiday_weeks")) {
            for (const auto& e : j.at("holiday_weeks")) {
                c.holiday_weeks.push_back(
                    {e.at("absolute_week").get<int>(), e.at("multiplier").get<double>()});
            }
        }
        c.noise_std = j.value("noise_std", c.noise_std);
        c.invoice_rate = j.value("invoice_rate", c.invoice_rate);
        c.open_window_weeks = j.value("open_window_weeks", c.open_window_weeks);
        if (j.contains("support_series")) {
            c.support_series.clear();
            for (const auto& e : j.at("support_series")) {
                SupportSpec s;
                s.name = e.at("name").get<std::string>();
                s.level = e.value("level", s.level);
                s.trend_per_week = e.value("trend_per_week", s.trend_per_week);
                s.seasonal_amplitude = e.value("seasonal_amplitude", s.seasonal_amplitude);
                s.noise_frac = e.value("noise_frac", s.noise_frac);
                c.support_series.push_back(std::move(s));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("synth config: bad value in " + path + ": " + e.what());
    }
    c.validate();
    return c;
}

} // namespace ledgercast::synth
