#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ledgercast/errors.hpp"

namespace ledgercast {

// ---------------------------------------------------------------------------
// Calendar dates
// ---------------------------------------------------------------------------

// Thin value wrapper over days-since-epoch (std::chrono::sys_days).
struct Date {
    std::int64_t days = 0; // days since 1970-01-01

    constexpr Date() = default;
    constexpr explicit Date(std::int64_t d) : days(d) {}
    Date(int year, unsigned month, unsigned day);

    static Date parse_iso(const std::string& text); // YYYY-MM-DD
    std::string to_iso() const;

    Date plus_days(std::int64_t n) const { return Date(days + n); }
    std::int64_t operator-(Date other) const { return days - other.days; }
    auto operator<=>(const Date&) const = default;
};

// ---------------------------------------------------------------------------
// Money
// ---------------------------------------------------------------------------

// Fixed-point currency amount with two fractional digits. Domain records
// keep amounts exact; model code converts to double at the boundary.
struct Money {
    std::int64_t cents = 0;

    constexpr Money() = default;
    constexpr explicit Money(std::int64_t c) : cents(c) {}
    static Money from_double(double v);
    static Money parse(const std::string& text);

    double to_double() const { return static_cast<double>(cents) / 100.0; }
    std::string to_string() const;

    Money operator+(Money o) const { return Money(cents + o.cents); }
    Money& operator+=(Money o) { cents += o.cents; return *this; }
    auto operator<=>(const Money&) const = default;
};

// ---------------------------------------------------------------------------
// Invoices
// ---------------------------------------------------------------------------

enum class Segment { CSB = 0, Commercial = 1, Enterprise = 2 };

constexpr int kNumSegments = 3;

std::string segment_name(Segment s);
Segment parse_segment(const std::string& name); // throws ValidationError

struct Invoice {
    std::string invoice_id;
    std::string customer_id;
    Segment segment = Segment::CSB;
    Date issue_date;
    Date due_date;
    Money amount;
    std::optional<Date> payment_date;
    int payment_terms_days = 0;

    bool closed() const { return payment_date.has_value(); }

    // Throws ValidationError if any record invariant is violated.
    void validate() const;
};

// ---------------------------------------------------------------------------
// Fiscal calendar
// ---------------------------------------------------------------------------

struct WeekStamp {
    int fiscal_year = 0;
    int quarter = 0;         // 1..4
    int week_in_quarter = 0; // 1..13
    int absolute_week = 0;   // 1-based, continuous across years
};

// Fixed 4 x 13 week fiscal calendar (364-day years, no leap weeks).
// Absolute week 1 starts at fiscal_year_start; quarters are contiguous
// 13-week blocks.
class FiscalCalendar {
public:
    FiscalCalendar() = default;
    explicit FiscalCalendar(Date fiscal_year_start, int start_fiscal_year = 0);

    static constexpr int weeks_per_quarter = 13;
    static constexpr int quarters_per_year = 4;
    static constexpr int weeks_per_year = weeks_per_quarter * quarters_per_year;

    Date fiscal_year_start() const { return start_; }

    WeekStamp week_of(Date date) const; // range error before fiscal_year_start
    bool is_q4(int absolute_week) const;
    int quarter_of(int absolute_week) const;
    Date first_date_of(int absolute_week) const;
    Date last_date_of(int absolute_week) const { return first_date_of(absolute_week).plus_days(6); }

private:
    Date start_{};
    int start_year_ = 0;
};

// ---------------------------------------------------------------------------
// Weekly series
// ---------------------------------------------------------------------------

// Gapless weekly (absolute_week, value) sequence. Construction fills
// missing interior weeks with zero.
class WeeklySeries {
public:
    WeeklySeries() = default;
    WeeklySeries(int start_week, std::vector<double> values);
    static WeeklySeries from_map(const std::map<int, double>& by_week);

    bool empty() const { return values_.empty(); }
    std::size_t size() const { return values_.size(); }
    int start_week() const { return start_week_; }
    int end_week() const { return start_week_ + static_cast<int>(values_.size()) - 1; }
    bool contains_week(int week) const { return !empty() && week >= start_week() && week <= end_week(); }

    double at_week(int week) const; // range error outside span
    double& at_week(int week);
    const std::vector<double>& values() const { return values_; }

    double total() const;

    // Sub-span [from, to] inclusive; range error when outside the span.
    WeeklySeries slice(int from_week, int to_week) const;

    bool operator==(const WeeklySeries&) const = default;

private:
    int start_week_ = 0;
    std::vector<double> values_;
};

// Sum payment amounts per fiscal week; weeks inside the observed span with
// no payments carry zero. Sums are accumulated in integer cents so the
// series total matches the input total exactly.
WeeklySeries aggregate_weekly(const std::vector<std::pair<Date, Money>>& payments,
                              const FiscalCalendar& cal);

} // namespace ledgercast
