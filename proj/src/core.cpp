#include "ledgercast/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace ledgercast {

// ---------------------------------------------------------------------------
// Date
// ---------------------------------------------------------------------------

Date::Date(int year, unsigned month, unsigned day) {
    using namespace std::chrono;
    year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
    if (!ymd.ok()) {
        throw ValidationError("invalid calendar date: " + std::to_string(year) + "-" +
                              std::to_string(month) + "-" + std::to_string(day));
    }
    days = sys_days(ymd).time_since_epoch().count();
}

Date Date::parse_iso(const std::string& text) {
    int y = 0;
    unsigned m = 0, d = 0;
    char extra = '\0';
    if (std::sscanf(text.c_str(), "%d-%u-%u%c", &y, &m, &d, &extra) != 3 || text.size() != 10) {
        throw ValidationError("expected ISO-8601 date (YYYY-MM-DD), got '" + text + "'");
    }
    return Date(y, m, d);
}

std::string Date::to_iso() const {
    using namespace std::chrono;
    year_month_day ymd{sys_days{std::chrono::days{days}}};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

// ---------------------------------------------------------------------------
// Money
// ---------------------------------------------------------------------------

Money Money::from_double(double v) {
    return Money(static_cast<std::int64_t>(std::llround(v * 100.0)));
}

Money Money::parse(const std::string& text) {
    if (text.empty()) throw ValidationError("empty amount");
    std::size_t pos = 0;
    bool negative = false;
    if (text[pos] == '-') {
        negative = true;
        ++pos;
    }
    std::int64_t whole = 0;
    bool any_digit = false;
    for (; pos < text.size() && text[pos] != '.'; ++pos) {
        if (text[pos] < '0' || text[pos] > '9') throw ValidationError("bad amount '" + text + "'");
        whole = whole * 10 + (text[pos] - '0');
        any_digit = true;
    }
    std::int64_t frac = 0;
    if (pos < text.size()) { // at '.'
        ++pos;
        int digits = 0;
        for (; pos < text.size(); ++pos, ++digits) {
            if (text[pos] < '0' || text[pos] > '9' || digits >= 2) {
                throw ValidationError("bad amount '" + text + "' (max two decimal digits)");
            }
            frac = frac * 10 + (text[pos] - '0');
        }
        if (digits == 1) frac *= 10;
        any_digit = any_digit || digits > 0;
    }
    if (!any_digit) throw ValidationError("bad amount '" + text + "'");
    std::int64_t cents = whole * 100 + frac;
    return Money(negative ? -cents : cents);
}

std::string Money::to_string() const {
    std::int64_t c = cents;
    const char* sign = "";
    if (c < 0) {
        sign = "-";
        c = -c;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%lld.%02lld", sign, static_cast<long long>(c / 100),
                  static_cast<long long>(c % 100));
    return buf;
}

// ---------------------------------------------------------------------------
// Segments and invoices
// ---------------------------------------------------------------------------

std::string segment_name(Segment s) {
    switch (s) {
        case Segment::CSB: return "CSB";
        case Segment::Commercial: return "Commercial";
        case Segment::Enterprise: return "Enterprise";
    }
    return "?";
}

Segment parse_segment(const std::string& name) {
    if (name == "CSB") return Segment::CSB;
    if (name == "Commercial") return Segment::Commercial;
    if (name == "Enterprise") return Segment::Enterprise;
    throw ValidationError("unknown segment '" + name + "'");
}

void Invoice::validate() const {
    if (invoice_id.empty() || customer_id.empty()) {
        throw ValidationError("invoice record is missing an id");
    }
    if (due_date < issue_date) {
        throw ValidationError("invoice " + invoice_id + ": due_date precedes issue_date");
    }
    if (amount.cents <= 0) {
        throw ValidationError("invoice " + invoice_id + ": amount must be positive");
    }
    if (payment_date && *payment_date < issue_date) {
        throw ValidationError("invoice " + invoice_id + ": payment_date precedes issue_date");
    }
    if (payment_terms_days < 0) {
        throw ValidationError("invoice " + invoice_id + ": negative payment terms");
    }
}

// ---------------------------------------------------------------------------
// FiscalCalendar
// ---------------------------------------------------------------------------

FiscalCalendar::FiscalCalendar(Date fiscal_year_start, int start_fiscal_year)
    : start_(fiscal_year_start), start_year_(start_fiscal_year) {
    if (start_year_ == 0) {
        using namespace std::chrono;
        year_month_day ymd{sys_days{std::chrono::days{fiscal_year_start.days}}};
        start_year_ = static_cast<int>(ymd.year());
    }
}

WeekStamp FiscalCalendar::week_of(Date date) const {
    if (date < start_) {
        throw ValidationError("date " + date.to_iso() + " precedes fiscal calendar start " +
                              start_.to_iso());
    }
    const std::int64_t day_index = date - start_;
    WeekStamp ws;
    ws.absolute_week = static_cast<int>(day_index / 7) + 1;
    const int idx = ws.absolute_week - 1;
    ws.fiscal_year = start_year_ + idx / weeks_per_year;
    ws.quarter = (idx % weeks_per_year) / weeks_per_quarter + 1;
    ws.week_in_quarter = idx % weeks_per_quarter + 1;
    return ws;
}

int FiscalCalendar::quarter_of(int absolute_week) const {
    if (absolute_week < 1) {
        throw ValidationError("absolute week " + std::to_string(absolute_week) + " out of range");
    }
    return ((absolute_week - 1) % weeks_per_year) / weeks_per_quarter + 1;
}

bool FiscalCalendar::is_q4(int absolute_week) const { return quarter_of(absolute_week) == 4; }

Date FiscalCalendar::first_date_of(int absolute_week) const {
    if (absolute_week < 1) {
        throw ValidationError("absolute week " + std::to_string(absolute_week) + " out of range");
    }
    return start_.plus_days(static_cast<std::int64_t>(absolute_week - 1) * 7);
}

// ---------------------------------------------------------------------------
// WeeklySeries
// ---------------------------------------------------------------------------

WeeklySeries::WeeklySeries(int start_week, std::vector<double> values)
    : start_week_(start_week), values_(std::move(values)) {}

WeeklySeries WeeklySeries::from_map(const std::map<int, double>& by_week) {
    WeeklySeries s;
    if (by_week.empty()) return s;
    const int first = by_week.begin()->first;
    const int last = by_week.rbegin()->first;
    s.start_week_ = first;
    s.values_.assign(static_cast<std::size_t>(last - first + 1), 0.0);
    for (const auto& [week, value] : by_week) {
        s.values_[static_cast<std::size_t>(week - first)] = value;
    }
    return s;
}

double WeeklySeries::at_week(int week) const {
    if (!contains_week(week)) {
        throw ValidationError("week " + std::to_string(week) + " outside series span");
    }
    return values_[static_cast<std::size_t>(week - start_week_)];
}

double& WeeklySeries::at_week(int week) {
    if (!contains_week(week)) {
        throw ValidationError("week " + std::to_string(week) + " outside series span");
    }
    return values_[static_cast<std::size_t>(week - start_week_)];
}

double WeeklySeries::total() const {
    double sum = 0.0;
    for (double v : values_) sum += v;
    return sum;
}

WeeklySeries WeeklySeries::slice(int from_week, int to_week) const {
    if (from_week > to_week || !contains_week(from_week) || !contains_week(to_week)) {
        throw ValidationError("slice [" + std::to_string(from_week) + ", " +
                              std::to_string(to_week) + "] outside series span");
    }
    return WeeklySeries(from_week,
                        std::vector<double>(values_.begin() + (from_week - start_week_),
                                            values_.begin() + (to_week - start_week_ + 1)));
}

WeeklySeries aggregate_weekly(const std::vector<std::pair<Date, Money>>& payments,
                              const FiscalCalendar& cal) {
    if (payments.empty()) return {};
    std::map<int, std::int64_t> cents_by_week;
    for (const auto& [date, amount] : payments) {
        cents_by_week[cal.week_of(date).absolute_week] += amount.cents;
    }
    std::map<int, double> by_week;
    for (const auto& [week, cents] : cents_by_week) {
        by_week[week] = static_cast<double>(cents) / 100.0;
    }
    return WeeklySeries::from_map(by_week);
}

} // namespace ledgercast
