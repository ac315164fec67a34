#include "ledgercast/windows.hpp"

#include <algorithm>
#include <map>

#include "ledgercast/errors.hpp"

namespace ledgercast::windows {

Provenance WindowedRegressor::provenance_of(int week) const {
    if (!series.contains_week(week)) {
        throw ValidationError("week " + std::to_string(week) + " outside simulated span");
    }
    return provenance[static_cast<std::size_t>(week - series.start_week())];
}

WindowedRegressor simulate_partial(const std::vector<Invoice>& invoices,
                                   const closure::GbtModel& model,
                                   const closure::ProfileSource& profiles, int anchor_week,
                                   int window_len, const FiscalCalendar& cal) {
    if (window_len < 1) throw ValidationError("simulate_partial: window_len must be >= 1");
    if (!model.fitted()) throw ValidationError("simulate_partial: closure model not fitted");
    if (invoices.empty()) throw DataError("simulate_partial: no invoices");

    int first_data_week = 0;
    bool have_week = false;
    for (const auto& inv : invoices) {
        const int w = cal.week_of(inv.issue_date).absolute_week;
        if (!have_week || w < first_data_week) {
            first_data_week = w;
            have_week = true;
        }
    }
    if (anchor_week < first_data_week) {
        throw ValidationError("simulate_partial: anchor week " + std::to_string(anchor_week) +
                              " precedes first data week " + std::to_string(first_data_week));
    }

    // realized mass by payment week, exact cents (mirrors aggregate_weekly)
    std::map<int, std::int64_t> realized;
    std::map<int, std::int64_t> predicted;
    const int last_allowed = anchor_week + window_len;
    for (const auto& inv : invoices) {
        if (inv.closed()) {
            realized[cal.week_of(*inv.payment_date).absolute_week] += inv.amount.cents;
            continue;
        }
        const Date close = closure::predict_close_date(model, inv, profiles.for_invoice(inv), cal);
        const int week = std::max(cal.week_of(close).absolute_week, anchor_week + 1);
        if (week > last_allowed) continue; // tail-off
        predicted[week] += inv.amount.cents;
    }
    if (realized.empty() && predicted.empty()) {
        throw DataError("simulate_partial: no realized payments and no in-window predictions");
    }

    const int start = !realized.empty() ? std::min(realized.begin()->first,
                                                   predicted.empty() ? realized.begin()->first
                                                                     : predicted.begin()->first)
                                        : predicted.begin()->first;
    const int end = std::max(realized.empty() ? start : realized.rbegin()->first,
                             predicted.empty() ? start : predicted.rbegin()->first);

    WindowedRegressor out;
    out.window_len_weeks = window_len;
    out.anchor_week = anchor_week;
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(end - start + 1));
    out.provenance.reserve(static_cast<std::size_t>(end - start + 1));
    for (int w = start; w <= end; ++w) {
        const auto r = realized.find(w);
        const auto p = predicted.find(w);
        const std::int64_t realized_cents = r != realized.end() ? r->second : 0;
        const std::int64_t predicted_cents = p != predicted.end() ? p->second : 0;
        values.push_back(static_cast<double>(realized_cents + predicted_cents) / 100.0);
        out.provenance.push_back(predicted_cents > 0
                                     ? (realized_cents > 0 ? Provenance::mixed : Provenance::predicted)
                                     : Provenance::realized);
    }
    out.series = WeeklySeries(start, std::move(values));
    return out;
}

std::vector<int> rollback_anchors(int anchor_week, int window_len, int n_windows,
                                  int first_data_week) {
    if (n_windows < 1) throw ValidationError("rollback_anchors: n_windows must be >= 1");
    if (window_len < 1) throw ValidationError("rollback_anchors: window_len must be >= 1");
    std::vector<int> anchors;
    for (int k = 0; k < n_windows; ++k) {
        const int a = anchor_week - k * window_len;
        if (a < first_data_week) break;
        anchors.push_back(a);
    }
    return anchors;
}

RegressorPair build_regressors(const std::vector<Invoice>& invoices,
                               const closure::GbtModel& model,
                               const closure::ProfileSource& profiles, const FiscalCalendar& cal,
                               int short_len, int long_len) {
    int anchor = 0;
    bool any_closed = false;
    for (const auto& inv : invoices) {
        if (!inv.closed()) continue;
        anchor = std::max(anchor, cal.week_of(*inv.payment_date).absolute_week);
        any_closed = true;
    }
    if (!any_closed) throw DataError("build_regressors: no closed invoices to anchor on");
    return {simulate_partial(invoices, model, profiles, anchor, short_len, cal),
            simulate_partial(invoices, model, profiles, anchor, long_len, cal)};
}

} // namespace ledgercast::windows
