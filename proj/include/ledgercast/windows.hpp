#pragma once

#include <vector>

#include "ledgercast/closure.hpp"
#include "ledgercast/core.hpp"

namespace ledgercast::windows {

enum class Provenance { realized, predicted, mixed };

// "Forecasted AR" series: realized collections through the anchor plus
// predicted closures of open invoices over the next window_len_weeks.
struct WindowedRegressor {
    int window_len_weeks = 0;
    int anchor_week = 0;
    WeeklySeries series;
    std::vector<Provenance> provenance; // parallel to series.values()

    Provenance provenance_of(int week) const;
};

// Merge realized payments with predicted closures of open invoices.
//
// The invoice set is taken at face value; for walk-forward use the caller
// passes an as-of view. Closed invoices contribute at their payment week.
// Open invoices are assigned to the week of their predicted close date,
// floored at anchor_week + 1 (an invoice still open at the anchor cannot
// already have closed) and dropped when predicted past anchor_week +
// window_len (the simulated series tails off rather than piling mass on
// its last week). The series spans from the first realized week to the
// last week holding any mass.
WindowedRegressor simulate_partial(const std::vector<Invoice>& invoices,
                                   const closure::GbtModel& model,
                                   const closure::ProfileSource& profiles, int anchor_week,
                                   int window_len, const FiscalCalendar& cal);

// Walk-back anchor schedule: anchor, anchor - window_len, ... for
// n_windows entries, truncated once an anchor would precede
// first_data_week.
std::vector<int> rollback_anchors(int anchor_week, int window_len, int n_windows,
                                  int first_data_week);

// Short- and long-window regressors simulated at the latest anchor (the
// last closed payment week in the data).
struct RegressorPair {
    WindowedRegressor short_window;
    WindowedRegressor long_window;
};

RegressorPair build_regressors(const std::vector<Invoice>& invoices,
                               const closure::GbtModel& model,
                               const closure::ProfileSource& profiles, const FiscalCalendar& cal,
                               int short_len = 4, int long_len = 13);

} // namespace ledgercast::windows
