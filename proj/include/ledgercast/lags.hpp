#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ledgercast/core.hpp"

namespace ledgercast::lags {

struct ScoredLag {
    int lag_weeks = 0;
    double coefficient = 0.0;
    double score = 0.0; // incremental R^2 on the regime's weeks

    bool operator==(const ScoredLag&) const = default;
};

// Per-regime selected lags with jointly fitted coefficients.
struct LagSpec {
    std::vector<ScoredLag> non_q4;
    std::vector<ScoredLag> q4;
    int max_lag = 13;
    double selection_threshold = 0.05;
    bool q4_fell_back = false; // Q4 had < 2 observed quarters and reuses non_q4
};

// Least squares / ridge: solves (X'X + ridge I) b = X'y. With ridge = 0 a
// rank-revealing QR is used and a singular design raises NumericalError
// naming the dependent column (column_names, when given, label the
// columns in the message).
Eigen::VectorXd ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double ridge = 0.0,
                        const std::vector<std::string>& column_names = {});

// Incremental R^2 of each lag 0..max_lag against an intercept-only model,
// computed on the weeks where regime_mask is true. The mask runs parallel
// to target.values(). All lags are scored on the common week set where
// every lagged value resolves, so scores are comparable across lags.
std::vector<std::pair<int, double>> score_lags(const WeeklySeries& support,
                                               const WeeklySeries& target,
                                               const std::vector<bool>& regime_mask, int max_lag);

// Quarter-regime lag selection: scores lags separately under the Q4 and
// non-Q4 masks, keeps lags scoring >= threshold (or the single best when
// none pass), then fits per-regime coefficients jointly with no intercept.
// A Q4 regime with fewer than two observed quarters falls back to the
// non-Q4 spec with a logged warning.
LagSpec select_lags(const WeeklySeries& support, const WeeklySeries& target,
                    const FiscalCalendar& cal, int max_lag = 13, double threshold = 0.05);

// Weekly combination of lagged support values under the week's active
// regime; initial weeks whose lags reach before the support span are
// dropped.
WeeklySeries apply_lags(const WeeklySeries& support, const LagSpec& spec,
                        const FiscalCalendar& cal);

// Minimizes ||y - X b||^2 + lambda * sum_j (1 + gamma * lag_j) * b_j^2.
// gamma = 0 reduces to plain ridge; longer lags shrink harder otherwise.
Eigen::VectorXd lag_weighted_fit(const Eigen::MatrixXd& X, const std::vector<int>& lag_labels,
                                 const Eigen::VectorXd& y, double lambda, double gamma);

} // namespace ledgercast::lags
