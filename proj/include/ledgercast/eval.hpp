#pragma once

#include <vector>

#include "ledgercast/core.hpp"

namespace ledgercast::eval {

// One sliding fold: expanding train span followed by a fixed-length test
// span, plus the fold's normalized recency weight.
struct Fold {
    int train_start_week = 0;
    int train_end_week = 0; // inclusive; test starts the week after
    int test_start_week = 0;
    int test_end_week = 0;
    double weight = 0.0; // normalized, increasing with recency
};

struct FoldScore {
    int fold_index = 0; // 1-based
    double mape = 0.0;  // percent
    double weight = 0.0;
};

struct LossWeights {
    std::vector<double> w; // per fold, positive
    double alpha = 0.5;    // accuracy vs stability trade-off
};

// 100 * mean(|a - p| / |a|). Aligned spans required; any zero actual is a
// metric error (synthetic collections are strictly positive by
// construction).
double mape(const WeeklySeries& actual, const WeeklySeries& predicted);

// F chronologically ordered expanding-train folds, each testing the next
// horizon_weeks block; the last fold's test span ends at the series end.
// Default weights are f / sum(1..F), most-recent-heaviest.
std::vector<Fold> sliding_folds(const WeeklySeries& series, int folds, int horizon_weeks,
                                int min_train_weeks = 26);

// alpha * sum(v_f * MAPE_f) + (1 - alpha) * sqrt(sum(v_f * (MAPE_f - mean)^2))
// where mean is the weighted mean MAPE. Weights must be normalized.
double variance_weighted_score(const std::vector<FoldScore>& folds, double alpha);

// Arithmetic mean of per-window variance-weighted scores.
double final_score(const std::vector<double>& window_scores);

// L = alpha * weighted_mean(e) + (1 - alpha) * weighted_std(e); the std is
// the weight-normalized population form.
double custom_loss(const std::vector<double>& errors, const LossWeights& weights);

// (baseline - proposed) / baseline * 100; positive means improvement.
double accuracy_uplift(double error_baseline, double error_proposed);

// Actual payment date minus due date, in days.
int payment_deviation(const Invoice& invoice);

// Per-segment summary of payment deviations over closed invoices.
struct DeviationSummary {
    Segment segment = Segment::CSB;
    int n = 0;
    double mean_delta = 0.0;
    double mean_abs_delta = 0.0;
    double std_delta = 0.0;
};

std::vector<DeviationSummary> payment_deviation_summary(const std::vector<Invoice>& invoices);

} // namespace ledgercast::eval
