#include "ledgercast/eval.hpp"

#include <cmath>
#include <string>

#include "ledgercast/profiles.hpp"

namespace ledgercast::eval {

double mape(const WeeklySeries& actual, const WeeklySeries& predicted) {
    if (actual.empty() || actual.start_week() != predicted.start_week() ||
        actual.size() != predicted.size()) {
        throw ValidationError("mape: series spans misaligned");
    }
    double sum = 0.0;
    for (int w = actual.start_week(); w <= actual.end_week(); ++w) {
        const double a = actual.at_week(w);
        if (a == 0.0) {
            throw NumericalError("mape: zero actual at week " + std::to_string(w));
        }
        sum += std::abs(a - predicted.at_week(w)) / std::abs(a);
    }
    return 100.0 * sum / static_cast<double>(actual.size());
}

std::vector<Fold> sliding_folds(const WeeklySeries& series, int folds, int horizon_weeks,
                                int min_train_weeks) {
    if (folds < 1 || horizon_weeks < 1) {
        throw ValidationError("sliding_folds: folds and horizon must be positive");
    }
    const int needed = folds * horizon_weeks + min_train_weeks;
    if (static_cast<int>(series.size()) < needed) {
        throw DataError("sliding_folds: series has " + std::to_string(series.size()) +
                        " weeks, needs at least " + std::to_string(needed));
    }
    const double weight_total = static_cast<double>(folds) * (folds + 1) / 2.0;
    std::vector<Fold> out;
    out.reserve(static_cast<std::size_t>(folds));
    for (int f = 1; f <= folds; ++f) {
        Fold fold;
        fold.test_end_week = series.end_week() - (folds - f) * horizon_weeks;
        fold.test_start_week = fold.test_end_week - horizon_weeks + 1;
        fold.train_start_week = series.start_week();
        fold.train_end_week = fold.test_start_week - 1;
        fold.weight = static_cast<double>(f) / weight_total;
        out.push_back(fold);
    }
    return out;
}

double variance_weighted_score(const std::vector<FoldScore>& folds, double alpha) {
    if (folds.empty()) throw ValidationError("variance_weighted_score: no folds");
    if (alpha < 0.0 || alpha > 1.0) throw ValidationError("variance_weighted_score: alpha outside [0,1]");
    double weight_sum = 0.0;
    for (const auto& f : folds) {
        if (f.weight <= 0.0) throw ValidationError("variance_weighted_score: nonpositive weight");
        weight_sum += f.weight;
    }
    if (std::abs(weight_sum - 1.0) > 1e-9) {
        throw ValidationError("variance_weighted_score: weights not normalized (sum " +
                              std::to_string(weight_sum) + ")");
    }
    double mean = 0.0;
    for (const auto& f : folds) mean += f.weight * f.mape;
    double var = 0.0;
    for (const auto& f : folds) var += f.weight * (f.mape - mean) * (f.mape - mean);
    return alpha * mean + (1.0 - alpha) * std::sqrt(var);
}

double final_score(const std::vector<double>& window_scores) {
    if (window_scores.empty()) throw ValidationError("final_score: empty score list");
    double sum = 0.0;
    for (double s : window_scores) sum += s;
    return sum / static_cast<double>(window_scores.size());
}

double custom_loss(const std::vector<double>& errors, const LossWeights& weights) {
    if (errors.empty() || errors.size() != weights.w.size()) {
        throw ValidationError("custom_loss: errors and weights must be nonempty and aligned");
    }
    if (weights.alpha < 0.0 || weights.alpha > 1.0) {
        throw ValidationError("custom_loss: alpha outside [0,1]");
    }
    double wsum = 0.0;
    for (double w : weights.w) {
        if (w <= 0.0) throw ValidationError("custom_loss: weights must be positive");
        wsum += w;
    }
    double mean = 0.0;
    for (std::size_t k = 0; k < errors.size(); ++k) mean += weights.w[k] * errors[k];
    mean /= wsum;
    double var = 0.0;
    for (std::size_t k = 0; k < errors.size(); ++k) {
        var += weights.w[k] * (errors[k] - mean) * (errors[k] - mean);
    }
    var /= wsum;
    return weights.alpha * mean + (1.0 - weights.alpha) * std::sqrt(var);
}

double accuracy_uplift(double error_baseline, double error_proposed) {
    if (error_baseline <= 0.0) {
        throw ValidationError("accuracy_uplift: baseline error must be positive");
    }
    return (error_baseline - error_proposed) / error_baseline * 100.0;
}

int payment_deviation(const Invoice& invoice) {
    if (!invoice.closed()) {
        throw DataError("payment_deviation: invoice " + invoice.invoice_id + " is open");
    }
    return static_cast<int>(*invoice.payment_date - invoice.due_date);
}

std::vector<DeviationSummary> payment_deviation_summary(const std::vector<Invoice>& invoices) {
    std::vector<std::vector<double>> deltas(kNumSegments);
    for (const auto& inv : invoices) {
        if (inv.closed()) {
            deltas[static_cast<int>(inv.segment)].push_back(payment_deviation(inv));
        }
    }
    std::vector<DeviationSummary> out;
    for (int s = 0; s < kNumSegments; ++s) {
        if (deltas[s].empty()) continue;
        DeviationSummary d;
        d.segment = static_cast<Segment>(s);
        d.n = static_cast<int>(deltas[s].size());
        double sum = 0.0, abs_sum = 0.0;
        for (double v : deltas[s]) {
            sum += v;
            abs_sum += std::abs(v);
        }
        d.mean_delta = sum / d.n;
        d.mean_abs_delta = abs_sum / d.n;
        double ss = 0.0;
        for (double v : deltas[s]) ss += (v - d.mean_delta) * (v - d.mean_delta);
        d.std_delta = std::sqrt(ss / d.n);
        out.push_back(d);
    }
    return out;
}

} // namespace ledgercast::eval
