#include "ledgercast/lags.hpp"

#include <algorithm>
#include <cmath>

#include "ledgercast/errors.hpp"
#include "ledgercast/log.hpp"

namespace ledgercast::lags {

Eigen::VectorXd ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double ridge,
                        const std::vector<std::string>& column_names) {
    if (X.rows() != y.size()) throw ValidationError("ols_fit: X and y row counts differ");
    if (X.cols() == 0) throw ValidationError("ols_fit: empty design matrix");
    if (!X.allFinite() || !y.allFinite()) throw ValidationError("ols_fit: non-finite entries");
    if (ridge < 0.0) throw ValidationError("ols_fit: negative ridge");
    if (ridge == 0.0 && X.rows() < X.cols()) {
        throw ValidationError("ols_fit: fewer rows than columns requires ridge > 0");
    }

    if (ridge > 0.0) {
        const Eigen::MatrixXd gram =
            X.transpose() * X +
            ridge * Eigen::MatrixXd::Identity(X.cols(), X.cols());
        return gram.ldlt().solve(X.transpose() * y);
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < X.cols()) {
        // columns permuted past the rank boundary are linearly dependent
        // on the pivot basis; report the lowest-indexed one
        const auto& perm = qr.colsPermutation().indices();
        Eigen::Index offender = X.cols();
        for (Eigen::Index k = qr.rank(); k < X.cols(); ++k) {
            offender = std::min<Eigen::Index>(offender, perm(k));
        }
        const std::string name = offender < static_cast<Eigen::Index>(column_names.size())
                                     ? column_names[static_cast<std::size_t>(offender)]
                                     : "column " + std::to_string(offender);
        throw NumericalError("ols_fit: singular design matrix (dependent " + name + ")");
    }
    return qr.solve(y);
}

namespace {

// common scoring span: every lag 0..max_lag must resolve
struct RegimeRows {
    std::vector<int> weeks; // masked weeks within the common span
};

RegimeRows masked_rows(const WeeklySeries& support, const WeeklySeries& target,
                       const std::vector<bool>& regime_mask, int max_lag) {
    if (regime_mask.size() != target.size()) {
        throw ValidationError("score_lags: regime mask length differs from target span");
    }
    const int lo = std::max(target.start_week(), support.start_week() + max_lag);
    const int hi = std::min(target.end_week(), support.end_week());
    RegimeRows rows;
    for (int w = lo; w <= hi; ++w) {
        if (regime_mask[static_cast<std::size_t>(w - target.start_week())]) rows.weeks.push_back(w);
    }
    return rows;
}

} // namespace

std::vector<std::pair<int, double>> score_lags(const WeeklySeries& support,
                                               const WeeklySeries& target,
                                               const std::vector<bool>& regime_mask, int max_lag) {
    if (max_lag < 0) throw ValidationError("score_lags: max_lag must be >= 0");
    const auto rows = masked_rows(support, target, regime_mask, max_lag);
    const int n = static_cast<int>(rows.weeks.size());
    if (n <= max_lag + 5) {
        throw DataError("score_lags: " + std::to_string(n) +
                        " regime weeks; need more than max_lag + 5 = " + std::to_string(max_lag + 5));
    }

    double y_mean = 0.0;
    for (int w : rows.weeks) y_mean += target.at_week(w);
    y_mean /= n;
    double y_var = 0.0;
    for (int w : rows.weeks) {
        const double d = target.at_week(w) - y_mean;
        y_var += d * d;
    }

    std::vector<std::pair<int, double>> scores;
    scores.reserve(static_cast<std::size_t>(max_lag) + 1);
    for (int lag = 0; lag <= max_lag; ++lag) {
        double x_mean = 0.0;
        for (int w : rows.weeks) x_mean += support.at_week(w - lag);
        x_mean /= n;
        double xx = 0.0, xy = 0.0;
        for (int w : rows.weeks) {
            const double dx = support.at_week(w - lag) - x_mean;
            xx += dx * dx;
            xy += dx * (target.at_week(w) - y_mean);
        }
        double r2 = 0.0;
        if (xx > 0.0 && y_var > 0.0) r2 = (xy * xy) / (xx * y_var);
        scores.emplace_back(lag, std::clamp(r2, 0.0, 1.0));
    }
    return scores;
}

namespace {

std::vector<ScoredLag> fit_regime(const WeeklySeries& support, const WeeklySeries& target,
                                  const std::vector<bool>& mask, int max_lag, double threshold) {
    const auto scores = score_lags(support, target, mask, max_lag);

    std::vector<std::pair<int, double>> retained;
    for (const auto& [lag, score] : scores) {
        if (score >= threshold) retained.emplace_back(lag, score);
    }
    if (retained.empty()) {
        auto best = scores.front();
        for (const auto& s : scores) {
            if (s.second > best.second) best = s; // ties keep the lower lag
        }
        retained.push_back(best);
    }

    const auto rows = masked_rows(support, target, mask, max_lag);
    const int n = static_cast<int>(rows.weeks.size());
    Eigen::MatrixXd X(n, static_cast<Eigen::Index>(retained.size()));
    Eigen::VectorXd y(n);
    std::vector<std::string> names;
    names.reserve(retained.size());
    for (std::size_t j = 0; j < retained.size(); ++j) {
        names.push_back("lag " + std::to_string(retained[j].first));
        for (int i = 0; i < n; ++i) {
            X(i, static_cast<Eigen::Index>(j)) = support.at_week(rows.weeks[static_cast<std::size_t>(i)] - retained[j].first);
        }
    }
    for (int i = 0; i < n; ++i) y(i) = target.at_week(rows.weeks[static_cast<std::size_t>(i)]);
    const Eigen::VectorXd beta = ols_fit(X, y, 0.0, names);

    std::vector<ScoredLag> out;
    out.reserve(retained.size());
    for (std::size_t j = 0; j < retained.size(); ++j) {
        out.push_back({retained[j].first, beta(static_cast<Eigen::Index>(j)), retained[j].second});
    }
    return out;
}

} // namespace

LagSpec select_lags(const WeeklySeries& support, const WeeklySeries& target,
                    const FiscalCalendar& cal, int max_lag, double threshold) {
    if (max_lag < 0) throw ValidationError("select_lags: max_lag must be >= 0");

    std::vector<bool> q4_mask(target.size()), non_q4_mask(target.size());
    for (int w = target.start_week(); w <= target.end_week(); ++w) {
        const bool q4 = cal.is_q4(w);
        q4_mask[static_cast<std::size_t>(w - target.start_week())] = q4;
        non_q4_mask[static_cast<std::size_t>(w - target.start_week())] = !q4;
    }

    LagSpec spec;
    spec.max_lag = max_lag;
    spec.selection_threshold = threshold;
    spec.non_q4 = fit_regime(support, target, non_q4_mask, max_lag, threshold);

    // a Q4 fit needs at least two observed Q4 quarters inside the scorable span
    const auto q4_rows = masked_rows(support, target, q4_mask, max_lag);
    if (static_cast<int>(q4_rows.weeks.size()) >= 2 * FiscalCalendar::weeks_per_quarter) {
        spec.q4 = fit_regime(support, target, q4_mask, max_lag, threshold);
    } else {
        log::warn("select_lags: only " + std::to_string(q4_rows.weeks.size()) +
                  " scorable Q4 weeks (< 2 quarters); Q4 regime reuses the non-Q4 lags");
        spec.q4 = spec.non_q4;
        spec.q4_fell_back = true;
    }
    return spec;
}

WeeklySeries apply_lags(const WeeklySeries& support, const LagSpec& spec,
                        const FiscalCalendar& cal) {
    if (spec.non_q4.empty() || spec.q4.empty()) {
        throw ValidationError("apply_lags: spec has an empty regime");
    }
    auto regime_max_lag = [&](int week) {
        const auto& lags = cal.is_q4(week) ? spec.q4 : spec.non_q4;
        int m = 0;
        for (const auto& l : lags) m = std::max(m, l.lag_weeks);
        return m;
    };

    // earliest start so that every later week's active-regime lags resolve
    int start = support.start_week();
    for (int w = support.start_week(); w <= support.end_week(); ++w) {
        if (w - regime_max_lag(w) < support.start_week()) start = w + 1;
    }
    if (start > support.end_week()) {
        throw DataError("apply_lags: support span shorter than the selected lags");
    }

    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(support.end_week() - start + 1));
    for (int w = start; w <= support.end_week(); ++w) {
        const auto& lags = cal.is_q4(w) ? spec.q4 : spec.non_q4;
        double v = 0.0;
        for (const auto& l : lags) v += l.coefficient * support.at_week(w - l.lag_weeks);
        values.push_back(v);
    }
    return WeeklySeries(start, std::move(values));
}

Eigen::VectorXd lag_weighted_fit(const Eigen::MatrixXd& X, const std::vector<int>& lag_labels,
                                 const Eigen::VectorXd& y, double lambda, double gamma) {
    if (lambda < 0.0 || gamma < 0.0) {
        throw ValidationError("lag_weighted_fit: lambda and gamma must be >= 0");
    }
    if (static_cast<Eigen::Index>(lag_labels.size()) != X.cols()) {
        throw ValidationError("lag_weighted_fit: one lag label per column required");
    }
    for (int lag : lag_labels) {
        if (lag < 0) throw ValidationError("lag_weighted_fit: negative lag label");
    }
    if (lambda == 0.0) return ols_fit(X, y, 0.0);
    if (X.rows() != y.size()) throw ValidationError("lag_weighted_fit: X and y row counts differ");
    if (!X.allFinite() || !y.allFinite()) throw ValidationError("lag_weighted_fit: non-finite entries");

    Eigen::MatrixXd gram = X.transpose() * X;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        gram(j, j) += lambda * (1.0 + gamma * lag_labels[static_cast<std::size_t>(j)]);
    }
    return gram.ldlt().solve(X.transpose() * y);
}

} // namespace ledgercast::lags
