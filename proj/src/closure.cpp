#include "ledgercast/closure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

namespace ledgercast::closure {

using json = nlohmann::ordered_json;

const std::array<std::string, kNumFeatures>& feature_names() {
    static const std::array<std::string, kNumFeatures> names = {
        "amount",
        "payment_terms_days",
        "mean_delay_days",
        "recency_weighted_delay_days",
        "avg_payment",
        "payment_std",
        "recent_speed_to_pay_days",
        "issue_week_in_quarter",
        "is_q4",
        "segment_csb",
        "segment_commercial",
        "segment_enterprise",
        "cold_start",
    };
    return names;
}

FeatureVector encode(const Invoice& invoice, const profiles::CustomerProfile& profile,
                     const FiscalCalendar& cal) {
    if (!profile.cold_start && profile.as_of > invoice.issue_date) {
        throw ValidationError("encode: profile as_of " + profile.as_of.to_iso() +
                              " post-dates invoice issue " + invoice.issue_date.to_iso());
    }
    const WeekStamp issue = cal.week_of(invoice.issue_date);
    FeatureVector x;
    x.values[0] = invoice.amount.to_double();
    x.values[1] = static_cast<double>(invoice.payment_terms_days);
    x.values[2] = profile.mean_delay_days;
    x.values[3] = profile.recency_weighted_delay_days;
    x.values[4] = profile.avg_payment;
    x.values[5] = profile.payment_std;
    x.values[6] = profile.recent_speed_to_pay_days;
    x.values[7] = static_cast<double>(issue.week_in_quarter);
    x.values[8] = issue.quarter == 4 ? 1.0 : 0.0;
    x.values[9] = invoice.segment == Segment::CSB ? 1.0 : 0.0;
    x.values[10] = invoice.segment == Segment::Commercial ? 1.0 : 0.0;
    x.values[11] = invoice.segment == Segment::Enterprise ? 1.0 : 0.0;
    x.values[12] = profile.cold_start ? 1.0 : 0.0;
    return x;
}

double Tree::predict(const FeatureVector& x) const {
    int node = 0;
    while (!nodes[static_cast<std::size_t>(node)].leaf) {
        const TreeNode& n = nodes[static_cast<std::size_t>(node)];
        node = x.values[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(node)].value;
}

namespace {

struct SortedFeature {
    // row indices ordered by feature value (stable on original index)
    std::vector<int> order;
};

double subset_mean(const std::vector<double>& r, const std::vector<int>& idx) {
    double s = 0.0;
    for (int i : idx) s += r[static_cast<std::size_t>(i)];
    return s / static_cast<double>(idx.size());
}

double subset_sse(const std::vector<double>& r, const std::vector<int>& idx) {
    const double m = subset_mean(r, idx);
    double sse = 0.0;
    for (int i : idx) {
        const double d = r[static_cast<std::size_t>(i)] - m;
        sse += d * d;
    }
    return sse;
}

class TreeBuilder {
public:
    TreeBuilder(const std::vector<FeatureVector>& rows, const std::vector<double>& residuals,
                const GbtParams& params)
        : rows_(rows), residuals_(residuals), params_(params) {}

    Tree build() {
        Tree tree;
        std::vector<int> all(rows_.size());
        std::iota(all.begin(), all.end(), 0);
        grow(tree, std::move(all), 0);
        return tree;
    }

private:
    // returns the index of the created node
    int grow(Tree& tree, std::vector<int> idx, int depth) {
        const int node_index = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        const int n = static_cast<int>(idx.size());
        const double parent_sse = subset_sse(residuals_, idx);
        const double tie_margin = kSplitTieEps * (std::abs(parent_sse) + 1e-12);

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_sse = parent_sse;

        if (depth < params_.max_depth && n >= 2 * params_.min_samples_leaf) {
            for (int f = 0; f < kNumFeatures; ++f) {
                scan_feature(f, idx, tie_margin, best_feature, best_threshold, best_sse);
            }
        }

        if (best_feature < 0) {
            tree.nodes[static_cast<std::size_t>(node_index)].leaf = true;
            tree.nodes[static_cast<std::size_t>(node_index)].value = subset_mean(residuals_, idx);
            return node_index;
        }

        std::vector<int> left_idx, right_idx;
        for (int i : idx) {
            const double v = rows_[static_cast<std::size_t>(i)].values[static_cast<std::size_t>(best_feature)];
            (v < best_threshold ? left_idx : right_idx).push_back(i);
        }
        idx.clear();
        idx.shrink_to_fit();

        const int left = grow(tree, std::move(left_idx), depth + 1);
        const int right = grow(tree, std::move(right_idx), depth + 1);
        TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
        node.leaf = false;
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = left;
        node.right = right;
        return node_index;
    }

    // Exhaustive threshold scan over midpoints of sorted unique values.
    // Candidates are visited feature-ascending then threshold-ascending;
    // the incumbent is replaced only on an improvement larger than the
    // tie margin, which makes the documented tie rule (lowest feature,
    // then lowest threshold) hold under floating-point rounding.
    void scan_feature(int f, const std::vector<int>& idx, double tie_margin, int& best_feature,
                      double& best_threshold, double& best_sse) const {
        const int n = static_cast<int>(idx.size());
        std::vector<std::pair<double, int>> ordered;
        ordered.reserve(static_cast<std::size_t>(n));
        for (int i : idx) {
            ordered.emplace_back(rows_[static_cast<std::size_t>(i)].values[static_cast<std::size_t>(f)], i);
        }
        std::sort(ordered.begin(), ordered.end());

        // prefix sums of residuals in value order
        double left_sum = 0.0, left_sq = 0.0;
        double total_sum = 0.0, total_sq = 0.0;
        for (const auto& [v, i] : ordered) {
            const double r = residuals_[static_cast<std::size_t>(i)];
            total_sum += r;
            total_sq += r * r;
        }

        for (int k = 1; k < n; ++k) {
            const double r = residuals_[static_cast<std::size_t>(ordered[static_cast<std::size_t>(k - 1)].second)];
            left_sum += r;
            left_sq += r * r;
            const double v_prev = ordered[static_cast<std::size_t>(k - 1)].first;
            const double v_next = ordered[static_cast<std::size_t>(k)].first;
            if (v_prev == v_next) continue; // not a boundary between distinct values
            if (k < params_.min_samples_leaf || n - k < params_.min_samples_leaf) continue;
            const double threshold = v_prev + 0.5 * (v_next - v_prev);
            const double right_sum = total_sum - left_sum;
            const double right_sq = total_sq - left_sq;
            const double sse = (left_sq - left_sum * left_sum / k) +
                               (right_sq - right_sum * right_sum / (n - k));
            if (sse < best_sse - tie_margin) {
                best_feature = f;
                best_threshold = threshold;
                best_sse = sse;
            }
        }
    }

    const std::vector<FeatureVector>& rows_;
    const std::vector<double>& residuals_;
    const GbtParams& params_;
};

} // namespace

GbtModel fit(const std::vector<FeatureVector>& rows, const std::vector<double>& targets,
             const GbtParams& params) {
    if (rows.size() != targets.size()) {
        throw ValidationError("gbt fit: rows and targets differ in length");
    }
    if (params.n_trees < 0 || params.max_depth < 1 || params.min_samples_leaf < 1 ||
        params.learning_rate <= 0.0) {
        throw ValidationError("gbt fit: invalid params");
    }
    if (static_cast<int>(rows.size()) < 2 * params.min_samples_leaf) {
        throw DataError("gbt fit: need at least " + std::to_string(2 * params.min_samples_leaf) +
                        " rows, got " + std::to_string(rows.size()));
    }
    for (double y : targets) {
        if (!std::isfinite(y)) throw ValidationError("gbt fit: non-finite target");
    }

    GbtModel model;
    model.params_ = params;

    // column medians for NaN imputation
    for (int f = 0; f < kNumFeatures; ++f) {
        std::vector<double> col;
        col.reserve(rows.size());
        for (const auto& row : rows) {
            const double v = row.values[static_cast<std::size_t>(f)];
            if (!std::isnan(v)) col.push_back(v);
        }
        if (col.empty()) {
            model.medians_[static_cast<std::size_t>(f)] = 0.0;
        } else {
            std::sort(col.begin(), col.end());
            const std::size_t n = col.size();
            model.medians_[static_cast<std::size_t>(f)] =
                n % 2 == 1 ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
        }
    }

    std::vector<FeatureVector> imputed = rows;
    for (auto& row : imputed) {
        for (int f = 0; f < kNumFeatures; ++f) {
            if (std::isnan(row.values[static_cast<std::size_t>(f)])) {
                row.values[static_cast<std::size_t>(f)] = model.medians_[static_cast<std::size_t>(f)];
            }
        }
    }

    const bool constant_target =
        std::all_of(targets.begin(), targets.end(), [&](double y) { return y == targets.front(); });
    if (constant_target) {
        model.base_prediction_ = targets.front();
        model.fitted_ = true;
        return model;
    }

    double base = 0.0;
    for (double y : targets) base += y;
    base /= static_cast<double>(targets.size());
    model.base_prediction_ = base;

    std::vector<double> current(targets.size(), base);
    std::vector<double> residuals(targets.size());
    for (int t = 0; t < params.n_trees; ++t) {
        for (std::size_t i = 0; i < targets.size(); ++i) residuals[i] = targets[i] - current[i];
        Tree tree = TreeBuilder(imputed, residuals, params).build();
        for (std::size_t i = 0; i < targets.size(); ++i) {
            current[i] += params.learning_rate * tree.predict(imputed[i]);
        }
        model.trees_.push_back(std::move(tree));
    }
    model.fitted_ = true;
    return model;
}

double GbtModel::predict(const FeatureVector& x) const {
    if (!fitted_) throw ValidationError("gbt predict: model not fitted");
    FeatureVector z = x;
    for (int f = 0; f < kNumFeatures; ++f) {
        if (std::isnan(z.values[static_cast<std::size_t>(f)])) {
            z.values[static_cast<std::size_t>(f)] = medians_[static_cast<std::size_t>(f)];
        }
    }
    double sum = 0.0;
    for (const auto& tree : trees_) sum += tree.predict(z);
    return base_prediction_ + params_.learning_rate * sum;
}

Date predict_close_date(const GbtModel& model, const Invoice& invoice,
                        const profiles::CustomerProfile& profile, const FiscalCalendar& cal) {
    const double days = model.predict(encode(invoice, profile, cal));
    const std::int64_t rounded = std::llround(std::max(0.0, days));
    return invoice.issue_date.plus_days(rounded);
}

namespace {

json tree_to_json(const Tree& tree, int node) {
    const TreeNode& n = tree.nodes[static_cast<std::size_t>(node)];
    if (n.leaf) {
        return json{{"leaf", json{{"value", n.value}}}};
    }
    return json{{"split", json{{"feature", n.feature},
                               {"threshold", n.threshold},
                               {"left", tree_to_json(tree, n.left)},
                               {"right", tree_to_json(tree, n.right)}}}};
}

int tree_from_json(const json& j, Tree& tree) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (j.contains("leaf")) {
        tree.nodes[static_cast<std::size_t>(index)].leaf = true;
        tree.nodes[static_cast<std::size_t>(index)].value = j.at("leaf").at("value").get<double>();
        return index;
    }
    const json& s = j.at("split");
    const int left = tree_from_json(s.at("left"), tree);
    const int right = tree_from_json(s.at("right"), tree);
    TreeNode& n = tree.nodes[static_cast<std::size_t>(index)];
    n.leaf = false;
    n.feature = s.at("feature").get<int>();
    n.threshold = s.at("threshold").get<double>();
    n.left = left;
    n.right = right;
    return index;
}

} // namespace

std::string GbtModel::serialize() const {
    json j;
    j["model"] = "gbt";
    j["base_prediction"] = base_prediction_;
    j["params"] = {{"n_trees", params_.n_trees},
                   {"max_depth", params_.max_depth},
                   {"learning_rate", params_.learning_rate},
                   {"min_samples_leaf", params_.min_samples_leaf}};
    j["imputation_medians"] = medians_;
    json trees = json::array();
    for (const auto& tree : trees_) trees.push_back(tree_to_json(tree, 0));
    j["trees"] = std::move(trees);
    return j.dump(2);
}

GbtModel GbtModel::deserialize(const std::string& text) {
    json j = json::parse(text);
    if (j.value("model", "") != std::string("gbt")) {
        throw ValidationError("gbt deserialize: not a gbt model record");
    }
    GbtModel model;
    model.base_prediction_ = j.at("base_prediction").get<double>();
    const json& p = j.at("params");
    model.params_.n_trees = p.at("n_trees").get<int>();
    model.params_.max_depth = p.at("max_depth").get<int>();
    model.params_.learning_rate = p.at("learning_rate").get<double>();
    model.params_.min_samples_leaf = p.at("min_samples_leaf").get<int>();
    const auto med = j.at("imputation_medians").get<std::vector<double>>();
    if (med.size() != kNumFeatures) throw ValidationError("gbt deserialize: bad median count");
    std::copy(med.begin(), med.end(), model.medians_.begin());
    for (const auto& tj : j.at("trees")) {
        Tree tree;
        tree_from_json(tj, tree);
        model.trees_.push_back(std::move(tree));
    }
    model.fitted_ = true;
    return model;
}

// ---------------------------------------------------------------------------
// Training data assembly
// ---------------------------------------------------------------------------

profiles::CustomerProfile profile_as_of_issue(const std::vector<Invoice>& customer_history,
                                              const Invoice& invoice) {
    // history strictly before issue: the invoice can never inform its own row
    return profiles::build_profile(customer_history, invoice.issue_date.plus_days(-1));
}

namespace {

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::array<double, 5> profile_fields(const profiles::CustomerProfile& p) {
    return {p.mean_delay_days, p.recency_weighted_delay_days, p.avg_payment, p.payment_std,
            p.recent_speed_to_pay_days};
}

profiles::CustomerProfile fallback_from_samples(const std::array<std::vector<double>, 5>& samples) {
    profiles::CustomerProfile p;
    p.cold_start = true;
    p.n_invoices = 0;
    p.mean_delay_days = median_of(samples[0]);
    p.recency_weighted_delay_days = median_of(samples[1]);
    p.avg_payment = median_of(samples[2]);
    p.payment_std = median_of(samples[3]);
    p.recent_speed_to_pay_days = median_of(samples[4]);
    return p;
}

} // namespace

ProfileSource::ProfileSource(const std::vector<Invoice>& invoices) {
    for (const auto& inv : invoices) by_customer_[inv.customer_id].push_back(inv);

    std::array<std::vector<double>, 5> all_samples;
    std::array<std::array<std::vector<double>, 5>, kNumSegments> segment_samples;
    for (const auto& inv : invoices) {
        if (!inv.closed()) continue;
        try {
            const auto profile = profile_as_of_issue(by_customer_.at(inv.customer_id), inv);
            const auto fields = profile_fields(profile);
            for (std::size_t k = 0; k < fields.size(); ++k) {
                all_samples[k].push_back(fields[k]);
                segment_samples[static_cast<std::size_t>(inv.segment)][k].push_back(fields[k]);
            }
        } catch (const DataError&) {
            // cold row; contributes no samples
        }
    }
    for (int s = 0; s < kNumSegments; ++s) {
        const auto& samples = segment_samples[static_cast<std::size_t>(s)];
        if (samples[0].empty()) continue;
        segment_fallback_[static_cast<std::size_t>(s)] = fallback_from_samples(samples);
        segment_fallback_[static_cast<std::size_t>(s)].segment = static_cast<Segment>(s);
        has_segment_fallback_[static_cast<std::size_t>(s)] = true;
    }
    if (!all_samples[0].empty()) {
        global_fallback_ = fallback_from_samples(all_samples);
        has_global_fallback_ = true;
    }
}

profiles::CustomerProfile ProfileSource::for_invoice(const Invoice& invoice) const {
    const auto it = by_customer_.find(invoice.customer_id);
    if (it != by_customer_.end()) {
        try {
            return profile_as_of_issue(it->second, invoice);
        } catch (const DataError&) {
            // fall through to the cold-start path
        }
    }
    const int seg = static_cast<int>(invoice.segment);
    profiles::CustomerProfile p = has_segment_fallback_[static_cast<std::size_t>(seg)]
                                      ? segment_fallback_[static_cast<std::size_t>(seg)]
                                  : has_global_fallback_ ? global_fallback_
                                                         : profiles::CustomerProfile{};
    p.customer_id = invoice.customer_id;
    p.segment = invoice.segment;
    p.cold_start = true;
    p.n_invoices = 0;
    p.as_of = invoice.issue_date.plus_days(-1);
    return p;
}

TrainingData build_training_data(const std::vector<Invoice>& invoices, const FiscalCalendar& cal) {
    const ProfileSource source(invoices);
    TrainingData data;
    for (const auto& inv : invoices) {
        if (!inv.closed()) continue;
        data.rows.push_back(encode(inv, source.for_invoice(inv), cal));
        data.targets.push_back(static_cast<double>(*inv.payment_date - inv.issue_date));
    }
    return data;
}

} // namespace ledgercast::closure
