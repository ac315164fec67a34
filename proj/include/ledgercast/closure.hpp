#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ledgercast/core.hpp"
#include "ledgercast/profiles.hpp"

namespace ledgercast::closure {

// Fixed, versioned feature layout. Segment is one-hot encoded in the
// order (CSB, Commercial, Enterprise); cold_start enters as a 0/1 flag.
inline constexpr int kNumFeatures = 13;

const std::array<std::string, kNumFeatures>& feature_names();

struct FeatureVector {
    std::array<double, kNumFeatures> values{};
};

// Deterministic encoding of one invoice plus its customer profile.
// The profile must not post-date the invoice's issue date (zero allowed
// skew); cold-start fallback rows are exempt since their values are
// population medians rather than a customer history.
FeatureVector encode(const Invoice& invoice, const profiles::CustomerProfile& profile,
                     const FiscalCalendar& cal);

struct GbtParams {
    int n_trees = 60;
    int max_depth = 3;
    double learning_rate = 0.1;
    int min_samples_leaf = 3;
};

// Axis-aligned regression tree stored as a flat node array (root at 0).
struct TreeNode {
    bool leaf = true;
    int feature = -1;
    double threshold = 0.0;
    double value = 0.0; // leaf only
    int left = -1;
    int right = -1;
};

struct Tree {
    std::vector<TreeNode> nodes;
    double predict(const FeatureVector& x) const;
    bool operator==(const Tree&) const = default;
};

// Relative margin below which two candidate split SSEs count as tied;
// ties resolve to the lowest feature index, then the lowest threshold.
inline constexpr double kSplitTieEps = 1e-9;

// Squared-error gradient boosting: prediction = base + learning_rate *
// sum of per-round trees fitted to residuals. Splits are chosen by
// exhaustive scan over midpoints of sorted unique feature values.
class GbtModel {
public:
    double predict(const FeatureVector& x) const;

    bool fitted() const { return fitted_; }
    double base_prediction() const { return base_prediction_; }
    const std::vector<Tree>& trees() const { return trees_; }
    const GbtParams& params() const { return params_; }
    const std::array<double, kNumFeatures>& imputation_medians() const { return medians_; }

    std::string serialize() const; // structured text (JSON)
    static GbtModel deserialize(const std::string& text);

    friend GbtModel fit(const std::vector<FeatureVector>& rows, const std::vector<double>& targets,
                        const GbtParams& params);

private:
    bool fitted_ = false;
    double base_prediction_ = 0.0;
    GbtParams params_;
    std::vector<Tree> trees_;
    std::array<double, kNumFeatures> medians_{};
};

// Boosted fit on (features, days-to-close) rows. Missing numerics (NaN)
// are imputed with the training-set median, which is recorded in the
// model. Throws DataError when rows < 2 * min_samples_leaf and
// ValidationError on non-finite targets.
GbtModel fit(const std::vector<FeatureVector>& rows, const std::vector<double>& targets,
             const GbtParams& params);

// issue_date + round(max(0, predicted days-to-close)); never predicts
// closure before issue.
Date predict_close_date(const GbtModel& model, const Invoice& invoice,
                        const profiles::CustomerProfile& profile, const FiscalCalendar& cal);

// Per-invoice profile lookup shared by training and scoring: each invoice
// sees its customer's history strictly before its own issue date, so the
// row can never be informed by its own payment. Customers with no prior
// closed history fall back to segment-median field values (cold_start = 1,
// medians over the warm per-invoice profiles; global medians when a whole
// segment is cold).
class ProfileSource {
public:
    explicit ProfileSource(const std::vector<Invoice>& invoices);
    profiles::CustomerProfile for_invoice(const Invoice& invoice) const;

private:
    std::map<std::string, std::vector<Invoice>> by_customer_;
    std::array<profiles::CustomerProfile, kNumSegments> segment_fallback_{};
    std::array<bool, kNumSegments> has_segment_fallback_{};
    profiles::CustomerProfile global_fallback_{};
    bool has_global_fallback_ = false;
};

// Training rows for the closure model: one row per closed invoice, in
// input order, encoded against ProfileSource profiles.
struct TrainingData {
    std::vector<FeatureVector> rows;
    std::vector<double> targets; // days from issue to payment
};

TrainingData build_training_data(const std::vector<Invoice>& invoices, const FiscalCalendar& cal);

// Profile of one customer as seen from a specific invoice's issue date.
profiles::CustomerProfile profile_as_of_issue(const std::vector<Invoice>& customer_history,
                                              const Invoice& invoice);

} // namespace ledgercast::closure
