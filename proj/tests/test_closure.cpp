#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ledgercast/closure.hpp"
#include "ledgercast/rng.hpp"

#include "oracle_gbt.hpp"

#include <cmath>
#include <limits>
#include <vector>

using namespace ledgercast;
using namespace ledgercast::closure;

namespace {

// Random feature rows drawn from a coarse grid so duplicate values (and
// therefore skipped split boundaries) actually occur.
std::vector<FeatureVector> random_rows(Rng& rng, int n, int active_features) {
    std::vector<FeatureVector> rows(static_cast<std::size_t>(n));
    for (auto& row : rows) {
        for (int f = 0; f < active_features; ++f) {
            row.values[static_cast<std::size_t>(f)] =
                static_cast<double>(rng.below(12)) * 0.5 - 1.0;
        }
    }
    return rows;
}

std::vector<double> random_targets(Rng& rng, int n) {
    std::vector<double> y(static_cast<std::size_t>(n));
    for (double& v : y) v = rng.normal() * 4.0 + 10.0;
    return y;
}

double training_mse(const std::vector<FeatureVector>& rows, const std::vector<double>& targets,
                    const GbtModel& model, std::size_t n_trees) {
    double sse = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double pred = model.base_prediction();
        for (std::size_t t = 0; t < n_trees; ++t) {
            pred += model.params().learning_rate * model.trees()[t].predict(rows[i]);
        }
        sse += (targets[i] - pred) * (targets[i] - pred);
    }
    return sse / static_cast<double>(rows.size());
}

profiles::CustomerProfile warm_profile(Date as_of) {
    profiles::CustomerProfile p;
    p.customer_id = "C-1";
    p.segment = Segment::Commercial;
    p.mean_delay_days = 4.0;
    p.recency_weighted_delay_days = 5.5;
    p.avg_payment = 120.0;
    p.payment_std = 30.0;
    p.recent_speed_to_pay_days = 3.0;
    p.n_invoices = 7;
    p.as_of = as_of;
    return p;
}

Invoice sample_invoice() {
    Invoice inv;
    inv.invoice_id = "INV-1";
    inv.customer_id = "C-1";
    inv.segment = Segment::Commercial;
    inv.issue_date = Date::parse_iso("2020-11-02"); // fiscal week 44, Q4
    inv.due_date = inv.issue_date.plus_days(30);
    inv.amount = Money::parse("250.00");
    inv.payment_terms_days = 30;
    return inv;
}

} // namespace

TEST_CASE("encode lays out the fixed feature vector") {
    const FiscalCalendar cal(Date::parse_iso("2020-01-06"), 2020);
    const Invoice inv = sample_invoice();
    const auto prof = warm_profile(inv.issue_date.plus_days(-1));

    const FeatureVector x = encode(inv, prof, cal);
    CHECK(feature_names().size() == kNumFeatures);
    CHECK(x.values[0] == 250.0);
    CHECK(x.values[1] == 30.0);
    CHECK(x.values[2] == 4.0);
    CHECK(x.values[3] == 5.5);
    CHECK(x.values[4] == 120.0);
    CHECK(x.values[5] == 30.0);
    CHECK(x.values[6] == 3.0);
    CHECK(x.values[7] == cal.week_of(inv.issue_date).week_in_quarter);
    CHECK(x.values[8] == 1.0); // week 44 is Q4
    CHECK(x.values[9] == 0.0);
    CHECK(x.values[10] == 1.0);
    CHECK(x.values[11] == 0.0);
    CHECK(x.values[12] == 0.0);

    // A profile computed after issue would leak the future.
    auto stale = prof;
    stale.as_of = inv.issue_date.plus_days(1);
    CHECK_THROWS_AS(encode(inv, stale, cal), ValidationError);

    // Cold-start fallbacks are population medians, exempt from the check.
    stale.cold_start = true;
    CHECK(encode(inv, stale, cal).values[12] == 1.0);
}

TEST_CASE("single-tree splits match the brute-force oracle") {
    Rng rng(20260815);
    for (int rep = 0; rep < 40; ++rep) {
        const int m = 1 + static_cast<int>(rng.below(4));
        const int n = 2 * m + static_cast<int>(rng.below(40));
        const auto rows = random_rows(rng, n, 4);
        const auto targets = random_targets(rng, n);

        GbtParams params;
        params.n_trees = 1;
        params.max_depth = 1 + static_cast<int>(rng.below(2));
        params.learning_rate = 1.0;
        params.min_samples_leaf = m;

        const GbtModel model = fit(rows, targets, params);
        REQUIRE(model.trees().size() == 1);

        std::vector<double> residuals(targets.size());
        for (std::size_t i = 0; i < targets.size(); ++i) {
            residuals[i] = targets[i] - model.base_prediction();
        }
        CHECK(oracle::check_tree(model.trees()[0], rows, residuals, params) == 0);
    }
}

TEST_CASE("boosting reduces training error monotonically") {
    Rng rng(99);
    for (int rep = 0; rep < 5; ++rep) {
        const int n = 40;
        const auto rows = random_rows(rng, n, 5);
        const auto targets = random_targets(rng, n);

        GbtParams params;
        params.n_trees = 50;
        params.max_depth = 3;
        params.learning_rate = 0.1;
        params.min_samples_leaf = 2;

        const GbtModel model = fit(rows, targets, params);
        double prev = training_mse(rows, targets, model, 0);
        for (std::size_t t = 1; t <= model.trees().size(); ++t) {
            const double cur = training_mse(rows, targets, model, t);
            CHECK(cur <= prev + 1e-9 * (1.0 + prev));
            prev = cur;
        }
        CHECK(prev < training_mse(rows, targets, model, 0));
    }
}

TEST_CASE("leaves respect min_samples_leaf") {
    Rng rng(7);
    const auto rows = random_rows(rng, 50, 4);
    const auto targets = random_targets(rng, 50);

    GbtParams params;
    params.n_trees = 10;
    params.max_depth = 4;
    params.min_samples_leaf = 5;

    const GbtModel model = fit(rows, targets, params);
    for (const auto& tree : model.trees()) {
        std::vector<int> count(tree.nodes.size(), 0);
        for (const auto& row : rows) {
            int node = 0;
            while (!tree.nodes[static_cast<std::size_t>(node)].leaf) {
                const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
                node = row.values[static_cast<std::size_t>(nd.feature)] < nd.threshold ? nd.left
                                                                                       : nd.right;
            }
            ++count[static_cast<std::size_t>(node)];
        }
        for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
            if (tree.nodes[i].leaf) CHECK(count[i] >= params.min_samples_leaf);
        }
    }
}

TEST_CASE("constant targets collapse to the base prediction") {
    Rng rng(3);
    const auto rows = random_rows(rng, 12, 3);
    const std::vector<double> targets(12, 17.25);
    const GbtModel model = fit(rows, targets, GbtParams{});
    CHECK(model.trees().empty());
    CHECK(model.base_prediction() == 17.25);
    CHECK(model.predict(rows[0]) == 17.25);
}

TEST_CASE("NaN features are median-imputed") {
    Rng rng(11);
    auto rows = random_rows(rng, 20, 3);
    const auto targets = random_targets(rng, 20);
    rows[4].values[1] = std::numeric_limits<double>::quiet_NaN();

    const GbtModel model = fit(rows, targets, GbtParams{});
    CHECK(std::isfinite(model.imputation_medians()[1]));

    FeatureVector with_nan = rows[7];
    with_nan.values[2] = std::numeric_limits<double>::quiet_NaN();
    FeatureVector imputed = rows[7];
    imputed.values[2] = model.imputation_medians()[2];
    CHECK(model.predict(with_nan) == model.predict(imputed));
}

TEST_CASE("fit validates its inputs") {
    Rng rng(5);
    const auto rows = random_rows(rng, 10, 3);
    auto targets = random_targets(rng, 10);

    CHECK_THROWS_AS(fit(rows, random_targets(rng, 9), GbtParams{}), ValidationError);

    GbtParams bad;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(fit(rows, targets, bad), ValidationError);
    bad = GbtParams{};
    bad.max_depth = 0;
    CHECK_THROWS_AS(fit(rows, targets, bad), ValidationError);

    GbtParams big_leaf;
    big_leaf.min_samples_leaf = 6; // needs 12 rows
    CHECK_THROWS_AS(fit(rows, targets, big_leaf), DataError);

    targets[3] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(fit(rows, targets, GbtParams{}), ValidationError);

    CHECK_THROWS_AS(GbtModel{}.predict(rows[0]), ValidationError);
}

TEST_CASE("serialize round trip preserves predictions exactly") {
    Rng rng(21);
    const auto rows = random_rows(rng, 30, 5);
    const auto targets = random_targets(rng, 30);
    const GbtModel model = fit(rows, targets, GbtParams{});

    const std::string text = model.serialize();
    const GbtModel back = GbtModel::deserialize(text);
    CHECK(back.serialize() == text);
    for (const auto& row : rows) CHECK(back.predict(row) == model.predict(row));

    CHECK_THROWS_AS(GbtModel::deserialize("{\"model\":\"other\"}"), ValidationError);
}

TEST_CASE("predict_close_date clamps at issue and rounds") {
    const FiscalCalendar cal(Date::parse_iso("2020-01-06"), 2020);
    const Invoice inv = sample_invoice();
    const auto prof = warm_profile(inv.issue_date.plus_days(-1));

    // Constant-target models pin the prediction, making the date exact.
    Rng rng(2);
    const auto rows = random_rows(rng, 10, 3);
    const GbtModel plus9 = fit(rows, std::vector<double>(10, 9.4), GbtParams{});
    CHECK(predict_close_date(plus9, inv, prof, cal) == inv.issue_date.plus_days(9));

    const GbtModel plus10 = fit(rows, std::vector<double>(10, 9.6), GbtParams{});
    CHECK(predict_close_date(plus10, inv, prof, cal) == inv.issue_date.plus_days(10));

    const GbtModel negative = fit(rows, std::vector<double>(10, -3.0), GbtParams{});
    CHECK(predict_close_date(negative, inv, prof, cal) == inv.issue_date);
}

TEST_CASE("ProfileSource sees history strictly before issue") {
    const FiscalCalendar cal(Date::parse_iso("2020-01-06"), 2020);

    auto closed = [](const char* id, const char* cust, Segment seg, const char* issue, int terms,
                     int delay, double amount) {
        Invoice inv;
        inv.invoice_id = id;
        inv.customer_id = cust;
        inv.segment = seg;
        inv.issue_date = Date::parse_iso(issue);
        inv.due_date = inv.issue_date.plus_days(terms);
        inv.payment_date = inv.due_date.plus_days(delay);
        inv.amount = Money::from_double(amount);
        inv.payment_terms_days = terms;
        return inv;
    };

    std::vector<Invoice> invoices;
    invoices.push_back(closed("A1", "C-1", Segment::CSB, "2020-02-03", 15, 2, 100.0));
    invoices.push_back(closed("A2", "C-1", Segment::CSB, "2020-04-06", 15, 6, 140.0));
    invoices.push_back(closed("A3", "C-1", Segment::CSB, "2020-07-06", 15, 4, 80.0));
    invoices.push_back(closed("B1", "C-2", Segment::CSB, "2020-03-02", 30, 10, 300.0));
    invoices.push_back(closed("B2", "C-2", Segment::CSB, "2020-06-01", 30, 8, 320.0));

    const ProfileSource source(invoices);

    // Warm lookup equals the direct strictly-before-issue profile.
    const auto direct = profile_as_of_issue({invoices[0], invoices[1], invoices[2]}, invoices[2]);
    const auto via_source = source.for_invoice(invoices[2]);
    CHECK_FALSE(via_source.cold_start);
    CHECK(via_source.mean_delay_days == direct.mean_delay_days);
    CHECK(via_source.avg_payment == direct.avg_payment);
    CHECK(via_source.as_of == invoices[2].issue_date.plus_days(-1));

    // First invoice of a customer has no prior history: cold fallback.
    const auto cold = source.for_invoice(invoices[0]);
    CHECK(cold.cold_start);
    CHECK(cold.n_invoices == 0);

    // Training rows: one per closed invoice, targets = issue-to-payment days.
    const TrainingData data = build_training_data(invoices, cal);
    REQUIRE(data.rows.size() == invoices.size());
    REQUIRE(data.targets.size() == invoices.size());
    for (std::size_t i = 0; i < invoices.size(); ++i) {
        CHECK(data.targets[i] ==
              static_cast<double>(*invoices[i].payment_date - invoices[i].issue_date));
    }
    // Row A3 must carry the strictly-prior profile features.
    CHECK(data.rows[2].values[2] == direct.mean_delay_days);

    // Open invoices contribute no training row.
    Invoice open = invoices[0];
    open.invoice_id = "A4";
    open.payment_date.reset();
    auto with_open = invoices;
    with_open.push_back(open);
    CHECK(build_training_data(with_open, cal).rows.size() == invoices.size());
}
