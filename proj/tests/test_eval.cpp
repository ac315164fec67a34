#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ledgercast/eval.hpp"
#include "ledgercast/errors.hpp"
#include "ledgercast/rng.hpp"

#include <cmath>
#include <numeric>
#include <vector>

using namespace ledgercast;
using eval::Fold;
using eval::FoldScore;

namespace {

// Straightforward reference implementations for cross-checking.
double ref_weighted_mean(const std::vector<double>& x, const std::vector<double>& w) {
    double sw = 0.0, s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s += w[i] * x[i];
        sw += w[i];
    }
    return s / sw;
}

double ref_weighted_std(const std::vector<double>& x, const std::vector<double>& w) {
    const double m = ref_weighted_mean(x, w);
    double sw = 0.0, s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s += w[i] * (x[i] - m) * (x[i] - m);
        sw += w[i];
    }
    return std::sqrt(s / sw);
}

std::vector<FoldScore> make_scores(const std::vector<double>& mapes,
                                   const std::vector<double>& weights) {
    std::vector<FoldScore> out;
    for (std::size_t i = 0; i < mapes.size(); ++i) {
        out.push_back({static_cast<int>(i) + 1, mapes[i], weights[i]});
    }
    return out;
}

} // namespace

TEST_CASE("mape matches hand computation") {
    const WeeklySeries actual(10, {100.0, 200.0, 50.0});
    const WeeklySeries pred(10, {110.0, 190.0, 60.0});
    // |10|/100 + |10|/200 + |10|/50 = 0.10 + 0.05 + 0.20, mean = 0.35/3
    CHECK(eval::mape(actual, pred) == doctest::Approx(100.0 * 0.35 / 3.0).epsilon(1e-12));
    CHECK(eval::mape(actual, actual) == 0.0);

    CHECK_THROWS_AS(eval::mape(actual, WeeklySeries(10, {1.0, 2.0})), ValidationError);
    CHECK_THROWS_AS(eval::mape(actual, WeeklySeries(11, {1.0, 2.0, 3.0})), ValidationError);
    CHECK_THROWS_AS(eval::mape(WeeklySeries(10, {0.0, 1.0, 2.0}), pred), NumericalError);
}

TEST_CASE("variance_weighted_score reproduces the worked example") {
    const auto scores = make_scores({10.0, 20.0, 30.0}, {0.2, 0.3, 0.5});
    // weighted mean = 2 + 6 + 15 = 23
    // weighted var  = 0.2*169 + 0.3*9 + 0.5*49 = 33.8 + 2.7 + 24.5 = 61
    const double mean = 23.0;
    const double sd = std::sqrt(61.0);
    CHECK(eval::variance_weighted_score(scores, 0.5) ==
          doctest::Approx(0.5 * mean + 0.5 * sd).epsilon(1e-12));
    CHECK(eval::variance_weighted_score(scores, 1.0) == doctest::Approx(mean).epsilon(1e-12));
    CHECK(eval::variance_weighted_score(scores, 0.0) == doctest::Approx(sd).epsilon(1e-12));
}

TEST_CASE("variance_weighted_score is affine in alpha") {
    Rng rng(404);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> mapes, weights;
        const int n = 2 + static_cast<int>(rng.below(6));
        double sw = 0.0;
        for (int i = 0; i < n; ++i) {
            mapes.push_back(rng.uniform() * 40.0);
            weights.push_back(0.1 + rng.uniform());
            sw += weights.back();
        }
        for (double& w : weights) w /= sw;
        const auto scores = make_scores(mapes, weights);

        const double at0 = eval::variance_weighted_score(scores, 0.0);
        const double at1 = eval::variance_weighted_score(scores, 1.0);
        for (double a : {0.1, 0.25, 0.5, 0.9}) {
            const double expected = a * at1 + (1.0 - a) * at0;
            CHECK(eval::variance_weighted_score(scores, a) ==
                  doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("variance_weighted_score validates inputs") {
    CHECK_THROWS_AS(eval::variance_weighted_score({}, 0.5), ValidationError);
    CHECK_THROWS_AS(eval::variance_weighted_score(make_scores({1.0}, {0.5}), 0.5),
                    ValidationError); // weights must sum to 1
    CHECK_THROWS_AS(eval::variance_weighted_score(make_scores({1.0}, {1.0}), 1.5),
                    ValidationError);
}

TEST_CASE("custom_loss reduces to weighted mean and weighted std") {
    Rng rng(1234);
    for (int rep = 0; rep < 100; ++rep) {
        const int n = 2 + static_cast<int>(rng.below(8));
        std::vector<double> errors, w;
        for (int i = 0; i < n; ++i) {
            errors.push_back(rng.uniform() * 25.0);
            w.push_back(0.05 + rng.uniform());
        }
        eval::LossWeights lw;
        lw.w = w;

        lw.alpha = 1.0;
        CHECK(eval::custom_loss(errors, lw) ==
              doctest::Approx(ref_weighted_mean(errors, w)).epsilon(1e-12));

        lw.alpha = 0.0;
        CHECK(eval::custom_loss(errors, lw) ==
              doctest::Approx(ref_weighted_std(errors, w)).epsilon(1e-12));

        lw.alpha = 0.3;
        CHECK(eval::custom_loss(errors, lw) ==
              doctest::Approx(0.3 * ref_weighted_mean(errors, w) +
                              0.7 * ref_weighted_std(errors, w))
                  .epsilon(1e-12));
    }

    eval::LossWeights lw;
    lw.w = {1.0, 1.0};
    CHECK_THROWS_AS(eval::custom_loss({1.0}, lw), ValidationError);
    lw.w = {1.0, -1.0};
    CHECK_THROWS_AS(eval::custom_loss({1.0, 2.0}, lw), ValidationError);
}

TEST_CASE("sliding_folds spans and weights") {
    // 60-week series, 3 folds, horizon 10, min_train 20.
    const WeeklySeries series(1, std::vector<double>(60, 1.0));
    const auto folds = eval::sliding_folds(series, 3, 10, 20);
    REQUIRE(folds.size() == 3);

    // Last fold tests the final block; earlier folds step back one horizon.
    CHECK(folds[2].test_end_week == 60);
    CHECK(folds[2].test_start_week == 51);
    CHECK(folds[2].train_end_week == 50);
    CHECK(folds[1].test_start_week == 41);
    CHECK(folds[1].train_end_week == 40);
    CHECK(folds[0].test_start_week == 31);
    CHECK(folds[0].train_end_week == 30);
    for (const auto& f : folds) {
        CHECK(f.train_start_week == 1);
        CHECK(f.test_start_week == f.train_end_week + 1);
        CHECK(f.test_end_week == f.test_start_week + 9);
    }

    // Default weights f / sum(1..F).
    CHECK(folds[0].weight == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(folds[1].weight == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
    CHECK(folds[2].weight == doctest::Approx(3.0 / 6.0).epsilon(1e-12));

    // First fold training span would be 20 weeks: exactly min_train passes,
    // one week less throws.
    CHECK_NOTHROW(eval::sliding_folds(series.slice(1, 50), 3, 10, 20));
    CHECK_THROWS_AS(eval::sliding_folds(series.slice(1, 49), 3, 10, 20), DataError);
    CHECK_THROWS_AS(eval::sliding_folds(series, 0, 10, 20), ValidationError);
    CHECK_THROWS_AS(eval::sliding_folds(series, 3, 0, 20), ValidationError);
}

TEST_CASE("final_score averages window scores") {
    CHECK(eval::final_score({4.0, 6.0}) == doctest::Approx(5.0));
    CHECK(eval::final_score({7.25}) == doctest::Approx(7.25));
    CHECK_THROWS_AS(eval::final_score({}), ValidationError);
}

TEST_CASE("accuracy_uplift sign convention") {
    CHECK(eval::accuracy_uplift(10.0, 9.0) == doctest::Approx(10.0));
    CHECK(eval::accuracy_uplift(10.0, 11.0) == doctest::Approx(-10.0));
    CHECK(eval::accuracy_uplift(8.0, 8.0) == 0.0);
    CHECK_THROWS_AS(eval::accuracy_uplift(0.0, 1.0), ValidationError);
}

TEST_CASE("payment deviation summary per segment") {
    auto make = [](const char* id, Segment seg, const char* due, const char* paid) {
        Invoice inv;
        inv.invoice_id = id;
        inv.customer_id = "C";
        inv.segment = seg;
        inv.issue_date = Date::parse_iso("2021-01-04");
        inv.due_date = Date::parse_iso(due);
        inv.amount = Money::parse("10.00");
        if (paid) inv.payment_date = Date::parse_iso(paid);
        return inv;
    };

    std::vector<Invoice> invoices;
    invoices.push_back(make("a", Segment::CSB, "2021-02-01", "2021-02-04")); // +3
    invoices.push_back(make("b", Segment::CSB, "2021-02-01", "2021-01-29")); // -3
    invoices.push_back(make("c", Segment::CSB, "2021-02-01", "2021-02-07")); // +6
    invoices.push_back(make("d", Segment::Enterprise, "2021-02-01", "2021-02-11")); // +10
    invoices.push_back(make("e", Segment::Enterprise, "2021-02-01", nullptr)); // open, skipped

    CHECK(eval::payment_deviation(invoices[0]) == 3);
    CHECK(eval::payment_deviation(invoices[1]) == -3);
    CHECK_THROWS_AS(eval::payment_deviation(invoices[4]), DataError);

    const auto summary = eval::payment_deviation_summary(invoices);
    REQUIRE(summary.size() == 2);

    const auto& csb = summary[0];
    CHECK(csb.segment == Segment::CSB);
    CHECK(csb.n == 3);
    CHECK(csb.mean_delta == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(csb.mean_abs_delta == doctest::Approx(4.0).epsilon(1e-12));
    // population std of {3,-3,6} around mean 2: sqrt((1+25+16)/3)
    CHECK(csb.std_delta == doctest::Approx(std::sqrt(14.0)).epsilon(1e-12));

    const auto& ent = summary[1];
    CHECK(ent.segment == Segment::Enterprise);
    CHECK(ent.n == 1);
    CHECK(ent.mean_delta == doctest::Approx(10.0));
    CHECK(ent.std_delta == 0.0);
}
