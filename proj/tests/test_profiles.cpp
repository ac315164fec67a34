#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ledgercast/profiles.hpp"

#include <cmath>
#include <vector>

using namespace ledgercast;
using namespace ledgercast::profiles;

namespace {

Invoice make_invoice(const char* customer, Segment seg, const char* due, const char* paid,
                     double amount) {
    static int counter = 0;
    Invoice inv;
    inv.invoice_id = "INV-" + std::to_string(++counter);
    inv.customer_id = customer;
    inv.segment = seg;
    inv.due_date = Date::parse_iso(due);
    inv.issue_date = inv.due_date.plus_days(-30);
    inv.amount = Money::from_double(amount);
    if (paid) inv.payment_date = Date::parse_iso(paid);
    inv.payment_terms_days = 30;
    return inv;
}

} // namespace

TEST_CASE("payment_delay is signed days past due") {
    const Invoice late = make_invoice("C", Segment::CSB, "2021-02-01", "2021-02-06", 10.0);
    const Invoice early = make_invoice("C", Segment::CSB, "2021-03-01", "2021-02-26", 10.0);
    const Invoice open = make_invoice("C", Segment::CSB, "2021-03-01", nullptr, 10.0);
    CHECK(payment_delay(late) == 5);
    CHECK(payment_delay(early) == -3);
    CHECK_THROWS_AS(payment_delay(open), DataError);
}

TEST_CASE("average and std of payments") {
    const std::vector<double> p{100.0, 200.0, 50.0};
    CHECK(average_payment(p) == doctest::Approx(350.0 / 3.0).epsilon(1e-12));
    // population variance around 116.66..: (16.6^2 + 83.3^2 + 66.6^2)/3
    const double mean = 350.0 / 3.0;
    double var = 0.0;
    for (double v : p) var += (v - mean) * (v - mean);
    var /= 3.0;
    CHECK(payment_std(p) == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
    CHECK(payment_std({42.0}) == 0.0);
    CHECK_THROWS_AS(average_payment({}), DataError);
    CHECK_THROWS_AS(payment_std({}), DataError);
}

TEST_CASE("recent_speed_to_pay windows on the latest payment") {
    std::vector<Invoice> invs;
    invs.push_back(make_invoice("C", Segment::CSB, "2021-02-01", "2021-02-06", 100.0)); // +5
    invs.push_back(make_invoice("C", Segment::CSB, "2021-03-01", "2021-02-26", 200.0)); // -3
    invs.push_back(make_invoice("C", Segment::CSB, "2021-05-01", "2021-05-11", 50.0));  // +10

    // Latest payment 2021-05-11; the 2021-02-06 payment is 94 days before it,
    // outside the 90-day window, so only the -3 and +10 delays remain.
    CHECK(recent_speed_to_pay(invs, Date::parse_iso("2021-06-01")) ==
          doctest::Approx(3.5).epsilon(1e-12));

    // With as_of before the May payment, the window re-anchors on 2021-02-26
    // and both February payments fall inside it.
    CHECK(recent_speed_to_pay(invs, Date::parse_iso("2021-03-01")) ==
          doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(recent_speed_to_pay(invs, Date::parse_iso("2021-01-01")), DataError);
}

TEST_CASE("build_profile matches hand-computed features") {
    std::vector<Invoice> invs;
    invs.push_back(make_invoice("C-9", Segment::Commercial, "2021-02-01", "2021-02-06", 100.0));
    invs.push_back(make_invoice("C-9", Segment::Commercial, "2021-03-01", "2021-02-26", 200.0));
    invs.push_back(make_invoice("C-9", Segment::Commercial, "2021-05-01", "2021-05-11", 50.0));
    invs.push_back(make_invoice("C-9", Segment::Commercial, "2021-06-01", nullptr, 75.0)); // open
    invs.push_back(make_invoice("C-9", Segment::Commercial, "2021-06-01", "2021-07-04", 75.0));

    const Date as_of = Date::parse_iso("2021-06-01");
    const CustomerProfile p = build_profile(invs, as_of);

    // Open invoice and the July payment are both invisible at as_of.
    CHECK(p.n_invoices == 3);
    CHECK(p.customer_id == "C-9");
    CHECK(p.segment == Segment::Commercial);
    CHECK(p.as_of == as_of);
    CHECK_FALSE(p.cold_start);

    CHECK(p.mean_delay_days == doctest::Approx(4.0).epsilon(1e-12)); // (5 - 3 + 10) / 3
    CHECK(p.avg_payment == doctest::Approx(350.0 / 3.0).epsilon(1e-12));
    CHECK(p.recent_speed_to_pay_days == doctest::Approx(3.5).epsilon(1e-12));

    // Exponential recency weights with a 90-day half-life on payment age.
    const double lambda = std::log(2.0) / 90.0;
    const double w1 = std::exp(-lambda * 115.0); // paid 2021-02-06
    const double w2 = std::exp(-lambda * 95.0);  // paid 2021-02-26
    const double w3 = std::exp(-lambda * 21.0);  // paid 2021-05-11
    const double expected = (w1 * 5.0 + w2 * -3.0 + w3 * 10.0) / (w1 + w2 + w3);
    CHECK(p.recency_weighted_delay_days == doctest::Approx(expected).epsilon(1e-12));

    // Recent payments dominate the weighted delay: it sits above the plain mean.
    CHECK(p.recency_weighted_delay_days > p.mean_delay_days);

    CHECK_THROWS_AS(build_profile(invs, Date::parse_iso("2021-01-01")), DataError);
}

TEST_CASE("build_all_profiles fills cold starts from segment medians") {
    std::vector<Invoice> invs;
    // Three warm Commercial customers with distinct mean delays 2, 5, 9.
    invs.push_back(make_invoice("W-1", Segment::Commercial, "2021-02-01", "2021-02-03", 80.0));
    invs.push_back(make_invoice("W-2", Segment::Commercial, "2021-02-01", "2021-02-06", 120.0));
    invs.push_back(make_invoice("W-3", Segment::Commercial, "2021-02-01", "2021-02-10", 60.0));
    // One warm CSB customer.
    invs.push_back(make_invoice("S-1", Segment::CSB, "2021-02-01", "2021-02-02", 30.0));
    // Cold: only an open invoice (Commercial) and only a future payment (CSB).
    invs.push_back(make_invoice("X-1", Segment::Commercial, "2021-03-01", nullptr, 40.0));
    invs.push_back(make_invoice("X-2", Segment::CSB, "2021-03-01", "2021-09-01", 40.0));

    const Date as_of = Date::parse_iso("2021-06-01");
    const auto profiles = build_all_profiles(invs, as_of);
    REQUIRE(profiles.size() == 6);

    CHECK_FALSE(profiles.at("W-2").cold_start);
    CHECK(profiles.at("W-2").mean_delay_days == doctest::Approx(5.0));

    const CustomerProfile& x1 = profiles.at("X-1");
    CHECK(x1.cold_start);
    CHECK(x1.n_invoices == 0);
    CHECK(x1.segment == Segment::Commercial);
    // Median of Commercial delays {2, 5, 9} and amounts {80, 120, 60}.
    CHECK(x1.mean_delay_days == doctest::Approx(5.0));
    CHECK(x1.avg_payment == doctest::Approx(80.0));

    const CustomerProfile& x2 = profiles.at("X-2");
    CHECK(x2.cold_start);
    CHECK(x2.mean_delay_days == doctest::Approx(1.0)); // lone CSB warm customer

    // A segment with no warm customer falls back to global medians.
    std::vector<Invoice> lonely;
    lonely.push_back(make_invoice("W-1", Segment::CSB, "2021-02-01", "2021-02-04", 50.0));
    lonely.push_back(make_invoice("X-9", Segment::Enterprise, "2021-03-01", nullptr, 10.0));
    const auto fallback = build_all_profiles(lonely, as_of);
    CHECK(fallback.at("X-9").cold_start);
    CHECK(fallback.at("X-9").mean_delay_days == doctest::Approx(3.0));

    // No closed invoices anywhere: all-zero cold profiles.
    std::vector<Invoice> none;
    none.push_back(make_invoice("X-5", Segment::CSB, "2021-03-01", nullptr, 10.0));
    const auto zeros = build_all_profiles(none, as_of);
    CHECK(zeros.at("X-5").cold_start);
    CHECK(zeros.at("X-5").mean_delay_days == 0.0);
    CHECK(zeros.at("X-5").avg_payment == 0.0);
}
