#pragma once

#include <map>
#include <string>
#include <vector>

#include "ledgercast/core.hpp"

namespace ledgercast::profiles {

// Behavioral attributes of one customer, computed from closed invoices
// with payment_date <= as_of. Cold-start customers (no usable history)
// carry segment-median values and the cold_start flag.
struct CustomerProfile {
    std::string customer_id;
    Segment segment = Segment::CSB;
    double mean_delay_days = 0.0;
    double recency_weighted_delay_days = 0.0;
    double avg_payment = 0.0;
    double payment_std = 0.0;
    double recent_speed_to_pay_days = 0.0;
    int n_invoices = 0;
    Date as_of;
    bool cold_start = false;
};

// Signed payment delay in whole days (payment - due); negative = early.
// Throws DataError on an open invoice.
int payment_delay(const Invoice& invoice);

// Arithmetic mean of payment amounts. Throws DataError on empty input.
double average_payment(const std::vector<double>& payments);

// Population standard deviation (divisor N). Throws DataError on empty input.
double payment_std(const std::vector<double>& payments);

// Mean delay over invoices whose payment date lies within the 90 days
// ending at the customer's most recent payment (window anchored at the
// latest payment, not at as_of). Throws DataError without closed invoices.
double recent_speed_to_pay(const std::vector<Invoice>& invoices, Date as_of);

inline constexpr int kRecencyWindowDays = 90;

// Half-life of the recency weights applied to delays, in days.
inline constexpr double kRecencyHalfLifeDays = 90.0;

// Profile from one customer's invoices, using only closed invoices with
// payment_date <= as_of. Throws DataError when no such invoice exists
// (cold-start handling lives in build_all_profiles, which knows the
// segment population).
CustomerProfile build_profile(const std::vector<Invoice>& invoices, Date as_of);

// Profiles for every customer present in `invoices`. Customers without
// usable history receive segment-median values flagged cold_start; if a
// whole segment is empty, global medians; if nothing is closed at all,
// zeros.
std::map<std::string, CustomerProfile> build_all_profiles(const std::vector<Invoice>& invoices,
                                                          Date as_of);

} // namespace ledgercast::profiles
