#include "ledgercast/profiles.hpp"

#include <algorithm>
#include <cmath>

namespace ledgercast::profiles {

int payment_delay(const Invoice& invoice) {
    if (!invoice.closed()) {
        throw DataError("invoice " + invoice.invoice_id + " is open; payment delay undefined");
    }
    return static_cast<int>(*invoice.payment_date - invoice.due_date);
}

double average_payment(const std::vector<double>& payments) {
    if (payments.empty()) throw DataError("average_payment: empty payment list");
    double sum = 0.0;
    for (double p : payments) sum += p;
    return sum / static_cast<double>(payments.size());
}

double payment_std(const std::vector<double>& payments) {
    if (payments.empty()) throw DataError("payment_std: empty payment list");
    const double mean = average_payment(payments);
    double ss = 0.0;
    for (double p : payments) ss += (p - mean) * (p - mean);
    return std::sqrt(ss / static_cast<double>(payments.size()));
}

namespace {

std::vector<Invoice> closed_up_to(const std::vector<Invoice>& invoices, Date as_of) {
    std::vector<Invoice> out;
    for (const auto& inv : invoices) {
        if (inv.closed() && *inv.payment_date <= as_of) out.push_back(inv);
    }
    return out;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

double recent_speed_to_pay(const std::vector<Invoice>& invoices, Date as_of) {
    const auto closed = closed_up_to(invoices, as_of);
    if (closed.empty()) throw DataError("recent_speed_to_pay: no closed invoices");
    Date latest = *closed.front().payment_date;
    for (const auto& inv : closed) latest = std::max(latest, *inv.payment_date);
    double sum = 0.0;
    int n = 0;
    for (const auto& inv : closed) {
        // window is (latest - 90, latest]
        if (latest - *inv.payment_date < kRecencyWindowDays) {
            sum += payment_delay(inv);
            ++n;
        }
    }
    return sum / n;
}

CustomerProfile build_profile(const std::vector<Invoice>& invoices, Date as_of) {
    const auto closed = closed_up_to(invoices, as_of);
    if (closed.empty()) throw DataError("build_profile: no closed invoices before as_of");

    CustomerProfile p;
    p.customer_id = closed.front().customer_id;
    p.segment = closed.front().segment;
    p.as_of = as_of;
    p.n_invoices = static_cast<int>(closed.size());

    std::vector<double> amounts;
    amounts.reserve(closed.size());
    double delay_sum = 0.0;
    double weighted_delay = 0.0;
    double weight_sum = 0.0;
    const double lambda = std::log(2.0) / kRecencyHalfLifeDays;
    for (const auto& inv : closed) {
        amounts.push_back(inv.amount.to_double());
        const int d = payment_delay(inv);
        delay_sum += d;
        const double age_days = static_cast<double>(as_of - *inv.payment_date);
        const double w = std::exp(-lambda * age_days);
        weighted_delay += w * d;
        weight_sum += w;
    }
    p.mean_delay_days = delay_sum / static_cast<double>(closed.size());
    p.recency_weighted_delay_days = weighted_delay / weight_sum;
    p.avg_payment = average_payment(amounts);
    p.payment_std = payment_std(amounts);
    p.recent_speed_to_pay_days = recent_speed_to_pay(closed, as_of);
    return p;
}

std::map<std::string, CustomerProfile> build_all_profiles(const std::vector<Invoice>& invoices,
                                                          Date as_of) {
    std::map<std::string, std::vector<Invoice>> by_customer;
    std::map<std::string, Segment> segments;
    for (const auto& inv : invoices) {
        by_customer[inv.customer_id].push_back(inv);
        segments[inv.customer_id] = inv.segment;
    }

    std::map<std::string, CustomerProfile> profiles;
    std::vector<std::string> cold;
    for (const auto& [customer, invs] : by_customer) {
        try {
            profiles[customer] = build_profile(invs, as_of);
        } catch (const DataError&) {
            cold.push_back(customer);
        }
    }

    if (cold.empty()) return profiles;

    // Segment-median fallback values for cold-start customers.
    struct Accum {
        std::vector<double> mean_delay, recency_delay, avg_payment, payment_std, recent;
    };
    std::map<int, Accum> per_segment;
    Accum global;
    for (const auto& [customer, prof] : profiles) {
        auto& a = per_segment[static_cast<int>(prof.segment)];
        for (Accum* acc : {&a, &global}) {
            acc->mean_delay.push_back(prof.mean_delay_days);
            acc->recency_delay.push_back(prof.recency_weighted_delay_days);
            acc->avg_payment.push_back(prof.avg_payment);
            acc->payment_std.push_back(prof.payment_std);
            acc->recent.push_back(prof.recent_speed_to_pay_days);
        }
    }

    for (const auto& customer : cold) {
        const Segment seg = segments[customer];
        const auto it = per_segment.find(static_cast<int>(seg));
        const Accum& a = (it != per_segment.end() && !it->second.mean_delay.empty()) ? it->second
                                                                                     : global;
        CustomerProfile p;
        p.customer_id = customer;
        p.segment = seg;
        p.as_of = as_of;
        p.n_invoices = 0;
        p.cold_start = true;
        p.mean_delay_days = median(a.mean_delay);
        p.recency_weighted_delay_days = median(a.recency_delay);
        p.avg_payment = median(a.avg_payment);
        p.payment_std = median(a.payment_std);
        p.recent_speed_to_pay_days = median(a.recent);
        profiles[customer] = p;
    }
    return profiles;
}

} // namespace ledgercast::profiles
