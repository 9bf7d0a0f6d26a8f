#include "cate/bandwidth.hpp"

#include <cmath>
#include <stdexcept>

namespace cate {

namespace {

double parity_delta(int m) { return m % 2 == 0 ? 0.0 : 1.0; }

// Smallest even s1 with n h^l h1^{2 s1} -> 0 under the planned rates,
// i.e. strictly above (1 - l*eta_h) / (2*eta_h1).
int resolve_s1(double eta_h, double eta_h1, int l) {
    const double bound = (1.0 - l * eta_h) / (2.0 * eta_h1);
    int s1 = 2;
    while (static_cast<double>(s1) <= bound + 1e-12) s1 += 2;
    return s1;
}

} // namespace

BandwidthPlan plan_bandwidths(int n, int l, std::optional<int> r,
                              std::optional<int> k_tilde,
                              BandwidthConstants constants, BandwidthMode mode,
                              double delta1, double delta2) {
    if (n < 2) throw std::invalid_argument("plan_bandwidths: need n >= 2");
    if (l < 1) throw std::invalid_argument("plan_bandwidths: need l >= 1");
    if (!r && !k_tilde)
        throw std::invalid_argument("plan_bandwidths: supply at least one of r, k_tilde");
    if (r && (*r < 1)) throw std::invalid_argument("plan_bandwidths: r must be >= 1");
    if (k_tilde && (*k_tilde < 1))
        throw std::invalid_argument("plan_bandwidths: k_tilde must be >= 1");
    if (delta1 < 0.0 || delta2 < 0.0)
        throw std::invalid_argument("plan_bandwidths: deltas must be nonnegative");
    if (mode == BandwidthMode::table) {
        delta1 = 0.0;
        delta2 = 0.0;
        if (k_tilde && *k_tilde != 1 && *k_tilde != 2 && *k_tilde != 4)
            throw std::invalid_argument(
                "plan_bandwidths: table mode covers k_tilde in {1,2,4}; use formula mode");
    }

    BandwidthPlan plan;
    plan.a = constants.a;
    plan.a1 = constants.a1;
    plan.a2 = constants.a2;
    plan.delta1 = delta1;
    plan.delta2 = delta2;

    const double dn = static_cast<double>(n);

    if (r) {
        plan.delta_r = parity_delta(*r);
        plan.s2 = *r + static_cast<int>(plan.delta_r);
        plan.h2_exponent = 1.0 / (2.0 * *r + plan.delta_r + delta2);
        plan.h2 = constants.a2 * std::pow(dn, -*plan.h2_exponent);
    }

    double delta_kt = 0.0;
    if (k_tilde) {
        delta_kt = parity_delta(*k_tilde);
        plan.s1 = *k_tilde + static_cast<int>(delta_kt);
        if (mode == BandwidthMode::table) {
            plan.h1_exponent = *k_tilde == 1 ? 1.0 / 3.0
                             : *k_tilde == 2 ? 1.0 / 4.0
                                             : 1.0 / 8.0;
        } else {
            // Mirror of the h2 rule with k_tilde in place of r.
            plan.h1_exponent = 1.0 / (2.0 * *k_tilde + delta_kt + delta2);
        }
        plan.h1 = constants.a1 * std::pow(dn, -*plan.h1_exponent);
    }

    // The shared K must satisfy the most demanding smoother; when IPW-N is
    // active that is the k_tilde-dimensional fit (r <= k_tilde), otherwise
    // the reduced-dimension one. For l = 1 and k_tilde in {1,2,4} this gives
    // the tabulated exponents -1/9, -1/9, -1/13.
    const int m = k_tilde ? std::max(*k_tilde, r.value_or(1)) : *r;
    const double delta_m = parity_delta(m);
    plan.s = m + static_cast<int>(delta_m) + 2;
    plan.h_exponent = 1.0 / (l + 4.0 + 2.0 * m + 2.0 * delta_m - delta1);
    plan.h = constants.a * std::pow(dn, -plan.h_exponent);

    if (k_tilde) {
        const int s1_rate = resolve_s1(plan.h_exponent, *plan.h1_exponent, l);
        // The parity rule and the rate condition agree on the published
        // configurations; take the larger to keep C5(iii) valid in general.
        plan.s1 = std::max(*plan.s1, s1_rate);
    }
    return plan;
}

} // namespace cate
