#pragma once

#include <optional>

namespace cate {

// Tuning constants {a, a1, a2} of the rule-of-thumb rates h = a n^{-eta}.
struct BandwidthConstants {
    double a = 0.55;
    double a1 = 1.05;
    double a2 = 0.75;
};

inline constexpr BandwidthConstants kGroup1{0.55, 1.05, 0.75};
inline constexpr BandwidthConstants kGroup2{0.55, 1.05, 0.69};

// table: reproduce the published simulation rates verbatim (k_tilde in
// {1, 2, 4}); formula: the general displays, extended to any dimension.
enum class BandwidthMode { table, formula };

struct BandwidthPlan {
    double h = 0.0;               // CATE smoothing bandwidth for K
    std::optional<double> h1;     // IPW-N propensity bandwidth for L
    std::optional<double> h2;     // IPW-S propensity / MAVE bandwidth for H
    int s = 2;                    // order of K
    std::optional<int> s1;        // order of L
    std::optional<int> s2;        // order of H
    double a = 0.0, a1 = 0.0, a2 = 0.0;
    double delta_r = 0.0, delta1 = 0.0, delta2 = 0.0;
    // Exponents eta in h = a n^{-eta}, kept for rate diagnostics.
    double h_exponent = 0.0;
    std::optional<double> h1_exponent;
    std::optional<double> h2_exponent;
};

// Rule-of-thumb plan. At least one of r (reduced dimension) and k_tilde
// (active nonparametric dimension) must be given; the kernel order for K is
// driven by the most demanding smoother so the shared rates remain valid for
// every estimator. delta1/delta2 only apply in formula mode (the published
// tables set them to zero).
BandwidthPlan plan_bandwidths(int n, int l, std::optional<int> r,
                              std::optional<int> k_tilde,
                              BandwidthConstants constants = kGroup1,
                              BandwidthMode mode = BandwidthMode::table,
                              double delta1 = 0.0, double delta2 = 0.0);

} // namespace cate
