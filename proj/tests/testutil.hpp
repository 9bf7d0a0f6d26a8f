#pragma once

#include "cate/kernels.hpp"
#include "cate/types.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

// Independent oracles used to freeze expected values. These deliberately
// avoid the library's computation paths: fixed-grid Simpson instead of
// adaptive quadrature, closed-form Gaussian moment algebra instead of the
// cached coefficient solve, plain double loops instead of the smoothing
// kernels, and bisection on erfc for the normal quantile.
namespace oracle {

// Composite Simpson on a fixed grid (panels must be even).
inline double simpson(const std::function<double(double)>& f, double lo, double hi,
                      int panels = 32768) {
    const double step = (hi - lo) / panels;
    double acc = f(lo) + f(hi);
    for (int i = 1; i < panels; ++i)
        acc += f(lo + i * step) * ((i % 2 == 1) ? 4.0 : 2.0);
    return acc * step / 3.0;
}

inline double phi(double u) {
    return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
}

// Frozen polynomial factors of the order-4/6 Gaussian-derived kernels.
inline double poly4(double u) { return (3.0 - u * u) / 2.0; }
inline double poly6(double u) {
    const double u2 = u * u;
    return (15.0 - 10.0 * u2 + u2 * u2) / 8.0;
}

inline double kernel1d(int order, double u) {
    if (order == 2) return phi(u);
    if (order == 4) return poly4(u) * phi(u);
    return poly6(u) * phi(u);
}

// E[W^{2m}] for W ~ N(0,1): (2m-1)!!.
inline double gaussian_even_moment(int m) {
    double v = 1.0;
    for (int i = 2 * m - 1; i > 1; i -= 2) v *= i;
    return v;
}

// Closed-form p-th moment of the frozen univariate kernels.
inline double kernel_moment_closed_form(int order, int p) {
    if (p % 2 == 1) return 0.0;
    const int m = p / 2;
    if (order == 2) return gaussian_even_moment(m);
    if (order == 4)
        return 1.5 * gaussian_even_moment(m) - 0.5 * gaussian_even_moment(m + 1);
    return (15.0 * gaussian_even_moment(m) - 10.0 * gaussian_even_moment(m + 1) +
            gaussian_even_moment(m + 2)) / 8.0;
}

// Direct-sum Nadaraya-Watson at a single point; d-dimensional product kernel.
inline double nw_point(const std::vector<double>& responses,
                       const cate::RowMatrix& covariates,
                       const cate::Vector& z, int order, double h,
                       long skip_index = -1) {
    const int d = static_cast<int>(covariates.cols());
    double num = 0.0, den = 0.0;
    for (long i = 0; i < covariates.rows(); ++i) {
        if (i == skip_index) continue;
        double w = 1.0;
        for (int j = 0; j < d; ++j)
            w *= kernel1d(order, (covariates(i, j) - z[j]) / h) / h;
        num += w * responses[static_cast<size_t>(i)];
        den += w;
    }
    return num / den;
}

inline double kde_point(const cate::RowMatrix& points, const cate::Vector& z,
                        int order, double h) {
    const int d = static_cast<int>(points.cols());
    double acc = 0.0;
    for (long i = 0; i < points.rows(); ++i) {
        double w = 1.0;
        for (int j = 0; j < d; ++j)
            w *= kernel1d(order, (points(i, j) - z[j]) / h) / h;
        acc += w;
    }
    return acc / static_cast<double>(points.rows());
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Bisection inverse of the normal CDF.
inline double normal_quantile_bisect(double p) {
    double lo = -10.0, hi = 10.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (normal_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline double logistic_cdf(double t) { return 1.0 / (1.0 + std::exp(-t)); }

} // namespace oracle
