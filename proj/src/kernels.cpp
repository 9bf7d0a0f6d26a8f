#include "cate/kernels.hpp"

#include <array>
#include <functional>
#include <numbers>
#include <stdexcept>

namespace cate {

namespace {

constexpr int kMaxOrder = 6;

// (2m-1)!! = E[W^{2m}] for W ~ N(0,1).
double double_factorial_odd(int m) {
    double v = 1.0;
    for (int i = 2 * m - 1; i > 1; i -= 2) v *= i;
    return v;
}

// Solve the (s/2)x(s/2) moment system for the even-power coefficients of P_s:
// sum_c p_c E[W^{2(m+c)}] = (m == 0), m = 0..s/2-1. Plain Gaussian elimination;
// the system is tiny and well conditioned for the supported orders.
std::vector<double> solve_coeffs(int order) {
    const int m = order / 2;
    std::vector<std::vector<double>> a(m, std::vector<double>(m + 1, 0.0));
    for (int row = 0; row < m; ++row) {
        for (int col = 0; col < m; ++col)
            a[row][col] = double_factorial_odd(row + col);
        a[row][m] = (row == 0) ? 1.0 : 0.0;
    }
    for (int piv = 0; piv < m; ++piv) {
        int best = piv;
        for (int r = piv + 1; r < m; ++r)
            if (std::abs(a[r][piv]) > std::abs(a[best][piv])) best = r;
        std::swap(a[piv], a[best]);
        for (int r = 0; r < m; ++r) {
            if (r == piv) continue;
            const double f = a[r][piv] / a[piv][piv];
            for (int c = piv; c <= m; ++c) a[r][c] -= f * a[piv][c];
        }
    }
    std::vector<double> coeffs(m);
    for (int r = 0; r < m; ++r) coeffs[r] = a[r][m] / a[r][r];
    return coeffs;
}

const std::vector<double>& coeffs_for(int order) {
    static const std::array<std::vector<double>, kMaxOrder / 2> cache = {
        solve_coeffs(2), solve_coeffs(4), solve_coeffs(6)};
    return cache[order / 2 - 1];
}

double adaptive_simpson(const std::function<double(double)>& f, double lo, double hi,
                        double f_lo, double f_mid, double f_hi, double tol, int depth) {
    const double mid = 0.5 * (lo + hi);
    const double lm = 0.5 * (lo + mid);
    const double rm = 0.5 * (mid + hi);
    const double f_lm = f(lm);
    const double f_rm = f(rm);
    const double whole = (hi - lo) / 6.0 * (f_lo + 4.0 * f_mid + f_hi);
    const double left = (mid - lo) / 6.0 * (f_lo + 4.0 * f_lm + f_mid);
    const double right = (hi - mid) / 6.0 * (f_mid + 4.0 * f_rm + f_hi);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(f, lo, mid, f_lo, f_lm, f_mid, tol * 0.5, depth - 1) +
           adaptive_simpson(f, mid, hi, f_mid, f_rm, f_hi, tol * 0.5, depth - 1);
}

double integrate(const std::function<double(double)>& f, double lo, double hi) {
    const double mid = 0.5 * (lo + hi);
    return adaptive_simpson(f, lo, hi, f(lo), f(mid), f(hi), 1e-13, 48);
}

} // namespace

void validate_kernel_spec(const KernelSpec& spec) {
    if (spec.order < 2 || spec.order % 2 != 0)
        throw std::invalid_argument("kernel: order must be a positive even integer");
    if (spec.order > kMaxOrder)
        throw std::invalid_argument("kernel: orders above 6 are not supported");
    if (spec.dim < 1)
        throw std::invalid_argument("kernel: dim must be >= 1");
}

std::span<const double> higher_order_coeffs(int order) {
    KernelSpec probe{KernelFamily::gaussian_derived, order, 1};
    validate_kernel_spec(probe);
    const auto& c = coeffs_for(order);
    return {c.data(), c.size()};
}

ProductKernel::ProductKernel(const KernelSpec& spec) {
    validate_kernel_spec(spec);
    dim_ = spec.dim;
    order_ = spec.order;
    const auto& c = coeffs_for(spec.order);
    ncoef_ = static_cast<int>(c.size());
    coeffs_ = c.data();
    norm_ = std::pow(2.0 * std::numbers::pi, -0.5 * dim_);
}

double kernel_eval(const KernelSpec& spec, std::span<const double> u) {
    ProductKernel k(spec);
    if (static_cast<int>(u.size()) != spec.dim)
        throw std::invalid_argument("kernel_eval: argument length does not match dim");
    return k(u.data());
}

double kernel_moment(const KernelSpec& spec, int p) {
    validate_kernel_spec(spec);
    if (spec.dim != 1)
        throw std::invalid_argument("kernel_moment: defined for dim == 1");
    if (p < 0)
        throw std::invalid_argument("kernel_moment: p must be nonnegative");
    ProductKernel k(spec);
    auto f = [&](double u) { return std::pow(u, p) * k(&u); };
    return integrate(f, -12.0, 12.0);
}

double kernel_l2_norm_sq(const KernelSpec& spec) {
    validate_kernel_spec(spec);
    // K(u)^2 = P(u)^2 phi(u)^2 and phi(u)^2 = density of N(0, 1/2) / (2 sqrt(pi)),
    // so the univariate integral is E[P(W)^2] / (2 sqrt(pi)) with W ~ N(0, 1/2).
    const auto& c = coeffs_for(spec.order);
    const int m = static_cast<int>(c.size());
    double expect = 0.0;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            const int power = i + j;
            expect += c[i] * c[j] * double_factorial_odd(power) * std::pow(0.5, power);
        }
    }
    const double univariate = expect / (2.0 * std::sqrt(std::numbers::pi));
    return std::pow(univariate, spec.dim);
}

} // namespace cate
