#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace cate {

// =====================================================================
// Gaussian-derived kernels of even order s: K_s(u) = P_s(u) * phi(u),
// where P_s is the even polynomial of degree s-2 that zeroes the moments
// 1..s-1 and keeps the integral at one. Multivariate kernels are products
// of the univariate one. Orders 2, 4 and 6 are supported.
// =====================================================================

enum class KernelFamily { gaussian_derived };

struct KernelSpec {
    KernelFamily family = KernelFamily::gaussian_derived;
    int order = 2;
    int dim = 1;
};

void validate_kernel_spec(const KernelSpec& spec);

// Coefficients of P_s in even powers of u: P_s(u) = c[0] + c[1] u^2 + ...
// Cached per order; order 4 gives (3 - u^2)/2, order 6 gives (15 - 10u^2 + u^4)/8.
std::span<const double> higher_order_coeffs(int order);

double kernel_eval(const KernelSpec& spec, std::span<const double> u);

// p-th moment of the univariate kernel, by adaptive quadrature.
double kernel_moment(const KernelSpec& spec, int p);

// Integral of K(u)^2 over R^dim; product structure makes this the
// univariate value raised to dim.
double kernel_l2_norm_sq(const KernelSpec& spec);

// Bound evaluator for hot loops: one exp per evaluation regardless of dim.
class ProductKernel {
public:
    explicit ProductKernel(const KernelSpec& spec);

    int dim() const { return dim_; }
    int order() const { return order_; }

    // K(u) for a contiguous u of length dim.
    double operator()(const double* u) const {
        double ssq = 0.0;
        double poly = 1.0;
        for (int j = 0; j < dim_; ++j) {
            const double u2 = u[j] * u[j];
            ssq += u2;
            poly *= poly_at(u2);
        }
        if (ssq > kFarCutoff) return 0.0;
        return norm_ * poly * std::exp(-0.5 * ssq);
    }

    // K((a - b)/h), with a and b contiguous rows of length dim.
    double eval_scaled_diff(const double* a, const double* b, double inv_h) const {
        double ssq = 0.0;
        double poly = 1.0;
        for (int j = 0; j < dim_; ++j) {
            const double u = (a[j] - b[j]) * inv_h;
            const double u2 = u * u;
            ssq += u2;
            poly *= poly_at(u2);
        }
        if (ssq > kFarCutoff) return 0.0;
        return norm_ * poly * std::exp(-0.5 * ssq);
    }

    // Beyond ||u||^2 = 100 the kernel is under e^{-50} ~ 2e-22 times the
    // polynomial factor; such terms vanish in any double accumulator of
    // realistic magnitude, so far pairs evaluate to an exact zero.
    static constexpr double kFarCutoff = 100.0;

private:
    double poly_at(double u2) const {
        double acc = coeffs_[ncoef_ - 1];
        for (int c = ncoef_ - 2; c >= 0; --c) acc = acc * u2 + coeffs_[c];
        return acc;
    }

    int dim_;
    int order_;
    int ncoef_;
    const double* coeffs_;
    double norm_; // (2*pi)^(-dim/2)
};

} // namespace cate
