#include "cate/estimators.hpp"

#include "cate/smoothing.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cate {

const char* estimator_name(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::O: return "IPW-O";
        case EstimatorKind::P: return "IPW-P";
        case EstimatorKind::N: return "IPW-N";
        case EstimatorKind::S: return "IPW-S";
    }
    return "?";
}

namespace {

EstimatorKind kind_from_fit(PropensityKind kind) {
    switch (kind) {
        case PropensityKind::oracle: return EstimatorKind::O;
        case PropensityKind::parametric: return EstimatorKind::P;
        case PropensityKind::nonparametric: return EstimatorKind::N;
        case PropensityKind::semiparametric: return EstimatorKind::S;
    }
    return EstimatorKind::O;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

} // namespace

PseudoOutcome pseudo_outcome(const Dataset& data, const PropensityFit& fit,
                             const OutcomeRegressions* outcome_reg) {
    const Eigen::Index n = data.n();
    if (fit.scores.size() != n)
        throw std::invalid_argument("pseudo_outcome: scores are not aligned with the dataset");

    PseudoOutcome out;
    out.psi.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double p = fit.scores[i];
        out.psi[i] = data.d[i] * data.y[i] / p -
                     (1.0 - data.d[i]) * data.y[i] / (1.0 - p);
    }
    if (outcome_reg != nullptr) {
        Vector star(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double p = fit.scores[i];
            const double m1 = outcome_reg->m1_hat[i];
            const double m0 = outcome_reg->m0_hat[i];
            star[i] = data.d[i] * (data.y[i] - m1) / p -
                      (1.0 - data.d[i]) * (data.y[i] - m0) / (1.0 - p) + m1 - m0;
        }
        out.psi_star = std::move(star);
    }
    return out;
}

CateCurve estimate_cate(const Dataset& data, const PropensityFit& fit,
                        const KernelSpec& k_kernel, double h, const RowMatrix& grid) {
    validate_dataset(data);
    if (k_kernel.dim != data.z_dim)
        throw std::invalid_argument("estimate_cate: kernel dim must equal dim(Z)");
    if (grid.cols() != data.z_dim)
        throw std::invalid_argument("estimate_cate: grid dim must equal dim(Z)");

    const PseudoOutcome pseudo = pseudo_outcome(data, fit);
    const RowMatrix z = data.z();

    SmootherConfig cfg{.kernel = k_kernel, .bandwidth = h};
    auto nw = nw_regress(pseudo.psi, z, grid, cfg);

    CateCurve curve;
    curve.grid = grid;
    curve.tau_hat = std::move(nw.values);
    curve.unstable = std::move(nw.unstable);
    curve.estimator_kind = kind_from_fit(fit.kind);
    curve.n = static_cast<int>(data.n());
    curve.h = h;
    curve.l = data.z_dim;
    curve.kernel = k_kernel;
    curve.k_norm_sq = kernel_l2_norm_sq(k_kernel);
    return curve;
}

void variance_hat(const Dataset& data, const PropensityFit& fit,
                  const OutcomeRegressions* outcome_reg, CateCurve& curve,
                  VarianceForm form) {
    if (form == VarianceForm::psi_star_form && outcome_reg == nullptr)
        throw std::invalid_argument("variance_hat: the star form requires outcome regressions");

    const PseudoOutcome pseudo = pseudo_outcome(data, fit, outcome_reg);
    const Vector& values =
        form == VarianceForm::psi_star_form ? *pseudo.psi_star : pseudo.psi;

    const Eigen::Index n = data.n();
    const Eigen::Index m = curve.grid.rows();
    const int l = curve.l;
    const RowMatrix z = data.z();

    // Deviations are taken against the smoothed curve at each observation's
    // own Z. Centering every term at tau_hat(z) instead would fold the
    // curve's variation across the kernel window into sigma and overstate
    // the variance away from flat stretches.
    SmootherConfig fit_cfg{.kernel = curve.kernel, .bandwidth = curve.h};
    const Vector fitted = nw_regress(values, z, z, fit_cfg).values;

    // K_i uses the unscaled kernel K((Z_i - z)/h); the h^{-l} factors cancel
    // between f_hat and the weighted sums.
    const ProductKernel kernel(curve.kernel);
    const double inv_h = 1.0 / curve.h;
    const double nh = static_cast<double>(n) * std::pow(curve.h, l);

    curve.sigma_hat_sq.resize(m);
    curve.f_hat.resize(m);
    if (curve.unstable.size() != static_cast<size_t>(m))
        curve.unstable.assign(static_cast<size_t>(m), 0);

    const double* zd = z.data();
    for (Eigen::Index e = 0; e < m; ++e) {
        const double* zq = curve.grid.data() + e * l;
        double s0 = 0.0, s2 = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double ki = kernel.eval_scaled_diff(zd + i * l, zq, inv_h);
            const double dev = values[i] - fitted[i];
            s0 += ki;
            s2 += dev * dev * ki;
        }
        curve.f_hat[e] = s0 / nh;
        if (s0 < 1e-11) {
            curve.unstable[static_cast<size_t>(e)] = 1;
            s0 = std::max(s0, 1e-11);
        }
        // Equals (1/(n h^l)) * S2 / f_hat; clamped at zero because
        // higher-order kernels can push isolated weights negative.
        curve.sigma_hat_sq[e] = std::max(0.0, s2 / s0);
    }
    curve.variance_form = form;
}

void confidence_interval(CateCurve& curve, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("confidence_interval: alpha must be in (0, 1)");
    if (curve.sigma_hat_sq.size() != curve.grid.rows())
        throw std::invalid_argument("confidence_interval: variance not populated");

    const double crit = normal_quantile(1.0 - alpha / 2.0);
    const double nh = static_cast<double>(curve.n) * std::pow(curve.h, curve.l);
    const Eigen::Index m = curve.grid.rows();
    curve.ci_lo.resize(m);
    curve.ci_hi.resize(m);
    for (Eigen::Index e = 0; e < m; ++e) {
        const double half = crit * std::sqrt(curve.sigma_big(e) / nh);
        curve.ci_lo[e] = curve.tau_hat[e] - half;
        curve.ci_hi[e] = curve.tau_hat[e] + half;
    }
}

VarianceForm select_ci_form(EstimatorKind kind, const AffiliationResult& affiliation,
                            int l) {
    if (kind == EstimatorKind::O || kind == EstimatorKind::P)
        return VarianceForm::psi_form;
    return affiliation.t == l ? VarianceForm::psi_star_form : VarianceForm::psi_form;
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("normal_quantile: p must be in (0, 1)");

    // Acklam's rational approximation, then one Halley refinement through the
    // erfc-based CDF; accurate to full double precision on (0, 1).
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double dd[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
    }
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
    return x;
}

} // namespace cate
