#pragma once

#include "cate/dimred.hpp"
#include "cate/kernels.hpp"
#include "cate/propensity.hpp"
#include "cate/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace cate {

enum class EstimatorKind { O, P, N, S };

const char* estimator_name(EstimatorKind kind); // "IPW-O" etc.

enum class VarianceForm { psi_form, psi_star_form };

// IPW transform psi_i = D_i Y_i / p_i - (1 - D_i) Y_i / (1 - p_i) and its
// augmented version psi*_i built from the outcome regressions.
struct PseudoOutcome {
    Vector psi;
    std::optional<Vector> psi_star;
};

PseudoOutcome pseudo_outcome(const Dataset& data, const PropensityFit& fit,
                             const OutcomeRegressions* outcome_reg = nullptr);

// Estimated CATE over a grid, with the variance pieces the confidence
// interval needs: Sigma_hat(z) = k_norm_sq * sigma_hat_sq(z) / f_hat(z).
struct CateCurve {
    RowMatrix grid;
    Vector tau_hat;
    Vector sigma_hat_sq;
    Vector f_hat;
    KernelSpec kernel;
    double k_norm_sq = 0.0;
    Vector ci_lo;
    Vector ci_hi;
    VarianceForm variance_form = VarianceForm::psi_form;
    EstimatorKind estimator_kind = EstimatorKind::O;
    int n = 0;
    double h = 0.0;
    int l = 1;
    std::vector<std::uint8_t> unstable;

    double sigma_big(Eigen::Index i) const {
        const double f = std::max(f_hat[i], 1e-300);
        return k_norm_sq * sigma_hat_sq[i] / f;
    }
};

// Nadaraya-Watson regression of the pseudo-outcome on Z at the grid points;
// fills tau_hat only.
CateCurve estimate_cate(const Dataset& data, const PropensityFit& fit,
                        const KernelSpec& k_kernel, double h, const RowMatrix& grid);

// Plug-in variance at every grid point:
//   sigma_hat_sq(z) = (1/(n h^l)) sum_i (psi_i - tau_hat(z))^2 K_i / f_hat(z)
// with K_i = K((Z_i - z)/h), psi replaced by psi* for the star form.
void variance_hat(const Dataset& data, const PropensityFit& fit,
                  const OutcomeRegressions* outcome_reg, CateCurve& curve,
                  VarianceForm form);

// Pointwise interval tau_hat(z) +/- z_{1-alpha/2} sqrt(Sigma_hat(z) / (n h^l)).
void confidence_interval(CateCurve& curve, double alpha);

// Step-4 rule: the star form applies when every Z coordinate lies in the
// span of the estimated directions (t == l); IPW-O and IPW-P always use the
// psi form.
VarianceForm select_ci_form(EstimatorKind kind, const AffiliationResult& affiliation,
                            int l);

// Inverse standard normal CDF (rational approximation plus one refinement).
double normal_quantile(double p);

} // namespace cate
