#pragma once

#include "cate/dimred.hpp"
#include "cate/kernels.hpp"
#include "cate/types.hpp"

#include <optional>

namespace cate {

enum class PropensityKind { oracle, parametric, nonparametric, semiparametric };

struct TrimBounds {
    double lo = 0.005;
    double hi = 0.995;
};

// Per-observation propensity scores, clamped into the trim bounds.
struct PropensityFit {
    Vector scores;
    PropensityKind kind = PropensityKind::oracle;
    std::optional<Vector> coefficients;          // parametric: [intercept, beta]
    std::optional<ProjectionMatrix> projection;  // semiparametric
    TrimBounds trim_bounds;
    bool separation = false;
    bool converged = true;
    int iterations = 0;
};

Vector trim_scores(const Vector& raw, TrimBounds bounds);

// Wraps user-supplied (true) propensity values.
PropensityFit oracle_fit(const Vector& true_scores, TrimBounds bounds = {});

// Logistic regression with intercept, fit by iteratively reweighted least
// squares. Complete separation saturates the scores and sets the flag;
// non-convergence without separation throws NonConvergenceError carrying
// the last iterate.
PropensityFit fit_parametric(const Vector& d, const RowMatrix& x,
                             int max_iter = 100, double tol = 1e-8,
                             TrimBounds bounds = {});

// Leave-one-out Nadaraya-Watson fit of D on the active covariates.
PropensityFit fit_nonparametric(const Vector& d, const RowMatrix& x_tilde,
                                const KernelSpec& l_kernel, double h1,
                                TrimBounds bounds = {});

// Reduces X through v_hat, then applies the leave-one-out fit on the index.
PropensityFit fit_semiparametric(const Vector& d, const RowMatrix& x,
                                 const ProjectionMatrix& v_hat,
                                 const KernelSpec& h_kernel, double h2,
                                 TrimBounds bounds = {});

enum class OutcomeIndex { full_x, x_tilde, reduced_index };

// Within-group outcome regressions m1_hat, m0_hat evaluated at every
// observation's index value (full sample inside each group, no leave-one-out).
struct OutcomeRegressions {
    Vector m1_hat;
    Vector m0_hat;
    OutcomeIndex index_used = OutcomeIndex::full_x;
};

OutcomeRegressions fit_outcome_regressions(const Vector& y, const Vector& d,
                                           const RowMatrix& index_covariates,
                                           const KernelSpec& kernel, double h,
                                           OutcomeIndex index_used = OutcomeIndex::full_x);

} // namespace cate
