#include "cate/propensity.hpp"

#include "cate/smoothing.hpp"

#include <algorithm>
#include <cmath>

namespace cate {

namespace {

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

bool perfectly_separated(const Vector& d, const Vector& mu) {
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (d[i] == 1.0 && mu[i] < 1.0 - 1e-8) return false;
        if (d[i] == 0.0 && mu[i] > 1e-8) return false;
    }
    return true;
}

} // namespace

Vector trim_scores(const Vector& raw, TrimBounds bounds) {
    Vector out = raw;
    for (Eigen::Index i = 0; i < out.size(); ++i)
        out[i] = std::clamp(out[i], bounds.lo, bounds.hi);
    return out;
}

PropensityFit oracle_fit(const Vector& true_scores, TrimBounds bounds) {
    PropensityFit fit;
    fit.scores = trim_scores(true_scores, bounds);
    fit.kind = PropensityKind::oracle;
    fit.trim_bounds = bounds;
    return fit;
}

PropensityFit fit_parametric(const Vector& d, const RowMatrix& x,
                             int max_iter, double tol, TrimBounds bounds) {
    const Eigen::Index n = x.rows();
    const Eigen::Index k = x.cols();
    if (d.size() != n) throw std::invalid_argument("fit_parametric: D length mismatch");
    if (n < k + 2) throw std::invalid_argument("fit_parametric: need n >= k + 2");

    PropensityFit fit;
    fit.kind = PropensityKind::parametric;
    fit.trim_bounds = bounds;

    const double dbar = d.mean();
    if (dbar == 0.0 || dbar == 1.0) {
        // Degenerate sample: the intercept diverges, so report the saturated
        // fit directly rather than iterating toward it.
        Vector beta = Vector::Zero(k + 1);
        beta[0] = dbar == 1.0 ? 40.0 : -40.0;
        fit.coefficients = beta;
        fit.separation = true;
        fit.scores = Vector::Constant(n, dbar == 1.0 ? bounds.hi : bounds.lo);
        return fit;
    }

    Matrix design(n, k + 1);
    design.col(0).setOnes();
    design.rightCols(k) = x;

    Vector beta = Vector::Zero(k + 1);
    beta[0] = std::log(dbar / (1.0 - dbar));

    Vector eta(n), mu(n), w(n);
    for (int iter = 1; iter <= max_iter; ++iter) {
        eta = design * beta;
        for (Eigen::Index i = 0; i < n; ++i) {
            mu[i] = logistic(eta[i]);
            w[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-10);
        }
        Matrix xtwx = design.transpose() * w.asDiagonal() * design;
        Vector score = design.transpose() * (d - mu);
        Vector step = xtwx.ldlt().solve(score);
        beta += step;
        fit.iterations = iter;
        if (step.cwiseAbs().maxCoeff() < tol) {
            fit.converged = true;
            fit.coefficients = beta;
            eta = design * beta;
            Vector raw(n);
            for (Eigen::Index i = 0; i < n; ++i) raw[i] = logistic(eta[i]);
            fit.scores = trim_scores(raw, bounds);
            return fit;
        }
        if (perfectly_separated(d, mu)) {
            fit.separation = true;
            fit.converged = true;
            fit.coefficients = beta;
            Vector raw(n);
            eta = design * beta;
            for (Eigen::Index i = 0; i < n; ++i) raw[i] = logistic(eta[i]);
            fit.scores = trim_scores(raw, bounds);
            return fit;
        }
    }
    throw NonConvergenceError("fit_parametric: IRLS did not converge", beta);
}

PropensityFit fit_nonparametric(const Vector& d, const RowMatrix& x_tilde,
                                const KernelSpec& l_kernel, double h1,
                                TrimBounds bounds) {
    if (x_tilde.rows() < 2)
        throw std::invalid_argument("fit_nonparametric: need at least two observations");
    if (l_kernel.dim != x_tilde.cols())
        throw std::invalid_argument("fit_nonparametric: kernel dim does not match covariates");

    SmootherConfig cfg{.kernel = l_kernel, .bandwidth = h1, .leave_one_out = true};
    auto res = nw_regress(d, x_tilde, x_tilde, cfg);

    PropensityFit fit;
    fit.kind = PropensityKind::nonparametric;
    fit.trim_bounds = bounds;
    fit.scores = trim_scores(res.values, bounds);
    return fit;
}

PropensityFit fit_semiparametric(const Vector& d, const RowMatrix& x,
                                 const ProjectionMatrix& v_hat,
                                 const KernelSpec& h_kernel, double h2,
                                 TrimBounds bounds) {
    if (v_hat.input_dim() != x.cols())
        throw std::invalid_argument("fit_semiparametric: projection rows do not match covariates");
    if (h_kernel.dim != v_hat.rank())
        throw std::invalid_argument("fit_semiparametric: kernel dim does not match projection rank");

    RowMatrix reduced = x * v_hat.matrix();
    PropensityFit fit = fit_nonparametric(d, reduced, h_kernel, h2, bounds);
    fit.kind = PropensityKind::semiparametric;
    fit.projection = v_hat;
    return fit;
}

OutcomeRegressions fit_outcome_regressions(const Vector& y, const Vector& d,
                                           const RowMatrix& index_covariates,
                                           const KernelSpec& kernel, double h,
                                           OutcomeIndex index_used) {
    const Eigen::Index n = index_covariates.rows();
    if (y.size() != n || d.size() != n)
        throw std::invalid_argument("fit_outcome_regressions: size mismatch");

    const Eigen::Index n1 = static_cast<Eigen::Index>(d.sum());
    if (n1 == 0) throw std::invalid_argument("fit_outcome_regressions: empty treated group");
    if (n1 == n) throw std::invalid_argument("fit_outcome_regressions: empty control group");

    RowMatrix x1(n1, index_covariates.cols()), x0(n - n1, index_covariates.cols());
    Vector y1(n1), y0(n - n1);
    Eigen::Index i1 = 0, i0 = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (d[i] == 1.0) {
            x1.row(i1) = index_covariates.row(i);
            y1[i1++] = y[i];
        } else {
            x0.row(i0) = index_covariates.row(i);
            y0[i0++] = y[i];
        }
    }

    SmootherConfig cfg{.kernel = kernel, .bandwidth = h};
    OutcomeRegressions out;
    out.m1_hat = nw_regress(y1, x1, index_covariates, cfg).values;
    out.m0_hat = nw_regress(y0, x0, index_covariates, cfg).values;
    out.index_used = index_used;
    return out;
}

} // namespace cate
