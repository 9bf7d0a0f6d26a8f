#include "doctest.h"

#include "cate/estimators.hpp"
#include "cate/rng.hpp"
#include "cate/smoothing.hpp"
#include "testutil.hpp"

#include <cmath>

using cate::CateCurve;
using cate::Dataset;
using cate::EstimatorKind;
using cate::RowMatrix;
using cate::VarianceForm;
using cate::Vector;

namespace {

Dataset small_dataset() {
    Dataset data;
    data.x.resize(4, 1);
    data.x << -0.4, -0.1, 0.2, 0.5;
    data.d.resize(4);
    data.d << 1, 0, 1, 0;
    data.y.resize(4);
    data.y << 1.2, 0.4, -0.8, 0.9;
    data.z_dim = 1;
    return data;
}

RowMatrix grid1(std::initializer_list<double> zs) {
    RowMatrix g(static_cast<long>(zs.size()), 1);
    long i = 0;
    for (double z : zs) g(i++, 0) = z;
    return g;
}

} // namespace

TEST_SUITE("estimators") {

TEST_CASE("with p = 1/2 and D = 1 the curve is twice the NW fit of Y") {
    cate::Rng rng(9);
    Dataset data;
    const int n = 25;
    data.x.resize(n, 1);
    data.d = Vector::Ones(n);
    data.y.resize(n);
    for (int i = 0; i < n; ++i) {
        data.x(i, 0) = rng.uniform(-1, 1);
        data.y[i] = std::sin(3.0 * data.x(i, 0)) + 0.1 * rng.normal();
    }
    cate::PropensityFit fit = cate::oracle_fit(Vector::Constant(n, 0.5));
    auto grid = grid1({-0.5, 0.0, 0.5});
    cate::KernelSpec kern{.order = 2, .dim = 1};
    auto curve = cate::estimate_cate(data, fit, kern, 0.3, grid);
    cate::SmootherConfig cfg{.kernel = kern, .bandwidth = 0.3};
    auto nw = cate::nw_regress(data.y, data.x, grid, cfg);
    for (long e = 0; e < grid.rows(); ++e)
        CHECK(curve.tau_hat[e] == doctest::Approx(2.0 * nw.values[e]).epsilon(1e-12));
    CHECK(curve.estimator_kind == EstimatorKind::O);
}

TEST_CASE("p = 1/2 identity with mixed treatment") {
    cate::Rng rng(19);
    Dataset data;
    const int n = 30;
    data.x.resize(n, 1);
    data.d.resize(n);
    data.y.resize(n);
    Vector signed_y(n);
    for (int i = 0; i < n; ++i) {
        data.x(i, 0) = rng.uniform(-1, 1);
        data.d[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
        data.y[i] = rng.normal();
        signed_y[i] = data.d[i] * data.y[i] - (1.0 - data.d[i]) * data.y[i];
    }
    auto fit = cate::oracle_fit(Vector::Constant(n, 0.5));
    auto grid = grid1({-0.3, 0.1, 0.4});
    cate::KernelSpec kern{.order = 2, .dim = 1};
    auto curve = cate::estimate_cate(data, fit, kern, 0.35, grid);
    cate::SmootherConfig cfg{.kernel = kern, .bandwidth = 0.35};
    auto nw = cate::nw_regress(signed_y, data.x, grid, cfg);
    for (long e = 0; e < grid.rows(); ++e)
        CHECK(curve.tau_hat[e] == doctest::Approx(2.0 * nw.values[e]).epsilon(1e-12));
}

TEST_CASE("IPW-N and IPW-S curves coincide under the identity projection") {
    cate::Rng rng(23);
    Dataset data;
    const int n = 40;
    data.x.resize(n, 2);
    data.d.resize(n);
    data.y.resize(n);
    for (int i = 0; i < n; ++i) {
        data.x(i, 0) = rng.uniform(-1, 1);
        data.x(i, 1) = rng.uniform(-1, 1);
        data.d[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
        data.y[i] = rng.normal();
    }
    if (data.d.sum() == 0 || data.d.sum() == n) data.d[0] = 1.0 - data.d[0];
    cate::KernelSpec prop_kern{.order = 2, .dim = 2};
    auto fit_n = cate::fit_nonparametric(data.d, data.x, prop_kern, 0.4);
    auto fit_s = cate::fit_semiparametric(
        data.d, data.x, cate::ProjectionMatrix(Eigen::MatrixXd::Identity(2, 2)),
        prop_kern, 0.4);
    cate::KernelSpec kern{.order = 2, .dim = 1};
    auto grid = grid1({-0.2, 0.0, 0.2});
    auto curve_n = cate::estimate_cate(data, fit_n, kern, 0.3, grid);
    auto curve_s = cate::estimate_cate(data, fit_s, kern, 0.3, grid);
    for (long e = 0; e < grid.rows(); ++e)
        CHECK(curve_n.tau_hat[e] == curve_s.tau_hat[e]);
    CHECK(curve_n.estimator_kind == cate::EstimatorKind::N);
    CHECK(curve_s.estimator_kind == cate::EstimatorKind::S);
}

TEST_CASE("four-observation instance matches the direct-sum oracle") {
    auto data = small_dataset();
    Vector p(4);
    p << 0.6, 0.3, 0.7, 0.45;
    auto fit = cate::oracle_fit(p);
    const double h = 0.35;
    auto curve = cate::estimate_cate(data, fit, {.order = 2, .dim = 1}, h, grid1({0.0, 0.25}));
    std::vector<double> psi(4);
    for (int i = 0; i < 4; ++i)
        psi[static_cast<size_t>(i)] = data.d[i] * data.y[i] / p[i] -
                                      (1 - data.d[i]) * data.y[i] / (1 - p[i]);
    Vector z0(1), z1(1);
    z0 << 0.0;
    z1 << 0.25;
    CHECK(curve.tau_hat[0] == doctest::Approx(oracle::nw_point(psi, data.x, z0, 2, h)).epsilon(1e-12));
    CHECK(curve.tau_hat[1] == doctest::Approx(oracle::nw_point(psi, data.x, z1, 2, h)).epsilon(1e-12));
}

TEST_CASE("variance vanishes for a constant pseudo-outcome") {
    Dataset data;
    const int n = 12;
    data.x.resize(n, 1);
    data.d = Vector::Ones(n);
    data.y.resize(n);
    for (int i = 0; i < n; ++i) {
        data.x(i, 0) = -0.5 + i / 11.0;
        data.y[i] = 0.5; // psi = y / p = 1 for all i with p = 1/2
    }
    auto fit = cate::oracle_fit(Vector::Constant(n, 0.5));
    auto curve = cate::estimate_cate(data, fit, {.order = 2, .dim = 1}, 0.3, grid1({0.0}));
    cate::variance_hat(data, fit, nullptr, curve, VarianceForm::psi_form);
    CHECK(curve.tau_hat[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(curve.sigma_hat_sq[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("five-point variance matches the brute-force display") {
    Dataset data;
    data.x.resize(5, 1);
    data.x << -0.3, -0.1, 0.0, 0.2, 0.4;
    data.d.resize(5);
    data.d << 1, 1, 0, 0, 1;
    data.y.resize(5);
    data.y << 0.7, -0.2, 0.9, 0.1, 1.5;
    data.z_dim = 1;
    Vector p(5);
    p << 0.55, 0.4, 0.62, 0.3, 0.51;
    auto fit = cate::oracle_fit(p);
    const double h = 0.3;
    auto curve = cate::estimate_cate(data, fit, {.order = 2, .dim = 1}, h, grid1({0.05}));
    cate::variance_hat(data, fit, nullptr, curve, VarianceForm::psi_form);

    const int n = 5;
    std::vector<double> psi(n);
    for (int i = 0; i < n; ++i)
        psi[static_cast<size_t>(i)] = data.d[i] * data.y[i] / p[i] -
                                      (1 - data.d[i]) * data.y[i] / (1 - p[i]);
    double s0 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        // deviation against the fitted curve at this observation's Z
        Vector zi(1);
        zi << data.x(i, 0);
        const double fitted = oracle::nw_point(psi, data.x, zi, 2, h);
        const double ki = oracle::kernel1d(2, (data.x(i, 0) - 0.05) / h);
        s0 += ki;
        s2 += (psi[static_cast<size_t>(i)] - fitted) * (psi[static_cast<size_t>(i)] - fitted) * ki;
    }
    const double f_hat = s0 / (n * h);
    const double sigma_sq = s2 / (n * h) / f_hat;
    CHECK(curve.f_hat[0] == doctest::Approx(f_hat).epsilon(1e-12));
    CHECK(curve.sigma_hat_sq[0] == doctest::Approx(sigma_sq).epsilon(5e-11));
    CHECK(curve.sigma_big(0) ==
          doctest::Approx(cate::kernel_l2_norm_sq({.order = 2, .dim = 1}) * sigma_sq / f_hat)
              .epsilon(5e-11));
}

TEST_CASE("variance is nonnegative for random inputs") {
    cate::Rng rng(41);
    Dataset data;
    const int n = 60;
    data.x.resize(n, 1);
    data.d.resize(n);
    data.y.resize(n);
    Vector p(n);
    for (int i = 0; i < n; ++i) {
        data.x(i, 0) = rng.uniform(-0.5, 0.5);
        p[i] = rng.uniform(0.2, 0.8);
        data.d[i] = rng.uniform() < p[i] ? 1.0 : 0.0;
        data.y[i] = rng.normal();
    }
    auto fit = cate::oracle_fit(p);
    auto curve = cate::estimate_cate(data, fit, {.order = 4, .dim = 1}, 0.25,
                                     grid1({-0.4, -0.2, 0.0, 0.2, 0.4}));
    cate::variance_hat(data, fit, nullptr, curve, VarianceForm::psi_form);
    for (long e = 0; e < 5; ++e) CHECK(curve.sigma_hat_sq[e] >= 0.0);
}

TEST_CASE("star form requires outcome regressions") {
    auto data = small_dataset();
    auto fit = cate::oracle_fit(Vector::Constant(4, 0.5));
    auto curve = cate::estimate_cate(data, fit, {.order = 2, .dim = 1}, 0.4, grid1({0.0}));
    CHECK_THROWS_AS(cate::variance_hat(data, fit, nullptr, curve, VarianceForm::psi_star_form),
                    std::invalid_argument);
}

TEST_CASE("confidence intervals use the right critical values") {
    CHECK(cate::normal_quantile(0.95) == doctest::Approx(1.6448536269514722).epsilon(1e-9));
    CHECK(cate::normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-6));
    // Bisection oracle on the erfc-based CDF.
    for (double p : {0.6, 0.9, 0.95, 0.975, 0.995}) {
        CHECK(cate::normal_quantile(p) ==
              doctest::Approx(oracle::normal_quantile_bisect(p)).epsilon(1e-9));
    }
    CHECK_THROWS_AS((void)cate::normal_quantile(0.0), std::invalid_argument);
}

TEST_CASE("degenerate variance gives a degenerate interval") {
    Dataset data;
    const int n = 10;
    data.x.resize(n, 1);
    data.d = Vector::Ones(n);
    data.y = Vector::Constant(n, 0.5);
    for (int i = 0; i < n; ++i) data.x(i, 0) = -0.5 + i / 9.0;
    auto fit = cate::oracle_fit(Vector::Constant(n, 0.5));
    auto curve = cate::estimate_cate(data, fit, {.order = 2, .dim = 1}, 0.3, grid1({0.0}));
    cate::variance_hat(data, fit, nullptr, curve, VarianceForm::psi_form);
    cate::confidence_interval(curve, 0.1);
    CHECK(curve.ci_lo[0] == doctest::Approx(curve.tau_hat[0]).epsilon(1e-12));
    CHECK(curve.ci_hi[0] == doctest::Approx(curve.tau_hat[0]).epsilon(1e-12));
}

TEST_CASE("half-width scales exactly as sqrt(Sigma)") {
    auto data = small_dataset();
    Vector p = Vector::Constant(4, 0.5);
    auto fit = cate::oracle_fit(p);
    auto curve = cate::estimate_cate(data, fit, {.order = 2, .dim = 1}, 0.4, grid1({0.0}));
    cate::variance_hat(data, fit, nullptr, curve, VarianceForm::psi_form);
    cate::confidence_interval(curve, 0.1);
    const double half = 0.5 * (curve.ci_hi[0] - curve.ci_lo[0]);

    CateCurve doubled = curve;
    doubled.sigma_hat_sq[0] *= 2.0;
    cate::confidence_interval(doubled, 0.1);
    const double half2 = 0.5 * (doubled.ci_hi[0] - doubled.ci_lo[0]);
    CHECK(half2 == doctest::Approx(half * std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("ci-form selection follows the affiliation rule") {
    cate::AffiliationResult full{.t = 1, .residuals = Vector::Zero(1), .tolerance = 0.05};
    cate::AffiliationResult none{.t = 0, .residuals = Vector::Ones(1), .tolerance = 0.05};
    CHECK(cate::select_ci_form(EstimatorKind::S, full, 1) == VarianceForm::psi_star_form);
    CHECK(cate::select_ci_form(EstimatorKind::S, none, 1) == VarianceForm::psi_form);
    CHECK(cate::select_ci_form(EstimatorKind::N, full, 1) == VarianceForm::psi_star_form);
    CHECK(cate::select_ci_form(EstimatorKind::O, full, 1) == VarianceForm::psi_form);
    CHECK(cate::select_ci_form(EstimatorKind::P, full, 1) == VarianceForm::psi_form);
}

TEST_CASE("psi-star assembles the augmented transform") {
    auto data = small_dataset();
    Vector p(4);
    p << 0.5, 0.4, 0.6, 0.3;
    auto fit = cate::oracle_fit(p);
    cate::OutcomeRegressions reg;
    reg.m1_hat.resize(4);
    reg.m1_hat << 0.9, 0.8, 0.7, 0.6;
    reg.m0_hat.resize(4);
    reg.m0_hat << 0.1, 0.2, 0.3, 0.4;
    auto pseudo = cate::pseudo_outcome(data, fit, &reg);
    REQUIRE(pseudo.psi_star.has_value());
    for (int i = 0; i < 4; ++i) {
        const double expect = data.d[i] * (data.y[i] - reg.m1_hat[i]) / p[i] -
                              (1 - data.d[i]) * (data.y[i] - reg.m0_hat[i]) / (1 - p[i]) +
                              reg.m1_hat[i] - reg.m0_hat[i];
        CHECK((*pseudo.psi_star)[i] == doctest::Approx(expect).epsilon(1e-14));
    }
}

} // TEST_SUITE
