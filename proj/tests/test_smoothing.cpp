#include "doctest.h"

#include "cate/rng.hpp"
#include "cate/smoothing.hpp"
#include "testutil.hpp"

#include <algorithm>

using cate::RowMatrix;
using cate::SmootherConfig;
using cate::Vector;

namespace {

RowMatrix col(std::initializer_list<double> v) {
    RowMatrix m(static_cast<long>(v.size()), 1);
    long i = 0;
    for (double x : v) m(i++, 0) = x;
    return m;
}

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<long>(v.size()));
    long i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

} // namespace

TEST_SUITE("smoothing") {

TEST_CASE("constant responses regress to the constant") {
    auto x = col({-1.0, 0.2, 0.7, 1.4});
    auto r = vec({3.25, 3.25, 3.25, 3.25});
    auto eval = col({-0.5, 0.0, 0.9});
    SmootherConfig cfg{.kernel = {.order = 2, .dim = 1}, .bandwidth = 0.8};
    auto res = cate::nw_regress(r, x, eval, cfg);
    for (long i = 0; i < res.values.size(); ++i)
        CHECK(res.values[i] == doctest::Approx(3.25).epsilon(1e-12));
}

TEST_CASE("three-point instance matches the direct-sum oracle") {
    auto x = col({-1.0, 0.0, 1.0});
    auto r = vec({1.0, 2.0, 3.0});
    auto eval = col({0.0});
    SmootherConfig cfg{.kernel = {.order = 2, .dim = 1}, .bandwidth = 1.0, .denom_guard = 0.0};
    auto res = cate::nw_regress(r, x, eval, cfg);
    const double expect = oracle::nw_point({1.0, 2.0, 3.0}, x, vec({0.0}), 2, 1.0);
    CHECK(res.values[0] == doctest::Approx(expect).epsilon(1e-12));
    // By symmetry of the weights the value is the central response.
    CHECK(res.values[0] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("single observation returns its own response") {
    auto x = col({0.42});
    auto r = vec({7.0});
    SmootherConfig cfg{.kernel = {.order = 2, .dim = 1}, .bandwidth = 0.5, .denom_guard = 0.0};
    auto res = cate::nw_regress(r, x, x, cfg);
    CHECK(res.values[0] == doctest::Approx(7.0).epsilon(1e-14));
}

TEST_CASE("higher-dim instance matches the oracle") {
    RowMatrix x(4, 2);
    x << -0.3, 0.1, 0.4, -0.2, 0.0, 0.5, 0.8, 0.9;
    auto r = vec({0.5, -1.0, 2.0, 0.25});
    RowMatrix eval(1, 2);
    eval << 0.1, 0.2;
    SmootherConfig cfg{.kernel = {.order = 4, .dim = 2}, .bandwidth = 0.7, .denom_guard = 0.0};
    auto res = cate::nw_regress(r, x, eval, cfg);
    Vector z(2);
    z << 0.1, 0.2;
    CHECK(res.values[0] ==
          doctest::Approx(oracle::nw_point({0.5, -1.0, 2.0, 0.25}, x, z, 4, 0.7)).epsilon(1e-12));
}

TEST_CASE("leave-one-out equals full regression on the row-deleted data") {
    auto x = col({-0.9, -0.2, 0.3, 1.1, 1.6});
    auto r = vec({0.1, 1.4, -0.6, 2.2, 0.9});
    SmootherConfig loo{.kernel = {.order = 2, .dim = 1}, .bandwidth = 0.6,
                       .leave_one_out = true, .denom_guard = 0.0};
    auto res = cate::nw_regress(r, x, x, loo);
    SmootherConfig full = loo;
    full.leave_one_out = false;
    for (long i = 0; i < x.rows(); ++i) {
        RowMatrix xd(x.rows() - 1, 1);
        Vector rd(x.rows() - 1);
        long t = 0;
        for (long j = 0; j < x.rows(); ++j) {
            if (j == i) continue;
            xd(t, 0) = x(j, 0);
            rd[t] = r[j];
            ++t;
        }
        auto ref = cate::nw_regress(rd, xd, x.row(i), full);
        CHECK(res.values[i] == doctest::Approx(ref.values[0]).epsilon(1e-14));
    }
}

TEST_CASE("order-2 output stays within the response range") {
    cate::Rng rng(991);
    RowMatrix x(40, 1);
    Vector r(40);
    for (long i = 0; i < 40; ++i) {
        x(i, 0) = rng.uniform(-1.0, 1.0);
        r[i] = rng.uniform(-5.0, 5.0);
    }
    RowMatrix eval(11, 1);
    for (long e = 0; e < 11; ++e) eval(e, 0) = -1.0 + 0.2 * e;
    SmootherConfig cfg{.kernel = {.order = 2, .dim = 1}, .bandwidth = 0.25};
    auto res = cate::nw_regress(r, x, eval, cfg);
    const double lo = r.minCoeff(), hi = r.maxCoeff();
    for (long e = 0; e < res.values.size(); ++e) {
        CHECK(res.values[e] >= lo - 1e-9);
        CHECK(res.values[e] <= hi + 1e-9);
    }
}

TEST_CASE("kde single point and symmetric pair") {
    auto pts = col({0.3});
    auto at = col({0.3});
    SmootherConfig cfg{.kernel = {.order = 2, .dim = 1}, .bandwidth = 1.0};
    auto f = cate::kde(pts, at, cfg);
    const double zero = 0.0;
    CHECK(f[0] == doctest::Approx(cate::kernel_eval(cfg.kernel, {&zero, 1})).epsilon(1e-14));

    auto sym = col({-0.4, 0.4});
    auto origin = col({0.0});
    cfg.bandwidth = 0.5;
    auto f2 = cate::kde(sym, origin, cfg);
    Vector z0(1);
    z0 << 0.0;
    CHECK(f2[0] == doctest::Approx(oracle::kde_point(sym, z0, 2, 0.5)).epsilon(1e-13));
    CHECK(f2[0] == doctest::Approx(oracle::kernel1d(2, 0.8) / 0.5).epsilon(1e-13));
}

TEST_CASE("kde bandwidth scaling identity") {
    auto pts = col({-0.2, 0.1, 0.25, 0.6});
    auto at = col({0.05});
    const double h = 0.3;
    SmootherConfig cfg{.kernel = {.order = 2, .dim = 1}, .bandwidth = h};
    auto f = cate::kde(pts, at, cfg);
    double mean_kernel = 0.0;
    for (long i = 0; i < pts.rows(); ++i)
        mean_kernel += oracle::kernel1d(2, (pts(i, 0) - 0.05) / h);
    mean_kernel /= static_cast<double>(pts.rows());
    CHECK(f[0] == doctest::Approx(mean_kernel / h).epsilon(1e-13));
}

TEST_CASE("kde is invariant under row permutation") {
    auto pts = col({0.9, -0.3, 0.15, 0.55, -0.7});
    auto perm = col({-0.7, 0.55, 0.15, -0.3, 0.9});
    auto at = col({-0.1, 0.2});
    SmootherConfig cfg{.kernel = {.order = 4, .dim = 1}, .bandwidth = 0.4};
    auto a = cate::kde(pts, at, cfg);
    auto b = cate::kde(perm, at, cfg);
    CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-15));
    CHECK(a[1] == doctest::Approx(b[1]).epsilon(1e-15));
}

TEST_CASE("empty data and dimension mismatches are rejected") {
    RowMatrix empty(0, 1);
    Vector r0(0);
    auto eval = col({0.0});
    SmootherConfig cfg{.kernel = {.order = 2, .dim = 1}, .bandwidth = 1.0};
    CHECK_THROWS_AS((void)cate::nw_regress(r0, empty, eval, cfg), std::invalid_argument);
    CHECK_THROWS_AS((void)cate::kde(empty, eval, cfg), std::invalid_argument);
    RowMatrix x2(3, 2);
    x2.setZero();
    Vector r3 = vec({1, 2, 3});
    CHECK_THROWS_AS((void)cate::nw_regress(r3, x2, eval, cfg), std::invalid_argument);
    cfg.bandwidth = -1.0;
    auto x1 = col({0.0});
    CHECK_THROWS_AS((void)cate::nw_regress(vec({1.0}), x1, eval, cfg), std::invalid_argument);
}

TEST_CASE("sparse regions are flagged unstable") {
    auto x = col({0.0});
    auto r = vec({1.0});
    auto eval = col({50.0});
    SmootherConfig cfg{.kernel = {.order = 2, .dim = 1}, .bandwidth = 0.1};
    auto res = cate::nw_regress(r, x, eval, cfg);
    CHECK(res.unstable[0] == 1);
}

} // TEST_SUITE
