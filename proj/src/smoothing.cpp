#include "cate/smoothing.hpp"

#include <cmath>
#include <stdexcept>

namespace cate {

namespace {

void check_inputs(Eigen::Index n, const RowMatrix& covariates,
                  const RowMatrix& eval_points, const SmootherConfig& cfg) {
    if (n == 0) throw std::invalid_argument("smoothing: empty data");
    if (cfg.bandwidth <= 0.0) throw std::invalid_argument("smoothing: bandwidth must be > 0");
    if (cfg.denom_guard < 0.0) throw std::invalid_argument("smoothing: denom_guard must be >= 0");
    if (covariates.cols() != cfg.kernel.dim || eval_points.cols() != cfg.kernel.dim)
        throw std::invalid_argument("smoothing: covariate dimension does not match kernel dim");
}

} // namespace

NwResult nw_regress(const Vector& responses, const RowMatrix& covariates,
                    const RowMatrix& eval_points, const SmootherConfig& cfg) {
    const Eigen::Index n = covariates.rows();
    const Eigen::Index m = eval_points.rows();
    check_inputs(n, covariates, eval_points, cfg);
    if (responses.size() != n)
        throw std::invalid_argument("nw_regress: responses length does not match data");
    if (cfg.leave_one_out && m != n)
        throw std::invalid_argument("nw_regress: leave-one-out requires eval_points == covariates");

    const ProductKernel kernel(cfg.kernel);
    const double inv_h = 1.0 / cfg.bandwidth;
    const double scale = std::pow(inv_h, cfg.kernel.dim);

    NwResult out;
    out.values.resize(m);
    out.unstable.assign(static_cast<size_t>(m), 0);

    const double* xd = covariates.data();
    const double* zd = eval_points.data();
    const int d = cfg.kernel.dim;

    for (Eigen::Index e = 0; e < m; ++e) {
        const double* z = zd + e * d;
        double num = 0.0;
        double den = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (cfg.leave_one_out && i == e) continue;
            const double w = scale * kernel.eval_scaled_diff(xd + i * d, z, inv_h);
            num += w * responses[i];
            den += w;
        }
        if (den < cfg.denom_guard * 10.0) out.unstable[static_cast<size_t>(e)] = 1;
        out.values[e] = num / (den + cfg.denom_guard);
    }
    return out;
}

Vector kde(const RowMatrix& points, const RowMatrix& eval_points,
           const SmootherConfig& cfg) {
    const Eigen::Index n = points.rows();
    const Eigen::Index m = eval_points.rows();
    check_inputs(n, points, eval_points, cfg);

    const ProductKernel kernel(cfg.kernel);
    const double inv_h = 1.0 / cfg.bandwidth;
    const double scale = std::pow(inv_h, cfg.kernel.dim);

    Vector out(m);
    const double* xd = points.data();
    const double* zd = eval_points.data();
    const int d = cfg.kernel.dim;

    for (Eigen::Index e = 0; e < m; ++e) {
        const double* z = zd + e * d;
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            acc += kernel.eval_scaled_diff(xd + i * d, z, inv_h);
        out[e] = scale * acc / static_cast<double>(n);
    }
    return out;
}

} // namespace cate
