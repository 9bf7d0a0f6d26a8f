#pragma once

#include "cate/kernels.hpp"
#include "cate/types.hpp"

#include <cstdint>
#include <vector>

namespace cate {

// Shared smoother configuration. The scaled kernel is
// K_h(u) = h^{-d} K(u/h); denom_guard is a small ridge added to the weight
// sum so empty neighbourhoods do not divide by zero.
struct SmootherConfig {
    KernelSpec kernel;
    double bandwidth = 1.0;
    bool leave_one_out = false;
    double denom_guard = 1e-12;
};

struct NwResult {
    Vector values;
    // Set where the weight sum fell below denom_guard * 10.
    std::vector<std::uint8_t> unstable;
};

// Nadaraya-Watson regression of responses on covariates evaluated at
// eval_points. With leave_one_out set, eval_points must coincide row-wise
// with covariates and the i-th weight sum excludes observation i.
NwResult nw_regress(const Vector& responses, const RowMatrix& covariates,
                    const RowMatrix& eval_points, const SmootherConfig& cfg);

// Kernel density estimate f_hat(z) = (1/n) sum_i K_h(z_i - z).
Vector kde(const RowMatrix& points, const RowMatrix& eval_points,
           const SmootherConfig& cfg);

} // namespace cate
