#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace cate {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Observations live in rows; row-major keeps each observation contiguous.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr const char* kVersion = "0.1.0";

// Thrown by iterative solvers that fail to converge; carries the last iterate
// so callers can inspect or restart.
class NonConvergenceError : public std::runtime_error {
public:
    NonConvergenceError(const std::string& what, Vector last_iterate)
        : std::runtime_error(what), last_iterate_(std::move(last_iterate)) {}

    const Vector& last_iterate() const { return last_iterate_; }

private:
    Vector last_iterate_;
};

// One observed sample: covariates X (Z is the leading z_dim columns),
// binary treatment D and outcome Y. Simulated datasets additionally carry
// the true propensity and both potential outcomes (empty otherwise).
struct Dataset {
    RowMatrix x;
    Vector d;
    Vector y;
    int z_dim = 1;

    Vector true_propensity;
    Vector y1;
    Vector y0;

    Eigen::Index n() const { return x.rows(); }
    Eigen::Index k() const { return x.cols(); }
    // View of the conditioning covariates Z (leading z_dim columns of X).
    auto z() const { return x.leftCols(z_dim); }
};

inline void validate_dataset(const Dataset& data) {
    const auto n = data.x.rows();
    if (n == 0) throw std::invalid_argument("dataset: no observations");
    if (data.d.size() != n || data.y.size() != n)
        throw std::invalid_argument("dataset: D/Y length does not match X rows");
    if (data.z_dim < 1 || data.z_dim > data.x.cols())
        throw std::invalid_argument("dataset: z_dim out of range");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (data.d[i] != 0.0 && data.d[i] != 1.0)
            throw std::invalid_argument("dataset: treatment must be binary 0/1");
    }
}

} // namespace cate
