#pragma once

#include "cate/kernels.hpp"
#include "cate/types.hpp"

#include <optional>
#include <vector>

namespace cate {

// A k x r matrix with orthonormal columns; the span identifies the central
// subspace, so any right rotation is equivalent.
class ProjectionMatrix {
public:
    // Validates orthonormality (V^T V = I within 1e-10).
    explicit ProjectionMatrix(Matrix v);

    // Thin QR of an arbitrary full-column-rank matrix, with the sign of each
    // column fixed so its largest-magnitude entry is positive. Deterministic
    // despite rotation non-identifiability.
    static ProjectionMatrix orthonormalized(const Matrix& m);

    const Matrix& matrix() const { return v_; }
    int input_dim() const { return static_cast<int>(v_.rows()); }
    int rank() const { return static_cast<int>(v_.cols()); }

private:
    Matrix v_;
};

// || A A^T - B B^T ||_F; zero iff the column spans agree.
double subspace_distance(const ProjectionMatrix& a, const ProjectionMatrix& b);

// How many of the leading l coordinate axes lie in span(v_hat): counts
// residuals ||(I - V V^T) e_j|| below the tolerance.
struct AffiliationResult {
    int t = 0;
    Vector residuals;
    double tolerance = 0.05;
};

AffiliationResult affiliation_count(const ProjectionMatrix& v_hat, int l,
                                    double tolerance = 0.05);

// Outer-product-of-gradients initializer: local-linear slopes at every
// anchor, then the top-r eigenvectors of their scatter. Falls back to the
// leading principal components of X when the gradient field is degenerate.
ProjectionMatrix init_directions(const Vector& d, const RowMatrix& x, int r,
                                 const KernelSpec& kernel, double h);

struct MaveOptions {
    int max_iter = 50;
    double tol = 1e-6;
    double ridge = 1e-8;
    // Objective recording costs an extra pass per sweep; callers that only
    // need the directions can turn it off.
    bool track_objective = true;
    // Warm start; defaults to the outer-product-of-gradients initializer.
    std::optional<Matrix> initial_directions;
};

struct MaveFit {
    ProjectionMatrix projection;
    bool converged = false;
    int sweeps = 0;
    // Weighted-least-squares objective at the start and end of each sweep,
    // both evaluated with that sweep's weights; end <= start is guaranteed.
    std::vector<double> objective_start;
    std::vector<double> objective_end;
};

// Minimum average variance estimation of the projection directions:
// alternating weighted least squares over the local intercepts/slopes and
// the direction matrix, weights recomputed from the current V each sweep.
MaveFit mave_fit(const Vector& d, const RowMatrix& x, int r,
                 const KernelSpec& kernel, double h2, MaveOptions opts = {});

} // namespace cate
