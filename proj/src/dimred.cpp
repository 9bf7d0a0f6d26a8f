#include "cate/dimred.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <stdexcept>

namespace cate {

namespace {

// Flip column signs so the largest-magnitude entry of each column is
// positive; first index wins ties.
void fix_column_signs(Matrix& v) {
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
        Eigen::Index arg = 0;
        for (Eigen::Index r = 1; r < v.rows(); ++r)
            if (std::abs(v(r, c)) > std::abs(v(arg, c))) arg = r;
        if (v(arg, c) < 0.0) v.col(c) = -v.col(c);
    }
}

Matrix top_eigenvectors(const Matrix& sym, int r) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
    const Matrix& vec = solver.eigenvectors(); // ascending eigenvalues
    Matrix out(sym.rows(), r);
    for (int c = 0; c < r; ++c)
        out.col(c) = vec.col(sym.rows() - 1 - c);
    return out;
}

} // namespace

ProjectionMatrix::ProjectionMatrix(Matrix v) : v_(std::move(v)) {
    if (v_.rows() < 1 || v_.cols() < 1 || v_.cols() > v_.rows())
        throw std::invalid_argument("ProjectionMatrix: need k x r with 1 <= r <= k");
    const Matrix gram = v_.transpose() * v_;
    if ((gram - Matrix::Identity(v_.cols(), v_.cols())).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("ProjectionMatrix: columns are not orthonormal");
}

ProjectionMatrix ProjectionMatrix::orthonormalized(const Matrix& m) {
    if (m.rows() < 1 || m.cols() < 1 || m.cols() > m.rows())
        throw std::invalid_argument("ProjectionMatrix: need k x r with 1 <= r <= k");
    Eigen::HouseholderQR<Matrix> qr(m);
    Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
    fix_column_signs(q);
    return ProjectionMatrix(std::move(q));
}

double subspace_distance(const ProjectionMatrix& a, const ProjectionMatrix& b) {
    if (a.input_dim() != b.input_dim())
        throw std::invalid_argument("subspace_distance: ambient dimensions differ");
    const Matrix pa = a.matrix() * a.matrix().transpose();
    const Matrix pb = b.matrix() * b.matrix().transpose();
    return (pa - pb).norm();
}

AffiliationResult affiliation_count(const ProjectionMatrix& v_hat, int l,
                                    double tolerance) {
    if (l < 1 || l > v_hat.input_dim())
        throw std::invalid_argument("affiliation_count: l out of range");
    AffiliationResult res;
    res.tolerance = tolerance;
    res.residuals.resize(l);
    // ||(I - V V^T) e_j||^2 = 1 - ||row_j(V)||^2 by orthonormality.
    for (int j = 0; j < l; ++j) {
        const double proj_sq = v_hat.matrix().row(j).squaredNorm();
        res.residuals[j] = std::sqrt(std::max(0.0, 1.0 - proj_sq));
        if (res.residuals[j] < tolerance) ++res.t;
    }
    return res;
}

ProjectionMatrix init_directions(const Vector& d, const RowMatrix& x, int r,
                                 const KernelSpec& kernel, double h) {
    const Eigen::Index n = x.rows();
    const Eigen::Index k = x.cols();
    if (r < 1 || r > k) throw std::invalid_argument("init_directions: r out of range");
    if (kernel.dim != k)
        throw std::invalid_argument("init_directions: kernel dim does not match covariates");

    // Work on whitened covariates: near-collinear designs otherwise blow up
    // the local-linear slopes along the small-variance directions and the
    // gradient scatter ends up dominated by that noise. The bandwidth is on
    // the whitened scale (unit variance per direction).
    RowMatrix centered = x.rowwise() - x.colwise().mean();
    Matrix cov = centered.transpose() * centered / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    const double lam_max = eig.eigenvalues().maxCoeff();
    if (!(lam_max > 0.0))
        throw std::invalid_argument("init_directions: covariates are constant");
    Vector inv_sqrt = eig.eigenvalues();
    for (Eigen::Index c = 0; c < k; ++c)
        inv_sqrt[c] = 1.0 / std::sqrt(std::max(eig.eigenvalues()[c], 1e-10 * lam_max));
    Matrix whiten = eig.eigenvectors() * inv_sqrt.asDiagonal() *
                    eig.eigenvectors().transpose();
    RowMatrix xw = centered * whiten;

    const ProductKernel kern(kernel);
    const double inv_h = 1.0 / h;
    const double* xd = xw.data();

    // Local-linear slope at each anchor, ridge-stabilized.
    Matrix scatter = Matrix::Zero(k, k);
    Matrix normal(k + 1, k + 1);
    Vector rhs(k + 1), delta(k);
    for (Eigen::Index j = 0; j < n; ++j) {
        normal.setZero();
        rhs.setZero();
        const double* xj = xd + j * k;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double* xi = xd + i * k;
            const double w = kern.eval_scaled_diff(xi, xj, inv_h);
            if (w == 0.0) continue;
            for (Eigen::Index c = 0; c < k; ++c) delta[c] = xi[c] - xj[c];
            normal(0, 0) += w;
            normal.block(1, 0, k, 1) += w * delta;
            normal.block(1, 1, k, k) += w * (delta * delta.transpose());
            rhs[0] += w * d[i];
            rhs.tail(k) += (w * d[i]) * delta;
        }
        normal.block(0, 1, 1, k) = normal.block(1, 0, k, 1).transpose();
        normal.diagonal().array() += 1e-8;
        Vector sol = normal.ldlt().solve(rhs);
        scatter.noalias() += sol.tail(k) * sol.tail(k).transpose();
    }
    scatter /= static_cast<double>(n);

    if (scatter.trace() < 1e-12) {
        // Degenerate gradient field (e.g. constant D): leading principal
        // components of X.
        Matrix top = top_eigenvectors(cov, r);
        fix_column_signs(top);
        return ProjectionMatrix(std::move(top));
    }

    // Directions found on the whitened scale map back through the whitener.
    Matrix top_w = top_eigenvectors(scatter, r);
    return ProjectionMatrix::orthonormalized(whiten * top_w);
}

MaveFit mave_fit(const Vector& d, const RowMatrix& x, int r,
                 const KernelSpec& kernel, double h2, MaveOptions opts) {
    const Eigen::Index n = x.rows();
    const Eigen::Index k = x.cols();
    if (r < 1 || r > k) throw std::invalid_argument("mave_fit: need 1 <= r <= k");
    if (n <= k + r) throw std::invalid_argument("mave_fit: need n > k + r");
    if (kernel.dim != r) throw std::invalid_argument("mave_fit: kernel dim must equal r");
    if (d.size() != n) throw std::invalid_argument("mave_fit: D length mismatch");

    Matrix v;
    if (opts.initial_directions) {
        v = ProjectionMatrix::orthonormalized(*opts.initial_directions).matrix();
        if (v.rows() != k || v.cols() != r)
            throw std::invalid_argument("mave_fit: initial directions have the wrong shape");
    } else {
        // OPG start with a wide pilot bandwidth on the whitened scale; rough
        // directions suffice.
        const double h_init =
            1.5 * std::sqrt(static_cast<double>(k)) *
            std::pow(static_cast<double>(n), -1.0 / (k + 4.0));
        KernelSpec init_kernel{KernelFamily::gaussian_derived, 2, static_cast<int>(k)};
        v = init_directions(d, x, r, init_kernel, h_init).matrix();
    }

    const ProductKernel kern(kernel);
    const double inv_h2 = 1.0 / h2;

    MaveFit result{ProjectionMatrix::orthonormalized(v), false, 0, {}, {}};

    Matrix weights(n, n); // weights(i, j) = omega_{ij}, normalized per anchor j
    RowMatrix reduced(n, r); // row-major so each observation's index is contiguous
    Vector a(n);
    Matrix b(n, r);
    Matrix normal_ab(r + 1, r + 1);
    Vector rhs_ab(r + 1), g(r + 1);
    const int kr = static_cast<int>(k) * r;
    Matrix normal_v(kr, kr);
    Vector rhs_v(kr);
    Matrix s_j(k, k);
    Vector u_j(k), delta(k);

    for (int sweep = 1; sweep <= opts.max_iter; ++sweep) {
        reduced.noalias() = x * v;

        // omega_{ij} = H_h2(V^T(X_i - X_j)) / sum_l H_h2(V^T(X_l - X_j));
        // the raw kernel values are symmetric in (i, j).
        for (Eigen::Index j = 0; j < n; ++j) {
            weights(j, j) = kern.eval_scaled_diff(reduced.data() + j * r,
                                                  reduced.data() + j * r, inv_h2);
            for (Eigen::Index i = j + 1; i < n; ++i) {
                const double w = kern.eval_scaled_diff(
                    reduced.data() + i * r, reduced.data() + j * r, inv_h2);
                weights(i, j) = w;
                weights(j, i) = w;
            }
        }
        for (Eigen::Index j = 0; j < n; ++j) {
            double total = weights.col(j).sum();
            if (std::abs(total) < 1e-300) total = 1.0;
            weights.col(j) /= total;
        }

        // Local intercept/slope per anchor, given V. Zero weights (far pairs)
        // contribute nothing and are skipped.
        const double* red = reduced.data(); // row-major: coordinate c of row i at red[i*r + c]
        for (Eigen::Index j = 0; j < n; ++j) {
            normal_ab.setZero();
            rhs_ab.setZero();
            const double* wcol = weights.data() + j * n;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double w = wcol[i];
                if (w == 0.0) continue;
                g[0] = 1.0;
                for (int c = 0; c < r; ++c) g[c + 1] = red[i * r + c] - red[j * r + c];
                for (int c1 = 0; c1 <= r; ++c1) {
                    const double wg = w * g[c1];
                    for (int c2 = 0; c2 <= c1; ++c2) normal_ab(c1, c2) += wg * g[c2];
                }
                if (d[i] != 0.0) for (int c = 0; c <= r; ++c) rhs_ab[c] += w * g[c];
            }
            normal_ab.triangularView<Eigen::StrictlyUpper>() = normal_ab.transpose();
            normal_ab.diagonal().array() += opts.ridge;
            Vector sol = normal_ab.ldlt().solve(rhs_ab);
            a[j] = sol[0];
            b.row(j) = sol.tail(r).transpose();
        }

        // Direction update, given the locals: least squares in vec(V) with
        // regressors b_j (x) (X_i - X_j); the normal matrix factors per anchor
        // as (b_j b_j^T) (x) S_j.
        normal_v.setZero();
        rhs_v.setZero();
        double obj_start = 0.0;
        const double* xd = x.data();
        double* sj = s_j.data(); // column-major k x k, lower triangle used
        for (Eigen::Index j = 0; j < n; ++j) {
            s_j.setZero();
            u_j.setZero();
            const double* xj = xd + j * k;
            const double* wcol = weights.data() + j * n;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double w = wcol[i];
                if (w == 0.0) continue;
                const double* xi = xd + i * k;
                for (Eigen::Index c = 0; c < k; ++c) delta[c] = xi[c] - xj[c];
                const double e = d[i] - a[j];
                if (opts.track_objective) {
                    double fitted = 0.0;
                    for (int c = 0; c < r; ++c)
                        fitted += b(j, c) * (red[i * r + c] - red[j * r + c]);
                    const double resid = e - fitted;
                    obj_start += w * resid * resid;
                }
                for (Eigen::Index c1 = 0; c1 < k; ++c1) {
                    const double wd = w * delta[c1];
                    double* col = sj + c1 * k;
                    for (Eigen::Index c2 = c1; c2 < k; ++c2) col[c2] += wd * delta[c2];
                }
                const double we = w * e;
                for (Eigen::Index c = 0; c < k; ++c) u_j[c] += we * delta[c];
            }
            s_j.triangularView<Eigen::StrictlyUpper>() = s_j.transpose();
            for (int c1 = 0; c1 < r; ++c1) {
                for (int c2 = 0; c2 < r; ++c2) {
                    const double bb = b(j, c1) * b(j, c2);
                    if (bb != 0.0)
                        normal_v.block(c1 * k, c2 * k, k, k).noalias() += bb * s_j;
                }
                rhs_v.segment(c1 * k, k).noalias() += b(j, c1) * u_j;
            }
        }
        // Ridge centered at the current V keeps the solve well posed without
        // breaking the per-sweep objective decrease.
        normal_v.diagonal().array() += opts.ridge;
        rhs_v += opts.ridge * Eigen::Map<const Vector>(v.data(), kr);
        Vector vec_v = normal_v.ldlt().solve(rhs_v);
        Matrix v_ls = Eigen::Map<Matrix>(vec_v.data(), k, r);

        if (opts.track_objective) {
            // Objective after the direction step, same weights and locals.
            double obj_end = 0.0;
            RowMatrix reduced_ls = x * v_ls;
            for (Eigen::Index j = 0; j < n; ++j) {
                for (Eigen::Index i = 0; i < n; ++i) {
                    double fitted = 0.0;
                    for (int c = 0; c < r; ++c)
                        fitted += b(j, c) * (reduced_ls(i, c) - reduced_ls(j, c));
                    const double resid = d[i] - a[j] - fitted;
                    obj_end += weights(i, j) * resid * resid;
                }
            }
            result.objective_start.push_back(obj_start);
            result.objective_end.push_back(obj_end);
        }
        result.sweeps = sweep;

        ProjectionMatrix next = ProjectionMatrix::orthonormalized(v_ls);
        const double dist = subspace_distance(next, result.projection);
        v = next.matrix();
        result.projection = std::move(next);
        if (dist < opts.tol) {
            result.converged = true;
            break;
        }
    }
    return result;
}

} // namespace cate
