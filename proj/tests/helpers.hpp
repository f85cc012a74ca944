#pragma once

#include <Eigen/Eigenvalues>

#include <memory>
#include <vector>

#include "pnmf/model.hpp"
#include "pnmf/rng.hpp"
#include "pnmf/types.hpp"

namespace pnmf::testing {

inline Vector random_vector(Rng& rng, Index dim, double lo, double hi) {
    Vector v(dim);
    for (Index j = 0; j < dim; ++j) {
        v[j] = rng.uniform(lo, hi);
    }
    return v;
}

inline Matrix random_matrix(Rng& rng, Index rows, Index cols, double lo, double hi) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
            m(i, j) = rng.uniform(lo, hi);
        }
    }
    return m;
}

// Dense eigenvalue oracle for small operators.
inline Vector dense_eigenvalues(const SparseSymmetricOperator& op) {
    Eigen::MatrixXd dense = Eigen::MatrixXd(op.matrix());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense);
    return eig.eigenvalues();
}

// A self-contained view: green term plus optional synthetic regularizer
// parts, all carried as closures so surrogates can be evaluated anywhere.
struct SyntheticView {
    SubproblemView view;
    std::shared_ptr<Matrix> A;
};

inline SyntheticView make_green_view(const Matrix& A, const Vector& b) {
    SyntheticView out;
    out.A = std::make_shared<Matrix>(A);
    out.view.A = out.A;
    out.view.b = b;
    return out;
}

// Quadratic Lipschitz part 0.5 x'Qx + c'x with sigma = lambda_max(Q).
inline void add_quadratic_part(SubproblemView& view, const Eigen::MatrixXd& Q, const Vector& c) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Q);
    auto Qp = std::make_shared<Eigen::MatrixXd>(Q);
    auto cp = std::make_shared<Vector>(c);
    view.has_lipschitz = true;
    view.sigma_L = eig.eigenvalues().maxCoeff();
    view.sL_value = [Qp, cp](const Vector& x) { return 0.5 * x.dot(*Qp * x) + cp->dot(x); };
    view.sL_grad = [Qp, cp](const Vector& x) { return Vector(*Qp * x + *cp); };
    view.grad_sL = Vector::Zero(c.size());
}

inline void add_barrier_part(SubproblemView& view, double offset, double sigma) {
    const RegularizerSpec reg = log_barrier(offset, sigma);
    view.has_relsmooth = true;
    view.sigma_R = sigma;
    view.sR_value = reg.relsmooth->fn.value;
    view.sR_grad = reg.relsmooth->fn.gradient;
    view.grad_sR = Vector::Zero(view.dim());
}

inline void add_sparsity_part(SubproblemView& view, double alpha) {
    view.concave = log_sparsity(alpha).concave;
}

// Refresh the gradient slices so the update-rule path (which reads slices)
// agrees with the closure path at this anchor.
inline void refresh_slices(SubproblemView& view, const Vector& x_t) {
    if (view.has_lipschitz && view.sL_grad) {
        view.grad_sL = view.sL_grad(x_t);
        view.sL_at_ref = view.sL_value(x_t);
    }
    if (view.has_relsmooth && view.sR_grad) {
        view.grad_sR = view.sR_grad(x_t);
        view.sR_at_ref = view.sR_value(x_t);
    }
}

// Straightforward Lee-Seung KL multiplicative updates with the same positivity
// floor and W-then-H interleaving; the reference oracle for the solver.
inline void classic_kl_mu_step(Matrix& W, Matrix& H, const Matrix& Y, double eps) {
    {
        const Matrix P = W * H;
        Matrix R(Y.rows(), Y.cols());
        for (Index i = 0; i < Y.rows(); ++i) {
            for (Index j = 0; j < Y.cols(); ++j) {
                R(i, j) = Y(i, j) > 0.0 ? Y(i, j) / P(i, j) : 0.0;
            }
        }
        const Matrix numer = R * H.transpose();
        const Vector hsum = H.rowwise().sum();
        for (Index i = 0; i < W.rows(); ++i) {
            for (Index j = 0; j < W.cols(); ++j) {
                W(i, j) = std::max(W(i, j) * numer(i, j) / hsum[j], eps);
            }
        }
    }
    {
        const Matrix P = W * H;
        Matrix R(Y.rows(), Y.cols());
        for (Index i = 0; i < Y.rows(); ++i) {
            for (Index j = 0; j < Y.cols(); ++j) {
                R(i, j) = Y(i, j) > 0.0 ? Y(i, j) / P(i, j) : 0.0;
            }
        }
        const Matrix numer = W.transpose() * R;
        const Vector wsum = W.colwise().sum();
        for (Index i = 0; i < H.rows(); ++i) {
            for (Index j = 0; j < H.cols(); ++j) {
                H(i, j) = std::max(H(i, j) * numer(i, j) / wsum[i], eps);
            }
        }
    }
}

}  // namespace pnmf::testing
