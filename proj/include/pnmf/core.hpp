#pragma once

#include <Eigen/SparseCore>

#include <vector>

#include "pnmf/types.hpp"

namespace pnmf {

// Sparse symmetric operator, stored fully (both triangles). The only
// structurally sparse object in the problem is the grid Laplacian, so the
// interface is limited to what the regularizers need: matrix-vector and
// row-block products plus the quadratic form.
class SparseSymmetricOperator {
  public:
    struct Entry {
        Index row;
        Index col;
        double value;
    };

    // Zero operator of the given dimension.
    explicit SparseSymmetricOperator(Index dim);

    // Builds the symmetric closure of the given entries: (i, j, v) implies
    // (j, i, v). Duplicate coordinates are summed. Throws DimensionError on
    // out-of-range indices and DomainError on conflicting symmetric values.
    static SparseSymmetricOperator from_entries(Index dim, const std::vector<Entry>& entries);

    Index dim() const { return matrix_.rows(); }

    Vector apply(const Vector& x) const;

    // rows * op, each row of `rows` treated as a vector the operator acts on.
    Matrix apply_rows(const Matrix& rows) const;

    // x' op x
    double quad_form(const Vector& x) const;

    const Eigen::SparseMatrix<double>& matrix() const { return matrix_; }

  private:
    Eigen::SparseMatrix<double> matrix_;
};

// Graph Laplacian (degree minus adjacency) of the p x p grid with 4-neighbor
// connectivity; boundary nodes simply have lower degree. dim = p^2, PSD, rows
// sum to zero.
SparseSymmetricOperator laplacian_2d(Index side);

struct PowerIterationResult {
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Largest eigenvalue by power iteration with a deterministic start vector.
// Stops when the Rayleigh quotient stagnates to relative tolerance `tol`;
// when max_iter is exhausted the current estimate is returned with
// converged = false.
PowerIterationResult lambda_max(const SparseSymmetricOperator& op, double tol = 1e-6,
                                int max_iter = 1000);

// <A, B> = sum_ij a_ij b_ij
double frobenius_inner(const Matrix& a, const Matrix& b);

}  // namespace pnmf
