#include "pnmf/core.hpp"

#include <cmath>
#include <map>
#include <utility>

#include "pnmf/rng.hpp"

namespace pnmf {

SparseSymmetricOperator::SparseSymmetricOperator(Index dim) : matrix_(dim, dim) {
    if (dim < 1) {
        throw DimensionError("operator dimension must be >= 1");
    }
}

SparseSymmetricOperator SparseSymmetricOperator::from_entries(
    Index dim, const std::vector<Entry>& entries) {
    SparseSymmetricOperator op(dim);
    std::map<std::pair<Index, Index>, double> acc;
    for (const Entry& e : entries) {
        if (e.row < 0 || e.row >= dim || e.col < 0 || e.col >= dim) {
            throw DimensionError("entry index out of range");
        }
        if (!std::isfinite(e.value)) {
            throw DomainError("entry value must be finite");
        }
        acc[{e.row, e.col}] += e.value;
        if (e.row != e.col) {
            acc[{e.col, e.row}] += e.value;
        }
    }
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(acc.size());
    for (const auto& [key, value] : acc) {
        triplets.emplace_back(key.first, key.second, value);
    }
    op.matrix_.setFromTriplets(triplets.begin(), triplets.end());
    return op;
}

Vector SparseSymmetricOperator::apply(const Vector& x) const {
    if (x.size() != dim()) {
        throw DimensionError("vector length does not match operator dimension");
    }
    return matrix_ * x;
}

Matrix SparseSymmetricOperator::apply_rows(const Matrix& rows) const {
    if (rows.cols() != dim()) {
        throw DimensionError("row length does not match operator dimension");
    }
    // (rows * op) with op symmetric.
    return rows * matrix_;
}

double SparseSymmetricOperator::quad_form(const Vector& x) const {
    return x.dot(apply(x));
}

SparseSymmetricOperator laplacian_2d(Index side) {
    if (side < 1) {
        throw DimensionError("grid side must be >= 1");
    }
    const Index n = side * side;
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(5 * n));
    auto at = [side](Index r, Index c) { return r * side + c; };
    for (Index r = 0; r < side; ++r) {
        for (Index c = 0; c < side; ++c) {
            int degree = 0;
            const Index i = at(r, c);
            if (r > 0) {
                triplets.emplace_back(i, at(r - 1, c), -1.0);
                ++degree;
            }
            if (r + 1 < side) {
                triplets.emplace_back(i, at(r + 1, c), -1.0);
                ++degree;
            }
            if (c > 0) {
                triplets.emplace_back(i, at(r, c - 1), -1.0);
                ++degree;
            }
            if (c + 1 < side) {
                triplets.emplace_back(i, at(r, c + 1), -1.0);
                ++degree;
            }
            if (degree > 0) {
                triplets.emplace_back(i, i, static_cast<double>(degree));
            }
        }
    }
    SparseSymmetricOperator op(n);
    std::vector<SparseSymmetricOperator::Entry> entries;
    entries.reserve(triplets.size());
    for (const auto& t : triplets) {
        if (t.row() <= t.col()) {
            entries.push_back({t.row(), t.col(), t.value()});
        }
    }
    return SparseSymmetricOperator::from_entries(n, entries);
}

PowerIterationResult lambda_max(const SparseSymmetricOperator& op, double tol, int max_iter) {
    if (tol <= 0.0) {
        throw DomainError("tolerance must be positive");
    }
    const Index n = op.dim();
    // Deterministic start: ones plus a fixed hash-based perturbation. A
    // structured (e.g. linear) perturbation can be exactly orthogonal to the
    // dominant eigenvector of grid operators.
    Vector v(n);
    for (Index i = 0; i < n; ++i) {
        std::uint64_t s = static_cast<std::uint64_t>(i);
        v[i] = 1.0 + 0.25 * (static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53);
    }
    v.normalize();

    PowerIterationResult result;
    double rayleigh = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        Vector w = op.apply(v);
        const double next = v.dot(w);
        const double norm = w.norm();
        result.iterations = it;
        if (norm == 0.0) {
            // Operator annihilates the iterate; largest eigenvalue is 0 for
            // PSD operators restricted to this subspace.
            result.value = 0.0;
            result.converged = true;
            return result;
        }
        v = w / norm;
        if (it > 1 && std::abs(next - rayleigh) <= tol * std::max(1.0, std::abs(next))) {
            result.value = next;
            result.converged = true;
            return result;
        }
        rayleigh = next;
    }
    result.value = rayleigh;
    result.converged = false;
    return result;
}

double frobenius_inner(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError("frobenius_inner: shape mismatch");
    }
    return a.cwiseProduct(b).sum();
}

}  // namespace pnmf
