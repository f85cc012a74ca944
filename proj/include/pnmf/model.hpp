#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "pnmf/core.hpp"
#include "pnmf/types.hpp"

namespace pnmf {

// A scalar function of a vector together with its gradient.
struct VectorFunction {
    std::function<double(const Vector&)> value;
    std::function<Vector(const Vector&)> gradient;
};

// Which family of vectors a block regularizer acts on. Subproblem vectors are
// W rows / H columns (the vectors the block updates operate on); RowsAsImages
// means rows of H, each row being a p x p image flattened to length p^2.
enum class Grouping {
    SubproblemVectors,
    RowsAsImages,
};

struct LipschitzPart {
    VectorFunction fn;
    double sigma = 0.0;  // gradient Lipschitz constant of fn
    Grouping grouping = Grouping::SubproblemVectors;
};

struct RelSmoothPart {
    VectorFunction fn;
    double sigma = 0.0;  // relative-smoothness constant w.r.t. -1' log x
    Grouping grouping = Grouping::SubproblemVectors;
};

// Pointwise concave term, applied entrywise to the whole block.
struct ConcavePart {
    std::function<double(double)> value;
    std::function<double(double)> derivative;
};

struct RegularizerSpec {
    std::optional<LipschitzPart> lipschitz;
    std::optional<RelSmoothPart> relsmooth;
    std::optional<ConcavePart> concave;

    bool empty() const { return !lipschitz && !relsmooth && !concave; }

    // Union of parts; throws DomainError when both sides define the same part.
    RegularizerSpec merged_with(const RegularizerSpec& other) const;
};

// (weight / 2) x' L x per image row, sigma = weight * lambda_max(L). The
// spectral estimate is padded by a small relative margin since power
// iteration approaches lambda_max from below.
RegularizerSpec laplacian_smoothness(double weight,
                                     std::shared_ptr<const SparseSymmetricOperator> laplacian);

// -1' log(x - offset), +inf when any entry is at or below the offset. The
// relative-smoothness constant depends on how far the domain stays from the
// barrier, so the caller supplies it.
RegularizerSpec log_barrier(double offset, double sigma_r);

// s_C(t) = log(t + 1/alpha), pointwise concave.
RegularizerSpec log_sparsity(double alpha);

enum class ConstraintSide {
    HColumns,  // e' h_i = 1 for every column of H
    WRows,     // w_i' e = 1 for every row of W
};

struct GeneralizedSimplex {
    Vector e;
    ConstraintSide side = ConstraintSide::HColumns;
};

struct ProblemSpec {
    Matrix Y;
    Index k = 1;
    double epsilon = 1e-8;
    std::optional<GeneralizedSimplex> constraint;
    RegularizerSpec reg_w;
    RegularizerSpec reg_h;

    Index n() const { return Y.rows(); }
    Index m() const { return Y.cols(); }

    // Validates: Y >= 0 and finite, k >= 1, epsilon > 0, constraint weights
    // e >= 0 with at least one positive entry and epsilon * |e|_1 <= 1,
    // RowsAsImages grouping only on the H side.
    static ProblemSpec create(Matrix Y, Index k, double epsilon,
                              std::optional<GeneralizedSimplex> constraint = std::nullopt,
                              RegularizerSpec reg_w = {}, RegularizerSpec reg_h = {});
};

// -<Y, log(WH)> + <1, WH>, zero counts contributing nothing to the log sum.
double poisson_loss(const Matrix& W, const Matrix& H, const Matrix& Y);

enum class BlockSide { W, H };

// Sum of a block regularizer over its declared vector grouping, plus the
// pointwise concave term over all entries.
double regularizer_value(const RegularizerSpec& reg, const Matrix& block, BlockSide side);

// Gradient of (lipschitz + relsmooth + concave) parts w.r.t. the block.
Matrix regularizer_gradient(const RegularizerSpec& reg, const Matrix& block, BlockSide side);

double total_objective(const Matrix& W, const Matrix& H, const ProblemSpec& spec);

// One column/row subproblem: f(x) = sum_i [-b_i log(a_i' x) + a_i' x]
// + s_L(x) + s_R(x) + sum_j s_C(x_j). Regularizer gradients are evaluated on
// the full block at the current iterate and sliced, so cross-subproblem
// couplings (the image Laplacian) enter through grad_sL / grad_sR.
struct SubproblemView {
    std::shared_ptr<const Matrix> A;  // rows x dim, nonnegative
    Vector b;                         // per row, nonnegative

    // The solver path uses the slices grad_s* / s*_at_ref, which are valid at
    // the block state the view was built from. The optional closures evaluate
    // the restricted regularizer at arbitrary points; surrogate evaluation and
    // certification prefer them when present.
    bool has_lipschitz = false;
    double sigma_L = 0.0;
    Vector grad_sL;
    double sL_at_ref = 0.0;
    std::function<double(const Vector&)> sL_value;
    std::function<Vector(const Vector&)> sL_grad;

    bool has_relsmooth = false;
    double sigma_R = 0.0;
    Vector grad_sR;
    double sR_at_ref = 0.0;
    std::function<double(const Vector&)> sR_value;
    std::function<Vector(const Vector&)> sR_grad;

    std::optional<ConcavePart> concave;

    Index dim() const { return A ? A->cols() : 0; }
};

// Views for one block at the current iterate (W, H). For the H block there is
// one view per column with A = W; for the W block one view per row with
// A = H'. `with_values` additionally attaches value closures for s_L / s_R
// (used by tests and the validator, not by the solver's hot path).
std::vector<SubproblemView> subproblem_views(const ProblemSpec& spec, const Matrix& W,
                                             const Matrix& H, BlockSide block,
                                             bool with_values = false);

// Central finite-difference check of a VectorFunction's gradient at x.
// Returns the worst relative mismatch across coordinates.
double gradient_check(const VectorFunction& fn, const Vector& x, double step_scale = 1e-6);

}  // namespace pnmf
