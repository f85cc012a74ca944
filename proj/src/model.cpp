#include "pnmf/model.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace pnmf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Rows of the block for W (both groupings) and for H images; columns of H for
// subproblem vectors.
bool acts_on_rows(BlockSide side, Grouping grouping) {
    if (side == BlockSide::W) {
        return true;
    }
    return grouping == Grouping::RowsAsImages;
}

template <typename Fn>
void for_each_vector(const Matrix& block, bool rows, Fn&& fn) {
    if (rows) {
        for (Index i = 0; i < block.rows(); ++i) {
            fn(i, Vector(block.row(i).transpose()));
        }
    } else {
        for (Index i = 0; i < block.cols(); ++i) {
            fn(i, Vector(block.col(i)));
        }
    }
}

}  // namespace

RegularizerSpec RegularizerSpec::merged_with(const RegularizerSpec& other) const {
    RegularizerSpec out = *this;
    if (other.lipschitz) {
        if (out.lipschitz) {
            throw DomainError("both regularizers define a lipschitz part");
        }
        out.lipschitz = other.lipschitz;
    }
    if (other.relsmooth) {
        if (out.relsmooth) {
            throw DomainError("both regularizers define a relatively smooth part");
        }
        out.relsmooth = other.relsmooth;
    }
    if (other.concave) {
        if (out.concave) {
            throw DomainError("both regularizers define a concave part");
        }
        out.concave = other.concave;
    }
    return out;
}

RegularizerSpec laplacian_smoothness(double weight,
                                     std::shared_ptr<const SparseSymmetricOperator> laplacian) {
    if (weight < 0.0) {
        throw DomainError("laplacian weight must be >= 0");
    }
    if (!laplacian) {
        throw DomainError("laplacian operator is required");
    }
    const PowerIterationResult lm = lambda_max(*laplacian);
    RegularizerSpec reg;
    LipschitzPart part;
    part.fn.value = [weight, laplacian](const Vector& x) {
        return 0.5 * weight * laplacian->quad_form(x);
    };
    part.fn.gradient = [weight, laplacian](const Vector& x) {
        return Vector(weight * laplacian->apply(x));
    };
    // Padding keeps sigma on the safe side of the true Lipschitz constant.
    part.sigma = weight * lm.value * (1.0 + 1e-4);
    part.grouping = Grouping::RowsAsImages;
    reg.lipschitz = std::move(part);
    return reg;
}

RegularizerSpec log_barrier(double offset, double sigma_r) {
    if (sigma_r < 0.0) {
        throw DomainError("sigma_r must be >= 0");
    }
    RegularizerSpec reg;
    RelSmoothPart part;
    part.fn.value = [offset](const Vector& x) {
        double acc = 0.0;
        for (Index j = 0; j < x.size(); ++j) {
            if (x[j] <= offset) {
                return kInf;
            }
            acc -= std::log(x[j] - offset);
        }
        return acc;
    };
    part.fn.gradient = [offset](const Vector& x) {
        Vector g(x.size());
        for (Index j = 0; j < x.size(); ++j) {
            if (x[j] <= offset) {
                throw DomainError("log_barrier gradient evaluated at or below the offset");
            }
            g[j] = -1.0 / (x[j] - offset);
        }
        return g;
    };
    part.sigma = sigma_r;
    part.grouping = Grouping::SubproblemVectors;
    reg.relsmooth = std::move(part);
    return reg;
}

RegularizerSpec log_sparsity(double alpha) {
    if (alpha <= 0.0) {
        throw DomainError("log_sparsity alpha must be > 0");
    }
    const double shift = 1.0 / alpha;
    RegularizerSpec reg;
    ConcavePart part;
    part.value = [shift](double t) { return std::log(t + shift); };
    part.derivative = [shift](double t) { return 1.0 / (t + shift); };
    reg.concave = std::move(part);
    return reg;
}

ProblemSpec ProblemSpec::create(Matrix Y, Index k, double epsilon,
                                std::optional<GeneralizedSimplex> constraint,
                                RegularizerSpec reg_w, RegularizerSpec reg_h) {
    if (k < 1) {
        throw DomainError("rank k must be >= 1");
    }
    if (!(epsilon > 0.0)) {
        throw DomainError("epsilon must be > 0");
    }
    if (Y.rows() < 1 || Y.cols() < 1) {
        throw DimensionError("Y must be non-empty");
    }
    for (Index i = 0; i < Y.rows(); ++i) {
        for (Index j = 0; j < Y.cols(); ++j) {
            const double y = Y(i, j);
            if (!std::isfinite(y) || y < 0.0) {
                throw DomainError("Y entries must be finite and >= 0");
            }
        }
    }
    if (constraint) {
        if (constraint->e.size() != k) {
            throw DimensionError("constraint weights must have length k");
        }
        double sum = 0.0;
        double max_e = 0.0;
        for (Index j = 0; j < constraint->e.size(); ++j) {
            const double e = constraint->e[j];
            if (!std::isfinite(e) || e < 0.0) {
                throw DomainError("constraint weights must be finite and >= 0");
            }
            sum += e;
            max_e = std::max(max_e, e);
        }
        if (max_e == 0.0) {
            throw DomainError("constraint needs at least one positive weight");
        }
        if (epsilon * sum > 1.0) {
            throw DomainError("infeasible constraint: epsilon * |e|_1 > 1");
        }
    }
    if ((reg_w.lipschitz && reg_w.lipschitz->grouping == Grouping::RowsAsImages) ||
        (reg_w.relsmooth && reg_w.relsmooth->grouping == Grouping::RowsAsImages)) {
        throw DomainError("RowsAsImages grouping applies to the H side only");
    }
    ProblemSpec spec;
    spec.Y = std::move(Y);
    spec.k = k;
    spec.epsilon = epsilon;
    spec.constraint = std::move(constraint);
    spec.reg_w = std::move(reg_w);
    spec.reg_h = std::move(reg_h);
    return spec;
}

double poisson_loss(const Matrix& W, const Matrix& H, const Matrix& Y) {
    if (W.cols() != H.rows() || W.rows() != Y.rows() || H.cols() != Y.cols()) {
        throw DimensionError("poisson_loss: shapes are not conformal");
    }
    const Matrix P = W * H;
    double acc = 0.0;
    for (Index i = 0; i < Y.rows(); ++i) {
        for (Index j = 0; j < Y.cols(); ++j) {
            const double y = Y(i, j);
            const double p = P(i, j);
            if (y > 0.0) {
                if (p <= 0.0) {
                    throw DomainError("poisson_loss: (WH)_ij <= 0 where y_ij > 0");
                }
                acc -= y * std::log(p);
            }
            acc += p;
        }
    }
    return acc;
}

double regularizer_value(const RegularizerSpec& reg, const Matrix& block, BlockSide side) {
    double acc = 0.0;
    if (reg.lipschitz) {
        const bool rows = acts_on_rows(side, reg.lipschitz->grouping);
        for_each_vector(block, rows,
                        [&](Index, const Vector& x) { acc += reg.lipschitz->fn.value(x); });
    }
    if (reg.relsmooth) {
        const bool rows = acts_on_rows(side, reg.relsmooth->grouping);
        for_each_vector(block, rows,
                        [&](Index, const Vector& x) { acc += reg.relsmooth->fn.value(x); });
    }
    if (reg.concave) {
        for (Index i = 0; i < block.rows(); ++i) {
            for (Index j = 0; j < block.cols(); ++j) {
                acc += reg.concave->value(block(i, j));
            }
        }
    }
    return acc;
}

Matrix regularizer_gradient(const RegularizerSpec& reg, const Matrix& block, BlockSide side) {
    Matrix grad = Matrix::Zero(block.rows(), block.cols());
    auto add_part = [&](const VectorFunction& fn, Grouping grouping) {
        const bool rows = acts_on_rows(side, grouping);
        for_each_vector(block, rows, [&](Index i, const Vector& x) {
            const Vector g = fn.gradient(x);
            if (rows) {
                grad.row(i) += g.transpose();
            } else {
                grad.col(i) += g;
            }
        });
    };
    if (reg.lipschitz) {
        add_part(reg.lipschitz->fn, reg.lipschitz->grouping);
    }
    if (reg.relsmooth) {
        add_part(reg.relsmooth->fn, reg.relsmooth->grouping);
    }
    if (reg.concave) {
        for (Index i = 0; i < block.rows(); ++i) {
            for (Index j = 0; j < block.cols(); ++j) {
                grad(i, j) += reg.concave->derivative(block(i, j));
            }
        }
    }
    return grad;
}

double total_objective(const Matrix& W, const Matrix& H, const ProblemSpec& spec) {
    double acc = poisson_loss(W, H, spec.Y);
    acc += regularizer_value(spec.reg_w, W, BlockSide::W);
    acc += regularizer_value(spec.reg_h, H, BlockSide::H);
    return acc;
}

namespace {

// Fills the per-view regularizer slices for one subproblem vector. For
// vector-aligned parts the slice is just the gradient at the vector itself;
// for RowsAsImages (H block updated by columns) the block gradient is
// computed once by the caller and sliced here.
void attach_vector_part(SubproblemView& view, const LipschitzPart& part, const Vector& x,
                        bool with_values) {
    view.has_lipschitz = true;
    view.sigma_L = part.sigma;
    view.grad_sL = part.fn.gradient(x);
    view.sL_at_ref = part.fn.value(x);
    if (with_values) {
        view.sL_value = part.fn.value;
        view.sL_grad = part.fn.gradient;
    }
}

void attach_vector_part(SubproblemView& view, const RelSmoothPart& part, const Vector& x,
                        bool with_values) {
    view.has_relsmooth = true;
    view.sigma_R = part.sigma;
    view.grad_sR = part.fn.gradient(x);
    view.sR_at_ref = part.fn.value(x);
    if (with_values) {
        view.sR_value = part.fn.value;
        view.sR_grad = part.fn.gradient;
    }
}

// Value closure for a row-coupled part restricted to column `col`: the block
// value with that column replaced.
std::function<double(const Vector&)> restricted_value(const VectorFunction& fn,
                                                      std::shared_ptr<const Matrix> block,
                                                      Index col) {
    return [fn, block, col](const Vector& x) {
        Matrix modified = *block;
        modified.col(col) = x;
        double acc = 0.0;
        for (Index r = 0; r < modified.rows(); ++r) {
            acc += fn.value(Vector(modified.row(r).transpose()));
        }
        return acc;
    };
}

// Gradient of the restricted function: entry r is coordinate `col` of the
// row-r gradient with the other columns held at the reference block.
std::function<Vector(const Vector&)> restricted_gradient(const VectorFunction& fn,
                                                         std::shared_ptr<const Matrix> block,
                                                         Index col) {
    return [fn, block, col](const Vector& x) {
        Matrix modified = *block;
        modified.col(col) = x;
        Vector g(modified.rows());
        for (Index r = 0; r < modified.rows(); ++r) {
            g[r] = fn.gradient(Vector(modified.row(r).transpose()))[col];
        }
        return g;
    };
}

}  // namespace

std::vector<SubproblemView> subproblem_views(const ProblemSpec& spec, const Matrix& W,
                                             const Matrix& H, BlockSide block,
                                             bool with_values) {
    if (W.rows() != spec.n() || W.cols() != spec.k || H.rows() != spec.k ||
        H.cols() != spec.m()) {
        throw DimensionError("subproblem_views: factor shapes do not match the problem");
    }
    std::vector<SubproblemView> views;
    if (block == BlockSide::W) {
        auto At = std::make_shared<Matrix>(H.transpose());
        const RegularizerSpec& reg = spec.reg_w;
        views.reserve(static_cast<std::size_t>(spec.n()));
        for (Index i = 0; i < spec.n(); ++i) {
            SubproblemView view;
            view.A = At;
            view.b = spec.Y.row(i).transpose();
            const Vector x = W.row(i).transpose();
            if (reg.lipschitz) {
                attach_vector_part(view, *reg.lipschitz, x, with_values);
            }
            if (reg.relsmooth) {
                attach_vector_part(view, *reg.relsmooth, x, with_values);
            }
            view.concave = reg.concave;
            views.push_back(std::move(view));
        }
        return views;
    }

    auto A = std::make_shared<Matrix>(W);
    const RegularizerSpec& reg = spec.reg_h;
    std::shared_ptr<const Matrix> H_ref;
    Matrix lip_block_grad;
    Matrix rel_block_grad;
    double lip_block_value = 0.0;
    double rel_block_value = 0.0;
    const bool lip_rows = reg.lipschitz && reg.lipschitz->grouping == Grouping::RowsAsImages;
    const bool rel_rows = reg.relsmooth && reg.relsmooth->grouping == Grouping::RowsAsImages;
    if (lip_rows || rel_rows) {
        H_ref = std::make_shared<const Matrix>(H);
    }
    if (lip_rows) {
        RegularizerSpec only;
        only.lipschitz = reg.lipschitz;
        lip_block_grad = regularizer_gradient(only, H, BlockSide::H);
        lip_block_value = regularizer_value(only, H, BlockSide::H);
    }
    if (rel_rows) {
        RegularizerSpec only;
        only.relsmooth = reg.relsmooth;
        rel_block_grad = regularizer_gradient(only, H, BlockSide::H);
        rel_block_value = regularizer_value(only, H, BlockSide::H);
    }
    views.reserve(static_cast<std::size_t>(spec.m()));
    for (Index i = 0; i < spec.m(); ++i) {
        SubproblemView view;
        view.A = A;
        view.b = spec.Y.col(i);
        const Vector x = H.col(i);
        if (reg.lipschitz) {
            if (lip_rows) {
                view.has_lipschitz = true;
                view.sigma_L = reg.lipschitz->sigma;
                view.grad_sL = lip_block_grad.col(i);
                view.sL_at_ref = lip_block_value;
                if (with_values) {
                    view.sL_value = restricted_value(reg.lipschitz->fn, H_ref, i);
                    view.sL_grad = restricted_gradient(reg.lipschitz->fn, H_ref, i);
                }
            } else {
                attach_vector_part(view, *reg.lipschitz, x, with_values);
            }
        }
        if (reg.relsmooth) {
            if (rel_rows) {
                view.has_relsmooth = true;
                view.sigma_R = reg.relsmooth->sigma;
                view.grad_sR = rel_block_grad.col(i);
                view.sR_at_ref = rel_block_value;
                if (with_values) {
                    view.sR_value = restricted_value(reg.relsmooth->fn, H_ref, i);
                    view.sR_grad = restricted_gradient(reg.relsmooth->fn, H_ref, i);
                }
            } else {
                attach_vector_part(view, *reg.relsmooth, x, with_values);
            }
        }
        view.concave = reg.concave;
        views.push_back(std::move(view));
    }
    return views;
}

double gradient_check(const VectorFunction& fn, const Vector& x, double step_scale) {
    const Vector g = fn.gradient(x);
    double worst = 0.0;
    for (Index j = 0; j < x.size(); ++j) {
        const double h = step_scale * std::max(1.0, std::abs(x[j]));
        Vector hi = x;
        Vector lo = x;
        hi[j] += h;
        lo[j] -= h;
        const double fd = (fn.value(hi) - fn.value(lo)) / (2.0 * h);
        const double denom = std::max({1.0, std::abs(fd), std::abs(g[j])});
        worst = std::max(worst, std::abs(fd - g[j]) / denom);
    }
    return worst;
}

}  // namespace pnmf
