#include "pnmf/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "pnmf/majorize.hpp"
#include "pnmf/rng.hpp"
#include "pnmf/update.hpp"

namespace pnmf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Exact water-filling: x_j <- max(t x_j, epsilon) with t chosen so that
// sum_{e_j > 0} e_j x_j = 1. Entries with e_j = 0 are left untouched.
void rescale_to_simplex(Eigen::Ref<Vector> x, const Vector& e, double epsilon) {
    std::vector<Index> active;
    for (Index j = 0; j < e.size(); ++j) {
        if (e[j] > 0.0) {
            active.push_back(j);
        }
    }
    if (active.empty()) {
        return;
    }
    // Entry j stays unclamped exactly when t > epsilon / x_j, so with
    // breakpoints sorted ascending the unclamped set is a prefix.
    std::sort(active.begin(), active.end(), [&](Index a, Index b) {
        return epsilon / x[a] < epsilon / x[b];
    });
    const std::size_t q = active.size();
    std::vector<double> prefix_ex(q + 1, 0.0);  // sum of e_j x_j over sorted[..s)
    std::vector<double> suffix_e(q + 1, 0.0);   // sum of e_j over sorted[s..)
    for (std::size_t s = 0; s < q; ++s) {
        prefix_ex[s + 1] = prefix_ex[s] + e[active[s]] * x[active[s]];
    }
    for (std::size_t s = q; s-- > 0;) {
        suffix_e[s] = suffix_e[s + 1] + e[active[s]];
    }
    double t = 0.0;
    for (std::size_t s = q; s >= 1; --s) {
        // unclamped = sorted[0..s), clamped = sorted[s..).
        const double cand = (1.0 - epsilon * suffix_e[s]) / prefix_ex[s];
        const double lo = epsilon / x[active[s - 1]];
        const double hi =
            (s < q) ? epsilon / x[active[s]] : std::numeric_limits<double>::infinity();
        if (cand > lo && cand <= hi) {
            t = cand;
            break;
        }
    }
    for (Index j : active) {
        x[j] = std::max(t * x[j], epsilon);
    }
}

RegularizerSpec lipschitz_only(const RegularizerSpec& reg) {
    RegularizerSpec out;
    out.lipschitz = reg.lipschitz;
    return out;
}

struct BlockStats {
    long dichotomy_iters = 0;
    long dichotomy_warnings = 0;
    double dichotomy_seconds = 0.0;
};

struct BmdCoefficients {
    Vector c;
    Vector beta;
};

// Log-family coefficients of the mirror descent step: the KL block enters
// through its gradient plus L * Bregman(-1' log x) with L = sum_i b_i; the
// regularizer bounds are the same ones the multiplicative update uses.
BmdCoefficients bmd_coefficients(const SubproblemView& view, const Vector& x_t) {
    const Matrix& A = *view.A;
    const Index d = view.dim();
    const double L = view.b.sum();
    Vector G = Vector::Zero(d);
    for (Index i = 0; i < A.rows(); ++i) {
        if (view.b[i] <= 0.0) {
            continue;
        }
        const double denom = A.row(i).dot(x_t.transpose());
        if (denom <= 0.0) {
            throw DomainError("bmd_coefficients: a_i' x_t <= 0 with b_i > 0");
        }
        G += (view.b[i] / denom) * A.row(i).transpose();
    }
    BmdCoefficients coeffs;
    coeffs.c = Vector::Constant(d, L);
    coeffs.beta = A.colwise().sum().transpose() - G + L * x_t.cwiseInverse();
    if (view.has_lipschitz) {
        const double bump = 2.0 * view.sigma_L * x_t.maxCoeff();
        coeffs.c += bump * x_t;
        coeffs.beta += view.grad_sL;
        coeffs.beta.array() += bump;
    }
    if (view.has_relsmooth) {
        coeffs.c.array() += view.sigma_R;
        coeffs.beta += view.grad_sR + view.sigma_R * x_t.cwiseInverse();
    }
    if (view.concave) {
        for (Index j = 0; j < d; ++j) {
            coeffs.beta[j] += view.concave->derivative(x_t[j]);
        }
    }
    return coeffs;
}

Vector subproblem_vector(const Matrix& block, BlockSide side, Index i) {
    return side == BlockSide::W ? Vector(block.row(i).transpose()) : Vector(block.col(i));
}

void set_subproblem_vector(Matrix& block, BlockSide side, Index i, const Vector& x) {
    if (side == BlockSide::W) {
        block.row(i) = x.transpose();
    } else {
        block.col(i) = x;
    }
}

Matrix update_block(const ProblemSpec& spec, const Matrix& W, const Matrix& H, BlockSide side,
                    Algorithm algo, std::optional<double> gamma, const SolverConfig& config,
                    std::vector<std::optional<double>>& warm, BlockStats& stats) {
    const std::vector<SubproblemView> views = subproblem_views(spec, W, H, side);
    const bool constrained =
        spec.constraint && ((side == BlockSide::W &&
                             spec.constraint->side == ConstraintSide::WRows) ||
                            (side == BlockSide::H &&
                             spec.constraint->side == ConstraintSide::HColumns));
    Matrix next = (side == BlockSide::W) ? W : H;
    for (std::size_t i = 0; i < views.size(); ++i) {
        const Index idx = static_cast<Index>(i);
        const Vector x_t = subproblem_vector(side == BlockSide::W ? W : H, side, idx);
        Vector x;
        if (constrained) {
            DichotomyOptions opts;
            opts.tol = config.dichotomy_tol;
            opts.cap = config.dichotomy_cap;
            opts.warm_start = warm[i];
            DualSolve info;
            const auto dual_start = Clock::now();
            if (algo == Algorithm::MU) {
                const MuCoefficients coeffs = mu_coefficients(views[i], x_t, gamma);
                x = mu_update_simplex(x_t, coeffs, spec.constraint->e, spec.epsilon, opts, &info);
            } else if (algo == Algorithm::QU) {
                const QuCoefficients coeffs = qu_coefficients(views[i], x_t, gamma);
                x = qu_update_simplex(x_t, coeffs, spec.constraint->e, spec.epsilon, opts, &info);
            } else {
                const BmdCoefficients coeffs = bmd_coefficients(views[i], x_t);
                x = log_family_update_simplex(coeffs.c, coeffs.beta, spec.constraint->e,
                                              spec.epsilon, opts, &info);
            }
            stats.dichotomy_seconds += seconds_since(dual_start);
            stats.dichotomy_iters += info.iterations;
            if (info.warning) {
                ++stats.dichotomy_warnings;
            }
            warm[i] = info.nu;
        } else {
            if (algo == Algorithm::MU) {
                x = mu_update(x_t, mu_coefficients(views[i], x_t, gamma), spec.epsilon);
            } else if (algo == Algorithm::QU) {
                x = qu_update(x_t, qu_coefficients(views[i], x_t, gamma), spec.epsilon);
            } else {
                const BmdCoefficients coeffs = bmd_coefficients(views[i], x_t);
                Vector out(x_t.size());
                for (Index j = 0; j < x_t.size(); ++j) {
                    if (coeffs.beta[j] <= 0.0) {
                        throw UpdateError("bmd update: beta_j <= 0");
                    }
                    out[j] = std::max(coeffs.c[j] / coeffs.beta[j], spec.epsilon);
                }
                x = out;
            }
        }
        set_subproblem_vector(next, side, idx, x);
    }
    return next;
}

// Block-level acceptance test for the line search: does the gamma-surrogate
// of s_L still dominate s_L at the realized iterate?
bool lipschitz_surrogate_accepted(const ProblemSpec& spec, const Matrix& old_block,
                                  const Matrix& new_block, BlockSide side, Algorithm algo,
                                  double gamma) {
    const RegularizerSpec& reg = (side == BlockSide::W) ? spec.reg_w : spec.reg_h;
    if (!reg.lipschitz) {
        return true;
    }
    const RegularizerSpec lip = lipschitz_only(reg);
    const double s_old = regularizer_value(lip, old_block, side);
    const double s_new = regularizer_value(lip, new_block, side);
    // Per-subproblem-vector slices of the block surrogate.
    const Matrix grad = regularizer_gradient(lip, old_block, side);
    const Index count = (side == BlockSide::W) ? old_block.rows() : old_block.cols();
    double bound = s_old;
    for (Index i = 0; i < count; ++i) {
        const Vector x_t = subproblem_vector(old_block, side, i);
        const Vector x = subproblem_vector(new_block, side, i);
        const Vector g = subproblem_vector(grad, side, i);
        const Vector diff = x - x_t;
        bound += g.dot(diff);
        if (algo == Algorithm::MU) {
            bound += 2.0 * gamma * x_t.maxCoeff() * gkl_divergence(x, x_t);
        } else {
            bound += gamma * diff.squaredNorm();
        }
    }
    return s_new <= bound + 1e-12 * (1.0 + std::abs(bound));
}

struct ObjectiveParts {
    double total = 0.0;
    double kl = 0.0;
};

ObjectiveParts objective_parts(const Matrix& W, const Matrix& H, const ProblemSpec& spec) {
    ObjectiveParts parts;
    parts.kl = poisson_loss(W, H, spec.Y);
    parts.total = parts.kl + regularizer_value(spec.reg_w, W, BlockSide::W) +
                  regularizer_value(spec.reg_h, H, BlockSide::H);
    return parts;
}

SolveResult solve_mm(const ProblemSpec& spec, const SolverConfig& config, Algorithm algo) {
    const auto start = Clock::now();
    SolveResult result;
    auto [W, H] = initialize(spec, config.seed);
    result.W = W;
    result.H = H;

    const bool ls_w = config.linesearch && spec.reg_w.lipschitz && algo != Algorithm::BMD;
    const bool ls_h = config.linesearch && spec.reg_h.lipschitz && algo != Algorithm::BMD;
    double gamma_w = spec.reg_w.lipschitz ? spec.reg_w.lipschitz->sigma : 0.0;
    double gamma_h = spec.reg_h.lipschitz ? spec.reg_h.lipschitz->sigma : 0.0;

    std::vector<std::optional<double>> warm_w(static_cast<std::size_t>(spec.n()));
    std::vector<std::optional<double>> warm_h(static_cast<std::size_t>(spec.m()));
    BlockStats stats;

    auto record = [&](int iter, double objective, double kl) {
        TracePoint point;
        point.iter = iter;
        point.objective = objective;
        point.kl_part = kl;
        point.constraint_violation = constraint_violation(result.W, result.H, spec);
        point.min_w = result.W.minCoeff();
        point.min_h = result.H.minCoeff();
        point.gamma = spec.reg_h.lipschitz ? gamma_h : gamma_w;
        point.seconds = seconds_since(start);
        point.dichotomy_iters = stats.dichotomy_iters;
        result.trace.points.push_back(point);
    };

    ObjectiveParts parts = objective_parts(result.W, result.H, spec);
    record(0, parts.total, parts.kl);
    double f_prev = parts.total;
    int stalled = 0;

    result.termination = Termination::MaxIter;
    for (int iter = 1; iter <= config.max_iter; ++iter) {
        try {
            const std::optional<double> gw =
                ls_w ? std::optional<double>(gamma_w) : std::nullopt;
            Matrix W_new =
                update_block(spec, result.W, result.H, BlockSide::W, algo, gw, config, warm_w,
                             stats);
            if (ls_w) {
                const bool ok = lipschitz_surrogate_accepted(spec, result.W, W_new, BlockSide::W,
                                                             algo, gamma_w);
                gamma_w = linesearch_gamma(gamma_w, ok, config.linesearch->upsilon,
                                           config.linesearch->tau);
            }
            result.W = std::move(W_new);

            const std::optional<double> gh =
                ls_h ? std::optional<double>(gamma_h) : std::nullopt;
            Matrix H_new =
                update_block(spec, result.W, result.H, BlockSide::H, algo, gh, config, warm_h,
                             stats);
            if (ls_h) {
                const bool ok = lipschitz_surrogate_accepted(spec, result.H, H_new, BlockSide::H,
                                                             algo, gamma_h);
                gamma_h = linesearch_gamma(gamma_h, ok, config.linesearch->upsilon,
                                           config.linesearch->tau);
            }
            result.H = std::move(H_new);
        } catch (const std::exception& ex) {
            result.warnings.push_back("aborted at iteration " + std::to_string(iter) + ": " +
                                      ex.what());
            result.termination = Termination::Aborted;
            break;
        }

        parts = objective_parts(result.W, result.H, spec);
        const bool small_change =
            std::abs(f_prev - parts.total) <= config.rel_tol * std::max(1.0, std::abs(parts.total));
        stalled = small_change ? stalled + 1 : 0;
        const bool converged = stalled >= std::max(1, config.stall_iters);
        const bool last = converged || iter == config.max_iter;
        if (config.trace_every > 0 && (iter % config.trace_every == 0 || last)) {
            record(iter, parts.total, parts.kl);
        }
        if (converged) {
            result.termination = Termination::Converged;
            break;
        }
        f_prev = parts.total;
    }

    if (stats.dichotomy_warnings > 0) {
        result.warnings.push_back("dichotomy hit its iteration cap " +
                                  std::to_string(stats.dichotomy_warnings) + " times");
    }
    result.trace.dichotomy_seconds = stats.dichotomy_seconds;
    result.total_seconds = seconds_since(start);
    return result;
}

}  // namespace

std::pair<Matrix, Matrix> initialize(const ProblemSpec& spec, std::uint64_t seed) {
    Rng rng(Rng::derive(seed, 0x1717));
    const double eps = spec.epsilon;
    Matrix W(spec.n(), spec.k);
    for (Index i = 0; i < W.rows(); ++i) {
        for (Index j = 0; j < W.cols(); ++j) {
            W(i, j) = eps + (1.0 - eps) * rng.uniform();
        }
    }
    Matrix H(spec.k, spec.m());
    for (Index i = 0; i < H.rows(); ++i) {
        for (Index j = 0; j < H.cols(); ++j) {
            H(i, j) = eps + (1.0 - eps) * rng.uniform();
        }
    }
    if (spec.constraint) {
        if (spec.constraint->side == ConstraintSide::HColumns) {
            for (Index i = 0; i < H.cols(); ++i) {
                Vector col = H.col(i);
                rescale_to_simplex(col, spec.constraint->e, eps);
                H.col(i) = col;
            }
        } else {
            for (Index i = 0; i < W.rows(); ++i) {
                Vector row = W.row(i).transpose();
                rescale_to_simplex(row, spec.constraint->e, eps);
                W.row(i) = row.transpose();
            }
        }
    }
    return {std::move(W), std::move(H)};
}

SolveResult tbsum_solve(const ProblemSpec& spec, const SolverConfig& config) {
    if (config.algorithm != Algorithm::MU && config.algorithm != Algorithm::QU) {
        throw DomainError("tbsum_solve drives the MU and QU rules only");
    }
    if (config.linesearch) {
        const double u = config.linesearch->upsilon;
        const double t = config.linesearch->tau;
        if (!(u > 1.0 && u <= 2.0 && t > 1.0 && t <= 2.0)) {
            throw DomainError("line search rates must lie in (1, 2]");
        }
    }
    return solve_mm(spec, config, config.algorithm);
}

double linesearch_gamma(double gamma_t, bool accepted, double upsilon, double tau) {
    if (!(gamma_t > 0.0)) {
        throw DomainError("linesearch_gamma: gamma must be > 0");
    }
    return accepted ? gamma_t / tau : gamma_t * upsilon;
}

SolveResult bmd_solve(const ProblemSpec& spec, const SolverConfig& config) {
    return solve_mm(spec, config, Algorithm::BMD);
}

Vector project_generalized_simplex(const Vector& v, const Vector& e, double epsilon) {
    if (v.size() != e.size()) {
        throw DimensionError("projection: length mismatch");
    }
    std::vector<Index> active;
    for (Index j = 0; j < e.size(); ++j) {
        if (e[j] > 0.0) {
            active.push_back(j);
        }
    }
    Vector x(v.size());
    for (Index j = 0; j < v.size(); ++j) {
        x[j] = std::max(v[j], epsilon);
    }
    if (active.empty()) {
        return x;
    }
    // Entry j clamps at epsilon once theta >= (v_j - epsilon) / e_j.
    std::sort(active.begin(), active.end(), [&](Index a, Index b) {
        return (v[a] - epsilon) / e[a] < (v[b] - epsilon) / e[b];
    });
    const std::size_t q = active.size();
    std::vector<double> suffix_ev(q + 1, 0.0);
    std::vector<double> suffix_e2(q + 1, 0.0);
    std::vector<double> prefix_e(q + 1, 0.0);
    for (std::size_t s = q; s-- > 0;) {
        suffix_ev[s] = suffix_ev[s + 1] + e[active[s]] * v[active[s]];
        suffix_e2[s] = suffix_e2[s + 1] + e[active[s]] * e[active[s]];
    }
    for (std::size_t s = 0; s < q; ++s) {
        prefix_e[s + 1] = prefix_e[s] + e[active[s]];
    }
    double theta = (v[active[q - 1]] - epsilon) / e[active[q - 1]];  // all-clamped fallback
    for (std::size_t s = 0; s < q; ++s) {
        // clamped = sorted[0..s), active = sorted[s..).
        const double cand = (suffix_ev[s] + epsilon * prefix_e[s] - 1.0) / suffix_e2[s];
        const double lo = (s == 0) ? -std::numeric_limits<double>::infinity()
                                   : (v[active[s - 1]] - epsilon) / e[active[s - 1]];
        const double hi = (v[active[s]] - epsilon) / e[active[s]];
        if (cand >= lo && cand <= hi) {
            theta = cand;
            break;
        }
    }
    for (Index j : active) {
        x[j] = std::max(v[j] - theta * e[j], epsilon);
    }
    return x;
}

SolveResult pgd_solve(const ProblemSpec& spec, const SolverConfig& config) {
    const auto start = Clock::now();
    SolveResult result;
    auto [W, H] = initialize(spec, config.seed);
    result.W = std::move(W);
    result.H = std::move(H);

    const double mean_y = spec.Y.size() > 0 ? spec.Y.sum() / static_cast<double>(spec.Y.size()) : 0.0;
    double step_w = config.pgd_step_scale * std::max(mean_y, 1e-12);
    double step_h = step_w;

    const bool constrain_w =
        spec.constraint && spec.constraint->side == ConstraintSide::WRows;
    const bool constrain_h =
        spec.constraint && spec.constraint->side == ConstraintSide::HColumns;

    auto project_w = [&](const Matrix& M) {
        if (!constrain_w) {
            return Matrix(M.cwiseMax(spec.epsilon));
        }
        Matrix out = M;
        for (Index i = 0; i < out.rows(); ++i) {
            out.row(i) =
                project_generalized_simplex(out.row(i).transpose(), spec.constraint->e,
                                            spec.epsilon)
                    .transpose();
        }
        return out;
    };
    auto project_h = [&](const Matrix& M) {
        if (!constrain_h) {
            return Matrix(M.cwiseMax(spec.epsilon));
        }
        Matrix out = M;
        for (Index i = 0; i < out.cols(); ++i) {
            out.col(i) =
                project_generalized_simplex(out.col(i), spec.constraint->e, spec.epsilon);
        }
        return out;
    };

    auto record = [&](int iter, double objective, double kl) {
        TracePoint point;
        point.iter = iter;
        point.objective = objective;
        point.kl_part = kl;
        point.constraint_violation = constraint_violation(result.W, result.H, spec);
        point.min_w = result.W.minCoeff();
        point.min_h = result.H.minCoeff();
        point.gamma = 0.0;
        point.seconds = seconds_since(start);
        point.dichotomy_iters = 0;
        result.trace.points.push_back(point);
    };

    ObjectiveParts parts = objective_parts(result.W, result.H, spec);
    record(0, parts.total, parts.kl);
    double f = parts.total;
    double f_prev = f;
    int stalled = 0;

    result.termination = Termination::MaxIter;
    bool underflow = false;
    for (int iter = 1; iter <= config.max_iter && !underflow; ++iter) {
        try {
            for (int block = 0; block < 2 && !underflow; ++block) {
                const bool is_w = block == 0;
                const Matrix P = result.W * result.H;
                Matrix ratio(spec.n(), spec.m());
                for (Index i = 0; i < spec.n(); ++i) {
                    for (Index j = 0; j < spec.m(); ++j) {
                        const double y = spec.Y(i, j);
                        ratio(i, j) = 1.0 - (y > 0.0 ? y / P(i, j) : 0.0);
                    }
                }
                Matrix grad;
                if (is_w) {
                    grad = ratio * result.H.transpose() +
                           regularizer_gradient(spec.reg_w, result.W, BlockSide::W);
                } else {
                    grad = result.W.transpose() * ratio +
                           regularizer_gradient(spec.reg_h, result.H, BlockSide::H);
                }
                double& step = is_w ? step_w : step_h;
                for (;;) {
                    const Matrix trial_block =
                        is_w ? project_w(result.W - step * grad)
                             : project_h(result.H - step * grad);
                    const double f_trial = is_w
                                               ? total_objective(trial_block, result.H, spec)
                                               : total_objective(result.W, trial_block, spec);
                    if (f_trial <= f) {
                        if (is_w) {
                            result.W = trial_block;
                        } else {
                            result.H = trial_block;
                        }
                        f = f_trial;
                        step *= 1.1;
                        break;
                    }
                    step *= 0.5;
                    if (step < 1e-18) {
                        result.warnings.push_back("pgd: step underflow below 1e-18");
                        result.termination = Termination::Aborted;
                        underflow = true;
                        break;
                    }
                }
            }
        } catch (const std::exception& ex) {
            result.warnings.push_back("aborted at iteration " + std::to_string(iter) + ": " +
                                      ex.what());
            result.termination = Termination::Aborted;
            break;
        }

        parts = objective_parts(result.W, result.H, spec);
        f = parts.total;
        const bool small_change =
            std::abs(f_prev - f) <= config.rel_tol * std::max(1.0, std::abs(f));
        stalled = small_change ? stalled + 1 : 0;
        const bool converged = stalled >= std::max(1, config.stall_iters);
        const bool last = converged || iter == config.max_iter || underflow;
        if (config.trace_every > 0 && (iter % config.trace_every == 0 || last)) {
            record(iter, parts.total, parts.kl);
        }
        if (converged) {
            result.termination = Termination::Converged;
            break;
        }
        f_prev = f;
    }
    result.total_seconds = seconds_since(start);
    return result;
}

double constraint_violation(const Matrix& W, const Matrix& H, const ProblemSpec& spec) {
    if (!spec.constraint) {
        return 0.0;
    }
    double worst = 0.0;
    if (spec.constraint->side == ConstraintSide::HColumns) {
        for (Index i = 0; i < H.cols(); ++i) {
            worst = std::max(worst, std::abs(spec.constraint->e.dot(H.col(i)) - 1.0));
        }
    } else {
        for (Index i = 0; i < W.rows(); ++i) {
            worst = std::max(worst,
                             std::abs(W.row(i).dot(spec.constraint->e.transpose()) - 1.0));
        }
    }
    return worst;
}

double kkt_residual(const Matrix& W, const Matrix& H, const ProblemSpec& spec) {
    const double eps = spec.epsilon;
    if (W.minCoeff() < eps * (1.0 - 1e-9) || H.minCoeff() < eps * (1.0 - 1e-9)) {
        throw DomainError("kkt_residual: point violates the positivity floor");
    }
    if (constraint_violation(W, H, spec) > 1e-6) {
        throw DomainError("kkt_residual: point violates the equality constraint");
    }
    const Matrix P = W * H;
    Matrix ratio(spec.n(), spec.m());
    for (Index i = 0; i < spec.n(); ++i) {
        for (Index j = 0; j < spec.m(); ++j) {
            const double y = spec.Y(i, j);
            ratio(i, j) = 1.0 - (y > 0.0 ? y / P(i, j) : 0.0);
        }
    }
    const Matrix grad_w =
        ratio * H.transpose() + regularizer_gradient(spec.reg_w, W, BlockSide::W);
    const Matrix grad_h =
        W.transpose() * ratio + regularizer_gradient(spec.reg_h, H, BlockSide::H);

    const double interior_cut = eps * (1.0 + 1e-6);
    auto block_residual = [&](const Matrix& block, const Matrix& grad, bool rows,
                              const Vector* e) {
        double worst = 0.0;
        const Index count = rows ? block.rows() : block.cols();
        for (Index i = 0; i < count; ++i) {
            const Vector x = rows ? Vector(block.row(i).transpose()) : Vector(block.col(i));
            const Vector g = rows ? Vector(grad.row(i).transpose()) : Vector(grad.col(i));
            double nu = 0.0;
            if (e) {
                double num = 0.0;
                double den = 0.0;
                for (Index j = 0; j < x.size(); ++j) {
                    if (x[j] > interior_cut && (*e)[j] > 0.0) {
                        num += (*e)[j] * g[j];
                        den += (*e)[j] * (*e)[j];
                    }
                }
                if (den > 0.0) {
                    nu = -num / den;
                }
            }
            for (Index j = 0; j < x.size(); ++j) {
                const double lag = g[j] + (e ? nu * (*e)[j] : 0.0);
                // Complementarity form: an ascent component is always a
                // violation; a descent component only counts by how far the
                // coordinate sits above the floor it is being pushed toward.
                const double r = lag < 0.0 ? -lag : std::max(0.0, std::min(x[j] - eps, lag));
                worst = std::max(worst, r);
            }
        }
        return worst;
    };

    const Vector* e_w = nullptr;
    const Vector* e_h = nullptr;
    if (spec.constraint) {
        if (spec.constraint->side == ConstraintSide::WRows) {
            e_w = &spec.constraint->e;
        } else {
            e_h = &spec.constraint->e;
        }
    }
    return std::max(block_residual(W, grad_w, true, e_w),
                    block_residual(H, grad_h, false, e_h));
}

void trace_to_csv(const SolverTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ParseError("cannot open for writing: " + path);
    }
    out << "iter,objective,kl_part,constraint_violation,min_w,min_h,gamma,seconds,"
           "dichotomy_iters\n";
    char buf[512];
    for (const TracePoint& p : trace.points) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%ld\n",
                      p.iter, p.objective, p.kl_part, p.constraint_violation, p.min_w, p.min_h,
                      p.gamma, p.seconds, p.dichotomy_iters);
        out << buf;
    }
}

std::string trace_to_json(const SolverTrace& trace) {
    nlohmann::json points = nlohmann::json::array();
    for (const TracePoint& p : trace.points) {
        points.push_back({{"iter", p.iter},
                          {"objective", p.objective},
                          {"kl_part", p.kl_part},
                          {"constraint_violation", p.constraint_violation},
                          {"min_w", p.min_w},
                          {"min_h", p.min_h},
                          {"gamma", p.gamma},
                          {"seconds", p.seconds},
                          {"dichotomy_iters", p.dichotomy_iters}});
    }
    nlohmann::json doc = {{"schema_version", 1},
                          {"dichotomy_seconds", trace.dichotomy_seconds},
                          {"points", points}};
    return doc.dump(2);
}

}  // namespace pnmf
