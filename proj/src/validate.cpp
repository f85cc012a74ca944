#include "pnmf/validate.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <memory>

#include "pnmf/rng.hpp"

namespace pnmf {

namespace {

// Random quadratic s(x) = 0.5 x'Qx + c'x with Q PSD scaled to a known
// largest eigenvalue, attached as the view's Lipschitz part.
void attach_random_quadratic(SubproblemView& view, Rng& rng, Index dim) {
    Eigen::MatrixXd R(dim, dim);
    for (Index i = 0; i < dim; ++i) {
        for (Index j = 0; j < dim; ++j) {
            R(i, j) = rng.uniform(-1.0, 1.0);
        }
    }
    Eigen::MatrixXd Q = R.transpose() * R;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Q);
    const double top = eig.eigenvalues().maxCoeff();
    const double target = rng.uniform(0.5, 3.0);
    if (top > 0.0) {
        Q *= target / top;
    }
    Vector c(dim);
    for (Index j = 0; j < dim; ++j) {
        c[j] = rng.uniform(-1.0, 1.0);
    }
    auto Qp = std::make_shared<Eigen::MatrixXd>(Q);
    auto cp = std::make_shared<Vector>(c);
    view.has_lipschitz = true;
    view.sigma_L = target;
    view.sL_value = [Qp, cp](const Vector& x) {
        return 0.5 * x.dot(*Qp * x) + cp->dot(x);
    };
    view.sL_grad = [Qp, cp](const Vector& x) { return Vector(*Qp * x + *cp); };
    view.grad_sL = Vector::Zero(dim);  // slices unused; closures drive evaluation
}

void attach_log_barrier(SubproblemView& view, double offset, double sigma, Index dim) {
    const RegularizerSpec reg = log_barrier(offset, sigma);
    view.has_relsmooth = true;
    view.sigma_R = sigma;
    view.sR_value = reg.relsmooth->fn.value;
    view.sR_grad = reg.relsmooth->fn.gradient;
    view.grad_sR = Vector::Zero(dim);
}

void attach_log_sparsity(SubproblemView& view, double alpha) {
    const RegularizerSpec reg = log_sparsity(alpha);
    view.concave = reg.concave;
}

SubproblemView random_green_view(Rng& rng, Index dim, Index rows, bool allow_zero_b) {
    SubproblemView view;
    auto A = std::make_shared<Matrix>(rows, dim);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < dim; ++j) {
            const bool zero = rng.uniform() < 0.1;
            (*A)(i, j) = zero ? 0.0 : rng.uniform(0.05, 2.0);
        }
        // No all-zero rows: they would make the row weightless.
        if (A->row(i).sum() == 0.0) {
            (*A)(i, rng.next_u64() % static_cast<std::uint64_t>(dim)) = rng.uniform(0.05, 2.0);
        }
    }
    // No all-zero columns either, so every coordinate stays coupled.
    for (Index j = 0; j < dim; ++j) {
        if (A->col(j).sum() == 0.0) {
            (*A)(rng.next_u64() % static_cast<std::uint64_t>(rows), j) = rng.uniform(0.05, 2.0);
        }
    }
    view.A = A;
    view.b = Vector(rows);
    for (Index i = 0; i < rows; ++i) {
        const bool zero = allow_zero_b && rng.uniform() < 0.2;
        view.b[i] = zero ? 0.0 : rng.uniform(0.5, 5.0);
    }
    return view;
}

SubproblemView empty_green_view(Index dim) {
    SubproblemView view;
    view.A = std::make_shared<Matrix>(Matrix::Zero(0, dim));
    view.b = Vector(0);
    return view;
}

CertifySampler box_sampler(Index dim, double lo, double hi, std::uint64_t seed, bool cap) {
    CertifySampler sampler;
    sampler.lo = Vector::Constant(dim, lo);
    sampler.hi = Vector::Constant(dim, hi);
    sampler.seed = seed;
    sampler.cap_x_by_max_xt = cap;
    return sampler;
}

}  // namespace

std::vector<SurfaceReport> certification_battery(int instances, int samples_per_instance,
                                                 std::uint64_t seed) {
    std::vector<SurfaceReport> reports;
    const double lo = 0.1;
    const double hi = 10.0;
    for (int inst = 0; inst < instances; ++inst) {
        Rng rng(Rng::derive(seed, 7000 + static_cast<std::uint64_t>(inst)));
        const Index dim = 2 + static_cast<Index>(rng.next_u64() % 4);
        const Index rows = 3 + static_cast<Index>(rng.next_u64() % 6);
        const std::uint64_t s_seed = Rng::derive(seed, 9000 + static_cast<std::uint64_t>(inst));

        {
            SubproblemView view = random_green_view(rng, dim, 1, false);
            reports.push_back({"log_em", inst,
                               certify_majorization(SurrogateKind::MuLog, view,
                                                    box_sampler(dim, lo, hi, s_seed, false),
                                                    samples_per_instance)});
        }
        {
            SubproblemView view = empty_green_view(dim);
            attach_random_quadratic(view, rng, dim);
            reports.push_back({"lipschitz_quadratic", inst,
                               certify_majorization(SurrogateKind::QuQuadratic, view,
                                                    box_sampler(dim, lo, hi, s_seed, false),
                                                    samples_per_instance)});
            // Same instance through the log bound, on its valid region.
            reports.push_back({"lipschitz_log", inst,
                               certify_majorization(SurrogateKind::MuLog, view,
                                                    box_sampler(dim, lo, hi, s_seed, true),
                                                    samples_per_instance)});
        }
        {
            SubproblemView view = empty_green_view(dim);
            attach_log_barrier(view, 0.05, 4.0, dim);
            reports.push_back({"relative_smoothness", inst,
                               certify_majorization(SurrogateKind::QuQuadratic, view,
                                                    box_sampler(dim, lo, hi, s_seed, false),
                                                    samples_per_instance)});
        }
        {
            SubproblemView view = empty_green_view(dim);
            attach_log_sparsity(view, rng.uniform(0.5, 2.0));
            reports.push_back({"concave", inst,
                               certify_majorization(SurrogateKind::MuLog, view,
                                                    box_sampler(dim, lo, hi, s_seed, false),
                                                    samples_per_instance)});
        }
        {
            SubproblemView view = random_green_view(rng, dim, rows, true);
            attach_random_quadratic(view, rng, dim);
            attach_log_barrier(view, 0.05, 4.0, dim);
            attach_log_sparsity(view, rng.uniform(0.5, 2.0));
            reports.push_back({"composite_mu", inst,
                               certify_majorization(SurrogateKind::MuLog, view,
                                                    box_sampler(dim, lo, hi, s_seed, true),
                                                    samples_per_instance)});
            reports.push_back({"composite_qu", inst,
                               certify_majorization(SurrogateKind::QuQuadratic, view,
                                                    box_sampler(dim, lo, hi, s_seed, false),
                                                    samples_per_instance)});
        }
    }
    return reports;
}

bool all_within(const std::vector<SurfaceReport>& reports, const CertifyTolerances& tol) {
    for (const SurfaceReport& r : reports) {
        if (r.report.max_violation_A1 > tol.a1 || r.report.max_gap_A2 > tol.a2 ||
            r.report.max_grad_mismatch_A3 > tol.a3) {
            return false;
        }
    }
    return true;
}

NormGklStats norm_gkl_check(int pairs, std::uint64_t seed) {
    NormGklStats stats;
    stats.pairs = pairs;
    Rng rng(Rng::derive(seed, 0x6b1));
    stats.worst_margin_segment = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < pairs; ++i) {
        const Index dim = 1 + static_cast<Index>(rng.next_u64() % 6);
        Vector x(dim);
        Vector xt(dim);
        for (Index j = 0; j < dim; ++j) {
            x[j] = rng.uniform(1e-3, 10.0);
            xt[j] = rng.uniform(1e-3, 10.0);
        }
        const double lhs = (x - xt).squaredNorm();
        const double d = gkl_divergence(x, xt);
        const double rhs_segment = 2.0 * std::max(x.maxCoeff(), xt.maxCoeff()) * d;
        const double rhs_printed = 2.0 * xt.maxCoeff() * d;
        const double slack = 1e-12 * (1.0 + lhs);
        if (lhs > rhs_segment + slack) {
            ++stats.violations_segment_max;
        }
        if (lhs > rhs_printed + slack) {
            ++stats.violations_printed_max;
        }
        stats.worst_margin_segment = std::max(stats.worst_margin_segment, lhs - rhs_segment);
    }
    return stats;
}

TightnessGrid fig_tightness_grid(int resolution) {
    TightnessGrid grid;
    grid.a = Vector(2);
    grid.a << 0.2, 0.8;
    grid.x_t = Vector(2);
    grid.x_t << 1.0, 1.0;
    grid.max_em_minus_bregman = -std::numeric_limits<double>::infinity();
    grid.min_em_gap = std::numeric_limits<double>::infinity();
    const double lo = 0.1;
    const double hi = 3.0;
    for (int i = 0; i < resolution; ++i) {
        for (int j = 0; j < resolution; ++j) {
            Vector x(2);
            x[0] = lo + (hi - lo) * static_cast<double>(i) / (resolution - 1);
            x[1] = lo + (hi - lo) * static_cast<double>(j) / (resolution - 1);
            TightnessRow row;
            row.x0 = x[0];
            row.x1 = x[1];
            row.f = -std::log(grid.a.dot(x));
            row.g_em = em_log_surrogate(grid.a, x, grid.x_t);
            row.g_bregman = bregman_log_surrogate(grid.a, x, grid.x_t);
            grid.max_em_minus_bregman =
                std::max(grid.max_em_minus_bregman, row.g_em - row.g_bregman);
            grid.min_em_gap = std::min(grid.min_em_gap, row.g_em - row.f);
            grid.rows.push_back(row);
        }
    }
    return grid;
}

}  // namespace pnmf
