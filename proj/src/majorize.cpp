#include "pnmf/majorize.hpp"

#include <cmath>

#include "pnmf/rng.hpp"

namespace pnmf {

Vector em_weights(const Vector& a, const Vector& x_t) {
    if (a.size() != x_t.size()) {
        throw DimensionError("em_weights: length mismatch");
    }
    Vector q(a.size());
    double total = 0.0;
    for (Index j = 0; j < a.size(); ++j) {
        const double w = a[j] * x_t[j];
        if (w <= 0.0) {
            throw DomainError("em_weights: a_j * x_t_j must be > 0");
        }
        q[j] = w;
        total += w;
    }
    q /= total;
    return q;
}

double gkl_divergence(const Vector& x, const Vector& x_t) {
    if (x.size() != x_t.size()) {
        throw DimensionError("gkl_divergence: length mismatch");
    }
    double acc = 0.0;
    for (Index j = 0; j < x.size(); ++j) {
        if (x[j] <= 0.0 || x_t[j] <= 0.0) {
            throw DomainError("gkl_divergence: entries must be > 0");
        }
        acc += x_t[j] * std::log(x_t[j] / x[j]) - x_t[j] + x[j];
    }
    return acc;
}

double bregman_burg(const Vector& x, const Vector& x_t) {
    if (x.size() != x_t.size()) {
        throw DimensionError("bregman_burg: length mismatch");
    }
    double acc = 0.0;
    for (Index j = 0; j < x.size(); ++j) {
        if (x[j] <= 0.0 || x_t[j] <= 0.0) {
            throw DomainError("bregman_burg: entries must be > 0");
        }
        const double r = x[j] / x_t[j];
        acc += r - std::log(r) - 1.0;
    }
    return acc;
}

double view_objective(const SubproblemView& view, const Vector& x) {
    if (x.size() != view.dim()) {
        throw DimensionError("view_objective: vector length mismatch");
    }
    const Matrix& A = *view.A;
    double acc = 0.0;
    for (Index i = 0; i < A.rows(); ++i) {
        const double dot = A.row(i).dot(x.transpose());
        if (view.b[i] > 0.0) {
            if (dot <= 0.0) {
                throw DomainError("view_objective: a_i' x <= 0 with b_i > 0");
            }
            acc -= view.b[i] * std::log(dot);
        }
        acc += dot;
    }
    if (view.has_lipschitz) {
        if (!view.sL_value) {
            throw DomainError("view_objective: s_L value closure missing");
        }
        acc += view.sL_value(x);
    }
    if (view.has_relsmooth) {
        if (!view.sR_value) {
            throw DomainError("view_objective: s_R value closure missing");
        }
        acc += view.sR_value(x);
    }
    if (view.concave) {
        for (Index j = 0; j < x.size(); ++j) {
            acc += view.concave->value(x[j]);
        }
    }
    return acc;
}

double surrogate_value(SurrogateKind kind, const Vector& x, const Vector& x_t,
                       const SubproblemView& view, std::optional<double> gamma) {
    if (x.size() != view.dim() || x_t.size() != view.dim()) {
        throw DimensionError("surrogate_value: vector length mismatch");
    }
    const Matrix& A = *view.A;
    double acc = 0.0;
    for (Index i = 0; i < A.rows(); ++i) {
        const double dot_x = A.row(i).dot(x.transpose());
        acc += dot_x;
        if (view.b[i] <= 0.0) {
            continue;
        }
        const double denom = A.row(i).dot(x_t.transpose());
        if (denom <= 0.0) {
            throw DomainError("surrogate_value: a_i' x_t <= 0 with b_i > 0");
        }
        double em = 0.0;
        for (Index j = 0; j < x.size(); ++j) {
            const double a = A(i, j);
            if (a <= 0.0) {
                continue;  // q_ij = 0 contributes nothing
            }
            const double q = a * x_t[j] / denom;
            const double arg = a * x[j] / q;
            if (arg <= 0.0) {
                throw DomainError("surrogate_value: log argument <= 0");
            }
            em += q * std::log(arg);
        }
        acc -= view.b[i] * em;
    }
    const Vector diff = x - x_t;
    if (view.has_lipschitz) {
        const double g = gamma.value_or(view.sigma_L);
        const double s_at = view.sL_value ? view.sL_value(x_t) : view.sL_at_ref;
        const Vector grad = view.sL_grad ? view.sL_grad(x_t) : view.grad_sL;
        acc += s_at + grad.dot(diff);
        if (kind == SurrogateKind::MuLog) {
            acc += 2.0 * g * x_t.maxCoeff() * gkl_divergence(x, x_t);
        } else {
            acc += g * diff.squaredNorm();
        }
    }
    if (view.has_relsmooth) {
        const double s_at = view.sR_value ? view.sR_value(x_t) : view.sR_at_ref;
        const Vector grad = view.sR_grad ? view.sR_grad(x_t) : view.grad_sR;
        acc += s_at + grad.dot(diff);
        acc += view.sigma_R * bregman_burg(x, x_t);
    }
    if (view.concave) {
        for (Index j = 0; j < x.size(); ++j) {
            acc += view.concave->value(x_t[j]) + view.concave->derivative(x_t[j]) * diff[j];
        }
    }
    return acc;
}

namespace {

Vector sample_box(Rng& rng, const Vector& lo, const Vector& hi) {
    Vector x(lo.size());
    for (Index j = 0; j < lo.size(); ++j) {
        x[j] = rng.uniform(lo[j], hi[j]);
    }
    return x;
}

}  // namespace

MajorizationReport certify_majorization(SurrogateKind kind, const SubproblemView& view,
                                        const CertifySampler& sampler, int n_samples,
                                        int n_xt) {
    if (sampler.lo.size() != view.dim() || sampler.hi.size() != view.dim()) {
        throw DimensionError("certify_majorization: sampler box dimension mismatch");
    }
    MajorizationReport report;
    Rng rng(sampler.seed);
    const int per_xt = std::max(1, n_samples / std::max(1, n_xt));
    for (int t = 0; t < n_xt; ++t) {
        const Vector x_t = sample_box(rng, sampler.lo, sampler.hi);

        // A.2 at this anchor.
        const double f_t = view_objective(view, x_t);
        const double g_t = surrogate_value(kind, x_t, x_t, view);
        report.max_gap_A2 =
            std::max(report.max_gap_A2, std::abs(g_t - f_t) / std::max(1.0, std::abs(f_t)));

        // A.3: central finite differences of g(., x_t) and f at x_t.
        for (Index j = 0; j < view.dim(); ++j) {
            const double h = 1e-6 * std::max(1.0, std::abs(x_t[j]));
            Vector hi = x_t;
            Vector lo = x_t;
            hi[j] += h;
            lo[j] -= h;
            const double df = (view_objective(view, hi) - view_objective(view, lo)) / (2.0 * h);
            const double dg =
                (surrogate_value(kind, hi, x_t, view) - surrogate_value(kind, lo, x_t, view)) /
                (2.0 * h);
            const double denom = std::max({1.0, std::abs(df), std::abs(dg)});
            report.max_grad_mismatch_A3 =
                std::max(report.max_grad_mismatch_A3, std::abs(df - dg) / denom);
        }

        // A.1 over samples around this anchor.
        Vector hi_eff = sampler.hi;
        if (sampler.cap_x_by_max_xt) {
            const double cap = x_t.maxCoeff();
            for (Index j = 0; j < hi_eff.size(); ++j) {
                hi_eff[j] = std::max(sampler.lo[j], std::min(hi_eff[j], cap));
            }
        }
        for (int s = 0; s < per_xt; ++s) {
            const Vector x = sample_box(rng, sampler.lo, hi_eff);
            const double f = view_objective(view, x);
            const double g = surrogate_value(kind, x, x_t, view);
            const double violation = (f - g) / std::max(1.0, std::abs(f));
            report.max_violation_A1 = std::max(report.max_violation_A1, violation);
            ++report.samples;
        }
    }
    return report;
}

double em_log_surrogate(const Vector& a, const Vector& x, const Vector& x_t) {
    const Vector q = em_weights(a, x_t);
    double acc = 0.0;
    for (Index j = 0; j < a.size(); ++j) {
        const double arg = a[j] * x[j] / q[j];
        if (arg <= 0.0) {
            throw DomainError("em_log_surrogate: log argument <= 0");
        }
        acc -= q[j] * std::log(arg);
    }
    return acc;
}

double bregman_log_surrogate(const Vector& a, const Vector& x, const Vector& x_t) {
    const double denom = a.dot(x_t);
    if (denom <= 0.0) {
        throw DomainError("bregman_log_surrogate: a' x_t <= 0");
    }
    const double f_t = -std::log(denom);
    const Vector grad = -a / denom;
    return f_t + grad.dot(x - x_t) + bregman_burg(x, x_t);
}

}  // namespace pnmf
