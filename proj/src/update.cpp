#include "pnmf/update.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pnmf {

namespace {

constexpr double kHuge = 1e300;

// Positive root of alpha x^2 + beta x - zeta = 0 (zeta >= 0), in the form
// that avoids cancellation for beta > 0. alpha = 0 is the linear limit.
double positive_quadratic_root(double alpha, double beta, double zeta) {
    if (zeta < 0.0) {
        throw DomainError("quadratic root: zeta must be >= 0");
    }
    if (alpha == 0.0) {
        if (beta <= 0.0) {
            throw UpdateError("quadratic update with alpha = 0 requires beta > 0");
        }
        return zeta / beta;
    }
    if (zeta == 0.0) {
        return std::max(0.0, -beta / alpha);
    }
    const double disc = std::sqrt(beta * beta + 4.0 * alpha * zeta);
    if (beta >= 0.0) {
        return 2.0 * zeta / (beta + disc);
    }
    return (-beta + disc) / (2.0 * alpha);
}

// Same root but saturating instead of throwing, for dual-function sweeps
// where beta + nu e may cross zero.
double quadratic_root_or_huge(double alpha, double beta, double zeta) {
    if (alpha == 0.0) {
        if (beta <= 0.0) {
            return zeta > 0.0 ? kHuge : 0.0;
        }
        return zeta / beta;
    }
    if (zeta == 0.0) {
        return std::max(0.0, -beta / alpha);
    }
    const double disc = std::sqrt(beta * beta + 4.0 * alpha * zeta);
    if (beta >= 0.0) {
        return 2.0 * zeta / (beta + disc);
    }
    return (-beta + disc) / (2.0 * alpha);
}

void check_view_inputs(const SubproblemView& view, const Vector& x_t) {
    if (!view.A) {
        throw DomainError("subproblem view has no matrix");
    }
    if (x_t.size() != view.dim()) {
        throw DimensionError("x_t length does not match the view");
    }
    if (view.b.size() != view.A->rows()) {
        throw DimensionError("b length does not match the view");
    }
}

}  // namespace

MuCoefficients mu_coefficients(const SubproblemView& view, const Vector& x_t,
                               std::optional<double> gamma) {
    check_view_inputs(view, x_t);
    const Matrix& A = *view.A;
    const Index d = view.dim();
    MuCoefficients coeffs;
    coeffs.alpha = Vector::Zero(d);
    coeffs.beta = A.colwise().sum().transpose();
    for (Index i = 0; i < A.rows(); ++i) {
        if (view.b[i] <= 0.0) {
            continue;  // zero counts drop from alpha
        }
        const double denom = A.row(i).dot(x_t.transpose());
        if (denom <= 0.0) {
            throw DomainError("mu_coefficients: a_i' x_t <= 0 with b_i > 0");
        }
        coeffs.alpha += (view.b[i] / denom) * A.row(i).transpose();
    }
    if (view.has_lipschitz) {
        const double sigma = gamma.value_or(view.sigma_L);
        const double bump = 2.0 * x_t.maxCoeff() * sigma;
        coeffs.alpha.array() += bump;
        coeffs.beta += view.grad_sL;
        coeffs.beta.array() += bump;
    }
    if (view.has_relsmooth) {
        coeffs.alpha += view.sigma_R * x_t.cwiseInverse();
        coeffs.beta += view.grad_sR + view.sigma_R * x_t.cwiseInverse();
    }
    if (view.concave) {
        for (Index j = 0; j < d; ++j) {
            coeffs.beta[j] += view.concave->derivative(x_t[j]);
        }
    }
    for (Index j = 0; j < d; ++j) {
        if (coeffs.alpha[j] == 0.0 && coeffs.beta[j] == 0.0) {
            coeffs.degenerate = true;
        }
    }
    return coeffs;
}

QuCoefficients qu_coefficients(const SubproblemView& view, const Vector& x_t,
                               std::optional<double> gamma) {
    check_view_inputs(view, x_t);
    const Matrix& A = *view.A;
    const Index d = view.dim();
    QuCoefficients coeffs;
    coeffs.beta = A.colwise().sum().transpose();
    coeffs.zeta = Vector::Zero(d);
    for (Index i = 0; i < A.rows(); ++i) {
        if (view.b[i] <= 0.0) {
            continue;
        }
        const double denom = A.row(i).dot(x_t.transpose());
        if (denom <= 0.0) {
            throw DomainError("qu_coefficients: a_i' x_t <= 0 with b_i > 0");
        }
        coeffs.zeta += (view.b[i] / denom) * A.row(i).transpose().cwiseProduct(x_t);
    }
    if (view.has_lipschitz) {
        const double sigma = gamma.value_or(view.sigma_L);
        coeffs.alpha = 2.0 * sigma;
        coeffs.beta += view.grad_sL - coeffs.alpha * x_t;
    }
    if (view.has_relsmooth) {
        coeffs.beta += view.grad_sR + view.sigma_R * x_t.cwiseInverse();
        coeffs.zeta.array() += view.sigma_R;
    }
    if (view.concave) {
        for (Index j = 0; j < d; ++j) {
            coeffs.beta[j] += view.concave->derivative(x_t[j]);
        }
    }
    return coeffs;
}

Vector mu_update(const Vector& x_t, const MuCoefficients& coeffs, double epsilon) {
    Vector x(x_t.size());
    for (Index j = 0; j < x_t.size(); ++j) {
        if (coeffs.beta[j] <= 0.0) {
            throw UpdateError("mu_update: beta_j <= 0");
        }
        x[j] = std::max(x_t[j] * coeffs.alpha[j] / coeffs.beta[j], epsilon);
    }
    return x;
}

Vector qu_update(const Vector& x_t, const QuCoefficients& coeffs, double epsilon) {
    Vector x(x_t.size());
    for (Index j = 0; j < x_t.size(); ++j) {
        x[j] = std::max(positive_quadratic_root(coeffs.alpha, coeffs.beta[j], coeffs.zeta[j]),
                        epsilon);
    }
    return x;
}

double h1_value(double nu, const Vector& c, const Vector& beta, const Vector& e, double epsilon) {
    double acc = -1.0;
    for (Index j = 0; j < e.size(); ++j) {
        if (e[j] <= 0.0) {
            continue;
        }
        const double denom = beta[j] + nu * e[j];
        double x;
        if (c[j] <= 0.0) {
            x = epsilon;
        } else if (denom <= 0.0) {
            return kHuge;
        } else {
            x = std::max(c[j] / denom, epsilon);
        }
        acc += e[j] * x;
    }
    return acc;
}

double h2_value(double nu, double alpha, const Vector& beta, const Vector& zeta, const Vector& e,
                double epsilon) {
    double acc = -1.0;
    for (Index j = 0; j < e.size(); ++j) {
        if (e[j] <= 0.0) {
            continue;
        }
        const double root = quadratic_root_or_huge(alpha, beta[j] + nu * e[j], zeta[j]);
        if (root >= kHuge) {
            return kHuge;
        }
        acc += e[j] * std::max(root, epsilon);
    }
    return acc;
}

namespace {

// Expand a candidate bracket until h(nu_up) >= 0 >= h(nu_low); h is
// nonincreasing so nu_up moves left and nu_low moves right.
Bracket expand_bracket(const std::function<double(double)>& h, double nu_up, double nu_low) {
    if (nu_up > nu_low) {
        std::swap(nu_up, nu_low);
    }
    const int max_doublings = 64;
    double step = std::max(1.0, std::abs(nu_up));
    int tries = 0;
    while (h(nu_up) < 0.0) {
        if (++tries > max_doublings) {
            throw BracketError("no sign change while expanding the lower bracket end");
        }
        nu_up -= step;
        step *= 2.0;
    }
    step = std::max(1.0, std::abs(nu_low));
    tries = 0;
    while (h(nu_low) > 0.0) {
        if (++tries > max_doublings) {
            throw BracketError("no sign change while expanding the upper bracket end");
        }
        nu_low += step;
        step *= 2.0;
    }
    return {nu_up, nu_low};
}

Bracket log_family_bracket(const Vector& c, const Vector& beta, const Vector& e,
                           double epsilon) {
    int n_active = 0;
    double max_c = 0.0;
    double min_ratio = std::numeric_limits<double>::infinity();
    double nu_up = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < e.size(); ++j) {
        if (e[j] <= 0.0) {
            continue;
        }
        ++n_active;
        max_c = std::max(max_c, c[j]);
        min_ratio = std::min(min_ratio, beta[j] / e[j]);
        nu_up = std::max(nu_up, c[j] - beta[j] / e[j]);
    }
    if (n_active == 0) {
        throw BracketError("no active constraint entries");
    }
    const double nu_low = static_cast<double>(n_active) * max_c - min_ratio;
    auto h = [&](double nu) { return h1_value(nu, c, beta, e, epsilon); };
    return expand_bracket(h, nu_up, nu_low);
}

}  // namespace

Bracket mu_bracket(const Vector& x_t, const MuCoefficients& coeffs, const Vector& e,
                   double epsilon) {
    return log_family_bracket(x_t.cwiseProduct(coeffs.alpha), coeffs.beta, e, epsilon);
}

Bracket qu_bracket(const Vector& x_t, const QuCoefficients& coeffs, const Vector& e,
                   double epsilon) {
    (void)x_t;
    int n_active = 0;
    double sum_e2 = 0.0;
    double sum_eb = 0.0;
    for (Index j = 0; j < e.size(); ++j) {
        if (e[j] <= 0.0) {
            continue;
        }
        ++n_active;
        sum_e2 += e[j] * e[j];
        sum_eb += e[j] * coeffs.beta[j];
    }
    if (n_active == 0) {
        throw BracketError("no active constraint entries");
    }
    const double m = static_cast<double>(n_active);
    const double nu_up = -(2.0 * coeffs.alpha + sum_eb) / sum_e2;
    double nu_low = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < e.size(); ++j) {
        if (e[j] <= 0.0) {
            continue;
        }
        const double candidate =
            m * coeffs.zeta[j] - coeffs.alpha / (m * e[j] * e[j]) - coeffs.beta[j] / e[j];
        nu_low = std::max(nu_low, candidate);
    }
    auto h = [&](double nu) {
        return h2_value(nu, coeffs.alpha, coeffs.beta, coeffs.zeta, e, epsilon);
    };
    return expand_bracket(h, nu_up, nu_low);
}

DualSolve dual_dichotomy(const std::function<double(double)>& h, Bracket bracket, double tol,
                         int cap) {
    DualSolve solve;
    solve.bracket = bracket;
    double a = bracket.nu_up;
    double b = bracket.nu_low;
    double ha = h(a);
    double hb = h(b);
    if (ha < -tol || hb > tol) {
        throw BracketError("dichotomy endpoints do not bracket a root");
    }
    if (std::abs(ha) <= tol) {
        solve.nu = a;
        solve.residual = std::abs(ha);
        return solve;
    }
    if (std::abs(hb) <= tol) {
        solve.nu = b;
        solve.residual = std::abs(hb);
        return solve;
    }
    double mid = 0.5 * (a + b);
    double hm = h(mid);
    for (int it = 1; it <= cap; ++it) {
        solve.iterations = it;
        mid = 0.5 * (a + b);
        hm = h(mid);
        if (std::abs(hm) <= tol) {
            solve.nu = mid;
            solve.residual = std::abs(hm);
            return solve;
        }
        if (hm > 0.0) {
            a = mid;
        } else {
            b = mid;
        }
        // Give up only when no representable point is left between the ends;
        // return the end with the smaller residual.
        if ((b - a) <= 4.0 * std::numeric_limits<double>::epsilon() *
                           (std::abs(a) + std::abs(b) + 1.0)) {
            ha = h(a);
            hb = h(b);
            if (std::abs(ha) <= std::abs(hb)) {
                solve.nu = a;
                solve.residual = std::abs(ha);
            } else {
                solve.nu = b;
                solve.residual = std::abs(hb);
            }
            return solve;
        }
    }
    solve.nu = mid;
    solve.residual = std::abs(hm);
    solve.warning = true;
    return solve;
}

Vector log_family_update_simplex(const Vector& c, const Vector& beta, const Vector& e,
                                 double epsilon, const DichotomyOptions& opts, DualSolve* info) {
    auto h = [&](double nu) { return h1_value(nu, c, beta, e, epsilon); };
    Bracket bracket = log_family_bracket(c, beta, e, epsilon);
    if (opts.warm_start && *opts.warm_start > bracket.nu_up && *opts.warm_start < bracket.nu_low) {
        const double hw = h(*opts.warm_start);
        if (hw >= 0.0) {
            bracket.nu_up = *opts.warm_start;
        } else {
            bracket.nu_low = *opts.warm_start;
        }
    }
    const DualSolve solve = dual_dichotomy(h, bracket, opts.tol, opts.cap);
    Vector x(c.size());
    for (Index j = 0; j < c.size(); ++j) {
        if (e[j] <= 0.0) {
            // Unconstrained entry.
            if (c[j] <= 0.0) {
                if (beta[j] <= 0.0) {
                    throw UpdateError("log-family update: beta_j <= 0 on an unconstrained entry");
                }
                x[j] = epsilon;
            } else {
                if (beta[j] <= 0.0) {
                    throw UpdateError("log-family update: beta_j <= 0 on an unconstrained entry");
                }
                x[j] = std::max(c[j] / beta[j], epsilon);
            }
            continue;
        }
        const double denom = beta[j] + solve.nu * e[j];
        if (c[j] <= 0.0) {
            x[j] = epsilon;
        } else if (denom <= 0.0) {
            throw UpdateError("log-family update: nonpositive denominator at the solved dual");
        } else {
            x[j] = std::max(c[j] / denom, epsilon);
        }
    }
    if (info) {
        *info = solve;
    }
    return x;
}

Vector mu_update_simplex(const Vector& x_t, const MuCoefficients& coeffs, const Vector& e,
                         double epsilon, const DichotomyOptions& opts, DualSolve* info) {
    return log_family_update_simplex(x_t.cwiseProduct(coeffs.alpha), coeffs.beta, e, epsilon,
                                     opts, info);
}

Vector qu_update_simplex(const Vector& x_t, const QuCoefficients& coeffs, const Vector& e,
                         double epsilon, const DichotomyOptions& opts, DualSolve* info) {
    auto h = [&](double nu) {
        return h2_value(nu, coeffs.alpha, coeffs.beta, coeffs.zeta, e, epsilon);
    };
    Bracket bracket = qu_bracket(x_t, coeffs, e, epsilon);
    if (opts.warm_start && *opts.warm_start > bracket.nu_up && *opts.warm_start < bracket.nu_low) {
        const double hw = h(*opts.warm_start);
        if (hw >= 0.0) {
            bracket.nu_up = *opts.warm_start;
        } else {
            bracket.nu_low = *opts.warm_start;
        }
    }
    const DualSolve solve = dual_dichotomy(h, bracket, opts.tol, opts.cap);
    Vector x(x_t.size());
    for (Index j = 0; j < x_t.size(); ++j) {
        if (e[j] <= 0.0) {
            x[j] = std::max(positive_quadratic_root(coeffs.alpha, coeffs.beta[j], coeffs.zeta[j]),
                            epsilon);
            continue;
        }
        const double shifted = coeffs.beta[j] + solve.nu * e[j];
        const double root = quadratic_root_or_huge(coeffs.alpha, shifted, coeffs.zeta[j]);
        if (root >= kHuge) {
            throw UpdateError("quadratic update: unbounded entry at the solved dual");
        }
        x[j] = std::max(root, epsilon);
    }
    if (info) {
        *info = solve;
    }
    return x;
}

}  // namespace pnmf
