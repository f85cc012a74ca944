#pragma once

#include <cstdint>
#include <optional>

#include "pnmf/model.hpp"
#include "pnmf/types.hpp"

namespace pnmf {

// Which Lipschitz bound the composite surrogate carries: the log/GKL bound
// (whose minimizer is the multiplicative update) or the quadratic bound
// (whose minimizer is the quadratic update).
enum class SurrogateKind {
    MuLog,
    QuQuadratic,
};

// q_j proportional to a_j * x_t_j, normalized to sum 1.
Vector em_weights(const Vector& a, const Vector& x_t);

// sum_j x_t_j log(x_t_j / x_j) - x_t_j + x_j; >= 0, zero iff x == x_t.
double gkl_divergence(const Vector& x, const Vector& x_t);

// Bregman divergence of -1' log x: sum_j x_j/x_t_j - log(x_j/x_t_j) - 1.
double bregman_burg(const Vector& x, const Vector& x_t);

// f(x) on a view: sum_i [-b_i log(a_i' x) + a_i' x] + s_L + s_R + sum s_C.
// Requires value closures for any regularizer part the view carries.
double view_objective(const SubproblemView& view, const Vector& x);

// Full composite surrogate g(x, x_t) of the view objective: EM bound on the
// log terms, the chosen Lipschitz bound, the Bregman bound on s_R and the
// linearization of s_C. `gamma` overrides sigma_L (line search).
double surrogate_value(SurrogateKind kind, const Vector& x, const Vector& x_t,
                       const SubproblemView& view,
                       std::optional<double> gamma = std::nullopt);

struct MajorizationReport {
    int samples = 0;
    double max_violation_A1 = 0.0;      // max over samples of (f - g) / max(1, |f|)
    double max_gap_A2 = 0.0;            // |g(xt,xt) - f(xt)| / max(1, |f|)
    double max_grad_mismatch_A3 = 0.0;  // finite-difference gradient mismatch at xt
};

// Uniform sampling box for certification; coordinates drawn independently on
// [lo_j, hi_j]. When cap_x_by_max_xt is set, x samples are additionally
// capped at max_j(x_t_j): the log Lipschitz bound as printed carries the
// constant 2 sigma_L max_j(x_t_j) and majorizes on exactly that region.
struct CertifySampler {
    Vector lo;
    Vector hi;
    std::uint64_t seed = 1;
    bool cap_x_by_max_xt = false;
};

// Samples x_t points and per x_t many x points, measuring the worst A.1
// violation, A.2 gap, and A.3 gradient mismatch. Violations are data, not
// errors.
MajorizationReport certify_majorization(SurrogateKind kind, const SubproblemView& view,
                                        const CertifySampler& sampler, int n_samples,
                                        int n_xt = 50);

// Majorizers of f(x) = -log(a' x) used for the tightness comparison: the EM
// bound and the Bregman bound (f is 1-relatively smooth w.r.t. -1' log x).
double em_log_surrogate(const Vector& a, const Vector& x, const Vector& x_t);
double bregman_log_surrogate(const Vector& a, const Vector& x, const Vector& x_t);

}  // namespace pnmf
