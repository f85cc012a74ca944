#pragma once

#include <functional>
#include <optional>

#include "pnmf/model.hpp"
#include "pnmf/types.hpp"

namespace pnmf {

// Per-entry coefficients of the multiplicative update x <- x * alpha / beta.
struct MuCoefficients {
    Vector alpha;
    Vector beta;
    bool degenerate = false;  // some entry has alpha_j = beta_j = 0
};

// Coefficients of the quadratic update: per entry the positive root of
// alpha x^2 + beta_j x - zeta_j = 0.
struct QuCoefficients {
    double alpha = 0.0;  // 2 sigma_L
    Vector beta;
    Vector zeta;
};

// Root bracket for the dual functions: h(nu_up) >= 0 >= h(nu_low). The dual
// functions are nonincreasing, so nu_up <= nu_low as numbers.
struct Bracket {
    double nu_up = 0.0;
    double nu_low = 0.0;
};

struct DualSolve {
    double nu = 0.0;
    int iterations = 0;
    double residual = 0.0;
    Bracket bracket;
    bool warning = false;  // iteration cap reached
};

struct DichotomyOptions {
    double tol = 1e-12;  // absolute tolerance on |h(nu)|
    int cap = 200;
    std::optional<double> warm_start;  // previous nu for this column
};

// `gamma` replaces sigma_L in the coefficients (line search); the regularizer
// gradient slices stay as carried by the view.
MuCoefficients mu_coefficients(const SubproblemView& view, const Vector& x_t,
                               std::optional<double> gamma = std::nullopt);

QuCoefficients qu_coefficients(const SubproblemView& view, const Vector& x_t,
                               std::optional<double> gamma = std::nullopt);

// x_next = max(x_t * alpha / beta, epsilon); throws UpdateError when some
// beta_j <= 0.
Vector mu_update(const Vector& x_t, const MuCoefficients& coeffs, double epsilon);

// Positive quadratic root clamped at epsilon. alpha = 0 falls back to the
// linear limit zeta/beta; zeta_j = 0 yields max(epsilon, -beta_j/alpha).
Vector qu_update(const Vector& x_t, const QuCoefficients& coeffs, double epsilon);

// Dual functions whose root enforces e' x = 1. Entries with e_j = 0 do not
// contribute. Values on the unbounded side (some beta_j + nu e_j <= 0 with a
// positive numerator) evaluate to a huge positive number.
double h1_value(double nu, const Vector& c, const Vector& beta, const Vector& e, double epsilon);
double h2_value(double nu, double alpha, const Vector& beta, const Vector& zeta, const Vector& e,
                double epsilon);

// Analytic starting brackets, expanded by doubling (up to 64 steps) when a
// sign condition fails numerically.
Bracket mu_bracket(const Vector& x_t, const MuCoefficients& coeffs, const Vector& e,
                   double epsilon);
Bracket qu_bracket(const Vector& x_t, const QuCoefficients& coeffs, const Vector& e,
                   double epsilon);

// Bisection on a nonincreasing h. Stops when |h(nu)| <= tol or the bracket
// width shrinks below tol * (1 + |nu|); reaching the cap sets the warning
// flag instead of failing.
DualSolve dual_dichotomy(const std::function<double(double)>& h, Bracket bracket, double tol,
                         int cap);

// Constrained updates: result satisfies x >= epsilon and e' x = 1 up to the
// dichotomy tolerance. Entries with e_j = 0 take the unconstrained update.
Vector mu_update_simplex(const Vector& x_t, const MuCoefficients& coeffs, const Vector& e,
                         double epsilon, const DichotomyOptions& opts = {},
                         DualSolve* info = nullptr);
Vector qu_update_simplex(const Vector& x_t, const QuCoefficients& coeffs, const Vector& e,
                         double epsilon, const DichotomyOptions& opts = {},
                         DualSolve* info = nullptr);

// Shared machinery for updates of the form x_j = max(c_j/(beta_j + nu e_j),
// epsilon); the multiplicative update uses c = x_t o alpha and the mirror
// descent baseline its own numerators.
Vector log_family_update_simplex(const Vector& c, const Vector& beta, const Vector& e,
                                 double epsilon, const DichotomyOptions& opts = {},
                                 DualSolve* info = nullptr);

}  // namespace pnmf
