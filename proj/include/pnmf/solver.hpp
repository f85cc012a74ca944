#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pnmf/model.hpp"
#include "pnmf/types.hpp"

namespace pnmf {

enum class Algorithm {
    MU,
    QU,
    BMD,
    PGD,
};

struct LineSearchConfig {
    double upsilon = 1.2;  // growth rate on a violated surrogate
    double tau = 1.2;      // decay rate on an accepted surrogate
};

struct SolverConfig {
    Algorithm algorithm = Algorithm::MU;
    int max_iter = 200;
    double rel_tol = 1e-10;  // relative objective change over one outer iteration
    int stall_iters = 1;     // consecutive sub-threshold iterations before stopping
    std::optional<LineSearchConfig> linesearch;
    double dichotomy_tol = 1e-12;
    int dichotomy_cap = 200;
    std::uint64_t seed = 1;
    int trace_every = 1;
    double pgd_step_scale = 1e-3;  // initial step = scale * mean(Y)
};

struct TracePoint {
    int iter = 0;
    double objective = 0.0;
    double kl_part = 0.0;
    double constraint_violation = 0.0;  // max over columns of |e'h - 1|
    double min_w = 0.0;
    double min_h = 0.0;
    double gamma = 0.0;  // line-search gamma in effect (sigma_L when disabled)
    double seconds = 0.0;
    long dichotomy_iters = 0;  // cumulative bisection iterations
};

struct SolverTrace {
    std::vector<TracePoint> points;
    double dichotomy_seconds = 0.0;
};

enum class Termination {
    Converged,
    MaxIter,
    Aborted,
};

struct SolveResult {
    Matrix W;
    Matrix H;
    SolverTrace trace;
    Termination termination = Termination::MaxIter;
    std::vector<std::string> warnings;
    double total_seconds = 0.0;

    double final_objective() const {
        return trace.points.empty() ? 0.0 : trace.points.back().objective;
    }
};

// Uniform [epsilon, 1] entries; the constrained side is then rescaled and
// clamped (exact water-filling) so e' x = 1 holds per column/row.
std::pair<Matrix, Matrix> initialize(const ProblemSpec& spec, std::uint64_t seed);

// Alternating full-W then full-H block minimization with the MU or QU rule
// (Algorithm selects which); the constrained side solves the per-column dual
// by dichotomy.
SolveResult tbsum_solve(const ProblemSpec& spec, const SolverConfig& config);

// gamma update rule: grow by upsilon when the trial surrogate failed to
// majorize, shrink by tau when it majorized.
double linesearch_gamma(double gamma_t, bool accepted, double upsilon, double tau);

// Block mirror descent baseline: the KL block is majorized through the
// Bregman divergence of -1' log x with constant L = sum_i b_i per subproblem;
// regularizers keep their own bounds. Shares the dual mechanism with MU.
SolveResult bmd_solve(const ProblemSpec& spec, const SolverConfig& config);

// Alternating projected gradient with backtracking (halve on increase, grow
// by 1.1 on success) and exact sort-based projection onto the generalized
// simplex.
SolveResult pgd_solve(const ProblemSpec& spec, const SolverConfig& config);

// Euclidean projection onto {x >= epsilon, e' x = 1}; entries with e_j = 0
// are clamped at epsilon independently.
Vector project_generalized_simplex(const Vector& v, const Vector& e, double epsilon);

// Max stationarity residual over both blocks, in complementarity form: with
// lag = grad + nu e (nu fitted by least squares per constrained column/row),
// a coordinate contributes |lag| when lag points outward and
// min(x - epsilon, lag) when it points toward the floor. At the floor this is
// the negative-part test; in the interior it is the Lagrangian gradient
// magnitude.
double kkt_residual(const Matrix& W, const Matrix& H, const ProblemSpec& spec);

// Max over constrained columns/rows of |e' x - 1|; zero without a constraint.
double constraint_violation(const Matrix& W, const Matrix& H, const ProblemSpec& spec);

void trace_to_csv(const SolverTrace& trace, const std::string& path);
std::string trace_to_json(const SolverTrace& trace);

}  // namespace pnmf
