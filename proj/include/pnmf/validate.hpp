#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pnmf/majorize.hpp"

namespace pnmf {

struct SurfaceReport {
    std::string surface;  // which majorizer was certified
    int instance = 0;
    MajorizationReport report;
};

struct CertifyTolerances {
    double a1 = 1e-9;
    double a2 = 1e-10;
    double a3 = 1e-5;
};

// Certifies the four majorization lemmas (the Lipschitz lemma in both its
// quadratic and log forms) and the two composite surrogates on randomized
// instances. The log Lipschitz bound is certified on the region where its
// printed constant is valid (x capped at max_j x_t_j); see norm_gkl_check for
// the unrestricted behavior of that constant.
std::vector<SurfaceReport> certification_battery(int instances, int samples_per_instance,
                                                 std::uint64_t seed);

bool all_within(const std::vector<SurfaceReport>& reports, const CertifyTolerances& tol);

struct NormGklStats {
    int pairs = 0;
    // ||x - x_t||^2 <= 2 max_j(max(x_j, x_t_j)) * D_GKL(x || x_t): the
    // inequality the proof establishes; holds for all positive pairs.
    int violations_segment_max = 0;
    double worst_margin_segment = 0.0;  // max of lhs - rhs (negative when satisfied)
    // Same with the constant 2 max_j(x_t_j) as printed; fails once x moves
    // far enough above max(x_t). Reported as data.
    int violations_printed_max = 0;
};

NormGklStats norm_gkl_check(int pairs, std::uint64_t seed);

// Gap comparison of the EM and Bregman majorizers of f(x) = -log(a' x) on a
// square grid, anchored at x_t.
struct TightnessRow {
    double x0 = 0.0;
    double x1 = 0.0;
    double f = 0.0;
    double g_em = 0.0;
    double g_bregman = 0.0;
};

struct TightnessGrid {
    Vector a;
    Vector x_t;
    std::vector<TightnessRow> rows;
    double max_em_minus_bregman = 0.0;  // <= 0 when EM is pointwise tighter
    double min_em_gap = 0.0;            // >= 0 when EM majorizes on the grid
};

TightnessGrid fig_tightness_grid(int resolution = 50);

}  // namespace pnmf
