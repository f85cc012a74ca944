#pragma once

#include <cstdint>
#include <limits>
#include <string>

#include "pnmf/types.hpp"

namespace pnmf {

enum class DatasetKind {
    Uniform,
    Smooth,
};

struct DatasetConfig {
    DatasetKind kind = DatasetKind::Uniform;
    Index n = 25;  // rows of W
    Index k = 3;   // components
    Index p = 16;  // image side; m = p^2
    double noise_lambda = std::numeric_limits<double>::infinity();  // inf = noiseless
    std::uint64_t seed = 1;
};

struct Dataset {
    Matrix W_true;   // n x k
    Matrix H_true;   // k x p^2, columns sum to 1
    Matrix Y_clean;  // W_true * H_true
    Matrix Y_noisy;  // Poisson(lambda Y)/lambda, or Y_clean when noiseless
};

// W, H iid uniform on (0, 1]; H columns rescaled to the simplex.
Dataset gen_uniform(const DatasetConfig& cfg);

// W columns are sums of 5 random Gaussians over a 1-D grid (plus a small
// floor); H rows are box-blurred uniform noise images; H columns rescaled to
// the simplex.
Dataset gen_smooth(const DatasetConfig& cfg);

// Independent draws Y_ij ~ Poisson(lambda * Y_ij) / lambda, one derived
// generator per cell so the result does not depend on traversal order.
// Infinite lambda returns the input unchanged.
Matrix poisson_noise(const Matrix& Y_clean, double noise_lambda, std::uint64_t seed);

// Single Poisson draw (inversion for small means, PTRS rejection for large).
std::uint64_t poisson_draw(double mean, class Rng& rng);

// 3x3 box blur with replicated borders, `passes` times.
Matrix box_blur3(const Matrix& field, int passes);

enum class MatrixFormat {
    Csv,    // "rows,cols" header line, then row-major values at 17 significant digits
    Raw64,  // two little-endian u64 dims, then row-major little-endian doubles
};

void save_matrix(const std::string& path, const Matrix& m, MatrixFormat format);
Matrix load_matrix(const std::string& path, MatrixFormat format);

}  // namespace pnmf
