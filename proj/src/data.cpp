#include "pnmf/data.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "pnmf/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "raw64 I/O assumes a little-endian host");

namespace pnmf {

namespace {

void validate_config(const DatasetConfig& cfg) {
    if (cfg.k < 1) {
        throw DomainError("dataset: k must be >= 1");
    }
    if (cfg.p < 2) {
        throw DomainError("dataset: p must be >= 2");
    }
    if (cfg.n < cfg.k) {
        throw DomainError("dataset: n must be >= k");
    }
    if (!(cfg.noise_lambda > 0.0)) {
        throw DomainError("dataset: noise_lambda must be > 0 or infinite");
    }
}

void normalize_columns_to_simplex(Matrix& H) {
    for (Index j = 0; j < H.cols(); ++j) {
        const double sum = H.col(j).sum();
        if (sum <= 0.0) {
            throw DomainError("dataset: column sum must be positive before normalization");
        }
        H.col(j) /= sum;
    }
}

Dataset finish_dataset(Matrix W, Matrix H, const DatasetConfig& cfg) {
    Dataset ds;
    ds.W_true = std::move(W);
    ds.H_true = std::move(H);
    ds.Y_clean = ds.W_true * ds.H_true;
    ds.Y_noisy = poisson_noise(ds.Y_clean, cfg.noise_lambda, Rng::derive(cfg.seed, 3));
    return ds;
}

}  // namespace

Dataset gen_uniform(const DatasetConfig& cfg) {
    validate_config(cfg);
    const Index m = cfg.p * cfg.p;
    Rng rng_w(Rng::derive(cfg.seed, 1));
    Rng rng_h(Rng::derive(cfg.seed, 2));
    Matrix W(cfg.n, cfg.k);
    for (Index i = 0; i < cfg.n; ++i) {
        for (Index j = 0; j < cfg.k; ++j) {
            W(i, j) = 1.0 - rng_w.uniform();  // (0, 1]
        }
    }
    Matrix H(cfg.k, m);
    for (Index i = 0; i < cfg.k; ++i) {
        for (Index j = 0; j < m; ++j) {
            H(i, j) = 1.0 - rng_h.uniform();
        }
    }
    normalize_columns_to_simplex(H);
    return finish_dataset(std::move(W), std::move(H), cfg);
}

Matrix box_blur3(const Matrix& field, int passes) {
    const Index rows = field.rows();
    const Index cols = field.cols();
    Matrix cur = field;
    Matrix next(rows, cols);
    auto clampi = [](Index v, Index hi) { return std::max<Index>(0, std::min(v, hi - 1)); };
    for (int pass = 0; pass < passes; ++pass) {
        for (Index r = 0; r < rows; ++r) {
            for (Index c = 0; c < cols; ++c) {
                double acc = 0.0;
                for (Index dr = -1; dr <= 1; ++dr) {
                    for (Index dc = -1; dc <= 1; ++dc) {
                        acc += cur(clampi(r + dr, rows), clampi(c + dc, cols));
                    }
                }
                next(r, c) = acc / 9.0;
            }
        }
        std::swap(cur, next);
    }
    return cur;
}

Dataset gen_smooth(const DatasetConfig& cfg) {
    validate_config(cfg);
    const Index m = cfg.p * cfg.p;
    Rng rng_w(Rng::derive(cfg.seed, 1));
    Matrix W = Matrix::Zero(cfg.n, cfg.k);
    const int gaussians = 5;
    const double nd = static_cast<double>(cfg.n);
    for (Index j = 0; j < cfg.k; ++j) {
        for (int g = 0; g < gaussians; ++g) {
            const double center = rng_w.uniform(0.0, nd - 1.0);
            const double width = rng_w.uniform(nd / 20.0, nd / 5.0);
            const double amplitude = 1.0 - rng_w.uniform();  // (0, 1]
            for (Index i = 0; i < cfg.n; ++i) {
                const double t = static_cast<double>(i) - center;
                W(i, j) += amplitude * std::exp(-t * t / (2.0 * width * width));
            }
        }
        W.col(j).array() += 1e-3;
    }
    Matrix H(cfg.k, m);
    for (Index r = 0; r < cfg.k; ++r) {
        Rng rng_h(Rng::derive(cfg.seed, 100 + static_cast<std::uint64_t>(r)));
        Matrix noise(cfg.p, cfg.p);
        for (Index a = 0; a < cfg.p; ++a) {
            for (Index b = 0; b < cfg.p; ++b) {
                noise(a, b) = 1.0 - rng_h.uniform();
            }
        }
        const Matrix smooth = box_blur3(noise, 4);
        for (Index a = 0; a < cfg.p; ++a) {
            for (Index b = 0; b < cfg.p; ++b) {
                H(r, a * cfg.p + b) = smooth(a, b);
            }
        }
    }
    normalize_columns_to_simplex(H);
    return finish_dataset(std::move(W), std::move(H), cfg);
}

std::uint64_t poisson_draw(double mean, Rng& rng) {
    if (mean < 0.0 || !std::isfinite(mean)) {
        throw DomainError("poisson_draw: mean must be finite and >= 0");
    }
    if (mean == 0.0) {
        return 0;
    }
    if (mean < 10.0) {
        // Inversion by sequential search.
        double p = std::exp(-mean);
        double cdf = p;
        const double u = rng.uniform();
        std::uint64_t k = 0;
        while (u > cdf) {
            ++k;
            p *= mean / static_cast<double>(k);
            cdf += p;
            if (k > 2000) {  // u landed in roundoff tail
                break;
            }
        }
        return k;
    }
    // PTRS transformed rejection (Hormann 1993).
    const double b = 0.931 + 2.53 * std::sqrt(mean);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mean = std::log(mean);
    for (;;) {
        double u = rng.uniform() - 0.5;
        double v = rng.uniform();
        const double us = 0.5 - std::abs(u);
        const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= v_r) {
            return static_cast<std::uint64_t>(kf);
        }
        if (kf < 0.0 || (us < 0.013 && v > us)) {
            continue;
        }
        const double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
        const double rhs = kf * log_mean - mean - std::lgamma(kf + 1.0);
        if (lhs <= rhs) {
            return static_cast<std::uint64_t>(kf);
        }
    }
}

Matrix poisson_noise(const Matrix& Y_clean, double noise_lambda, std::uint64_t seed) {
    if (!(noise_lambda > 0.0)) {
        throw DomainError("poisson_noise: lambda must be > 0 or infinite");
    }
    if (std::isinf(noise_lambda)) {
        return Y_clean;
    }
    Matrix out(Y_clean.rows(), Y_clean.cols());
    for (Index i = 0; i < Y_clean.rows(); ++i) {
        for (Index j = 0; j < Y_clean.cols(); ++j) {
            const double y = Y_clean(i, j);
            if (y < 0.0) {
                throw DomainError("poisson_noise: negative entry");
            }
            const std::uint64_t cell =
                static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(Y_clean.cols()) +
                static_cast<std::uint64_t>(j);
            Rng cell_rng(Rng::derive(seed, cell));
            out(i, j) =
                static_cast<double>(poisson_draw(noise_lambda * y, cell_rng)) / noise_lambda;
        }
    }
    return out;
}

void save_matrix(const std::string& path, const Matrix& m, MatrixFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ParseError("cannot open for writing: " + path);
    }
    if (format == MatrixFormat::Csv) {
        out << m.rows() << "," << m.cols() << "\n";
        char buf[64];
        for (Index i = 0; i < m.rows(); ++i) {
            for (Index j = 0; j < m.cols(); ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
                if (j > 0) {
                    out << ",";
                }
                out << buf;
            }
            out << "\n";
        }
    } else {
        const std::uint64_t dims[2] = {static_cast<std::uint64_t>(m.rows()),
                                       static_cast<std::uint64_t>(m.cols())};
        out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
        out.write(reinterpret_cast<const char*>(m.data()),
                  static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
    }
    if (!out) {
        throw ParseError("write failed: " + path);
    }
}

namespace {

Matrix load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open: " + path);
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(path + ": line 1: missing header");
    }
    Index rows = 0;
    Index cols = 0;
    {
        std::istringstream hs(line);
        char comma = 0;
        if (!(hs >> rows >> comma >> cols) || comma != ',' || rows < 1 || cols < 1) {
            throw ParseError(path + ": line 1: malformed header, expected \"rows,cols\"");
        }
    }
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) {
            throw ParseError(path + ": line " + std::to_string(i + 2) + ": unexpected end of file");
        }
        std::istringstream ls(line);
        std::string cell;
        for (Index j = 0; j < cols; ++j) {
            if (!std::getline(ls, cell, ',')) {
                throw ParseError(path + ": line " + std::to_string(i + 2) + ": expected " +
                                 std::to_string(cols) + " values");
            }
            std::size_t pos = 0;
            double value = 0.0;
            try {
                value = std::stod(cell, &pos);
            } catch (const std::exception&) {
                throw ParseError(path + ": line " + std::to_string(i + 2) + ": bad number '" +
                                 cell + "'");
            }
            if (!std::isfinite(value)) {
                throw ParseError(path + ": line " + std::to_string(i + 2) +
                                 ": non-finite value");
            }
            m(i, j) = value;
        }
        if (std::getline(ls, cell, ',')) {
            throw ParseError(path + ": line " + std::to_string(i + 2) + ": too many values");
        }
    }
    return m;
}

Matrix load_raw64(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError("cannot open: " + path);
    }
    std::uint64_t dims[2];
    if (!in.read(reinterpret_cast<char*>(dims), sizeof(dims))) {
        throw ParseError(path + ": offset 0: truncated header");
    }
    if (dims[0] < 1 || dims[1] < 1 || dims[0] > (1ull << 32) || dims[1] > (1ull << 32)) {
        throw ParseError(path + ": offset 0: implausible dimensions");
    }
    Matrix m(static_cast<Index>(dims[0]), static_cast<Index>(dims[1]));
    const std::streamsize bytes =
        static_cast<std::streamsize>(sizeof(double) * dims[0] * dims[1]);
    if (!in.read(reinterpret_cast<char*>(m.data()), bytes)) {
        throw ParseError(path + ": offset 16: truncated payload, expected " +
                         std::to_string(bytes) + " bytes");
    }
    for (Index i = 0; i < m.size(); ++i) {
        if (!std::isfinite(m.data()[i])) {
            throw ParseError(path + ": offset " + std::to_string(16 + i * 8) +
                             ": non-finite value");
        }
    }
    return m;
}

}  // namespace

Matrix load_matrix(const std::string& path, MatrixFormat format) {
    return format == MatrixFormat::Csv ? load_csv(path) : load_raw64(path);
}

}  // namespace pnmf
