#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace pnmf {

// All dense data is row-major 64-bit float; this matches the on-disk layout
// of the raw64 format so buffers can be written without reshuffling.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UpdateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BracketError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace pnmf
