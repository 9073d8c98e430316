#pragma once

#include <cstddef>

#include <Eigen/Core>

// Row-major views over raw tensor storage for the GEMM-backed kernels.
namespace sephr::eig {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<RowMat> Map(double* data, std::size_t rows, std::size_t cols) {
    return {data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

inline Eigen::Map<const RowMat> CMap(const double* data, std::size_t rows, std::size_t cols) {
    return {data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

}  // namespace sephr::eig
