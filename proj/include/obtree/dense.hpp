#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace obtree {

/// Dense row-major matrix. Rows are contiguous, which is the unit-stride
/// direction every kernel in this library walks.
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixRef = Eigen::Ref<const RowMatrix<Scalar>>;

using FeatureMatrix = RowMatrix<float>;    // samples x features
using BinMatrix = RowMatrix<std::uint8_t>; // features x samples
using ScoreMatrix = RowMatrix<double>;     // samples x dims

}  // namespace obtree
