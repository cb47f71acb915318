#pragma once

#include "obtree/backend.hpp"
#include "obtree/dense.hpp"
#include "obtree/model.hpp"

#include <cstdint>
#include <span>

namespace obtree {

/// Binarized features for a block of samples, feature-major: row f holds
/// the bins of feature f for every sample in the block, contiguously.
struct QuantizedBlock {
    BinMatrix bins;
    std::size_t nan_count = 0;  // NaN inputs, each mapped to bin 0

    Eigen::Index n_features() const { return bins.rows(); }
    Eigen::Index n_samples() const { return bins.cols(); }
    std::span<const std::uint8_t> feature(Eigen::Index f) const {
        return {bins.row(f).data(), static_cast<std::size_t>(bins.cols())};
    }
};

/// Number of borders strictly below `value`. A value equal to a border
/// lands in the lower bin; NaN lands in bin 0.
std::uint8_t bin_index(float value, std::span<const float> borders);

/// Quantizes a sample-major block (rows are samples). Throws DataError if
/// the column count differs from the schema's feature count.
QuantizedBlock binarize_block(const MatrixRef<float>& raw, const BorderSchema& schema, Backend backend);

}  // namespace obtree
