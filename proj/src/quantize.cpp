#include "obtree/quantize.hpp"

#include "obtree/errors.hpp"
#include "obtree/kernels.hpp"
#include "obtree/profiler.hpp"

#include <cmath>
#include <string>

namespace obtree {

std::uint8_t bin_index(float value, std::span<const float> borders) {
    std::uint8_t bin = 0;
    for (float border : borders) bin += static_cast<std::uint8_t>(value > border);
    return bin;
}

QuantizedBlock binarize_block(const MatrixRef<float>& raw, const BorderSchema& schema, Backend backend) {
    if (raw.cols() != schema.n_features())
        throw DataError("block has " + std::to_string(raw.cols()) + " feature columns, model expects " +
                        std::to_string(schema.n_features()));

    OBTREE_PROFILE_SCOPE("BinarizeFeatures");
    const RowMatrix<float> by_feature = raw.transpose();
    QuantizedBlock block;
    block.bins.resize(raw.cols(), raw.rows());
    const auto n = static_cast<std::size_t>(raw.rows());
    for (Eigen::Index f = 0; f < by_feature.rows(); ++f) {
        std::span<const float> values(by_feature.row(f).data(), n);
        {
            OBTREE_PROFILE_SCOPE("BinarizeFloatsNonSse");
            kernels::binarize(values, schema[static_cast<int>(f)], {block.bins.row(f).data(), n}, backend);
        }
        for (float v : values) block.nan_count += std::isnan(v) ? 1 : 0;
    }
    return block;
}

}  // namespace obtree
