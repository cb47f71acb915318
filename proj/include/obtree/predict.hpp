#pragma once

#include "obtree/backend.hpp"
#include "obtree/dense.hpp"
#include "obtree/model.hpp"
#include "obtree/quantize.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace obtree {

enum class OutputTransform {
    RawValue,
    Sigmoid,        // binary probability, needs n_dims == 1
    SoftmaxArgmax,  // class label, needs n_dims >= 2
};

OutputTransform parse_transform(std::string_view text);
std::string_view to_string(OutputTransform transform);

struct PredictionMatrix {
    ScoreMatrix raw;                                  // scale * sum(leaves) + bias
    std::optional<Vector<double>> probability;        // Sigmoid
    std::optional<Eigen::VectorXi> label;             // SoftmaxArgmax

    Eigen::Index n_samples() const { return raw.rows(); }
    Eigen::Index n_dims() const { return raw.cols(); }
};

struct PredictOptions {
    Backend backend = Backend::scalar();
    int workers = 1;
    Eigen::Index block_size = 128;
    OutputTransform transform = OutputTransform::RawValue;
    /// Record scopes into the profiler bound to the calling thread. With
    /// several workers each keeps its own tree, merged afterwards.
    bool profile = false;
};

/// Leaf index of every sample in `block` for `tree`:
/// sum over levels i of (bin[f_i] >= border_bin_i) << i.
std::vector<std::uint32_t> calc_leaf_indexes(const QuantizedBlock& block, const ObliviousTree& tree, Backend backend);
void calc_leaf_indexes(const QuantizedBlock& block, const ObliviousTree& tree, Backend backend,
                       std::span<std::uint32_t> indexes);

/// acc.row(s) += tree.leaf_values.row(indexes[s]). Scalar only: the lookup
/// is an indirect add and gains nothing from gather instructions.
void accumulate_leaf_values(std::span<const std::uint32_t> indexes, const ObliviousTree& tree, ScoreMatrix& acc);

/// Blocked batch prediction. Output is bit-identical for every backend and
/// worker count. Throws DataError on a column-count mismatch and
/// std::invalid_argument on a transform that does not fit n_dims.
PredictionMatrix predict_batch(const Ensemble& ensemble, const MatrixRef<float>& samples,
                               const PredictOptions& options = {});

/// Independent reference: walks each tree level by level from the raw
/// feature values. Only for checking predict_batch.
Vector<double> predict_oracle(const Ensemble& ensemble, std::span<const float> sample);

/// Index of the largest entry, lowest index on ties.
int argmax(std::span<const double> scores);

}  // namespace obtree
