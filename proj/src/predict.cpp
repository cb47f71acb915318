#include "obtree/predict.hpp"

#include "obtree/errors.hpp"
#include "obtree/kernels.hpp"
#include "obtree/profiler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>

namespace obtree {

OutputTransform parse_transform(std::string_view text) {
    if (text == "raw") return OutputTransform::RawValue;
    if (text == "sigmoid") return OutputTransform::Sigmoid;
    if (text == "softmax-argmax") return OutputTransform::SoftmaxArgmax;
    throw std::invalid_argument("unknown transform '" + std::string(text) + "' (expected raw, sigmoid, softmax-argmax)");
}

std::string_view to_string(OutputTransform transform) {
    switch (transform) {
        case OutputTransform::RawValue: return "raw";
        case OutputTransform::Sigmoid: return "sigmoid";
        case OutputTransform::SoftmaxArgmax: return "softmax-argmax";
    }
    return "raw";
}

int argmax(std::span<const double> scores) {
    int best = 0;
    for (std::size_t c = 1; c < scores.size(); ++c)
        if (scores[c] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
    return best;
}

void calc_leaf_indexes(const QuantizedBlock& block, const ObliviousTree& tree, Backend backend,
                       std::span<std::uint32_t> indexes) {
    std::fill(indexes.begin(), indexes.end(), 0u);
    for (int level = 0; level < tree.depth(); ++level) {
        const TreeSplit& split = tree.level_splits[level];
        kernels::calc_indexes(block.feature(split.feature_index), split.border_bin, static_cast<unsigned>(level),
                              indexes, backend);
    }
}

std::vector<std::uint32_t> calc_leaf_indexes(const QuantizedBlock& block, const ObliviousTree& tree, Backend backend) {
    std::vector<std::uint32_t> indexes(static_cast<std::size_t>(block.n_samples()));
    calc_leaf_indexes(block, tree, backend, indexes);
    return indexes;
}

namespace {

void accumulate_into(std::span<const std::uint32_t> indexes, const ObliviousTree& tree, Eigen::Ref<ScoreMatrix> acc) {
    const double* leaves = tree.leaf_values.data();
    const Eigen::Index dims = acc.cols();
    if (dims == 1) {
        double* out = acc.data();
        for (std::size_t s = 0; s < indexes.size(); ++s) out[s] += leaves[indexes[s]];
        return;
    }
    for (std::size_t s = 0; s < indexes.size(); ++s) {
        const double* leaf = leaves + static_cast<Eigen::Index>(indexes[s]) * dims;
        double* out = acc.row(static_cast<Eigen::Index>(s)).data();
        for (Eigen::Index c = 0; c < dims; ++c) out[c] += leaf[c];
    }
}

void check_transform(OutputTransform transform, int n_dims) {
    if (transform == OutputTransform::Sigmoid && n_dims != 1)
        throw std::invalid_argument("sigmoid transform needs n_dims == 1 (model has " + std::to_string(n_dims) + ")");
    if (transform == OutputTransform::SoftmaxArgmax && n_dims < 2)
        throw std::invalid_argument("softmax-argmax transform needs n_dims >= 2 (model has " +
                                    std::to_string(n_dims) + ")");
}

// One block through binarization and every tree, written into its own
// rows of `acc`.
void predict_block(const Ensemble& ensemble, const BorderSchema& schema, const MatrixRef<float>& samples,
                   Eigen::Index start, Eigen::Index count, Backend backend, ScoreMatrix& acc,
                   std::vector<std::uint32_t>& indexes) {
    const QuantizedBlock block = binarize_block(samples.middleRows(start, count), schema, backend);

    OBTREE_PROFILE_SCOPE("CalcTreesBlockedImpl");
    indexes.resize(static_cast<std::size_t>(count));
    auto rows = acc.middleRows(start, count);
    const bool multi = ensemble.n_dims > 1;
    for (const ObliviousTree& tree : ensemble.trees) {
        {
            OBTREE_PROFILE_SCOPE("CalcIndexesBasic");
            calc_leaf_indexes(block, tree, backend, indexes);
        }
        if (multi) {
            OBTREE_PROFILE_SCOPE("CalculateLeafValuesMulti");
            accumulate_into(indexes, tree, rows);
        } else {
            OBTREE_PROFILE_SCOPE("CalculateLeafValues");
            accumulate_into(indexes, tree, rows);
        }
    }
}

}  // namespace

void accumulate_leaf_values(std::span<const std::uint32_t> indexes, const ObliviousTree& tree, ScoreMatrix& acc) {
    if (static_cast<std::size_t>(acc.rows()) != indexes.size() || acc.cols() != tree.leaf_values.cols())
        throw std::invalid_argument("accumulate_leaf_values: accumulator shape mismatch");
    accumulate_into(indexes, tree, acc);
}

PredictionMatrix predict_batch(const Ensemble& ensemble, const MatrixRef<float>& samples,
                               const PredictOptions& options) {
    if (samples.cols() != ensemble.n_features && samples.rows() > 0)
        throw DataError("sample matrix has " + std::to_string(samples.cols()) + " columns, model expects " +
                        std::to_string(ensemble.n_features));
    check_transform(options.transform, ensemble.n_dims);
    if (options.workers < 1) throw std::invalid_argument("workers must be >= 1");
    if (options.block_size < 1) throw std::invalid_argument("block size must be >= 1");

    const Eigen::Index n = samples.rows();
    const Eigen::Index n_blocks = (n + options.block_size - 1) / options.block_size;
    const BorderSchema schema(ensemble);
    ScoreMatrix acc = ScoreMatrix::Zero(n, ensemble.n_dims);

    profiling::Profiler* caller = options.profile ? profiling::active() : nullptr;
    const bool profiling_on = caller != nullptr && caller->enabled();
    const auto block_bounds = [&](Eigen::Index b) {
        const Eigen::Index start = b * options.block_size;
        return std::pair{start, std::min(options.block_size, n - start)};
    };

    {
        profiling::Binding bind(profiling_on ? caller : nullptr);
        OBTREE_PROFILE_SCOPE("ApplyModelMulti");
        const auto n_workers = static_cast<Eigen::Index>(std::min<Eigen::Index>(options.workers, n_blocks));
        if (n_workers <= 1) {
            std::vector<std::uint32_t> indexes;
            for (Eigen::Index b = 0; b < n_blocks; ++b) {
                const auto [start, count] = block_bounds(b);
                predict_block(ensemble, schema, samples, start, count, options.backend, acc, indexes);
            }
        } else {
            std::atomic<Eigen::Index> next{0};
            std::vector<std::unique_ptr<profiling::Profiler>> local(static_cast<std::size_t>(n_workers));
            std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_workers));
            std::vector<std::thread> threads;
            for (Eigen::Index w = 0; w < n_workers; ++w) {
                local[static_cast<std::size_t>(w)] = std::make_unique<profiling::Profiler>(profiling_on);
                threads.emplace_back([&, w] {
                    try {
                        profiling::Binding worker_bind(profiling_on ? local[static_cast<std::size_t>(w)].get() : nullptr);
                        std::vector<std::uint32_t> indexes;
                        for (Eigen::Index b = next++; b < n_blocks; b = next++) {
                            const auto [start, count] = block_bounds(b);
                            predict_block(ensemble, schema, samples, start, count, options.backend, acc, indexes);
                        }
                    } catch (...) {
                        errors[static_cast<std::size_t>(w)] = std::current_exception();
                    }
                });
            }
            for (auto& t : threads) t.join();
            for (auto& e : errors)
                if (e) std::rethrow_exception(e);
            if (profiling_on)
                for (const auto& p : local) caller->merge(*p);
        }
    }

    PredictionMatrix out;
    out.raw.resize(n, ensemble.n_dims);
    for (Eigen::Index s = 0; s < n; ++s)
        for (Eigen::Index c = 0; c < ensemble.n_dims; ++c) out.raw(s, c) = acc(s, c) * ensemble.scale + ensemble.bias(c);

    if (options.transform == OutputTransform::Sigmoid) {
        out.probability = (1.0 / (1.0 + (-out.raw.col(0).array()).exp())).matrix();
    } else if (options.transform == OutputTransform::SoftmaxArgmax) {
        Eigen::VectorXi labels(n);
        for (Eigen::Index s = 0; s < n; ++s)
            labels(s) = argmax({out.raw.row(s).data(), static_cast<std::size_t>(ensemble.n_dims)});
        out.label = std::move(labels);
    }
    return out;
}

Vector<double> predict_oracle(const Ensemble& ensemble, std::span<const float> sample) {
    Vector<double> acc = Vector<double>::Zero(ensemble.n_dims);
    for (const ObliviousTree& tree : ensemble.trees) {
        std::uint32_t leaf = 0;
        for (int level = 0; level < tree.depth(); ++level) {
            const TreeSplit& split = tree.level_splits[level];
            const auto borders = ensemble.borders_of(split.feature_index);
            const float value = sample[static_cast<std::size_t>(split.feature_index)];
            // Borders strictly below the value; NaN compares false and stays in bin 0.
            const auto bin = std::lower_bound(borders.begin(), borders.end(), value) - borders.begin();
            const bool go_right = bin >= split.border_bin;
            leaf |= static_cast<std::uint32_t>(go_right) << level;
        }
        for (Eigen::Index c = 0; c < ensemble.n_dims; ++c) acc(c) += tree.leaf_values(leaf, c);
    }
    Vector<double> out(ensemble.n_dims);
    for (Eigen::Index c = 0; c < ensemble.n_dims; ++c) out(c) = acc(c) * ensemble.scale + ensemble.bias(c);
    return out;
}

}  // namespace obtree
