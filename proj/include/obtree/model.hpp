#pragma once

#include "obtree/dense.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace obtree {

inline constexpr int kMaxDepth = 16;
inline constexpr int kMaxBorders = 255;

struct FloatFeatureBorders {
    int feature_index = 0;
    std::vector<float> borders;  // strictly ascending, no NaN
};

struct TreeSplit {
    int feature_index = 0;
    std::uint8_t border_bin = 0;  // split is true iff bin >= border_bin
};

/// A tree in which every node of a level tests the same split. Leaf `i`
/// is reached by the sample whose level-k split outcome is bit k of `i`.
struct ObliviousTree {
    std::vector<TreeSplit> level_splits;  // one per level, root first
    ScoreMatrix leaf_values;              // (1 << depth) x n_dims

    int depth() const { return static_cast<int>(level_splits.size()); }
    std::size_t leaf_count() const { return std::size_t{1} << level_splits.size(); }
};

struct Ensemble {
    int n_features = 0;
    int n_dims = 1;
    std::vector<FloatFeatureBorders> borders;
    std::vector<ObliviousTree> trees;
    double scale = 1.0;
    Vector<double> bias;  // n_dims entries

    /// Borders of `feature`, empty if the feature has no border entry.
    std::span<const float> borders_of(int feature) const;
};

/// Dense per-feature border lookup built once from an ensemble.
class BorderSchema {
public:
    explicit BorderSchema(const Ensemble& ensemble);
    explicit BorderSchema(std::vector<std::vector<float>> per_feature);

    int n_features() const { return static_cast<int>(per_feature_.size()); }
    std::span<const float> operator[](int feature) const { return per_feature_[feature]; }

private:
    std::vector<std::vector<float>> per_feature_;
};

/// Throws ModelError naming the offending tree or feature.
void validate(const Ensemble& ensemble);

/// Field-by-field comparison; leaf values and borders compared bit-exactly.
bool structurally_equal(const Ensemble& a, const Ensemble& b);

Ensemble load_model(const std::filesystem::path& path);
void save_model(const Ensemble& ensemble, const std::filesystem::path& path);

Ensemble model_from_json(const std::string& text);
std::string model_to_json(const Ensemble& ensemble);

struct SyntheticModelParams {
    std::uint64_t seed = 7;
    int n_features = 90;
    int n_trees = 1000;
    int depth = 6;
    int n_dims = 1;
    int borders_per_feature = 32;
};

/// Deterministic for a fixed parameter set. Throws std::invalid_argument on
/// out-of-range parameters.
Ensemble gen_synthetic_model(const SyntheticModelParams& params);

}  // namespace obtree
