#pragma once

#include "obtree/backend.hpp"
#include "obtree/dense.hpp"

#include <span>
#include <vector>

namespace obtree {

struct EmbeddingCorpus {
    RowMatrix<float> vectors;  // one item per row
    std::vector<int> labels;   // class id per item
    int n_classes = 0;

    Eigen::Index n_items() const { return vectors.rows(); }
    Eigen::Index dim() const { return vectors.cols(); }
    std::span<const float> item(Eigen::Index i) const {
        return {vectors.row(i).data(), static_cast<std::size_t>(vectors.cols())};
    }
};

/// Throws std::invalid_argument on inconsistent sizes or labels outside
/// [0, n_classes).
void validate(const EmbeddingCorpus& corpus);

struct Neighbor {
    Eigen::Index item = 0;
    float distance = 0.0f;  // squared L2

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Squared Euclidean distance, timed as its own profiler scope.
float l2_sqr_distance(std::span<const float> a, std::span<const float> b, Backend backend);

/// Exact k nearest items by squared distance, ascending; equal distances
/// are ordered by item index. Throws std::invalid_argument if k exceeds
/// the corpus size or the query dimension differs.
std::vector<Neighbor> knn_search(std::span<const float> query, const EmbeddingCorpus& corpus, int k, Backend backend);

/// Feature vector of length n_classes + 1: the share of each class among
/// the k nearest items, then the mean squared distance to them.
Vector<double> embed_features(std::span<const float> query, const EmbeddingCorpus& corpus, int k, int n_classes,
                              Backend backend);

}  // namespace obtree
