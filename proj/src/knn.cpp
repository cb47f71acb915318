#include "obtree/knn.hpp"

#include "obtree/kernels.hpp"
#include "obtree/profiler.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace obtree {

void validate(const EmbeddingCorpus& corpus) {
    if (corpus.labels.size() != static_cast<std::size_t>(corpus.n_items()))
        throw std::invalid_argument("corpus has " + std::to_string(corpus.n_items()) + " vectors but " +
                                    std::to_string(corpus.labels.size()) + " labels");
    for (std::size_t i = 0; i < corpus.labels.size(); ++i) {
        if (corpus.labels[i] < 0 || corpus.labels[i] >= corpus.n_classes)
            throw std::invalid_argument("corpus item " + std::to_string(i) + " has label " +
                                        std::to_string(corpus.labels[i]) + " outside [0, " +
                                        std::to_string(corpus.n_classes) + ")");
    }
}

float l2_sqr_distance(std::span<const float> a, std::span<const float> b, Backend backend) {
    OBTREE_PROFILE_SCOPE("L2SqrDistance");
    return kernels::l2_sqr(a, b, backend);
}

std::vector<Neighbor> knn_search(std::span<const float> query, const EmbeddingCorpus& corpus, int k,
                                 Backend backend) {
    if (k < 0 || k > corpus.n_items())
        throw std::invalid_argument("k = " + std::to_string(k) + " exceeds corpus size " +
                                    std::to_string(corpus.n_items()));
    if (static_cast<Eigen::Index>(query.size()) != corpus.dim())
        throw std::invalid_argument("query dimension " + std::to_string(query.size()) + " != corpus dimension " +
                                    std::to_string(corpus.dim()));

    std::vector<Neighbor> all(static_cast<std::size_t>(corpus.n_items()));
    for (Eigen::Index i = 0; i < corpus.n_items(); ++i)
        all[static_cast<std::size_t>(i)] = {i, l2_sqr_distance(query, corpus.item(i), backend)};

    const auto closer = [](const Neighbor& a, const Neighbor& b) {
        return a.distance < b.distance || (a.distance == b.distance && a.item < b.item);
    };
    std::partial_sort(all.begin(), all.begin() + k, all.end(), closer);
    all.resize(static_cast<std::size_t>(k));
    return all;
}

Vector<double> embed_features(std::span<const float> query, const EmbeddingCorpus& corpus, int k, int n_classes,
                              Backend backend) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (n_classes < 1) throw std::invalid_argument("class count must be >= 1");
    OBTREE_PROFILE_SCOPE("embeddingProcessingCollection");

    const auto neighbors = knn_search(query, corpus, k, backend);
    std::vector<int> counts(static_cast<std::size_t>(n_classes), 0);
    double distance_sum = 0.0;
    for (const Neighbor& nb : neighbors) {
        const int label = corpus.labels[static_cast<std::size_t>(nb.item)];
        if (label < 0 || label >= n_classes)
            throw std::invalid_argument("neighbor label " + std::to_string(label) + " outside [0, " +
                                        std::to_string(n_classes) + ")");
        ++counts[static_cast<std::size_t>(label)];
        distance_sum += nb.distance;
    }

    Vector<double> features(n_classes + 1);
    for (int c = 0; c < n_classes; ++c) features(c) = static_cast<double>(counts[static_cast<std::size_t>(c)]) / k;
    features(n_classes) = distance_sum / k;
    return features;
}

}  // namespace obtree
