#include "obtree/kernels.hpp"
#include "obtree/knn.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace obtree;
using obtree::testing::sort_all;

namespace {

EmbeddingCorpus make_corpus(std::initializer_list<std::initializer_list<float>> rows, std::vector<int> labels,
                            int classes) {
    EmbeddingCorpus c;
    c.vectors.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index r = 0;
    for (const auto& row : rows) {
        Eigen::Index col = 0;
        for (float v : row) c.vectors(r, col++) = v;
        ++r;
    }
    c.labels = std::move(labels);
    c.n_classes = classes;
    validate(c);
    return c;
}

}  // namespace

TEST_SUITE("knn") {

TEST_CASE("l2_sqr_distance facade") {
    const std::vector<float> a{1.0f, 2.0f}, z{0.0f, 0.0f};
    for (Backend b : {Backend::scalar(), Backend::vectorized(4)}) {
        CHECK(l2_sqr_distance(a, z, b) == 5.0f);
        CHECK(l2_sqr_distance(a, a, b) == 0.0f);
    }
}

TEST_CASE("two nearest on a line") {
    const auto corpus = make_corpus({{0, 0}, {1, 0}, {3, 0}}, {0, 1, 0}, 2);
    const std::vector<float> q{0.9f, 0.0f};
    for (Backend b : {Backend::scalar(), Backend::vectorized(8)}) {
        const auto nn = knn_search(q, corpus, 2, b);
        REQUIRE(nn.size() == 2);
        CHECK(nn[0].item == 1);
        CHECK(nn[1].item == 0);
        CHECK(nn[0].distance == doctest::Approx(0.01).epsilon(1e-5));
        CHECK(nn[1].distance == doctest::Approx(0.81).epsilon(1e-5));
    }
}

TEST_CASE("query equal to an item finds it first at distance zero") {
    const auto corpus = make_corpus({{5, 5, 5}, {1, 2, 3}, {0, 0, 0}}, {0, 1, 2}, 3);
    const std::vector<float> q{1, 2, 3};
    const auto nn = knn_search(q, corpus, 1, Backend::scalar());
    CHECK(nn[0].item == 1);
    CHECK(nn[0].distance == 0.0f);
    const auto f = embed_features(q, corpus, 1, 3, Backend::scalar());
    CHECK(f(3) == 0.0);
    CHECK(f(1) == 1.0);
}

TEST_CASE("ties resolve to the lower item index") {
    const auto corpus = make_corpus({{1, 0}, {0, 1}, {1, 0}, {-1, 0}}, {0, 0, 0, 0}, 1);
    const std::vector<float> q{0, 0};
    const auto nn = knn_search(q, corpus, 4, Backend::vectorized(4));
    CHECK(nn[0].item == 0);
    CHECK(nn[1].item == 1);
    CHECK(nn[2].item == 2);
    CHECK(nn[3].item == 3);
}

TEST_CASE("random corpus matches the sort-everything oracle") {
    std::mt19937_64 rng(16);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    EmbeddingCorpus corpus;
    corpus.vectors.resize(200, 16);
    for (Eigen::Index i = 0; i < corpus.vectors.size(); ++i) corpus.vectors.data()[i] = normal(rng);
    corpus.labels.assign(200, 0);
    corpus.n_classes = 1;
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<float> q(16);
        for (auto& v : q) v = normal(rng);
        for (Backend b : {Backend::scalar(), Backend::vectorized(16)}) {
            std::vector<float> d;
            for (Eigen::Index i = 0; i < 200; ++i) d.push_back(kernels::l2_sqr(q, corpus.item(i), b));
            const auto sorted = sort_all(d);
            const auto nn = knn_search(q, corpus, 5, b);
            for (int j = 0; j < 5; ++j) {
                CHECK(nn[static_cast<std::size_t>(j)].item == sorted[static_cast<std::size_t>(j)].first);
                CHECK(nn[static_cast<std::size_t>(j)].distance == sorted[static_cast<std::size_t>(j)].second);
            }
        }
    }
}

TEST_CASE("embed_features") {
    SUBCASE("class shares and mean distance") {
        // Distances from the origin: 1, 3, 100.
        const auto corpus = make_corpus({{1, 0, 0}, {1, 1, 1}, {10, 0, 0}}, {0, 1, 0}, 2);
        const std::vector<float> q{0, 0, 0};
        const auto f = embed_features(q, corpus, 2, 2, Backend::scalar());
        REQUIRE(f.size() == 3);
        CHECK(f(0) == 0.5);
        CHECK(f(1) == 0.5);
        CHECK(f(2) == 2.0);
    }
    SUBCASE("all neighbours share a class") {
        const auto corpus = make_corpus({{0, 0}, {0, 1}, {9, 9}}, {2, 2, 0}, 3);
        const std::vector<float> q{0, 0.5f};
        const auto f = embed_features(q, corpus, 2, 3, Backend::vectorized(4));
        CHECK(f(0) == 0.0);
        CHECK(f(1) == 0.0);
        CHECK(f(2) == 1.0);
        CHECK(f(3) == doctest::Approx(0.25));
    }
}

TEST_CASE("argument errors") {
    const auto corpus = make_corpus({{0, 0}, {1, 1}}, {0, 1}, 2);
    const std::vector<float> q{0, 0};
    CHECK_THROWS_AS(knn_search(q, corpus, 3, Backend::scalar()), std::invalid_argument);
    const std::vector<float> q3{0, 0, 0};
    CHECK_THROWS_AS(knn_search(q3, corpus, 1, Backend::scalar()), std::invalid_argument);
    EmbeddingCorpus bad = corpus;
    bad.labels[1] = 2;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

}  // TEST_SUITE
