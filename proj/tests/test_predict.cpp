#include "obtree/errors.hpp"
#include "obtree/predict.hpp"
#include "obtree/profiler.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <bit>
#include <random>

using namespace obtree;
using obtree::testing::leaf_from_outcomes;
using obtree::testing::random_ensemble;
using obtree::testing::random_samples;

namespace {

bool bit_equal(const ScoreMatrix& a, const ScoreMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (std::bit_cast<std::uint64_t>(a.data()[i]) != std::bit_cast<std::uint64_t>(b.data()[i])) return false;
    return true;
}

bool bit_equal(const Vector<double>& a, const double* b) {
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (std::bit_cast<std::uint64_t>(a(i)) != std::bit_cast<std::uint64_t>(b[i])) return false;
    return true;
}

// Three features, one border at 0 each; level i splits on feature i.
Ensemble three_level_model() {
    Ensemble e;
    e.n_features = 3;
    e.n_dims = 1;
    e.bias = Vector<double>::Zero(1);
    for (int f = 0; f < 3; ++f) e.borders.push_back({f, {0.0f}});
    ObliviousTree t;
    for (int f = 0; f < 3; ++f) t.level_splits.push_back({f, 1});
    t.leaf_values.resize(8, 1);
    for (int i = 0; i < 8; ++i) t.leaf_values(i, 0) = i;
    e.trees.push_back(t);
    validate(e);
    return e;
}

Ensemble minimal_model(double scale, double bias) {
    Ensemble e;
    e.n_features = 1;
    e.n_dims = 1;
    e.scale = scale;
    e.bias = Vector<double>::Constant(1, bias);
    e.borders.push_back({0, {0.0f}});
    ObliviousTree t;
    t.level_splits.push_back({0, 1});
    t.leaf_values.resize(2, 1);
    t.leaf_values << -1.0, 1.0;
    e.trees.push_back(t);
    validate(e);
    return e;
}

QuantizedBlock quantize(const Ensemble& e, const RowMatrix<float>& x) {
    return binarize_block(x, BorderSchema(e), Backend::scalar());
}

}  // namespace

TEST_SUITE("predict") {

TEST_CASE("leaf index is the positional sum of split outcomes") {
    const Ensemble e = three_level_model();
    RowMatrix<float> x(3, 3);
    x << 1.0f, -1.0f, 1.0f,   // outcomes (1, 0, 1)
        -1.0f, -1.0f, -1.0f,  // all fail
        1.0f, 1.0f, 1.0f;     // all succeed
    const int outcomes[] = {1, 0, 1};
    REQUIRE(leaf_from_outcomes(outcomes) == 5);
    for (Backend b : {Backend::scalar(), Backend::vectorized(4)}) {
        const auto idx = calc_leaf_indexes(quantize(e, x), e.trees[0], b);
        CHECK(idx == std::vector<std::uint32_t>{5, 0, 7});
    }
}

TEST_CASE("value equal to a border routes left") {
    const Ensemble e = three_level_model();
    RowMatrix<float> x(1, 3);
    x << 0.0f, 0.0f, 1.0f;
    CHECK(calc_leaf_indexes(quantize(e, x), e.trees[0], Backend::scalar()) == std::vector<std::uint32_t>{4});
    CHECK(predict_oracle(e, {x.data(), 3})(0) == 4.0);
}

TEST_CASE("leaf indexes agree with level-by-level traversal") {
    // Leaf i holds the value i, so the traversal oracle reports the leaf it reached.
    std::mt19937_64 rng(200);
    int pairs = 0;
    while (pairs < 200) {
        Ensemble e = random_ensemble(rng, {.max_depth = 8, .max_trees = 1, .max_features = 12, .max_borders = 16}, 1);
        e.scale = 1.0;
        e.bias.setZero();
        auto& tree = e.trees[0];
        for (Eigen::Index i = 0; i < tree.leaf_values.rows(); ++i) tree.leaf_values(i, 0) = static_cast<double>(i);
        const RowMatrix<float> x = random_samples(rng, e, 10);
        const auto idx = calc_leaf_indexes(quantize(e, x), tree, Backend::vectorized(8));
        for (Eigen::Index s = 0; s < x.rows(); ++s, ++pairs) {
            CHECK(idx[static_cast<std::size_t>(s)] < tree.leaf_count());
            CHECK(static_cast<double>(idx[static_cast<std::size_t>(s)]) ==
                  predict_oracle(e, {x.row(s).data(), static_cast<std::size_t>(e.n_features)})(0));
        }
    }
}

TEST_CASE("accumulate_leaf_values") {
    SUBCASE("zero leaves leave the accumulator alone") {
        ObliviousTree t;
        t.level_splits.push_back({0, 0});
        t.leaf_values = ScoreMatrix::Zero(2, 2);
        ScoreMatrix acc(2, 2);
        acc << 1, 2, 3, 4;
        const ScoreMatrix before = acc;
        const std::vector<std::uint32_t> idx{0, 1};
        accumulate_leaf_values(idx, t, acc);
        CHECK(acc == before);
    }
    SUBCASE("direct lookup") {
        ObliviousTree t;
        t.level_splits.push_back({0, 1});
        t.leaf_values.resize(2, 1);
        t.leaf_values << -1.0, 1.0;
        ScoreMatrix acc = ScoreMatrix::Zero(2, 1);
        const std::vector<std::uint32_t> idx{0, 1};
        accumulate_leaf_values(idx, t, acc);
        CHECK(acc(0, 0) == -1.0);
        CHECK(acc(1, 0) == 1.0);
    }
    SUBCASE("five trees sum to the per-tree lookups") {
        std::mt19937_64 rng(5);
        for (int dims : {1, 3}) {
            const Ensemble e = gen_synthetic_model({.seed = 21, .n_features = 6, .n_trees = 5, .depth = 4, .n_dims = dims});
            const RowMatrix<float> x = random_samples(rng, e, 37);
            const QuantizedBlock q = quantize(e, x);
            ScoreMatrix acc = ScoreMatrix::Zero(37, dims);
            ScoreMatrix expected = ScoreMatrix::Zero(37, dims);
            for (const auto& tree : e.trees) {
                const auto idx = calc_leaf_indexes(q, tree, Backend::scalar());
                accumulate_leaf_values(idx, tree, acc);
                for (Eigen::Index s = 0; s < 37; ++s)
                    for (int c = 0; c < dims; ++c) expected(s, c) += tree.leaf_values(idx[static_cast<std::size_t>(s)], c);
            }
            CHECK(bit_equal(acc, expected));
        }
    }
    SUBCASE("shape mismatch") {
        ObliviousTree t;
        t.level_splits.push_back({0, 0});
        t.leaf_values = ScoreMatrix::Zero(2, 1);
        ScoreMatrix acc = ScoreMatrix::Zero(3, 1);
        CHECK_THROWS_AS(accumulate_leaf_values(std::vector<std::uint32_t>{0, 1}, t, acc), std::invalid_argument);
    }
}

TEST_CASE("predict_batch small cases") {
    SUBCASE("empty input") {
        const Ensemble e = minimal_model(1.0, 0.0);
        const PredictionMatrix p = predict_batch(e, RowMatrix<float>(0, 1));
        CHECK(p.n_samples() == 0);
        CHECK(p.n_dims() == 1);
    }
    SUBCASE("single sample routed right") {
        const Ensemble e = minimal_model(2.0, 0.5);
        RowMatrix<float> x(1, 1);
        x << 0.25f;
        const PredictionMatrix p = predict_batch(e, x);
        CHECK(p.raw(0, 0) == 2.0 * 1.0 + 0.5);
        x << 0.0f;
        CHECK(predict_batch(e, x).raw(0, 0) == 2.0 * -1.0 + 0.5);
    }
    SUBCASE("column mismatch") {
        const Ensemble e = minimal_model(1.0, 0.0);
        CHECK_THROWS_AS(predict_batch(e, RowMatrix<float>::Zero(2, 3)), DataError);
    }
    SUBCASE("transform must fit n_dims") {
        const Ensemble e = minimal_model(1.0, 0.0);
        RowMatrix<float> x = RowMatrix<float>::Zero(1, 1);
        CHECK_THROWS_AS(predict_batch(e, x, {.transform = OutputTransform::SoftmaxArgmax}), std::invalid_argument);
        const Ensemble multi = gen_synthetic_model({.n_features = 2, .n_trees = 2, .depth = 2, .n_dims = 3});
        CHECK_THROWS_AS(predict_batch(multi, RowMatrix<float>::Zero(1, 2), {.transform = OutputTransform::Sigmoid}),
                        std::invalid_argument);
    }
}

TEST_CASE("output transforms") {
    std::mt19937_64 rng(8);
    SUBCASE("sigmoid") {
        const Ensemble e = gen_synthetic_model({.seed = 1, .n_features = 5, .n_trees = 30, .depth = 3});
        const auto x = random_samples(rng, e, 50);
        const auto p = predict_batch(e, x, {.transform = OutputTransform::Sigmoid});
        REQUIRE(p.probability);
        for (Eigen::Index s = 0; s < 50; ++s) CHECK((*p.probability)(s) == doctest::Approx(1.0 / (1.0 + std::exp(-p.raw(s, 0)))));
    }
    SUBCASE("softmax argmax picks the largest raw score") {
        const Ensemble e = gen_synthetic_model({.seed = 2, .n_features = 5, .n_trees = 30, .depth = 3, .n_dims = 7});
        const auto x = random_samples(rng, e, 50);
        const auto p = predict_batch(e, x, {.transform = OutputTransform::SoftmaxArgmax});
        REQUIRE(p.label);
        for (Eigen::Index s = 0; s < 50; ++s) {
            Eigen::Index best;
            p.raw.row(s).maxCoeff(&best);
            CHECK((*p.label)(s) == best);
        }
    }
    CHECK(argmax(std::vector<double>{1.0, 3.0, 3.0}) == 1);
    CHECK(parse_transform("softmax-argmax") == OutputTransform::SoftmaxArgmax);
    CHECK_THROWS_AS(parse_transform("softmax"), std::invalid_argument);
}

TEST_CASE("desk-scale model: backends agree bitwise and match the oracle exactly") {
    const Ensemble e = gen_synthetic_model({.seed = 7, .n_features = 90, .n_trees = 1000, .depth = 6});
    std::mt19937_64 rng(1000);
    const auto x = random_samples(rng, e, 1000);
    const auto scalar = predict_batch(e, x, {.backend = Backend::scalar()});
    const auto vec = predict_batch(e, x, {.backend = Backend::vectorized(8)});
    CHECK(bit_equal(scalar.raw, vec.raw));
    int mismatches = 0;
    for (Eigen::Index s = 0; s < x.rows(); ++s)
        mismatches += !bit_equal(predict_oracle(e, {x.row(s).data(), 90}), scalar.raw.row(s).data());
    CHECK(mismatches == 0);
}

TEST_CASE("block size and worker count do not change a single bit") {
    std::mt19937_64 rng(4);
    const Ensemble e = random_ensemble(rng, {}, 7);
    const auto x = random_samples(rng, e, 531, true);
    const auto reference = predict_batch(e, x);
    for (int workers : {1, 2, 4})
        for (Eigen::Index block : {1, 7, 128, 1000}) {
            CAPTURE(workers);
            CAPTURE(block);
            const auto p = predict_batch(e, x, {.backend = Backend::vectorized(16), .workers = workers, .block_size = block});
            CHECK(bit_equal(p.raw, reference.raw));
        }
}

TEST_CASE("tree order does not matter for integer-valued leaves") {
    std::mt19937_64 rng(12);
    Ensemble e = gen_synthetic_model({.seed = 12, .n_features = 8, .n_trees = 40, .depth = 5, .n_dims = 2});
    std::uniform_int_distribution<int> small(-50, 50);
    for (auto& t : e.trees)
        for (Eigen::Index i = 0; i < t.leaf_values.size(); ++i) t.leaf_values.data()[i] = small(rng);
    const auto x = random_samples(rng, e, 100);
    const auto before = predict_batch(e, x);
    std::shuffle(e.trees.begin(), e.trees.end(), rng);
    CHECK(bit_equal(predict_batch(e, x).raw, before.raw));
}

TEST_CASE("profiling on or off gives identical predictions") {
    std::mt19937_64 rng(3);
    const Ensemble e = random_ensemble(rng, {}, 1);
    const auto x = random_samples(rng, e, 300);
    const auto plain = predict_batch(e, x);
    profiling::Profiler profiler;
    profiling::Binding bind(&profiler);
    const auto profiled = predict_batch(e, x, {.profile = true});
    CHECK(bit_equal(plain.raw, profiled.raw));
    CHECK_FALSE(profiler.report().empty());
}

}  // TEST_SUITE
