#include "obtree/kernels.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>
#include <vector>

using namespace obtree;
namespace k = obtree::kernels;
using obtree::testing::l2_sqr_double;
using obtree::testing::linear_scan_bin;
using obtree::testing::relative_diff;

namespace {

std::vector<Backend> all_backends() {
    std::vector<Backend> out{Backend::scalar()};
    for (int w : kSupportedLanes) out.push_back(Backend::vectorized(w));
    return out;
}

std::vector<std::size_t> awkward_lengths(int w) {
    return {0, 1, static_cast<std::size_t>(w - 1), static_cast<std::size_t>(w), static_cast<std::size_t>(w + 1),
            static_cast<std::size_t>(2 * w + 3), 127, 128, 129, 1000};
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("backend parsing") {
    CHECK(Backend::parse("scalar") == Backend::scalar());
    CHECK(Backend::parse("vec:16") == Backend::vectorized(16));
    CHECK(Backend::parse("vec:16").to_string() == "vec:16");
    CHECK_THROWS_AS(Backend::parse("vec:3"), std::invalid_argument);
    CHECK_THROWS_AS(Backend::parse("vec:"), std::invalid_argument);
    CHECK_THROWS_AS(Backend::parse("simd"), std::invalid_argument);
    CHECK_THROWS_AS(Backend::vectorized(64), std::invalid_argument);
}

TEST_CASE("calc_indexes sets the level bit where bin >= threshold") {
    const std::vector<std::uint8_t> bins{3, 1, 2};
    for (Backend b : all_backends()) {
        CAPTURE(b.to_string());
        std::vector<std::uint32_t> acc(3, 0);
        k::calc_indexes(bins, 2, 0, acc, b);
        CHECK(acc == std::vector<std::uint32_t>{1, 0, 1});

        std::vector<std::uint32_t> all(3, 0);
        k::calc_indexes(bins, 0, 5, all, b);
        CHECK(all == std::vector<std::uint32_t>{32, 32, 32});
    }
}

TEST_CASE("calc_indexes only ever ORs bits in") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> byte(0, 255);
    for (Backend b : all_backends()) {
        std::vector<std::uint8_t> bins(77);
        for (auto& x : bins) x = static_cast<std::uint8_t>(byte(rng));
        std::vector<std::uint32_t> acc(bins.size());
        for (auto& x : acc) x = static_cast<std::uint32_t>(rng());
        const auto before = acc;
        k::calc_indexes(bins, static_cast<std::uint8_t>(byte(rng)), 9, acc, b);
        for (std::size_t s = 0; s < acc.size(); ++s) CHECK((acc[s] & before[s]) == before[s]);
    }
}

TEST_CASE("vectorized integer kernels match scalar at every tail length") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> byte(0, 255);
    std::normal_distribution<float> normal(0.0f, 2.0f);
    for (int w : kSupportedLanes) {
        const Backend vec = Backend::vectorized(w);
        for (std::size_t n : awkward_lengths(w)) {
            CAPTURE(w);
            CAPTURE(n);
            std::vector<std::uint8_t> bins(n);
            for (auto& x : bins) x = static_cast<std::uint8_t>(byte(rng));
            std::vector<std::uint32_t> seed_acc(n);
            for (auto& x : seed_acc) x = static_cast<std::uint32_t>(rng()) & 0xFFu;
            auto acc_s = seed_acc;
            auto acc_v = seed_acc;
            const auto thr = static_cast<std::uint8_t>(byte(rng));
            k::calc_indexes(bins, thr, 11, acc_s, Backend::scalar());
            k::calc_indexes(bins, thr, 11, acc_v, vec);
            CHECK(acc_s == acc_v);

            std::vector<float> borders(static_cast<std::size_t>(byte(rng)));
            for (auto& x : borders) x = normal(rng);
            std::sort(borders.begin(), borders.end());
            borders.erase(std::unique(borders.begin(), borders.end()), borders.end());
            std::vector<float> values(n);
            for (auto& x : values) x = normal(rng);
            if (n > 0 && !borders.empty()) values[0] = borders.back();
            std::vector<std::uint8_t> out_s(n), out_v(n);
            k::binarize(values, borders, out_s, Backend::scalar());
            k::binarize(values, borders, out_v, vec);
            CHECK(out_s == out_v);
        }
    }
}

TEST_CASE("binarize counts borders strictly below the value") {
    const std::vector<float> values{0.1f, 0.6f, 2.0f};
    const std::vector<float> borders{0.5f, 1.5f};
    std::vector<std::uint8_t> expected;
    for (float v : values) expected.push_back(static_cast<std::uint8_t>(linear_scan_bin(v, borders)));
    REQUIRE(expected == std::vector<std::uint8_t>{0, 1, 2});
    for (Backend b : all_backends()) {
        std::vector<std::uint8_t> out(3, 9);
        k::binarize(values, borders, out, b);
        CHECK(out == expected);
        k::binarize(values, {}, out, b);
        CHECK(out == std::vector<std::uint8_t>{0, 0, 0});
    }
}

TEST_CASE("binarize with 255 borders reaches the top bin") {
    std::vector<float> borders(255);
    for (int i = 0; i < 255; ++i) borders[static_cast<std::size_t>(i)] = static_cast<float>(i);
    const std::vector<float> values(40, 1000.0f);
    for (Backend b : all_backends()) {
        std::vector<std::uint8_t> out(values.size());
        k::binarize(values, borders, out, b);
        for (auto x : out) CHECK(x == 255);
    }
}

TEST_CASE("l2_sqr basic values") {
    const std::vector<float> a{1.0f, 2.0f};
    const std::vector<float> zero{0.0f, 0.0f};
    for (Backend b : all_backends()) {
        CHECK(k::l2_sqr(a, zero, b) == 5.0f);
        CHECK(k::l2_sqr(a, a, b) == 0.0f);
        CHECK(k::l2_sqr(std::span<const float>{}, std::span<const float>{}, b) == 0.0f);
    }
    CHECK_THROWS_AS(k::l2_sqr(a, std::vector<float>{1.0f}, Backend::scalar()), std::invalid_argument);
}

TEST_CASE("l2_sqr on 512-dim embeddings stays within tolerance") {
    std::mt19937_64 rng(512);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<float> a(512), b(512);
        for (auto& x : a) x = normal(rng);
        for (auto& x : b) x = normal(rng);
        const double oracle = l2_sqr_double(a, b);
        const float s = k::l2_sqr(a, b, Backend::scalar());
        CHECK(relative_diff(s, oracle) <= 1e-6);
        for (int w : kSupportedLanes) {
            const float v = k::l2_sqr(a, b, Backend::vectorized(w));
            CHECK(relative_diff(v, s) <= 1e-5);
            CHECK(relative_diff(v, oracle) <= 1e-6);
            CHECK(v >= 0.0f);
            CHECK(v == k::l2_sqr(b, a, Backend::vectorized(w)));
        }
        CHECK(s == k::l2_sqr(b, a, Backend::scalar()));
    }
}

TEST_CASE("size checks at the dispatch layer") {
    std::vector<std::uint8_t> bins(4);
    std::vector<std::uint32_t> acc(3);
    CHECK_THROWS_AS(k::calc_indexes(bins, 1, 0, acc, Backend::scalar()), std::invalid_argument);
    std::vector<std::uint32_t> ok(4);
    CHECK_THROWS_AS(k::calc_indexes(bins, 1, 32, ok, Backend::scalar()), std::invalid_argument);
    std::vector<float> values(4);
    std::vector<std::uint8_t> out(5);
    CHECK_THROWS_AS(k::binarize(values, {}, out, Backend::scalar()), std::invalid_argument);
}

}  // TEST_SUITE
