#include "obtree/kernels.hpp"

#include <cstring>
#include <stdexcept>
#include <utility>

#if defined(__clang__)
#define OBTREE_SCALAR_FN
#define OBTREE_SCALAR_LOOP _Pragma("clang loop vectorize(disable) interleave(disable)")
#elif defined(__GNUC__)
#define OBTREE_SCALAR_FN __attribute__((optimize("no-tree-vectorize")))
#define OBTREE_SCALAR_LOOP
#else
#define OBTREE_SCALAR_FN
#define OBTREE_SCALAR_LOOP
#endif

namespace obtree::kernels {

namespace {

// W lanes of T. Arithmetic and comparisons are lane-wise; comparisons
// yield a same-width signed mask with all bits set in true lanes.
template <typename T, int W>
struct LaneType {
    typedef T type __attribute__((vector_size(sizeof(T) * W)));
};

template <typename T, int W>
using Lanes = typename LaneType<T, W>::type;

template <typename V, typename T>
V load(const T* p) {
    V v;
    std::memcpy(&v, p, sizeof(V));
    return v;
}

// Zero-extends W consecutive bytes into W wider lanes. Written as a
// lane-by-lane construction so compilers emit a single widening load.
template <typename V, std::size_t... I>
V load_widened(const std::uint8_t* p, std::index_sequence<I...>) {
    return V{p[I]...};
}

template <typename V, typename T>
void store(T* p, const V& v) {
    std::memcpy(p, &v, sizeof(V));
}

}  // namespace

namespace scalar {

OBTREE_SCALAR_FN void calc_indexes(std::span<const std::uint8_t> bins, std::uint8_t threshold, unsigned level,
                                   std::span<std::uint32_t> acc) {
    const std::size_t n = bins.size();
    OBTREE_SCALAR_LOOP
    for (std::size_t s = 0; s < n; ++s) {
        acc[s] |= static_cast<std::uint32_t>(bins[s] >= threshold) << level;
    }
}

OBTREE_SCALAR_FN void binarize(std::span<const float> values, std::span<const float> borders,
                               std::span<std::uint8_t> out) {
    const std::size_t n = values.size();
    OBTREE_SCALAR_LOOP
    for (std::size_t s = 0; s < n; ++s) {
        std::uint8_t bin = 0;
        OBTREE_SCALAR_LOOP
        for (float border : borders) {
            bin += static_cast<std::uint8_t>(values[s] > border);
        }
        out[s] = bin;
    }
}

OBTREE_SCALAR_FN float l2_sqr(std::span<const float> a, std::span<const float> b) {
    float sum = 0.0f;
    OBTREE_SCALAR_LOOP
    for (std::size_t i = 0; i < a.size(); ++i) {
        const float d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

}  // namespace scalar

namespace vectorized {

template <int W>
void calc_indexes(std::span<const std::uint8_t> bins, std::uint8_t threshold, unsigned level,
                  std::span<std::uint32_t> acc) {
    using Wide = Lanes<std::int32_t, W>;
    using Index = Lanes<std::uint32_t, W>;

    // The shifted bit is the same for every sample, so build it once.
    const Index bit = Index{} + (std::uint32_t{1} << level);
    // Bins widen losslessly to int32, where bin >= t is bin > t - 1 and a
    // signed compare is available everywhere.
    const Wide below = Wide{} + (static_cast<std::int32_t>(threshold) - 1);

    const std::size_t n = bins.size();
    std::size_t s = 0;
    for (; s + W <= n; s += W) {
        const Wide wide = load_widened<Wide>(bins.data() + s, std::make_index_sequence<W>{});
        const Wide mask = wide > below;
        Index out = load<Index>(acc.data() + s);
        out |= reinterpret_cast<const Index&>(mask) & bit;
        store(acc.data() + s, out);
    }
    scalar::calc_indexes(bins.subspan(s), threshold, level, acc.subspan(s));
}

template <int W>
void binarize(std::span<const float> values, std::span<const float> borders, std::span<std::uint8_t> out) {
    using Values = Lanes<float, W>;
    using Counts = Lanes<std::int32_t, W>;

    const Counts ones = Counts{} + 1;
    const std::size_t n = values.size();
    std::size_t s = 0;
    for (; s + W <= n; s += W) {
        const Values v = load<Values>(values.data() + s);
        Counts bins{};
        for (float border : borders) {
            bins += ones & (v > border);
        }
        store(out.data() + s, __builtin_convertvector(bins, Lanes<std::uint8_t, W>));
    }
    scalar::binarize(values.subspan(s), borders, out.subspan(s));
}

template <int W>
float l2_sqr(std::span<const float> a, std::span<const float> b) {
    using Values = Lanes<float, W>;

    Values partial{};
    const std::size_t n = a.size();
    std::size_t i = 0;
    for (; i + W <= n; i += W) {
        const Values d = load<Values>(a.data() + i) - load<Values>(b.data() + i);
        partial += d * d;
    }
    for (; i < n; ++i) {
        const float d = a[i] - b[i];
        partial[0] += d * d;
    }
    float sum = 0.0f;
    for (int lane = 0; lane < W; ++lane) sum += partial[lane];
    return sum;
}

#define OBTREE_INSTANTIATE(W)                                                                                 \
    template void calc_indexes<W>(std::span<const std::uint8_t>, std::uint8_t, unsigned, std::span<std::uint32_t>); \
    template void binarize<W>(std::span<const float>, std::span<const float>, std::span<std::uint8_t>);         \
    template float l2_sqr<W>(std::span<const float>, std::span<const float>);

OBTREE_INSTANTIATE(4)
OBTREE_INSTANTIATE(8)
OBTREE_INSTANTIATE(16)
OBTREE_INSTANTIATE(32)
#undef OBTREE_INSTANTIATE

}  // namespace vectorized

namespace {

template <typename Fn>
decltype(auto) dispatch(Backend backend, Fn&& fn) {
    if (backend.is_scalar()) return fn.template operator()<0>();
    switch (backend.lanes()) {
        case 4: return fn.template operator()<4>();
        case 8: return fn.template operator()<8>();
        case 16: return fn.template operator()<16>();
        case 32: return fn.template operator()<32>();
    }
    throw std::invalid_argument("unsupported lane count " + std::to_string(backend.lanes()));
}

}  // namespace

void calc_indexes(std::span<const std::uint8_t> bins, std::uint8_t threshold, unsigned level,
                  std::span<std::uint32_t> acc, Backend backend) {
    if (acc.size() != bins.size()) throw std::invalid_argument("calc_indexes: accumulator length mismatch");
    if (level >= 32) throw std::invalid_argument("calc_indexes: level must be < 32");
    dispatch(backend, [&]<int W>() {
        if constexpr (W == 0) scalar::calc_indexes(bins, threshold, level, acc);
        else vectorized::calc_indexes<W>(bins, threshold, level, acc);
    });
}

void binarize(std::span<const float> values, std::span<const float> borders, std::span<std::uint8_t> out,
              Backend backend) {
    if (out.size() != values.size()) throw std::invalid_argument("binarize: output length mismatch");
    dispatch(backend, [&]<int W>() {
        if constexpr (W == 0) scalar::binarize(values, borders, out);
        else vectorized::binarize<W>(values, borders, out);
    });
}

float l2_sqr(std::span<const float> a, std::span<const float> b, Backend backend) {
    if (a.size() != b.size())
        throw std::invalid_argument("l2_sqr: length mismatch (" + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
    return dispatch(backend, [&]<int W>() -> float {
        if constexpr (W == 0) return scalar::l2_sqr(a, b);
        else return vectorized::l2_sqr<W>(a, b);
    });
}

}  // namespace obtree::kernels
