#pragma once

#include "obtree/backend.hpp"

#include <cstdint>
#include <span>

// Hot kernels of the prediction path, each in two flavours:
//
//   scalar::      one sample per iteration, compiled with auto-vectorization
//                 disabled so it stays a faithful scalar baseline.
//   vectorized::  chunks of W samples; every step is a lane-wise operation
//                 under a comparison mask, with n % W leftovers handled by
//                 the scalar path.
//
// The integer kernels are bit-exact across backends. l2_sqr may differ by
// float reassociation only.
namespace obtree::kernels {

namespace scalar {

/// acc[s] |= (bins[s] >= threshold) << level
void calc_indexes(std::span<const std::uint8_t> bins, std::uint8_t threshold, unsigned level,
                  std::span<std::uint32_t> acc);

/// out[s] = number of borders strictly below values[s]
void binarize(std::span<const float> values, std::span<const float> borders, std::span<std::uint8_t> out);

/// Sequential left-to-right sum of squared differences in float.
float l2_sqr(std::span<const float> a, std::span<const float> b);

}  // namespace scalar

namespace vectorized {

template <int W>
void calc_indexes(std::span<const std::uint8_t> bins, std::uint8_t threshold, unsigned level,
                  std::span<std::uint32_t> acc);

template <int W>
void binarize(std::span<const float> values, std::span<const float> borders, std::span<std::uint8_t> out);

template <int W>
float l2_sqr(std::span<const float> a, std::span<const float> b);

}  // namespace vectorized

// Backend dispatch. Sizes are checked here; the namespaced variants assume
// them.

/// Requires acc.size() == bins.size() and level < 32.
void calc_indexes(std::span<const std::uint8_t> bins, std::uint8_t threshold, unsigned level,
                  std::span<std::uint32_t> acc, Backend backend);

/// Requires out.size() == values.size().
void binarize(std::span<const float> values, std::span<const float> borders, std::span<std::uint8_t> out,
              Backend backend);

/// Throws std::invalid_argument on length mismatch.
float l2_sqr(std::span<const float> a, std::span<const float> b, Backend backend);

}  // namespace obtree::kernels
