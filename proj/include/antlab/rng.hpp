// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "antlab/tensor.hpp"

namespace antlab {

using Rng = std::mt19937_64;

/// Seed of the named sub-stream `name` under `master`. Streams with different
/// names are independent; the mapping is stable across runs and platforms.
std::uint64_t derive_seed(std::uint64_t master, std::string_view name);
std::uint64_t derive_seed(std::uint64_t master, std::string_view name, std::uint64_t index);

inline Rng make_rng(std::uint64_t master, std::string_view name) { return Rng(derive_seed(master, name)); }

/// Standard normal draw built on the generator's raw output (Box-Muller), so
/// results do not depend on the standard library's distribution code.
double normal(Rng& rng);
/// Uniform in [0, 1).
double uniform(Rng& rng);
/// Uniform integer in [lo, hi].
std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi);

Tensor randn(const Shape& shape, Rng& rng, double stddev = 1.0);

}  // namespace antlab
