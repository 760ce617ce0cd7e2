// SPDX-License-Identifier: Apache-2.0
//
// covest: covariance estimation for massive MIMO uplink training
// Copyright (C) 2026 The covest authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "covest/types.hpp"

namespace covest {

// SplitMix64 finalizer, used to turn (seed, stream) pairs into well-mixed engine seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Named sub-streams of one experiment seed.
enum class Stream : std::uint64_t {
    covariance = 1,
    schedule = 2,
    training = 3,
    training_noise = 4,
    evaluation = 5,
    evaluation_noise = 6,
    user = 100,
};

// Explicitly passed random source. Owns its engine; copy to fork.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : engine_(mix64(seed)) {}

    static SeededRng derive(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
        return SeededRng(mix64(mix64(seed) ^ (static_cast<std::uint64_t>(stream) << 32) ^ index));
    }

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

    // Circularly-symmetric complex Gaussian with E|z|^2 = variance.
    cplx complex_normal(double variance) {
        const double s = std::sqrt(variance / 2.0);
        const double re = normal();
        const double im = normal();
        return {s * re, s * im};
    }

    // Uniform integer in [0, n).
    Index index(Index n) {
        return static_cast<Index>(
            std::uniform_int_distribution<std::uint64_t>(0, static_cast<std::uint64_t>(n) - 1)(engine_));
    }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace covest
