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

// Independent reference computations used only by the tests. Nothing here calls the
// library routine it is meant to check.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <algorithm>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "covest.hpp"

namespace oracle {

using covest::Index;
using covest::Matrix;
using covest::Vector;

// Rank of an integer matrix over GF(p) by modular elimination. rank_p <= rank over
// the rationals, with equality unless p divides the relevant minors; taking the
// larger of two large primes makes a mismatch practically impossible.
inline Index modular_rank(const Matrix& A, std::int64_t prime) {
    const Index rows = A.rows(), cols = A.cols();
    std::vector<std::vector<std::int64_t>> a(rows, std::vector<std::int64_t>(cols));
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) a[i][j] = ((std::llround(A(i, j)) % prime) + prime) % prime;
    auto power = [prime](std::int64_t b, std::int64_t e) {
        std::int64_t r = 1;
        for (b %= prime; e > 0; e >>= 1, b = b * b % prime)
            if (e & 1) r = r * b % prime;
        return r;
    };
    Index rank = 0;
    for (Index col = 0; col < cols && rank < rows; ++col) {
        Index pivot = -1;
        for (Index i = rank; i < rows; ++i)
            if (a[i][col] != 0) {
                pivot = i;
                break;
            }
        if (pivot < 0) continue;
        std::swap(a[pivot], a[rank]);
        const std::int64_t inv = power(a[rank][col], prime - 2);
        for (Index i = rank + 1; i < rows; ++i) {
            const std::int64_t f = a[i][col] * inv % prime;
            if (f == 0) continue;
            for (Index j = col; j < cols; ++j) a[i][j] = ((a[i][j] - f * a[rank][j]) % prime + prime) % prime;
        }
        ++rank;
    }
    return rank;
}

inline Index integer_rank(const Matrix& A) {
    return std::max(modular_rank(A, 2147483647), modular_rank(A, 1000000007));
}

// Slot covariances c_obs = C * Pi + sigma^2 by explicit summation over users.
inline Matrix forward_slot_covariances(const Matrix& C, const covest::Schedule& s, double sigma_v2) {
    Matrix out = Matrix::Constant(C.rows(), s.slots(), sigma_v2);
    for (Index n = 0; n < s.length(); ++n)
        for (Index k = 0; k < s.users(); ++k) out.col(n * s.pilots() + s[n].pilot(k)) += C.col(k);
    return out;
}

// Negative log-likelihood evaluated slot by slot without matrix products.
inline double llf_by_slots(const Vector& c, const Vector& b, const Matrix& Pi, double sigma_v2) {
    long double sum = 0;
    for (Index i = 0; i < Pi.cols(); ++i) {
        long double p = sigma_v2;
        for (Index k = 0; k < Pi.rows(); ++k)
            if (Pi(k, i) != 0.0) p += Pi(k, i) * c[k];
        sum += b[i] / p + std::log(p);
    }
    return double(sum);
}

// Central differences with step h_k = rel_step * max(1, |c_k|).
inline Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& c,
                                 double rel_step = 1e-6) {
    Vector g(c.size());
    for (Index k = 0; k < c.size(); ++k) {
        const double h = rel_step * std::max(1.0, std::abs(c[k]));
        Vector up = c, dn = c;
        up[k] += h;
        dn[k] -= h;
        g[k] = (f(up) - f(dn)) / (2.0 * h);
    }
    return g;
}

// Random nonnegative M x K matrix with entries in [0, scale).
inline Matrix random_nonnegative(Index M, Index K, covest::SeededRng& rng, double scale = 1.0) {
    Matrix C(M, K);
    for (Index k = 0; k < K; ++k)
        for (Index m = 0; m < M; ++m) C(m, k) = scale * rng.uniform();
    return C;
}

// A one-hot random allocation with no cell constraint.
inline covest::Allocation random_allocation(Index K, Index Ttr, covest::SeededRng& rng) {
    std::vector<Index> p(static_cast<std::size_t>(K));
    for (auto& x : p) x = rng.index(Ttr);
    return {p, Ttr};
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace oracle
