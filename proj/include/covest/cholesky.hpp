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

#include "covest/types.hpp"

namespace covest {

// Lower-triangular factor L of an SPD matrix A = L L^T, kept up to date under
// scaling and rank-one modifications instead of refactorizing.
class CholeskyFactor {
public:
    CholeskyFactor() = default;

    static CholeskyFactor identity(Index n) {
        CholeskyFactor f;
        f.L_ = Matrix::Identity(n, n);
        return f;
    }

    static CholeskyFactor of(const Matrix& A) {
        Eigen::LLT<Matrix> llt(A);
        if (llt.info() != Eigen::Success) throw singular_system("CholeskyFactor: matrix is not positive definite");
        CholeskyFactor f;
        f.L_ = llt.matrixL();
        return f;
    }

    Index size() const noexcept { return L_.rows(); }
    const Matrix& lower() const noexcept { return L_; }
    Matrix matrix() const { return L_ * L_.transpose(); }

    // A <- alpha * A, alpha > 0
    void scale(double alpha) { L_ *= std::sqrt(alpha); }

    // A <- A + v v^T
    void update(const Vector& v) { modify(v, 1.0); }

    // A <- A - v v^T. Returns false (factor untouched) if the result would not be positive definite.
    bool downdate(const Vector& v) {
        const Matrix saved = L_;
        if (!modify(v, -1.0)) {
            L_ = saved;
            return false;
        }
        return true;
    }

    Vector solve(const Vector& b) const {
        const auto L = L_.triangularView<Eigen::Lower>();
        return L.transpose().solve(L.solve(b));
    }

private:
    bool modify(Vector x, double sign) {
        const Index n = L_.rows();
        if (x.size() != n) throw shape_error("CholeskyFactor: vector size mismatch");
        for (Index k = 0; k < n; ++k) {
            if (x[k] == 0.0) continue;
            const double lkk = L_(k, k);
            const double r2 = lkk * lkk + sign * x[k] * x[k];
            if (!(r2 > 0.0)) return false;
            const double r = std::sqrt(r2);
            const double c = r / lkk;
            const double s = x[k] / lkk;
            L_(k, k) = r;
            if (k + 1 < n) {
                auto col = L_.col(k).tail(n - k - 1);
                auto rest = x.tail(n - k - 1);
                col = (col + sign * s * rest) / c;
                rest = c * rest - s * col;
            }
        }
        return true;
    }

    Matrix L_;
};

}  // namespace covest
