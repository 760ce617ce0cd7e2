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

#include "covest/cholesky.hpp"
#include "covest/schedule.hpp"
#include "covest/types.hpp"

namespace covest {

// Recursive variance estimator for one antenna row with exponential forgetting.
//
// Keeps the accumulated weighted normal matrix Xi as a Cholesky factor: every
// interval scales it by lambda and applies one rank-one update per pilot, with
// weights d_p = 1/(pi_p^T c + sigma^2)^2 taken from the previous estimate. The state
// starts at Xi = I, c = 1, psi = 0.
class AdaptiveEstimator {
public:
    AdaptiveEstimator(Index users, double lambda, bool weighted = true)
        : xi_(CholeskyFactor::identity(users)),
          psi_(Vector::Zero(users)),
          c_(Vector::Ones(users)),
          raw_(Vector::Ones(users)),
          lambda_(lambda),
          weighted_(weighted) {
        if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("AdaptiveEstimator: lambda must be in (0, 1]");
    }

    // b holds the Ttr squared observations of this antenna in the current interval.
    void update(const Allocation& alloc, const Vector& b, double sigma_v2) {
        const Index K = users();
        if (alloc.users() != K || b.size() != alloc.pilots()) throw shape_error("AdaptiveEstimator: shape mismatch");

        Vector d = Vector::Ones(alloc.pilots());
        if (weighted_) {
            Vector power = Vector::Constant(alloc.pilots(), sigma_v2);
            for (Index k = 0; k < K; ++k) power[alloc.pilot(k)] += c_[k];
            for (Index p = 0; p < d.size(); ++p) {
                if (!(power[p] > 0.0)) throw domain_error("AdaptiveEstimator: nonpositive slot power");
                d[p] = 1.0 / (power[p] * power[p]);
            }
        }

        psi_ *= lambda_;
        xi_.scale(lambda_);
        init_weight_ *= lambda_;
        Vector v(K);
        for (Index p = 0; p < alloc.pilots(); ++p) {
            v.setZero();
            bool any = false;
            for (Index k = 0; k < K; ++k) {
                if (alloc.pilot(k) == p) {
                    psi_[k] += d[p] * (b[p] - sigma_v2);
                    v[k] = std::sqrt(d[p]);
                    any = true;
                }
            }
            if (any) xi_.update(v);
        }

        raw_ = xi_.solve(psi_);
        c_ = raw_.cwiseMax(0.0);
        ++steps_;
    }

    Index users() const noexcept { return psi_.size(); }
    Index steps() const noexcept { return steps_; }
    double lambda() const noexcept { return lambda_; }

    // Clamped estimate used for the next weighting.
    const Vector& estimate() const noexcept { return c_; }
    // Xi^{-1} psi before clamping.
    const Vector& raw_estimate() const noexcept { return raw_; }

    const Vector& psi() const noexcept { return psi_; }
    Matrix xi() const { return xi_.matrix(); }
    const CholeskyFactor& xi_factor() const noexcept { return xi_; }

    // Remaining weight lambda^t of the identity initialization inside Xi.
    double initialization_weight() const noexcept { return init_weight_; }

    // (Xi - lambda^t I)^{-1} psi: the estimate with the identity start removed, obtained by
    // K rank-one downdates of a copy of the factor. Unclamped.
    Vector estimate_without_initialization() const {
        CholeskyFactor f = xi_;
        const double s = std::sqrt(init_weight_);
        Vector e = Vector::Zero(users());
        for (Index k = 0; k < users(); ++k) {
            e.setZero();
            e[k] = s;
            if (!f.downdate(e))
                throw singular_system("AdaptiveEstimator: accumulated matrix is singular without the initialization");
        }
        return f.solve(psi_);
    }

private:
    CholeskyFactor xi_;
    Vector psi_;
    Vector c_;
    Vector raw_;
    double lambda_;
    double init_weight_ = 1.0;
    bool weighted_;
    Index steps_ = 0;
};

using AdaptiveState = AdaptiveEstimator;

// Value-style step: returns the state after one interval, leaving the argument untouched.
inline AdaptiveState adaptive_update(AdaptiveState state, const Allocation& alloc, const Vector& b, double sigma_v2) {
    state.update(alloc, b, sigma_v2);
    return state;
}

}  // namespace covest
