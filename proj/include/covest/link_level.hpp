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
#include <limits>
#include <vector>

#include "covest/channel.hpp"
#include "covest/schedule.hpp"
#include "covest/types.hpp"

namespace covest {

// Channel estimates of the served users, one column each.
struct ChannelEstimate {
    CMatrix H_hat;
};

struct ReceiveFilter {
    CMatrix W;
};

// With diagonal covariances the MMSE estimate C_h C_phi^{-1} phi acts per antenna.
inline CVector mmse_channel_estimate(const CVector& obs, const Vector& c_user, const Vector& c_slot) {
    if (obs.size() != c_user.size() || obs.size() != c_slot.size())
        throw shape_error("mmse_channel_estimate: length mismatch");
    CVector out(obs.size());
    for (Index m = 0; m < obs.size(); ++m) {
        if (!(c_slot[m] > 0.0))
            throw domain_error("mmse_channel_estimate: observation variance at antenna " + std::to_string(m) +
                               " is not positive");
        out[m] = (c_user[m] / c_slot[m]) * obs[m];
    }
    return out;
}

// General form for full covariance matrices.
inline CVector mmse_channel_estimate_dense(const CVector& obs, const CMatrix& C_user, const CMatrix& C_slot) {
    Eigen::LLT<CMatrix> llt(C_slot);
    if (llt.info() != Eigen::Success) throw domain_error("mmse_channel_estimate_dense: C_slot not positive definite");
    return C_user * llt.solve(obs);
}

// Orthonormal pilots: least squares is the correlator output itself.
inline CVector ls_channel_estimate(const CVector& obs) { return obs; }

enum class ChannelEstimator { mmse, ls };

// Estimates the channels of `served` users from one interval's observations. The slot
// variances are formed from `cov` (true or estimated) as sum of users on the pilot + sigma^2.
inline ChannelEstimate estimate_served_channels(const ObservationBlock& block, const Allocation& alloc,
                                                const std::vector<Index>& served, const Matrix& cov,
                                                double sigma_v2, ChannelEstimator kind) {
    const Index M = block.Phi.rows();
    ChannelEstimate out{CMatrix(M, static_cast<Index>(served.size()))};
    if (kind == ChannelEstimator::ls) {
        for (std::size_t j = 0; j < served.size(); ++j)
            out.H_hat.col(Index(j)) = ls_channel_estimate(block.Phi.col(alloc.pilot(served[j])));
        return out;
    }
    if (cov.rows() != M || cov.cols() != alloc.users()) throw shape_error("estimate_served_channels: cov shape");
    Matrix slot = Matrix::Constant(M, alloc.pilots(), sigma_v2);
    for (Index k = 0; k < alloc.users(); ++k) slot.col(alloc.pilot(k)) += cov.col(k);
    for (std::size_t j = 0; j < served.size(); ++j) {
        const Index k = served[j];
        const Index p = alloc.pilot(k);
        out.H_hat.col(Index(j)) = mmse_channel_estimate(block.Phi.col(p), cov.col(k), slot.col(p));
    }
    return out;
}

// W = (H H^H + K sigma^2 I)^{-1} H, evaluated as H (H^H H + K sigma^2 I)^{-1}. Without
// noise loading the pseudo-inverse of H H^H is used.
inline ReceiveFilter rzf_filter(const CMatrix& H_hat, double sigma_v2) {
    const Index K = H_hat.cols();
    if (sigma_v2 > 0.0) {
        CMatrix G = H_hat.adjoint() * H_hat;
        G.diagonal().array() += double(K) * sigma_v2;
        Eigen::LLT<CMatrix> llt(G);
        return {H_hat * llt.solve(CMatrix::Identity(K, K))};
    }
    const CMatrix gram = H_hat * H_hat.adjoint();
    Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(gram);
    return {cod.solve(H_hat)};
}

inline double pilot_overhead_factor(Index Ttr, double coherence_length) {
    if (!(coherence_length > 0.0)) return 1.0;
    return std::max(0.0, 1.0 - double(Ttr) / coherence_length);
}

// Sum over served users of log2(1 + SINR) for one realization, where
// SINR_j = |w_j^H h_j|^2 / (sum_{i != j} |w_j^H h_i|^2 + sigma^2 ||w_j||^2)
// with interference from every column of H_true. Scaled by `overhead`.
inline double uplink_sum_rate(const ReceiveFilter& filter, const CMatrix& H_true, const std::vector<Index>& served,
                              double sigma_v2, double overhead = 1.0) {
    if (filter.W.cols() != static_cast<Index>(served.size()) || filter.W.rows() != H_true.rows())
        throw shape_error("uplink_sum_rate: filter shape mismatch");
    const CMatrix G = filter.W.adjoint() * H_true;  // served x K
    double rate = 0.0;
    for (std::size_t j = 0; j < served.size(); ++j) {
        const Index row = Index(j);
        const double signal = std::norm(G(row, served[j]));
        if (signal == 0.0) continue;
        double interference = 0.0;
        for (Index i = 0; i < G.cols(); ++i)
            if (i != served[j]) interference += std::norm(G(row, i));
        const double denom = interference + sigma_v2 * filter.W.col(row).squaredNorm();
        if (denom <= 0.0) return std::numeric_limits<double>::infinity();
        rate += std::log2(1.0 + signal / denom);
    }
    return overhead * rate;
}

// E||h_hat - h||^2 contribution of one realization, per served user.
inline Vector squared_errors(const ChannelEstimate& est, const CMatrix& H_true, const std::vector<Index>& served) {
    Vector e(static_cast<Index>(served.size()));
    for (std::size_t j = 0; j < served.size(); ++j)
        e[Index(j)] = (est.H_hat.col(Index(j)) - H_true.col(served[j])).squaredNorm();
    return e;
}

}  // namespace covest
