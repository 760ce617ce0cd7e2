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

#include <vector>

#include "covest/rng.hpp"
#include "covest/scenario.hpp"
#include "covest/schedule.hpp"
#include "covest/types.hpp"

namespace covest {

// Block-fading channels of all K users in one coherence interval (M x K).
struct ChannelRealization {
    CMatrix H;
};

// Post-correlation training observations of one interval (M x Ttr).
struct ObservationBlock {
    CMatrix Phi;
    Index interval = 0;
};

// |Phi|^2 of T intervals side by side (M x T*Ttr); row m is b_m.
struct SquaredObservations {
    Matrix B;
};

// h_k ~ CN(0, diag(C[:, k])), independent across users.
inline ChannelRealization draw_channels(const CovarianceSet& cov, SeededRng& rng) {
    ChannelRealization out{CMatrix(cov.antennas(), cov.users())};
    for (Index k = 0; k < cov.users(); ++k)
        for (Index m = 0; m < cov.antennas(); ++m) out.H(m, k) = rng.complex_normal(cov.C(m, k));
    return out;
}

// Phi = H * Pi + V with V i.i.d. CN(0, sigma_v2).
inline ObservationBlock observe(const ChannelRealization& channels, const Allocation& alloc, double sigma_v2,
                                SeededRng& rng, Index interval = 0) {
    if (channels.H.cols() != alloc.users()) throw shape_error("observe: channel and allocation disagree on K");
    const Index M = channels.H.rows();
    ObservationBlock out{CMatrix::Zero(M, alloc.pilots()), interval};
    for (Index k = 0; k < alloc.users(); ++k) out.Phi.col(alloc.pilot(k)) += channels.H.col(k);
    for (Index p = 0; p < alloc.pilots(); ++p)
        for (Index m = 0; m < M; ++m) out.Phi(m, p) += rng.complex_normal(sigma_v2);
    return out;
}

// T training phases of a repeated schedule with fresh channels in every interval.
// Channels and noise come from separate streams so the channel sequence does not
// depend on the pilot count.
inline std::vector<ObservationBlock> simulate_training(const CovarianceSet& cov, const Schedule& schedule,
                                                       Index intervals, double sigma_v2, SeededRng& channel_rng,
                                                       SeededRng& noise_rng) {
    std::vector<ObservationBlock> blocks;
    blocks.reserve(static_cast<std::size_t>(intervals));
    for (Index t = 0; t < intervals; ++t) {
        const auto h = draw_channels(cov, channel_rng);
        blocks.push_back(observe(h, schedule.at_interval(t), sigma_v2, noise_rng, t));
    }
    return blocks;
}

inline std::vector<ObservationBlock> simulate_training(const CovarianceSet& cov, const Schedule& schedule,
                                                       Index intervals, double sigma_v2, SeededRng& rng) {
    return simulate_training(cov, schedule, intervals, sigma_v2, rng, rng);
}

inline SquaredObservations squared_rows(const std::vector<ObservationBlock>& blocks) {
    if (blocks.empty()) return {Matrix(0, 0)};
    const Index M = blocks.front().Phi.rows();
    Index cols = 0;
    for (const auto& b : blocks) {
        if (b.Phi.rows() != M) throw shape_error("squared_rows: blocks disagree on M");
        cols += b.Phi.cols();
    }
    SquaredObservations out{Matrix(M, cols)};
    Index offset = 0;
    for (const auto& b : blocks) {
        out.B.middleCols(offset, b.Phi.cols()) = b.Phi.cwiseAbs2();
        offset += b.Phi.cols();
    }
    return out;
}

}  // namespace covest
