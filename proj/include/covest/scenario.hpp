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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <variant>
#include <vector>

#include "covest/rng.hpp"
#include "covest/types.hpp"

namespace covest {

struct ScenarioConfig {
    Index M = 32;               // base-station antennas
    Index K = 12;               // users whose covariances are estimated (all cells)
    Index Ttr = 5;              // orthonormal pilots per training phase
    double sigma_v2 = 1.0;      // noise variance, linear
    Index num_cells = 3;
    Index users_per_cell = 4;
    std::uint64_t seed = 1;

    void validate() const {
        if (M < 1) throw std::invalid_argument("ScenarioConfig: M must be >= 1");
        if (K < 2) throw std::invalid_argument("ScenarioConfig: K must be >= 2");
        if (Ttr < 1 || Ttr > K) throw std::invalid_argument("ScenarioConfig: need 1 <= Ttr <= K");
        if (num_cells < 1 || users_per_cell < 1 || num_cells * users_per_cell != K)
            throw std::invalid_argument("ScenarioConfig: num_cells * users_per_cell must equal K");
        if (!(sigma_v2 >= 0.0) || !std::isfinite(sigma_v2))
            throw std::invalid_argument("ScenarioConfig: sigma_v2 must be finite and >= 0");
    }
};

// Diagonals of all user covariances, one column per user (M x K).
struct CovarianceSet {
    Matrix C;

    Index antennas() const noexcept { return C.rows(); }
    Index users() const noexcept { return C.cols(); }
};

// Users are numbered cell by cell: user k lives in cell k / users_per_cell.
struct UserGrouping {
    std::vector<Index> cell_of_user;
    Index num_cells = 0;

    static UserGrouping contiguous(Index num_cells, Index users_per_cell) {
        UserGrouping g;
        g.num_cells = num_cells;
        g.cell_of_user.resize(static_cast<std::size_t>(num_cells * users_per_cell));
        for (std::size_t k = 0; k < g.cell_of_user.size(); ++k)
            g.cell_of_user[k] = static_cast<Index>(k) / users_per_cell;
        return g;
    }

    static UserGrouping from(const ScenarioConfig& cfg) {
        return contiguous(cfg.num_cells, cfg.users_per_cell);
    }

    Index users() const noexcept { return static_cast<Index>(cell_of_user.size()); }

    std::vector<Index> members(Index cell) const {
        std::vector<Index> out;
        for (std::size_t k = 0; k < cell_of_user.size(); ++k)
            if (cell_of_user[k] == cell) out.push_back(static_cast<Index>(k));
        return out;
    }

    Index largest_cell() const {
        std::vector<Index> count(static_cast<std::size_t>(num_cells), 0);
        for (Index c : cell_of_user) ++count[static_cast<std::size_t>(c)];
        return count.empty() ? 0 : *std::max_element(count.begin(), count.end());
    }
};

// ---- variance profiles --------------------------------------------------

// Every antenna carries variance `power` for every user.
struct UniformProfile {
    double power = 1.0;
};

// Contiguous (wrapping) support of `width` antennas with a raised-cosine taper.
// `center` < 0 draws a uniform center per user.
struct BandLimitedProfile {
    Index center = -1;
    Index width = 8;
    double power = 1.0;            // largest per-user total power
    double dynamic_range_db = 20.0;
};

// Uniformly chosen support of round(support_fraction * M) antennas.
struct RandomSparseProfile {
    double support_fraction = 0.25;
    double total_power = 1.0;      // largest per-user total power
    double dynamic_range_db = 20.0;
};

using ProfileKind = std::variant<UniformProfile, BandLimitedProfile, RandomSparseProfile>;

namespace detail {

// Log-uniform draw over [max_power * 10^(-range/10), max_power].
inline double draw_user_power(double max_power, double range_db, SeededRng& rng) {
    if (range_db <= 0.0) return max_power;
    const double u = rng.uniform();
    return max_power * std::pow(10.0, -u * range_db / 10.0);
}

inline void check_power(double p) {
    if (!(p > 0.0) || !std::isfinite(p)) throw invalid_profile("profile power must be finite and > 0");
}

inline void check_range(double db) {
    if (!(db >= 0.0) || !std::isfinite(db)) throw invalid_profile("dynamic_range_db must be finite and >= 0");
}

inline Matrix generate(const UniformProfile& p, const ScenarioConfig& cfg, SeededRng&) {
    if (!(p.power >= 0.0) || !std::isfinite(p.power)) throw invalid_profile("uniform power must be >= 0");
    return Matrix::Constant(cfg.M, cfg.K, p.power);
}

inline Matrix generate(const BandLimitedProfile& p, const ScenarioConfig& cfg, SeededRng& rng) {
    if (p.width < 1 || p.width > cfg.M)
        throw invalid_profile("band-limited width " + std::to_string(p.width) + " outside [1, M=" +
                              std::to_string(cfg.M) + "]");
    if (p.center >= cfg.M) throw invalid_profile("band-limited center outside [0, M)");
    check_power(p.power);
    check_range(p.dynamic_range_db);

    Vector taper(p.width);
    for (Index j = 0; j < p.width; ++j)
        taper[j] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * double(j + 1) / double(p.width + 1)));
    taper /= taper.sum();

    Matrix C = Matrix::Zero(cfg.M, cfg.K);
    for (Index k = 0; k < cfg.K; ++k) {
        const Index center = p.center >= 0 ? p.center : rng.index(cfg.M);
        const double power = draw_user_power(p.power, p.dynamic_range_db, rng);
        const Index first = center - p.width / 2;
        for (Index j = 0; j < p.width; ++j) {
            const Index m = ((first + j) % cfg.M + cfg.M) % cfg.M;
            C(m, k) += power * taper[j];
        }
    }
    return C;
}

inline Matrix generate(const RandomSparseProfile& p, const ScenarioConfig& cfg, SeededRng& rng) {
    if (!(p.support_fraction > 0.0 && p.support_fraction <= 1.0))
        throw invalid_profile("support_fraction must lie in (0, 1]");
    check_power(p.total_power);
    check_range(p.dynamic_range_db);

    const Index support = std::clamp<Index>(std::lround(p.support_fraction * double(cfg.M)), 1, cfg.M);
    std::vector<Index> antennas(static_cast<std::size_t>(cfg.M));
    Matrix C = Matrix::Zero(cfg.M, cfg.K);
    for (Index k = 0; k < cfg.K; ++k) {
        std::iota(antennas.begin(), antennas.end(), Index{0});
        // partial Fisher-Yates: first `support` entries are a uniform subset
        for (Index j = 0; j < support; ++j) {
            const Index pick = j + rng.index(cfg.M - j);
            std::swap(antennas[j], antennas[pick]);
        }
        const double power = draw_user_power(p.total_power, p.dynamic_range_db, rng);
        Vector w(support);
        for (Index j = 0; j < support; ++j) w[j] = 1.0 - rng.uniform();  // (0, 1]
        w *= power / w.sum();
        for (Index j = 0; j < support; ++j) C(antennas[j], k) = w[j];
    }
    return C;
}

}  // namespace detail

// Ground-truth diagonal covariances for every user. Deterministic in (config, profile, rng state).
inline CovarianceSet generate_covariance_set(const ScenarioConfig& config, const ProfileKind& profile,
                                             SeededRng& rng) {
    config.validate();
    return {std::visit([&](const auto& p) { return detail::generate(p, config, rng); }, profile)};
}

// The genie estimator: hands back the truth.
inline CovarianceSet genie_covariances(const CovarianceSet& set) { return set; }

}  // namespace covest
