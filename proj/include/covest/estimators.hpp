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
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "covest/channel.hpp"
#include "covest/schedule.hpp"
#include "covest/types.hpp"

namespace covest {

// Per-slot observation variances (M x N*Ttr) averaged over S schedule repeats.
struct ObsCovEstimate {
    Matrix c_obs;
    Index samples = 0;
};

// Estimated channel variances, M x K.
struct CovEstimate {
    Matrix C_hat;
};

inline void clamp_nonnegative(Matrix& m) { m = m.cwiseMax(0.0); }
inline void clamp_nonnegative(Vector& v) { v = v.cwiseMax(0.0); }

// Sample mean of the squared observations per schedule slot. With S = 0 the repeat
// count is inferred from the column count.
inline ObsCovEstimate estimate_obs_covariances(const SquaredObservations& obs, const Schedule& schedule,
                                               Index repeats = 0) {
    const Index block = schedule.slots();
    const Index cols = obs.B.cols();
    if (repeats <= 0) {
        if (cols == 0 || cols % block != 0)
            throw shape_error("estimate_obs_covariances: " + std::to_string(cols) +
                              " columns are not a whole number of schedule blocks of " + std::to_string(block));
        repeats = cols / block;
    } else if (cols != repeats * block) {
        throw shape_error("estimate_obs_covariances: expected " + std::to_string(repeats * block) +
                          " columns, got " + std::to_string(cols));
    }
    ObsCovEstimate out{Matrix::Zero(obs.B.rows(), block), repeats};
    for (Index s = 0; s < repeats; ++s) out.c_obs += obs.B.middleCols(s * block, block);
    out.c_obs /= double(repeats);
    return out;
}

// Right-inverse the compound allocation: C = (c_obs - sigma^2) * pinv(compound).
inline CovEstimate two_step_reconstruct(const ObsCovEstimate& obs, const Schedule& schedule, double sigma_v2,
                                        bool clamp = true) {
    if (obs.c_obs.cols() != schedule.slots())
        throw shape_error("two_step_reconstruct: slot count does not match schedule");
    const Index K = schedule.users();
    const RankInfo info = rank_and_condition(schedule);
    if (info.rank < K) throw identifiability_error(info.rank, K);

    const Matrix Pt = schedule.compound().transpose();
    const Matrix rhs = (obs.c_obs.array() - sigma_v2).matrix().transpose();
    CovEstimate out{Pt.colPivHouseholderQr().solve(rhs).transpose()};
    if (clamp) clamp_nonnegative(out.C_hat);
    return out;
}

namespace detail {

inline Eigen::LLT<Matrix> factor_normal_matrix(const Matrix& A, const char* who) {
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() != Eigen::Success || !(llt.rcond() > double(A.rows()) * std::numeric_limits<double>::epsilon()))
        throw singular_system(std::string(who) + ": weighted normal matrix Pi D Pi^T is singular");
    return llt;
}

}  // namespace detail

// C = (B_mean - sigma^2) D Pi^T (Pi D Pi^T)^{-1} with one diagonal weighting shared by all rows.
inline CovEstimate shared_scaling_estimate(const Matrix& B_mean, const Matrix& Pi, const Vector& weights,
                                           double sigma_v2, bool clamp = true) {
    if (B_mean.cols() != Pi.cols() || weights.size() != Pi.cols())
        throw shape_error("shared_scaling_estimate: slot counts disagree");
    if ((weights.array() <= 0.0).any()) throw std::invalid_argument("shared_scaling_estimate: weights must be > 0");
    const Matrix PD = Pi * weights.asDiagonal();
    const Matrix A = PD * Pi.transpose();
    const auto llt = detail::factor_normal_matrix(A, "shared_scaling_estimate");
    const Matrix rhs = PD * (B_mean.array() - sigma_v2).matrix().transpose();  // K x M
    CovEstimate out{llt.solve(rhs).transpose()};
    if (clamp) clamp_nonnegative(out.C_hat);
    return out;
}

// Slot powers pi_i^T c + sigma^2; throws if any is not strictly positive.
inline Vector slot_powers(const Vector& c, const Matrix& Pi, double sigma_v2) {
    if (c.size() != Pi.rows()) throw shape_error("slot_powers: variance vector length must equal K");
    Vector p = (Pi.transpose() * c).array() + sigma_v2;
    for (Index i = 0; i < p.size(); ++i)
        if (!(p[i] > 0.0)) throw domain_error("slot power at slot " + std::to_string(i) + " is not positive");
    return p;
}

// Per-antenna negative log-likelihood of the squared observations b under variances c.
inline double negative_llf(const Vector& c, const Vector& b, const Matrix& Pi, double sigma_v2) {
    if (b.size() != Pi.cols()) throw shape_error("negative_llf: observation length must equal slot count");
    const Vector p = slot_powers(c, Pi, sigma_v2);
    double sum = 0.0;
    for (Index i = 0; i < p.size(); ++i) sum += b[i] / p[i] + std::log(p[i]);
    return sum;
}

inline Vector llf_gradient(const Vector& c, const Vector& b, const Matrix& Pi, double sigma_v2) {
    if (b.size() != Pi.cols()) throw shape_error("llf_gradient: observation length must equal slot count");
    const Vector p = slot_powers(c, Pi, sigma_v2);
    const Vector w = (p - b).array() / p.array().square();
    return Pi * w;
}

// One weighted normal-equation solve: (Pi D Pi^T)^{-1} Pi D (b - sigma^2), D = diag(weights).
inline Vector weighted_step(const Vector& b, const Matrix& Pi, double sigma_v2, const Vector& weights) {
    const Matrix PD = Pi * weights.asDiagonal();
    const auto llt = detail::factor_normal_matrix(PD * Pi.transpose(), "weighted_step");
    return llt.solve(PD * (b.array() - sigma_v2).matrix());
}

struct MlOptions {
    double tol = 1e-8;
    int max_iter = 200;
    int max_halvings = 10;
};

struct MlResult {
    Vector c;
    int iterations = 0;
    bool converged = false;
    bool interior = false;
    double gradient_norm = std::numeric_limits<double>::quiet_NaN();
};

inline std::string format_diagnostic(const MlResult& r, Index row = -1) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "ml_fixed_point%s%s iterations=%d grad_inf=%.3e converged=%d interior=%d",
                  row >= 0 ? " row=" : "", row >= 0 ? std::to_string(row).c_str() : "", r.iterations,
                  r.gradient_norm, int(r.converged), int(r.interior));
    return buf;
}

// Fixed-point iteration on the ML stationarity condition. Each step re-solves the
// weighted normal equations with d_i = 1/(pi_i^T c + sigma^2)^2 taken at the previous
// iterate, clamps to c >= 0, and backs off towards the previous iterate while the
// likelihood gets worse. Convergence needs a small step and, for interior iterates,
// ||grad||_inf <= 10 tol.
inline MlResult ml_fixed_point(const Vector& b, const Matrix& Pi, double sigma_v2, const Vector& init,
                               const MlOptions& opt = {}) {
    if (init.size() != Pi.rows()) throw shape_error("ml_fixed_point: init length must equal K");
    if ((init.array() < 0.0).any()) throw std::invalid_argument("ml_fixed_point: init must be >= 0");

    MlResult r;
    r.c = init;
    double f = negative_llf(r.c, b, Pi, sigma_v2);
    for (r.iterations = 1; r.iterations <= opt.max_iter; ++r.iterations) {
        const Vector d = slot_powers(r.c, Pi, sigma_v2).array().square().inverse();
        Vector next = weighted_step(b, Pi, sigma_v2, d).cwiseMax(0.0);
        double f_next = negative_llf(next, b, Pi, sigma_v2);
        for (int h = 0; h < opt.max_halvings && f_next > f; ++h) {
            next = 0.5 * (r.c + next);
            f_next = negative_llf(next, b, Pi, sigma_v2);
        }
        const double step = (next - r.c).lpNorm<Eigen::Infinity>();
        const double scale = 1.0 + r.c.lpNorm<Eigen::Infinity>();
        r.c = std::move(next);
        f = f_next;
        if (step <= opt.tol * scale) {
            r.interior = (r.c.array() > 0.0).all();
            r.gradient_norm = llf_gradient(r.c, b, Pi, sigma_v2).lpNorm<Eigen::Infinity>();
            if (!r.interior || r.gradient_norm <= 10.0 * opt.tol) {
                r.converged = true;
                return r;
            }
        }
    }
    r.iterations = opt.max_iter;
    r.interior = (r.c.array() > 0.0).all();
    r.gradient_norm = llf_gradient(r.c, b, Pi, sigma_v2).lpNorm<Eigen::Infinity>();
    return r;
}

struct MlBatchResult {
    CovEstimate estimate;
    std::vector<MlResult> rows;

    bool all_converged() const {
        return std::all_of(rows.begin(), rows.end(), [](const MlResult& r) { return r.converged; });
    }
};

// Runs ml_fixed_point on each antenna row of B independently. Rows are distributed
// over `threads` workers; results do not depend on the split. `init` defaults to the
// clamped unweighted (two-step) solution.
inline MlBatchResult estimate_all_rows_ml(const Matrix& B, const Matrix& Pi, double sigma_v2,
                                          const MlOptions& opt = {}, const std::optional<CovEstimate>& init = {},
                                          unsigned threads = 1) {
    if (B.cols() != Pi.cols()) throw shape_error("estimate_all_rows_ml: B and Pi disagree on slot count");
    const Index M = B.rows();
    const Matrix start =
        init ? init->C_hat : shared_scaling_estimate(B, Pi, Vector::Ones(Pi.cols()), sigma_v2).C_hat;
    if (start.rows() != M || start.cols() != Pi.rows()) throw shape_error("estimate_all_rows_ml: init shape");

    MlBatchResult out{{Matrix(M, Pi.rows())}, std::vector<MlResult>(static_cast<std::size_t>(M))};
    auto work = [&](Index first, Index stride) {
        for (Index m = first; m < M; m += stride) {
            const Vector b = B.row(m).transpose();
            const Vector c0 = start.row(m).transpose().cwiseMax(0.0);
            out.rows[static_cast<std::size_t>(m)] = ml_fixed_point(b, Pi, sigma_v2, c0, opt);
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<Index>(M, 1))));
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, Index(w), Index(threads));
        for (auto& t : pool) t.join();
    }
    for (Index m = 0; m < M; ++m) out.estimate.C_hat.row(m) = out.rows[static_cast<std::size_t>(m)].c.transpose();
    return out;
}

// Shared per-slot weights from a pilot estimate: d_i = 1 / (mean_m pi_i^T c_m + sigma^2)^2.
inline Vector shared_weights(const CovEstimate& pilot, const Matrix& Pi, double sigma_v2) {
    const Vector mean_c = pilot.C_hat.colwise().mean().transpose().cwiseMax(0.0);
    return slot_powers(mean_c, Pi, sigma_v2).array().square().inverse();
}

}  // namespace covest
