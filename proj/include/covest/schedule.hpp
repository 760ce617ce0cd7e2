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

#include <istream>
#include <algorithm>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "covest/rng.hpp"
#include "covest/scenario.hpp"
#include "covest/types.hpp"

namespace covest {

// Pilot assignment for one coherence interval. Stored as the pilot index of each
// user, which makes "exactly one nonzero per row" hold by construction.
class Allocation {
public:
    Allocation() = default;

    Allocation(std::vector<Index> pilot_of_user, Index pilots)
        : pilot_(std::move(pilot_of_user)), pilots_(pilots) {
        if (pilots_ < 1) throw std::invalid_argument("Allocation: need at least one pilot");
        for (Index p : pilot_)
            if (p < 0 || p >= pilots_)
                throw std::invalid_argument("Allocation: pilot index " + std::to_string(p) + " outside [0, " +
                                            std::to_string(pilots_) + ")");
    }

    // Accepts a K x Ttr binary matrix whose rows are one-hot.
    static Allocation from_matrix(const Matrix& assignment) {
        std::vector<Index> pilot(static_cast<std::size_t>(assignment.rows()), -1);
        for (Index k = 0; k < assignment.rows(); ++k) {
            for (Index p = 0; p < assignment.cols(); ++p) {
                const double v = assignment(k, p);
                if (v != 0.0 && v != 1.0) throw std::invalid_argument("Allocation: entries must be 0 or 1");
                if (v == 1.0) {
                    if (pilot[std::size_t(k)] >= 0)
                        throw std::invalid_argument("Allocation: row " + std::to_string(k) + " is not one-hot");
                    pilot[std::size_t(k)] = p;
                }
            }
            if (pilot[std::size_t(k)] < 0)
                throw std::invalid_argument("Allocation: row " + std::to_string(k) + " is not one-hot");
        }
        return {std::move(pilot), assignment.cols()};
    }

    Index users() const noexcept { return static_cast<Index>(pilot_.size()); }
    Index pilots() const noexcept { return pilots_; }
    Index pilot(Index user) const { return pilot_[static_cast<std::size_t>(user)]; }
    const std::vector<Index>& pilot_of_user() const noexcept { return pilot_; }

    Matrix matrix() const {
        Matrix A = Matrix::Zero(users(), pilots_);
        for (Index k = 0; k < users(); ++k) A(k, pilot(k)) = 1.0;
        return A;
    }

    std::vector<Index> users_on(Index p) const {
        std::vector<Index> out;
        for (Index k = 0; k < users(); ++k)
            if (pilot(k) == p) out.push_back(k);
        return out;
    }

    friend bool operator==(const Allocation&, const Allocation&) = default;

private:
    std::vector<Index> pilot_;
    Index pilots_ = 0;
};

// Sequence of allocations cycled through coherence intervals.
class Schedule {
public:
    Schedule() = default;

    explicit Schedule(std::vector<Allocation> allocations) : allocations_(std::move(allocations)) {
        if (allocations_.empty()) throw std::invalid_argument("Schedule: needs at least one allocation");
        for (const auto& a : allocations_)
            if (a.users() != allocations_.front().users() || a.pilots() != allocations_.front().pilots())
                throw shape_error("Schedule: allocations disagree on K or Ttr");
    }

    Index length() const noexcept { return static_cast<Index>(allocations_.size()); }
    Index users() const { return allocations_.front().users(); }
    Index pilots() const { return allocations_.front().pilots(); }
    Index slots() const { return length() * pilots(); }

    const Allocation& operator[](Index i) const { return allocations_[static_cast<std::size_t>(i)]; }
    // Allocation used in coherence interval t when the schedule repeats.
    const Allocation& at_interval(Index t) const { return (*this)[t % length()]; }
    const std::vector<Allocation>& allocations() const noexcept { return allocations_; }

    // K x (N * Ttr) horizontal concatenation of all allocations.
    Matrix compound() const {
        Matrix P(users(), slots());
        for (Index i = 0; i < length(); ++i) P.middleCols(i * pilots(), pilots()) = (*this)[i].matrix();
        return P;
    }

    // Compound of T consecutive intervals of the repeated schedule, K x (T * Ttr).
    Matrix unrolled(Index intervals) const {
        Matrix P(users(), intervals * pilots());
        for (Index t = 0; t < intervals; ++t) P.middleCols(t * pilots(), pilots()) = at_interval(t).matrix();
        return P;
    }

    friend bool operator==(const Schedule&, const Schedule&) = default;

private:
    std::vector<Allocation> allocations_;
};

// rank(compound) <= Ttr + (N-1)(Ttr-1) whenever every user is served in each interval.
constexpr Index max_compound_rank(Index Ttr, Index N) noexcept { return Ttr + (N - 1) * (Ttr - 1); }

// Shortest schedule that can reach rank K when every user is served each interval.
inline Index min_schedule_length(Index K, Index Ttr) {
    if (K < 2) throw std::invalid_argument("min_schedule_length: need K >= 2");
    if (Ttr < 2)
        throw infeasible_constraint(
            "min_schedule_length: with a single pilot serving all users every interval the compound "
            "allocation has rank 1; covariances are not identifiable");
    return (K - 1 + Ttr - 2) / (Ttr - 1);
}

struct RankInfo {
    Index rank = 0;
    double condition = std::numeric_limits<double>::infinity();
};

inline RankInfo numerical_rank(const Matrix& A) {
    RankInfo out;
    if (A.size() == 0) return out;
    const Eigen::JacobiSVD<Matrix> svd(A);
    const Vector& s = svd.singularValues();
    const double tol = double(std::max(A.rows(), A.cols())) * std::numeric_limits<double>::epsilon() * s[0];
    Index r = 0;
    while (r < s.size() && s[r] > tol) ++r;
    out.rank = r;
    if (r > 0) out.condition = s[0] / s[r - 1];
    return out;
}

// Numerical rank and condition number (over nonzero singular values) of the compound.
inline RankInfo rank_and_condition(const Schedule& schedule) {
    const RankInfo info = numerical_rank(schedule.compound());
    if (info.rank > max_compound_rank(schedule.pilots(), schedule.length()))
        throw std::logic_error("rank_and_condition: compound rank exceeds Ttr + (N-1)(Ttr-1)");
    return info;
}

// One independent draw: per interval and cell, a uniform injection of the cell's users
// into the pilot set. No rank check.
inline Schedule draw_random_schedule(Index K, Index Ttr, Index N, const UserGrouping& grouping, SeededRng& rng) {
    if (N < 1) throw std::invalid_argument("draw_random_schedule: N must be >= 1");
    if (Ttr < 1) throw std::invalid_argument("draw_random_schedule: Ttr must be >= 1");
    if (grouping.users() != K) throw shape_error("draw_random_schedule: grouping does not cover K users");
    if (grouping.largest_cell() > Ttr)
        throw infeasible_constraint("draw_random_schedule: " + std::to_string(grouping.largest_cell()) +
                                    " users in one cell cannot use distinct pilots out of Ttr=" +
                                    std::to_string(Ttr));

    std::vector<std::vector<Index>> cells;
    for (Index c = 0; c < grouping.num_cells; ++c) cells.push_back(grouping.members(c));

    std::vector<Allocation> out;
    out.reserve(static_cast<std::size_t>(N));
    std::vector<Index> pilots(static_cast<std::size_t>(Ttr));
    for (Index t = 0; t < N; ++t) {
        std::vector<Index> pilot_of_user(static_cast<std::size_t>(K), 0);
        for (const auto& members : cells) {
            std::iota(pilots.begin(), pilots.end(), Index{0});
            for (std::size_t j = 0; j < members.size(); ++j) {
                const std::size_t pick = j + static_cast<std::size_t>(rng.index(Ttr - Index(j)));
                std::swap(pilots[j], pilots[pick]);
                pilot_of_user[static_cast<std::size_t>(members[j])] = pilots[j];
            }
        }
        out.emplace_back(std::move(pilot_of_user), Ttr);
    }
    return Schedule(std::move(out));
}

// Random schedule honouring same-cell distinctness. When N can reach rank K, a
// rank-deficient draw is redrawn up to `max_redraws` times before giving up.
inline Schedule make_random_schedule(Index K, Index Ttr, Index N, const UserGrouping& grouping, SeededRng& rng,
                                     int max_redraws = 100) {
    Schedule s = draw_random_schedule(K, Ttr, N, grouping, rng);
    if (Ttr < 2 || N < min_schedule_length(K, Ttr)) return s;
    RankInfo info = rank_and_condition(s);
    for (int attempt = 0; attempt < max_redraws && info.rank < K; ++attempt) {
        s = draw_random_schedule(K, Ttr, N, grouping, rng);
        info = rank_and_condition(s);
    }
    if (info.rank < K) throw identifiability_error(info.rank, K);
    return s;
}

// Ttr = 2, K = 4, N = 3 schedule whose compound has condition number sqrt(3).
inline Schedule make_example_schedule_442() {
    return Schedule({Allocation({0, 0, 1, 1}, 2), Allocation({0, 1, 0, 1}, 2), Allocation({0, 1, 1, 0}, 2)});
}

// ---- text format: one line per interval, K space-separated 0-based pilot indices

inline void write_schedule(std::ostream& os, const Schedule& schedule) {
    for (const auto& a : schedule.allocations()) {
        for (Index k = 0; k < a.users(); ++k) os << (k ? " " : "") << a.pilot(k);
        os << '\n';
    }
}

inline std::string schedule_to_string(const Schedule& schedule) {
    std::ostringstream os;
    write_schedule(os, schedule);
    return os.str();
}

// Blank lines and lines starting with '#' are skipped. Ttr <= 0 infers max index + 1.
inline Schedule read_schedule(std::istream& is, Index Ttr = 0) {
    std::vector<std::vector<Index>> rows;
    std::vector<int> line_of_row;
    std::string line;
    int lineno = 0;
    Index largest = -1;
    while (std::getline(is, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        std::vector<Index> row;
        std::string tok;
        while (ls >> tok) {
            std::size_t used = 0;
            long long v = 0;
            try {
                v = std::stoll(tok, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != tok.size() || v < 0)
                throw config_error(lineno, "schedule", "expected a nonnegative pilot index, got '" + tok + "'");
            row.push_back(static_cast<Index>(v));
            largest = std::max(largest, static_cast<Index>(v));
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw config_error(lineno, "schedule", "expected " + std::to_string(rows.front().size()) +
                                                       " users, found " + std::to_string(row.size()));
        rows.push_back(std::move(row));
        line_of_row.push_back(lineno);
    }
    if (rows.empty()) throw config_error(lineno, "schedule", "no allocations found");
    const Index pilots = Ttr > 0 ? Ttr : largest + 1;
    std::vector<Allocation> allocs;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (Index p : rows[i])
            if (p >= pilots)
                throw config_error(line_of_row[i], "schedule",
                                   "pilot index " + std::to_string(p) + " >= Ttr=" + std::to_string(pilots));
        allocs.emplace_back(std::move(rows[i]), pilots);
    }
    return Schedule(std::move(allocs));
}

}  // namespace covest
