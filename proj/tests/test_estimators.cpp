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

#include <numeric>

#include <catch2/catch_amalgamated.hpp>

#include "covest.hpp"
#include "oracles.hpp"

using namespace covest;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Schedule full_rank_schedule(Index K, Index Ttr, Index N, Index cells, SeededRng& rng) {
    return make_random_schedule(K, Ttr, N, UserGrouping::contiguous(cells, K / cells), rng);
}

// Squared observations of T intervals of a repeated schedule.
Matrix simulate_B(const Matrix& C, const Schedule& s, Index T, double s2, SeededRng& rng) {
    return squared_rows(simulate_training({C}, s, T, s2, rng)).B;
}

}  // namespace

TEST_CASE("observation covariance sample means", "[estimators]") {
    const Schedule s = make_example_schedule_442();
    SECTION("single repeat is the data itself") {
        SeededRng rng(1);
        const Matrix B = oracle::random_nonnegative(3, 6, rng);
        const auto est = estimate_obs_covariances({B}, s, 1);
        CHECK(est.c_obs == B);
        CHECK(est.samples == 1);
    }
    SECTION("constant data") {
        const auto est = estimate_obs_covariances({Matrix::Constant(2, 18, 5.0)}, s);
        CHECK(est.samples == 3);
        CHECK(est.c_obs == Matrix::Constant(2, 6, 5.0));
    }
    SECTION("column count must be whole repeats") {
        CHECK_THROWS_AS(estimate_obs_covariances({Matrix::Zero(2, 7)}, s), shape_error);
        CHECK_THROWS_AS(estimate_obs_covariances({Matrix::Zero(2, 12)}, s, 3), shape_error);
    }
    SECTION("consistent for many repeats") {
        SeededRng rng(2);
        const Matrix C = oracle::random_nonnegative(2, 4, rng, 2.0);
        const double s2 = 0.5;
        const auto est = estimate_obs_covariances({simulate_B(C, s, 3 * 10000, s2, rng)}, s, 10000);
        const Matrix truth = oracle::forward_slot_covariances(C, s, s2);
        const Matrix rel = ((est.c_obs - truth).array().abs() / truth.array()).matrix();
        CHECK(rel.maxCoeff() < 0.05);
    }
}

TEST_CASE("two-step reconstruction", "[estimators]") {
    SeededRng rng(3);
    SECTION("exact slot covariances are inverted exactly") {
        const Schedule s = make_example_schedule_442();
        for (int rep = 0; rep < 20; ++rep) {
            const Matrix C = oracle::random_nonnegative(8, 4, rng, 3.0);
            const double s2 = rng.uniform(0.0, 2.0);
            const ObsCovEstimate obs{oracle::forward_slot_covariances(C, s, s2), 1};
            CHECK((two_step_reconstruct(obs, s, s2).C_hat - C).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
    SECTION("noise-only observations give zero") {
        const Schedule s = full_rank_schedule(12, 5, 5, 3, rng);
        const ObsCovEstimate obs{Matrix::Constant(6, s.slots(), 0.7), 1};
        CHECK(two_step_reconstruct(obs, s, 0.7).C_hat.cwiseAbs().maxCoeff() < 1e-12);
        const ObsCovEstimate zero{Matrix::Zero(6, s.slots()), 1};
        CHECK(two_step_reconstruct(zero, s, 0.0).C_hat.cwiseAbs().maxCoeff() < 1e-12);
    }
    SECTION("rank-deficient compound is reported with its rank") {
        const auto a = make_example_schedule_442()[0];
        const Schedule s({a, a});
        try {
            two_step_reconstruct({Matrix::Ones(2, 4), 1}, s, 0.1);
            FAIL("expected identifiability_error");
        } catch (const identifiability_error& e) {
            CHECK(e.rank() == 2);
            CHECK(e.users() == 4);
        }
    }
    SECTION("negative solutions are clamped unless disabled") {
        const Schedule s = make_example_schedule_442();
        Matrix c_obs = Matrix::Constant(1, 6, 1.0);
        c_obs(0, 0) = 0.0;
        const auto clamped = two_step_reconstruct({c_obs, 1}, s, 1.0);
        const auto raw = two_step_reconstruct({c_obs, 1}, s, 1.0, false);
        CHECK(raw.C_hat.minCoeff() < 0.0);
        CHECK(clamped.C_hat.minCoeff() >= 0.0);
    }
}

TEST_CASE("right-inverse identity under any positive weighting", "[estimators][property]") {
    SeededRng rng(4);
    for (int rep = 0; rep < 50; ++rep) {
        const Index Ttr = 2 + rng.index(3);
        const Index K = Ttr + 1 + rng.index(5);
        const Index N = min_schedule_length(K, Ttr) + rng.index(3);
        const Schedule s = make_random_schedule(K, Ttr, N, UserGrouping::contiguous(K, 1), rng);
        const Matrix P = s.compound();
        const Matrix C = oracle::random_nonnegative(5, K, rng, 4.0);
        const Vector d = Vector::NullaryExpr(P.cols(), [&] { return rng.uniform(0.05, 3.0); });
        const double s2 = rng.uniform(0.1, 1.0);
        const Matrix B = oracle::forward_slot_covariances(C, s, s2);
        CHECK((shared_scaling_estimate(B, P, d, s2).C_hat - C).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("shared scaling estimate", "[estimators]") {
    SeededRng rng(5);
    const Schedule s = full_rank_schedule(12, 5, 5, 3, rng);
    const Matrix P = s.compound();
    SECTION("unit weights reduce to the two-step reconstruction") {
        for (int rep = 0; rep < 10; ++rep) {
            const Matrix B = oracle::random_nonnegative(7, s.slots(), rng, 5.0);
            const auto a = shared_scaling_estimate(B, P, Vector::Ones(P.cols()), 1.0, false);
            const auto b = two_step_reconstruct({B, 1}, s, 1.0, false);
            CHECK((a.C_hat - b.C_hat).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
    SECTION("noise-only input gives zero") {
        const Vector d = Vector::NullaryExpr(P.cols(), [&] { return rng.uniform(0.5, 2.0); });
        CHECK(shared_scaling_estimate(Matrix::Constant(3, P.cols(), 2.0), P, d, 2.0).C_hat.cwiseAbs().maxCoeff() <
              1e-12);
    }
    SECTION("singular normal matrix") {
        const auto a = s[0];
        const Schedule bad({a, a});
        CHECK_THROWS_AS(shared_scaling_estimate(Matrix::Ones(2, 10), bad.compound(), Vector::Ones(10), 0.1),
                        singular_system);
    }
    SECTION("weights must be positive") {
        Vector d = Vector::Ones(P.cols());
        d[0] = 0.0;
        CHECK_THROWS_AS(shared_scaling_estimate(Matrix::Ones(2, P.cols()), P, d, 0.1), std::invalid_argument);
    }
}

TEST_CASE("negative log-likelihood", "[estimators]") {
    SECTION("zero variances, unit noise: sum of observations") {
        const Schedule s = make_example_schedule_442();
        const Vector b = (Vector(6) << 1, 2, 3, 4, 5, 6).finished();
        CHECK_THAT(negative_llf(Vector::Zero(4), b, s.compound(), 1.0), WithinAbs(21.0, 1e-15));
    }
    SECTION("scalar instance") {
        CHECK_THAT(negative_llf(Vector::Ones(1), Vector::Constant(1, 2.0), Matrix::Ones(1, 1), 1.0),
                   WithinRel(1.0 + std::log(2.0), 1e-15));
    }
    SECTION("matches slot-by-slot evaluation") {
        SeededRng rng(6);
        for (int rep = 0; rep < 100; ++rep) {
            const Index K = 1 + rng.index(8);
            const Index Ttr = 1 + rng.index(K);
            const Index T = 1 + rng.index(60 / Ttr);
            std::vector<Allocation> allocs;
            for (Index t = 0; t < T; ++t) allocs.push_back(oracle::random_allocation(K, Ttr, rng));
            const Matrix P = Schedule(allocs).compound();
            const Vector c = Vector::NullaryExpr(K, [&] { return rng.uniform(0.0, 3.0); });
            const Vector b = Vector::NullaryExpr(P.cols(), [&] { return rng.uniform(0.0, 10.0); });
            const double s2 = rng.uniform(0.1, 2.0);
            CHECK_THAT(negative_llf(c, b, P, s2), WithinRel(oracle::llf_by_slots(c, b, P, s2), 1e-12));
        }
    }
    SECTION("nonpositive slot power is a domain error") {
        CHECK_THROWS_AS(negative_llf(Vector::Zero(1), Vector::Ones(1), Matrix::Ones(1, 1), 0.0), domain_error);
        CHECK_THROWS_AS(llf_gradient(Vector::Zero(1), Vector::Ones(1), Matrix::Ones(1, 1), 0.0), domain_error);
    }
}

TEST_CASE("likelihood gradient", "[estimators]") {
    SeededRng rng(7);
    SECTION("vanishes when every observation equals its slot power") {
        const Schedule s = full_rank_schedule(6, 3, 4, 3, rng);
        const Matrix P = s.compound();
        const Vector c = Vector::NullaryExpr(6, [&] { return rng.uniform(0.1, 2.0); });
        const Vector b = (P.transpose() * c).array() + 0.4;
        CHECK(llf_gradient(c, b, P, 0.4).cwiseAbs().maxCoeff() < 1e-12);
    }
    SECTION("matches central finite differences") {
        for (int rep = 0; rep < 100; ++rep) {
            const Index K = 1 + rng.index(8);
            const Index Ttr = 1 + rng.index(K);
            const Index T = 1 + rng.index(60 / Ttr);
            std::vector<Allocation> allocs;
            for (Index t = 0; t < T; ++t) allocs.push_back(oracle::random_allocation(K, Ttr, rng));
            const Matrix P = Schedule(allocs).compound();
            const Vector c = Vector::NullaryExpr(K, [&] { return rng.uniform(0.0, 3.0); });
            const Vector b = Vector::NullaryExpr(P.cols(), [&] { return rng.uniform(0.0, 10.0); });
            const double s2 = rng.uniform(0.2, 2.0);
            const Vector g = llf_gradient(c, b, P, s2);
            const Vector fd = oracle::central_difference(
                [&](const Vector& x) { return oracle::llf_by_slots(x, b, P, s2); }, c);
            CHECK((g - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
        }
    }
    SECTION("scalar closed form") {
        const Vector b = (Vector(4) << 1.0, 3.0, 0.5, 2.5).finished();  // mean 1.75
        const double c = 0.5, s2 = 0.25;
        const double expected = 4.0 * (c + s2 - 1.75) / ((c + s2) * (c + s2));
        CHECK_THAT(llf_gradient(Vector::Constant(1, c), b, Matrix::Ones(1, 4), s2)[0], WithinRel(expected, 1e-14));
        CHECK(expected < 0.0);
    }
}

TEST_CASE("ML fixed point", "[estimators]") {
    SeededRng rng(8);
    SECTION("scalar problem converges to mean(b) - sigma^2") {
        const Vector b = Vector::NullaryExpr(1000, [&] { return 3.0 * -std::log(1.0 - rng.uniform()); });
        const auto r = ml_fixed_point(b, Matrix::Ones(1, 1000), 0.5, Vector::Ones(1));
        CHECK(r.converged);
        CHECK_THAT(r.c[0], WithinAbs(b.mean() - 0.5, 1e-8));
    }
    SECTION("scalar problem clamps at zero") {
        const Vector b = Vector::Constant(10, 0.2);
        const auto r = ml_fixed_point(b, Matrix::Ones(1, 10), 1.0, Vector::Ones(1));
        CHECK(r.converged);
        CHECK_FALSE(r.interior);
        CHECK(r.c[0] == 0.0);
    }
    SECTION("one unit-weight step from the two-step estimate reproduces it") {
        const Schedule s = full_rank_schedule(12, 5, 5, 3, rng);
        const Matrix C = oracle::random_nonnegative(4, 12, rng, 3.0);
        const Index T = 10 * s.length();
        const Matrix B = simulate_B(C, s, T, 1.0, rng);
        const auto two = two_step_reconstruct(estimate_obs_covariances({B}, s), s, 1.0, false);
        const Matrix P = s.unrolled(T);
        for (Index m = 0; m < 4; ++m) {
            const Vector step = weighted_step(B.row(m).transpose(), P, 1.0, Vector::Ones(P.cols()));
            CHECK((step - two.C_hat.row(m).transpose()).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
    SECTION("consistent for many observations") {
        const Schedule s = full_rank_schedule(8, 3, 6, 4, rng);
        const Vector truth = Vector::NullaryExpr(8, [&] { return rng.uniform(0.5, 4.0); });
        const Index T = 1000 * s.length();
        const Matrix B = simulate_B(truth.transpose(), s, T, 1.0, rng);
        const auto r = ml_fixed_point(B.row(0).transpose(), s.unrolled(T), 1.0, Vector::Ones(8));
        CHECK(r.converged);
        CHECK((r.c - truth).norm() / truth.norm() < 0.1);
    }
    SECTION("singular normal matrix") {
        const auto a = make_example_schedule_442()[0];
        const Matrix P = Schedule({a, a}).compound();
        CHECK_THROWS_AS(ml_fixed_point(Vector::Ones(4), P, 0.1, Vector::Ones(4)), singular_system);
    }
}

TEST_CASE("converged interior fixed points are stationary", "[estimators][property]") {
    SeededRng rng(9);
    int checked = 0;
    for (int rep = 0; rep < 30; ++rep) {
        const Schedule s = full_rank_schedule(8, 3, 6, 4, rng);
        const Index T = 60;
        const Vector truth = Vector::NullaryExpr(8, [&] { return rng.uniform(0.5, 5.0); });
        const Matrix B = simulate_B(truth.transpose(), s, T, 1.0, rng);
        const Matrix P = s.unrolled(T);
        MlOptions opt;
        const auto r = ml_fixed_point(B.row(0).transpose(), P, 1.0, Vector::Ones(8), opt);
        if (r.converged && r.interior) {
            ++checked;
            CHECK(llf_gradient(r.c, B.row(0).transpose(), P, 1.0).lpNorm<Eigen::Infinity>() <= 10 * opt.tol);
        }
    }
    CHECK(checked > 0);
}

TEST_CASE("row-separable batch ML", "[estimators]") {
    SeededRng rng(10);
    const Schedule s = full_rank_schedule(6, 3, 4, 3, rng);
    const Index T = 40;
    const Matrix C = oracle::random_nonnegative(6, 6, rng, 4.0);
    const Matrix B = simulate_B(C, s, T, 1.0, rng);
    const Matrix P = s.unrolled(T);
    const auto serial = estimate_all_rows_ml(B, P, 1.0);

    SECTION("single row equals a direct fixed-point call") {
        const auto one = estimate_all_rows_ml(B.topRows(1), P, 1.0);
        const Vector init = shared_scaling_estimate(B.topRows(1), P, Vector::Ones(P.cols()), 1.0).C_hat.row(0);
        const auto direct = ml_fixed_point(B.row(0).transpose(), P, 1.0, init);
        CHECK(one.estimate.C_hat.row(0).transpose() == direct.c);
    }
    SECTION("permuting antennas permutes the estimate") {
        std::vector<int> perm(6);
        std::iota(perm.begin(), perm.end(), 0);
        std::reverse(perm.begin(), perm.end());
        Eigen::PermutationMatrix<Eigen::Dynamic> Pm(Eigen::Map<Eigen::VectorXi>(perm.data(), 6));
        const auto permuted = estimate_all_rows_ml(Pm * B, P, 1.0);
        CHECK(permuted.estimate.C_hat.isApprox(Pm * serial.estimate.C_hat, 1e-12));
    }
    SECTION("thread count does not change the result") {
        for (unsigned threads : {2u, 3u, 8u}) {
            const auto par = estimate_all_rows_ml(B, P, 1.0, {}, std::nullopt, threads);
            CHECK(par.estimate.C_hat == serial.estimate.C_hat);
        }
    }
    SECTION("diagnostic line") {
        const std::string line = format_diagnostic(serial.rows[0], 0);
        CHECK(line.find("iterations=") != std::string::npos);
        CHECK(line.find("converged=") != std::string::npos);
        CHECK(line.find("grad_inf=") != std::string::npos);
    }
}

TEST_CASE("ML error shrinks with more training phases", "[estimators][montecarlo]") {
    double err_short = 0, err_long = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SeededRng rng(100 + seed);
        const Schedule s = full_rank_schedule(8, 3, 6, 4, rng);
        const Matrix C = oracle::random_nonnegative(4, 8, rng, 4.0);
        const Matrix B = simulate_B(C, s, 300, 1.0, rng);
        auto err = [&](Index T) {
            const auto est = estimate_all_rows_ml(B.leftCols(T * 3), s.unrolled(T), 1.0);
            return relative_frobenius_error(est.estimate.C_hat, C);
        };
        err_short += err(30);
        err_long += err(300);
    }
    CHECK(err_long < err_short);
}
