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
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "covest/adaptive.hpp"
#include "covest/channel.hpp"
#include "covest/config.hpp"
#include "covest/estimators.hpp"
#include "covest/link_level.hpp"
#include "covest/rng.hpp"
#include "covest/scenario.hpp"
#include "covest/schedule.hpp"

namespace covest {

// A metric that is a number, not applicable (LS has no covariance estimate), or
// unavailable because the schedule cannot identify all users.
struct Metric {
    enum class State { value, not_applicable, unidentifiable };
    State state = State::not_applicable;
    double value = 0.0;

    static Metric of(double v) { return {State::value, v}; }
    static Metric na() { return {State::not_applicable, 0.0}; }
    static Metric unidentifiable() { return {State::unidentifiable, 0.0}; }

    bool has_value() const noexcept { return state == State::value; }
    friend bool operator==(const Metric&, const Metric&) = default;
};

struct ExperimentRecord {
    Index axis = 0;
    std::string estimator;
    std::uint64_t seed = 0;
    Metric sum_rate;
    Metric cov_rmse;
    double runtime_ms = 0.0;
};

struct ExperimentResult {
    std::vector<ExperimentRecord> records;
    std::vector<std::string> diagnostics;  // one ml_fixed_point line per antenna row and unit
};

struct RunOptions {
    std::optional<std::uint64_t> seed_base;  // defaults to scenario.seed
    unsigned threads = 1;
    bool timing = false;                     // runtime_ms stays 0 unless set, keeping output reproducible
    bool ml_diagnostics = false;
};

inline double relative_frobenius_error(const Matrix& estimate, const Matrix& truth) {
    return (estimate - truth).norm() / truth.norm();
}

namespace detail {

struct UnitOutput {
    std::vector<ExperimentRecord> records;
    std::vector<std::string> diagnostics;
};

inline Schedule build_schedule(const ExperimentConfig& cfg, Index Ttr, std::uint64_t seed) {
    switch (cfg.schedule_mode) {
        case ScheduleMode::example442: return make_example_schedule_442();
        case ScheduleMode::imported: {
            std::ifstream in(cfg.schedule_path);
            if (!in) throw config_error(0, cfg.schedule_path, "cannot open schedule file");
            Schedule s = read_schedule(in, Ttr);
            if (s.users() != cfg.scenario.K)
                throw config_error(0, cfg.schedule_path,
                                   "schedule has " + std::to_string(s.users()) + " users, config has K=" +
                                       std::to_string(cfg.scenario.K));
            return s;
        }
        case ScheduleMode::random: break;
    }
    const Index K = cfg.scenario.K;
    const Index N = cfg.schedule_length_for(Ttr);
    auto rng = SeededRng::derive(seed, Stream::schedule, static_cast<std::uint64_t>(Ttr));
    const auto grouping = UserGrouping::from(cfg.scenario);
    try {
        return make_random_schedule(K, Ttr, N, grouping, rng);
    } catch (const identifiability_error&) {
        // Redraws exhausted; keep one draw and let the estimators report it.
        auto again = SeededRng::derive(seed, Stream::schedule, static_cast<std::uint64_t>(Ttr));
        return draw_random_schedule(K, Ttr, N, grouping, again);
    }
}

inline UnitOutput run_unit(const ExperimentConfig& cfg, Index axis_value, std::uint64_t seed, const RunOptions& opt) {
    using clock = std::chrono::steady_clock;
    ScenarioConfig sc = cfg.scenario;
    Index T = cfg.T;
    if (cfg.axis == SweepAxis::T) T = axis_value;
    else sc.Ttr = axis_value;
    sc.seed = seed;
    const double s2 = sc.sigma_v2;

    // Covariances and evaluation channels depend on the seed only, so sweep points share them.
    auto cov_rng = SeededRng::derive(seed, Stream::covariance);
    const CovarianceSet truth = generate_covariance_set(sc, cfg.profile, cov_rng);
    const Schedule schedule = build_schedule(cfg, sc.Ttr, seed);

    auto train_rng = SeededRng::derive(seed, Stream::training);
    auto train_noise = SeededRng::derive(seed, Stream::training_noise, static_cast<std::uint64_t>(sc.Ttr));
    const auto blocks = simulate_training(truth, schedule, T, s2, train_rng, train_noise);
    const Matrix B = squared_rows(blocks).B;
    const Matrix Pi = schedule.unrolled(T);
    const bool identifiable = numerical_rank(Pi).rank == sc.K;

    UnitOutput out;
    struct Candidate {
        EstimatorKind kind;
        std::optional<Matrix> cov;  // empty: LS or unidentifiable
        bool unidentifiable = false;
        double runtime_ms = 0.0;
    };
    std::vector<Candidate> cands;

    std::optional<CovEstimate> two_step;
    double two_step_ms = 0.0;  // charged to two_step and to ML, which starts from it
    auto two_step_estimate = [&]() -> const CovEstimate& {
        if (!two_step) {
            const auto t0 = clock::now();
            if (T % schedule.length() == 0) {
                const auto obs = estimate_obs_covariances({B}, schedule);
                two_step = two_step_reconstruct(obs, schedule, s2);
            } else {
                two_step = shared_scaling_estimate(B, Pi, Vector::Ones(Pi.cols()), s2);
            }
            two_step_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        }
        return *two_step;
    };

    for (EstimatorKind kind : cfg.estimators) {
        Candidate c{kind, std::nullopt};
        const bool two_step_cached = two_step.has_value();
        const auto start = clock::now();
        switch (kind) {
            case EstimatorKind::genie: c.cov = genie_covariances(truth).C; break;
            case EstimatorKind::ls: break;
            case EstimatorKind::two_step:
                if (identifiable) c.cov = two_step_estimate().C_hat;
                else c.unidentifiable = true;
                break;
            case EstimatorKind::ml:
                if (!identifiable) {
                    c.unidentifiable = true;
                } else if (cfg.ml_weighting == MlWeighting::shared) {
                    const Vector w = shared_weights(two_step_estimate(), Pi, s2);
                    c.cov = shared_scaling_estimate(B, Pi, w, s2).C_hat;
                } else {
                    const auto res = estimate_all_rows_ml(B, Pi, s2, cfg.ml, two_step_estimate());
                    c.cov = res.estimate.C_hat;
                    if (opt.ml_diagnostics) {
                        for (std::size_t m = 0; m < res.rows.size(); ++m)
                            out.diagnostics.push_back("axis=" + std::to_string(axis_value) + " seed=" +
                                                      std::to_string(seed) + " " +
                                                      format_diagnostic(res.rows[m], Index(m)));
                    }
                }
                break;
            case EstimatorKind::adaptive: {
                Matrix est(sc.M, sc.K);
                for (Index m = 0; m < sc.M; ++m) {
                    AdaptiveEstimator row(sc.K, cfg.lambda);
                    for (Index t = 0; t < T; ++t)
                        row.update(schedule.at_interval(t), B.row(m).segment(t * sc.Ttr, sc.Ttr).transpose(), s2);
                    est.row(m) = row.estimate().transpose();
                }
                c.cov = std::move(est);
                break;
            }
        }
        if (opt.timing) {
            c.runtime_ms = std::chrono::duration<double, std::milli>(clock::now() - start).count();
            if (two_step_cached && (kind == EstimatorKind::two_step || kind == EstimatorKind::ml))
                c.runtime_ms += two_step_ms;
        }
        cands.push_back(std::move(c));
    }

    // Fresh evaluation intervals, identical for every estimator.
    const auto served = UserGrouping::from(sc).members(cfg.served_cell);
    const double overhead = pilot_overhead_factor(sc.Ttr, cfg.coherence_length);
    std::vector<double> rate_sum(cands.size(), 0.0);
    auto eval_rng = SeededRng::derive(seed, Stream::evaluation);
    auto eval_noise = SeededRng::derive(seed, Stream::evaluation_noise, static_cast<std::uint64_t>(sc.Ttr));
    for (Index r = 0; r < cfg.eval_realizations; ++r) {
        const Allocation& alloc = schedule.at_interval(r);
        const auto h = draw_channels(truth, eval_rng);
        const auto block = observe(h, alloc, s2, eval_noise, r);
        for (std::size_t i = 0; i < cands.size(); ++i) {
            const auto& c = cands[i];
            if (c.unidentifiable) continue;
            const auto est = c.kind == EstimatorKind::ls
                                 ? estimate_served_channels(block, alloc, served, Matrix(), s2, ChannelEstimator::ls)
                                 : estimate_served_channels(block, alloc, served, *c.cov, s2, ChannelEstimator::mmse);
            rate_sum[i] += uplink_sum_rate(rzf_filter(est.H_hat, s2), h.H, served, s2, overhead);
        }
    }

    for (std::size_t i = 0; i < cands.size(); ++i) {
        const auto& c = cands[i];
        ExperimentRecord rec{axis_value, to_string(c.kind), seed, Metric::unidentifiable(), Metric::unidentifiable(),
                             c.runtime_ms};
        if (!c.unidentifiable) {
            rec.sum_rate = Metric::of(rate_sum[i] / double(cfg.eval_realizations));
            rec.cov_rmse = c.cov ? Metric::of(relative_frobenius_error(*c.cov, truth.C)) : Metric::na();
        }
        out.records.push_back(std::move(rec));
    }
    return out;
}

inline void sort_records(std::vector<ExperimentRecord>& records) {
    std::stable_sort(records.begin(), records.end(), [](const ExperimentRecord& a, const ExperimentRecord& b) {
        if (a.axis != b.axis) return a.axis < b.axis;
        if (a.estimator != b.estimator) return a.estimator < b.estimator;
        return a.seed < b.seed;
    });
}

}  // namespace detail

// Sweep x seed grid; every unit is independent and seeded from (seed, stream), so the
// result is identical for any thread count.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
    cfg.validate();
    const std::uint64_t base = opt.seed_base.value_or(cfg.scenario.seed);
    struct Unit {
        Index axis;
        std::uint64_t seed;
    };
    std::vector<Unit> units;
    for (Index v : cfg.sweep)
        for (Index j = 0; j < cfg.trials; ++j) units.push_back({v, base + static_cast<std::uint64_t>(j)});

    std::vector<detail::UnitOutput> outputs(units.size());
    std::vector<std::exception_ptr> errors(units.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < units.size(); i = next++) {
            try {
                outputs[i] = detail::run_unit(cfg, units[i].axis, units[i].seed, opt);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(units.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    ExperimentResult result;
    for (auto& o : outputs) {
        for (auto& r : o.records) result.records.push_back(std::move(r));
        for (auto& d : o.diagnostics) result.diagnostics.push_back(std::move(d));
    }
    detail::sort_records(result.records);
    return result;
}

// ---- CSV ----------------------------------------------------------------

inline constexpr const char* csv_header = "axis,estimator,seed,sum_rate,cov_rmse,runtime_ms";

inline std::string format_g6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string format_metric(const Metric& m) {
    switch (m.state) {
        case Metric::State::value: return format_g6(m.value);
        case Metric::State::not_applicable: return "na";
        case Metric::State::unidentifiable: return "unidentifiable";
    }
    return "";
}

inline void write_csv(std::ostream& os, const ExperimentResult& result) {
    auto records = result.records;
    detail::sort_records(records);
    os << csv_header << '\n';
    for (const auto& r : records)
        os << r.axis << ',' << r.estimator << ',' << r.seed << ',' << format_metric(r.sum_rate) << ','
           << format_metric(r.cov_rmse) << ',' << format_g6(r.runtime_ms) << '\n';
}

inline void emit_csv(const ExperimentResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw error("emit_csv: cannot open '" + path + "' for writing");
    write_csv(out, result);
    out.flush();
    if (!out) throw error("emit_csv: write to '" + path + "' failed");
}

inline std::vector<ExperimentRecord> parse_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != csv_header) throw shape_error("parse_csv: missing or unexpected header");
    auto metric = [](const std::string& s) {
        if (s == "na") return Metric::na();
        if (s == "unidentifiable") return Metric::unidentifiable();
        return Metric::of(std::stod(s));
    };
    std::vector<ExperimentRecord> out;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 6) throw shape_error("parse_csv: line " + std::to_string(lineno) + " has " +
                                             std::to_string(f.size()) + " fields");
        out.push_back({static_cast<Index>(std::stoll(f[0])), f[1], std::stoull(f[2]), metric(f[3]), metric(f[4]),
                       std::stod(f[5])});
    }
    return out;
}

}  // namespace covest
