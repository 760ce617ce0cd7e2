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

// Command-line driver: run experiments, generate/inspect schedules, validate configs.
// Exit codes: 0 success, 1 configuration error, 2 runtime or numerical error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "covest.hpp"

namespace {

constexpr int exit_config = 1;
constexpr int exit_runtime = 2;

int cmd_run(const std::string& config_path, const std::string& out_path, std::int64_t seed_base, unsigned threads,
            bool timing, bool log_ml) {
    const auto cfg = covest::load_config(config_path);
    cfg.validate();
    covest::RunOptions opt;
    if (seed_base >= 0) opt.seed_base = static_cast<std::uint64_t>(seed_base);
    opt.threads = threads;
    opt.timing = timing;
    opt.ml_diagnostics = log_ml;
    const auto result = covest::run_experiment(cfg, opt);
    for (const auto& line : result.diagnostics) std::cerr << line << '\n';
    if (out_path.empty() || out_path == "-") covest::write_csv(std::cout, result);
    else covest::emit_csv(result, out_path);
    return 0;
}

int cmd_validate(const std::string& config_path) {
    const auto cfg = covest::load_config(config_path);
    cfg.validate();
    if (cfg.schedule_mode == covest::ScheduleMode::imported) {
        std::ifstream in(cfg.schedule_path);
        if (!in) throw covest::config_error(0, cfg.schedule_path, "cannot open schedule file");
        const auto s = covest::read_schedule(in, cfg.scenario.Ttr);
        if (s.users() != cfg.scenario.K) throw covest::config_error(0, cfg.schedule_path, "user count differs from K");
    }
    std::cout << "ok: M=" << cfg.scenario.M << " K=" << cfg.scenario.K << " Ttr=" << cfg.scenario.Ttr
              << " sweep=" << (cfg.axis == covest::SweepAxis::T ? "T" : "Ttr") << " points=" << cfg.sweep.size()
              << " trials=" << cfg.trials << '\n';
    return 0;
}

void print_rank(const covest::Schedule& s) {
    const auto info = covest::rank_and_condition(s);
    std::cout << "users=" << s.users() << " pilots=" << s.pilots() << " length=" << s.length()
              << " rank=" << info.rank << " rank_bound=" << covest::max_compound_rank(s.pilots(), s.length())
              << " condition=" << covest::format_g6(info.condition)
              << " identifiable=" << (info.rank == s.users() ? "yes" : "no") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Covariance estimation experiments for massive MIMO uplink training"};
    app.require_subcommand(1);

    std::string config_path, out_path;
    std::int64_t seed_base = -1;
    unsigned threads = 1;
    bool timing = false, log_ml = false;
    auto* run = app.add_subcommand("run", "Run an experiment sweep and write CSV");
    run->add_option("config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
    run->add_option("--out,-o", out_path, "Output CSV path (default stdout)");
    run->add_option("--seed-base", seed_base, "First seed (default scenario.seed)");
    run->add_option("--threads,-j", threads, "Worker threads")->check(CLI::PositiveNumber);
    run->add_flag("--timing", timing, "Record estimator runtime in runtime_ms");
    run->add_flag("--log-ml", log_ml, "Print one fixed-point diagnostic line per antenna row to stderr");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Check a config without running it");
    validate->add_option("config", validate_path, "Experiment config file")->required();

    auto* schedule = app.add_subcommand("schedule", "Generate or inspect pilot schedules");
    schedule->require_subcommand(1);
    covest::Index K = 12, Ttr = 5, N = 0, cells = 1;
    std::uint64_t seed = 1;
    std::string sched_out;
    auto* gen = schedule->add_subcommand("generate", "Draw a random schedule with distinct pilots per cell");
    gen->add_option("--K", K, "Users")->required();
    gen->add_option("--Ttr", Ttr, "Pilots per interval")->required();
    gen->add_option("--N", N, "Schedule length (default minimum + 2)");
    gen->add_option("--cells", cells, "Number of equally sized cells");
    gen->add_option("--seed", seed, "RNG seed");
    gen->add_option("--out,-o", sched_out, "Output file (default stdout)");
    std::string inspect_path;
    covest::Index inspect_ttr = 0;
    auto* inspect = schedule->add_subcommand("inspect", "Report rank and condition number of a schedule file");
    inspect->add_option("file", inspect_path, "Schedule file")->required()->check(CLI::ExistingFile);
    inspect->add_option("--Ttr", inspect_ttr, "Pilot count (default: largest index + 1)");
    auto* example = schedule->add_subcommand("example", "Print the K=4, Ttr=2, N=3 example schedule");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }

    try {
        if (*run) return cmd_run(config_path, out_path, seed_base, threads, timing, log_ml);
        if (*validate) return cmd_validate(validate_path);
        if (*gen) {
            if (cells < 1 || K % cells != 0) throw covest::config_error(0, "--cells", "must divide K");
            const auto grouping = covest::UserGrouping::contiguous(cells, K / cells);
            if (N == 0) N = covest::min_schedule_length(K, Ttr) + 2;
            covest::SeededRng rng = covest::SeededRng::derive(seed, covest::Stream::schedule, std::uint64_t(Ttr));
            const auto s = covest::make_random_schedule(K, Ttr, N, grouping, rng);
            if (sched_out.empty()) {
                covest::write_schedule(std::cout, s);
            } else {
                std::ofstream f(sched_out);
                if (!f) throw covest::error("cannot write " + sched_out);
                covest::write_schedule(f, s);
            }
            print_rank(s);
            return 0;
        }
        if (*inspect) {
            std::ifstream f(inspect_path);
            print_rank(covest::read_schedule(f, inspect_ttr));
            return 0;
        }
        if (*example) {
            const auto s = covest::make_example_schedule_442();
            covest::write_schedule(std::cout, s);
            print_rank(s);
            return 0;
        }
    } catch (const covest::config_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    } catch (const covest::infeasible_constraint& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_runtime;
    }
    return 0;
}
