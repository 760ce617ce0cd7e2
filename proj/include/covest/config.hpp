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
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "covest/estimators.hpp"
#include "covest/scenario.hpp"
#include "covest/schedule.hpp"
#include "covest/types.hpp"

namespace covest {

enum class EstimatorKind { genie, ml, two_step, adaptive, ls };

inline const char* to_string(EstimatorKind e) {
    switch (e) {
        case EstimatorKind::genie: return "genie";
        case EstimatorKind::ml: return "ml";
        case EstimatorKind::two_step: return "two_step";
        case EstimatorKind::adaptive: return "adaptive";
        case EstimatorKind::ls: return "ls";
    }
    return "?";
}

enum class ScheduleMode { random, example442, imported };
enum class SweepAxis { T, Ttr };
enum class MlWeighting { per_row, shared };

struct ExperimentConfig {
    ScenarioConfig scenario;
    ProfileKind profile = BandLimitedProfile{-1, 8, 200.0, 20.0};

    ScheduleMode schedule_mode = ScheduleMode::random;
    Index schedule_length = 0;          // N; 0 selects min_schedule_length + 2
    std::string schedule_path;

    std::vector<EstimatorKind> estimators{EstimatorKind::genie, EstimatorKind::ml, EstimatorKind::two_step,
                                          EstimatorKind::adaptive, EstimatorKind::ls};
    SweepAxis axis = SweepAxis::T;
    std::vector<Index> sweep{20, 50, 100, 200};
    Index T = 70;                       // training phases when sweeping Ttr
    Index trials = 20;
    double coherence_length = 200.0;    // channel uses per coherence interval, for the pilot overhead
    Index eval_realizations = 50;
    Index served_cell = 0;

    double lambda = 0.99;
    MlOptions ml;
    MlWeighting ml_weighting = MlWeighting::per_row;

    bool has(EstimatorKind e) const { return std::find(estimators.begin(), estimators.end(), e) != estimators.end(); }

    // Schedule length N used for a given pilot count.
    Index schedule_length_for(Index Ttr) const {
        if (schedule_length > 0) return schedule_length;
        return min_schedule_length(scenario.K, Ttr) + 2;
    }

    // Structural checks that do not need the simulation. Throws config_error.
    void validate() const {
        auto fail = [](const std::string& field, const std::string& what) { throw config_error(0, field, what); };
        try {
            scenario.validate();
        } catch (const std::invalid_argument& e) {
            fail("scenario", e.what());
        }
        if (sweep.empty()) fail("sweep_values", "at least one value required");
        for (Index v : sweep)
            if (v < 1) fail("sweep_values", "values must be positive integers");
        if (trials < 1) fail("trials", "must be >= 1");
        if (T < 1) fail("T", "must be >= 1");
        if (eval_realizations < 1) fail("eval_realizations", "must be >= 1");
        if (estimators.empty()) fail("estimators", "at least one estimator required");
        if (!(lambda > 0.0 && lambda <= 1.0)) fail("lambda", "must lie in (0, 1]");
        if (!(ml.tol > 0.0)) fail("tol", "must be > 0");
        if (ml.max_iter < 1) fail("max_iter", "must be >= 1");
        if (!(coherence_length > 0.0)) fail("coherence_length", "must be > 0");
        if (served_cell < 0 || served_cell >= scenario.num_cells) fail("served_cell", "outside [0, num_cells)");
        if ((has(EstimatorKind::genie) || has(EstimatorKind::ml) || has(EstimatorKind::two_step) ||
             has(EstimatorKind::adaptive)) &&
            !(scenario.sigma_v2 > 0.0))
            fail("sigma_v2", "MMSE channel estimation needs sigma_v2 > 0");

        std::vector<Index> pilot_counts;
        if (axis == SweepAxis::Ttr) pilot_counts = sweep;
        else pilot_counts = {scenario.Ttr};
        for (Index Ttr : pilot_counts) {
            if (Ttr > scenario.K) fail("Ttr", "Ttr=" + std::to_string(Ttr) + " exceeds K");
            if (scenario.users_per_cell > Ttr)
                fail("Ttr", "users_per_cell=" + std::to_string(scenario.users_per_cell) +
                                " cannot use distinct pilots out of Ttr=" + std::to_string(Ttr));
            if (schedule_mode == ScheduleMode::random && schedule_length == 0 && Ttr < 2)
                fail("Ttr", "a random schedule needs Ttr >= 2");
        }
        if (schedule_mode == ScheduleMode::example442) {
            if (scenario.K != 4 || scenario.Ttr != 2 || axis == SweepAxis::Ttr)
                fail("schedule.mode", "example442 requires K=4, Ttr=2 and a T sweep");
        }
        if (schedule_mode == ScheduleMode::imported) {
            if (schedule_path.empty()) fail("schedule.path", "imported schedule needs a path");
            if (axis == SweepAxis::Ttr) fail("schedule.mode", "an imported schedule fixes Ttr; sweep T instead");
        }
    }
};

namespace detail {

inline std::string trim(std::string s) {
    auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
    s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
    s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
    return s;
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class T>
T parse_number(const std::string& text, int line, const std::string& key) {
    T value{};
    const char* first = text.data();
    const char* last = first + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw config_error(line, key, "cannot parse '" + text + "' as a number");
    return value;
}

}  // namespace detail

// Reads the key=value configuration. Sections: [scenario], [profile], [schedule], [experiment].
inline ExperimentConfig parse_config(std::istream& is, const std::string& base_dir = "") {
    using detail::parse_number;
    ExperimentConfig cfg;
    std::string section;
    std::string line;
    int lineno = 0;

    std::map<std::string, std::string> profile_keys;
    std::map<std::string, int> profile_lines;
    std::string profile_kind = "band_limited";
    int profile_kind_line = 0;

    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw config_error(lineno, line, "malformed section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section != "scenario" && section != "profile" && section != "schedule" && section != "experiment")
                throw config_error(lineno, section, "unknown section");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw config_error(lineno, line, "expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (section.empty()) throw config_error(lineno, key, "key outside of a section");
        if (value.empty()) throw config_error(lineno, key, "missing value");
        const std::string field = section + "." + key;

        auto as_index = [&] { return parse_number<Index>(value, lineno, field); };
        auto as_double = [&] { return parse_number<double>(value, lineno, field); };

        if (section == "scenario") {
            auto& s = cfg.scenario;
            if (key == "M") s.M = as_index();
            else if (key == "K") s.K = as_index();
            else if (key == "Ttr") s.Ttr = as_index();
            else if (key == "sigma_v2") s.sigma_v2 = as_double();
            else if (key == "num_cells") s.num_cells = as_index();
            else if (key == "users_per_cell") s.users_per_cell = as_index();
            else if (key == "seed") s.seed = parse_number<std::uint64_t>(value, lineno, field);
            else throw config_error(lineno, field, "unknown key");
        } else if (section == "profile") {
            if (key == "kind") {
                profile_kind = value;
                profile_kind_line = lineno;
            } else if (key == "power" || key == "width" || key == "center" || key == "dynamic_range_db" ||
                       key == "support_fraction" || key == "total_power") {
                profile_keys[key] = value;
                profile_lines[key] = lineno;
            } else {
                throw config_error(lineno, field, "unknown key");
            }
        } else if (section == "schedule") {
            if (key == "mode") {
                if (value == "random") cfg.schedule_mode = ScheduleMode::random;
                else if (value == "example442") cfg.schedule_mode = ScheduleMode::example442;
                else if (value == "imported") cfg.schedule_mode = ScheduleMode::imported;
                else throw config_error(lineno, field, "expected random, example442 or imported");
            } else if (key == "length") {
                cfg.schedule_length = as_index();
                if (cfg.schedule_length < 0) throw config_error(lineno, field, "must be >= 0");
            } else if (key == "path") {
                cfg.schedule_path = (base_dir.empty() || value.front() == '/') ? value : base_dir + "/" + value;
            } else {
                throw config_error(lineno, field, "unknown key");
            }
        } else {  // experiment
            if (key == "estimators") {
                cfg.estimators.clear();
                for (const auto& name : detail::split_list(value)) {
                    EstimatorKind e;
                    if (name == "genie") e = EstimatorKind::genie;
                    else if (name == "ml") e = EstimatorKind::ml;
                    else if (name == "two_step") e = EstimatorKind::two_step;
                    else if (name == "adaptive") e = EstimatorKind::adaptive;
                    else if (name == "ls") e = EstimatorKind::ls;
                    else throw config_error(lineno, field, "unknown estimator '" + name + "'");
                    if (!cfg.has(e)) cfg.estimators.push_back(e);
                }
            } else if (key == "sweep_axis") {
                if (value == "T") cfg.axis = SweepAxis::T;
                else if (value == "Ttr") cfg.axis = SweepAxis::Ttr;
                else throw config_error(lineno, field, "expected T or Ttr");
            } else if (key == "sweep_values") {
                cfg.sweep.clear();
                for (const auto& v : detail::split_list(value)) cfg.sweep.push_back(parse_number<Index>(v, lineno, field));
            } else if (key == "T") cfg.T = as_index();
            else if (key == "trials") cfg.trials = as_index();
            else if (key == "coherence_length") cfg.coherence_length = as_double();
            else if (key == "eval_realizations") cfg.eval_realizations = as_index();
            else if (key == "served_cell") cfg.served_cell = as_index();
            else if (key == "lambda") cfg.lambda = as_double();
            else if (key == "tol") cfg.ml.tol = as_double();
            else if (key == "max_iter") cfg.ml.max_iter = static_cast<int>(as_index());
            else if (key == "ml_weighting") {
                if (value == "per_row") cfg.ml_weighting = MlWeighting::per_row;
                else if (value == "shared") cfg.ml_weighting = MlWeighting::shared;
                else throw config_error(lineno, field, "expected per_row or shared");
            } else {
                throw config_error(lineno, field, "unknown key");
            }
        }
    }

    auto get = [&](const std::string& key, auto fallback) {
        using T = decltype(fallback);
        const auto it = profile_keys.find(key);
        if (it == profile_keys.end()) return fallback;
        return parse_number<T>(it->second, profile_lines[key], "profile." + key);
    };
    auto reject = [&](std::initializer_list<const char*> keys) {
        for (const char* k : keys)
            if (profile_keys.count(k))
                throw config_error(profile_lines[k], std::string("profile.") + k,
                                   "not used by profile kind '" + profile_kind + "'");
    };
    if (profile_kind == "uniform") {
        reject({"width", "center", "dynamic_range_db", "support_fraction", "total_power"});
        cfg.profile = UniformProfile{get("power", 1.0)};
    } else if (profile_kind == "band_limited") {
        reject({"support_fraction", "total_power"});
        cfg.profile = BandLimitedProfile{get("center", Index{-1}), get("width", Index{8}), get("power", 200.0),
                                         get("dynamic_range_db", 20.0)};
    } else if (profile_kind == "random_sparse") {
        reject({"width", "center", "power"});
        cfg.profile = RandomSparseProfile{get("support_fraction", 0.25), get("total_power", 200.0),
                                          get("dynamic_range_db", 20.0)};
    } else {
        throw config_error(profile_kind_line, "profile.kind", "expected uniform, band_limited or random_sparse");
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error(0, path, "cannot open config file");
    const auto slash = path.find_last_of('/');
    return parse_config(in, slash == std::string::npos ? "" : path.substr(0, slash));
}

}  // namespace covest
