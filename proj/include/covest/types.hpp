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

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace covest {

using Index = Eigen::Index;
using cplx = std::complex<double>;

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

// Base of every error thrown by the library. The CLI maps these onto exit codes.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class invalid_profile : public error {
public:
    using error::error;
};

class infeasible_constraint : public error {
public:
    using error::error;
};

class shape_error : public error {
public:
    using error::error;
};

class domain_error : public error {
public:
    using error::error;
};

class singular_system : public error {
public:
    using error::error;
};

// Compound allocation has rank < K, so channel variances are not unique.
class identifiability_error : public error {
public:
    identifiability_error(Index rank, Index users)
        : error("compound allocation has rank " + std::to_string(rank) + " < " +
                std::to_string(users) + " users; channel covariances are not identifiable"),
          rank_(rank), users_(users) {}

    Index rank() const noexcept { return rank_; }
    Index users() const noexcept { return users_; }

private:
    Index rank_;
    Index users_;
};

class config_error : public error {
public:
    config_error(int line, std::string field, const std::string& what)
        : error(format(line, field, what)), line_(line), field_(std::move(field)) {}

    int line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    static std::string format(int line, const std::string& field, const std::string& what) {
        std::string msg = "config";
        if (line > 0) msg += ":" + std::to_string(line);
        if (!field.empty()) msg += ": '" + field + "'";
        return msg + ": " + what;
    }

    int line_;
    std::string field_;
};

}  // namespace covest
