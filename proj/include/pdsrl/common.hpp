/*
 * Copyright 2026 The pdsrl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdsrl {

/// Invalid or inconsistent configuration values.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An action that is not allowed in the given state.
class FeasibilityError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// An iterative solver stopped before reaching its tolerance.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
          residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// The offline PDS initialization would leave the card stuck in the off state.
class InitializationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Probability mass over a contiguous range of integers starting at `offset`.
struct Pmf {
    int offset = 0;
    std::vector<double> mass;

    int lo() const noexcept { return offset; }
    int hi() const noexcept { return offset + static_cast<int>(mass.size()) - 1; }
    double operator()(int k) const noexcept {
        return (k < lo() || k > hi()) ? 0.0 : mass[static_cast<std::size_t>(k - offset)];
    }
    double total() const noexcept { return std::accumulate(mass.begin(), mass.end(), 0.0); }
    double mean() const noexcept {
        double m = 0.0;
        for (std::size_t i = 0; i < mass.size(); ++i) m += mass[i] * static_cast<double>(offset + static_cast<int>(i));
        return m;
    }
};

inline double sum(std::span<const double> xs) noexcept { return std::accumulate(xs.begin(), xs.end(), 0.0); }

inline double sup_norm_diff(std::span<const double> a, std::span<const double> b) noexcept {
    double r = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) r = std::max(r, std::abs(a[i] - b[i]));
    return r;
}

inline double sup_norm(std::span<const double> a) noexcept {
    double r = 0.0;
    for (double v : a) r = std::max(r, std::abs(v));
    return r;
}

}  // namespace pdsrl
