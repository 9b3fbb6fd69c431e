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

// FIFO transmission buffer with binomial departures and i.i.d. arrivals.

#include "pdsrl/common.hpp"
#include "pdsrl/phy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace pdsrl::queue {

/// Per-slot arrival count distribution over {0..max_arrivals()}.
class ArrivalDistribution {
public:
    ArrivalDistribution() : pmf_{1.0} {}

    explicit ArrivalDistribution(std::vector<double> pmf) : pmf_(std::move(pmf)) {
        if (pmf_.empty()) throw ConfigError("arrivals: empty pmf");
        for (double p : pmf_)
            if (!(p >= 0.0)) throw ConfigError("arrivals: negative mass");
        const double total = sum(pmf_);
        if (std::abs(total - 1.0) > 1e-12) throw ConfigError("arrivals: pmf must sum to 1");
    }

    static ArrivalDistribution deterministic(int k) {
        if (k < 0) throw ConfigError("arrivals: negative deterministic count");
        std::vector<double> p(static_cast<std::size_t>(k) + 1, 0.0);
        p.back() = 1.0;
        return ArrivalDistribution(std::move(p));
    }

    /// Poisson(mean) truncated where the tail drops below `tail_mass`; the tail folds into the last bin.
    static ArrivalDistribution poisson(double mean, double tail_mass = 1e-9) {
        if (!(mean >= 0.0)) throw ConfigError("arrivals: negative Poisson mean");
        if (mean == 0.0) return deterministic(0);
        std::vector<double> p;
        double term = std::exp(-mean);
        double cdf = 0.0;
        for (int l = 0;; ++l) {
            p.push_back(term);
            cdf += term;
            if (1.0 - cdf < tail_mass && static_cast<double>(l) >= mean) break;
            term *= mean / static_cast<double>(l + 1);
        }
        const double head = sum(std::span<const double>(p).first(p.size() - 1));
        p.back() = 1.0 - head;
        return ArrivalDistribution(std::move(p));
    }

    /// Uniform over {0..n}.
    static ArrivalDistribution uniform(int n) {
        if (n < 0) throw ConfigError("arrivals: negative uniform bound");
        return ArrivalDistribution(std::vector<double>(static_cast<std::size_t>(n) + 1, 1.0 / (n + 1.0)));
    }

    int max_arrivals() const noexcept { return static_cast<int>(pmf_.size()) - 1; }
    double operator()(int l) const noexcept {
        return (l < 0 || l > max_arrivals()) ? 0.0 : pmf_[static_cast<std::size_t>(l)];
    }
    const std::vector<double>& pmf() const noexcept { return pmf_; }
    double mean() const noexcept {
        double m = 0.0;
        for (std::size_t l = 0; l < pmf_.size(); ++l) m += static_cast<double>(l) * pmf_[l];
        return m;
    }

    friend bool operator==(const ArrivalDistribution&, const ArrivalDistribution&) = default;

private:
    std::vector<double> pmf_;
};

struct QueueConfig {
    int capacity = 25;
    /// Penalty per dropped packet.
    double eta = 49.0;

    void validate(double gamma) const {
        if (capacity < 1) throw ConfigError("queue: capacity must be >= 1");
        if (eta < gamma / (1.0 - gamma) - 1e-12) throw ConfigError("queue: eta must be >= gamma / (1 - gamma)");
    }
};

/// Buffer recursion: packets left after transmission plus arrivals, clamped at capacity.
inline int next_buffer(int b, int f, int l, int capacity) {
    if (f < 0 || f > b) throw std::invalid_argument("next_buffer: goodput must be in [0, b]");
    if (l < 0) throw std::invalid_argument("next_buffer: negative arrivals");
    return std::min(b - f + l, capacity);
}

/// Packets dropped when `l` packets arrive to a buffer holding `b_post` after transmission.
constexpr int overflow_count(int b_post, int l, int capacity) noexcept { return std::max(b_post + l - capacity, 0); }

/// Distribution of the next buffer state, as a vector over {0..capacity}.
inline std::vector<double> buffer_transition_pmf(int b, int z, double plr, const ArrivalDistribution& arrivals,
                                                 int capacity) {
    if (z < 0 || z > b || b > capacity) throw FeasibilityError("buffer_transition_pmf: need 0 <= z <= b <= B");
    std::vector<double> next(static_cast<std::size_t>(capacity) + 1, 0.0);
    const auto goodput = phy::goodput_pmf(plr, z);
    for (int f = 0; f <= z; ++f) {
        const double pf = goodput[static_cast<std::size_t>(f)];
        if (pf == 0.0) continue;
        const int post = b - f;
        for (int l = 0; l <= arrivals.max_arrivals(); ++l)
            next[static_cast<std::size_t>(std::min(post + l, capacity))] += pf * arrivals(l);
    }
    return next;
}

/// Expected overflow count E[max(b_post + l - B, 0)] over the arrival distribution.
inline double expected_overflow(int b_post, const ArrivalDistribution& arrivals, int capacity) {
    double e = 0.0;
    for (int l = capacity - b_post + 1; l <= arrivals.max_arrivals(); ++l)
        e += arrivals(l) * static_cast<double>(overflow_count(b_post, l, capacity));
    return e;
}

/// Expected holding cost plus eta-weighted expected overflow for one slot.
inline double buffer_cost(int b, int z, double plr, const ArrivalDistribution& arrivals, const QueueConfig& cfg) {
    if (z < 0 || z > b || b > cfg.capacity) throw FeasibilityError("buffer_cost: need 0 <= z <= b <= B");
    const auto goodput = phy::goodput_pmf(plr, z);
    double cost = 0.0;
    for (int f = 0; f <= z; ++f) {
        const int post = b - f;
        cost += goodput[static_cast<std::size_t>(f)] *
                (static_cast<double>(post) + cfg.eta * expected_overflow(post, arrivals, cfg.capacity));
    }
    return cost;
}

/// Smallest overflow penalty that makes dropping a packet no cheaper than holding it forever,
/// gamma / (1 - gamma). Gamma is read as the shortest decimal that round-trips to it, so 0.98 gives 49.
inline double overflow_penalty(double gamma) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::domain_error("overflow_penalty: gamma must be in [0, 1)");
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, gamma, std::chars_format::fixed);
    const std::string_view text(buf, static_cast<std::size_t>(res.ptr - buf));
    const auto dot = text.find('.');
    if (dot == std::string_view::npos) return 0.0;
    const std::string_view digits = text.substr(dot + 1);
    if (digits.size() > 17) return gamma / (1.0 - gamma);
    std::int64_t num = 0, den = 1;
    for (char c : digits) {
        num = num * 10 + (c - '0');
        den *= 10;
    }
    return static_cast<double>(num) / static_cast<double>(den - num);
}

}  // namespace pdsrl::queue
