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

// Running averages of per-slot costs and their CSV form.

#include "json.hpp"

#include <charconv>
#include <cstddef>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdsrl::harness {

/// Cumulative averages after slot n (1-based).
struct MetricsRecord {
    long long n = 0;
    double cum_cost = 0.0;
    double cum_power_w = 0.0;
    double cum_holding = 0.0;
    double cum_overflow = 0.0;
    /// Fraction of slots spent off with s_off chosen.
    double theta_off = 0.0;
    /// Mean of the last W multiplier values.
    double mu_window = 0.0;

    friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

/// What one slot contributes.
struct SlotSample {
    double cost = 0.0;
    double power_w = 0.0;
    double holding = 0.0;
    double overflow = 0.0;
    bool idle_off = false;
    double mu = 0.0;
};

class MetricsAccumulator {
public:
    explicit MetricsAccumulator(int window = 1000) : window_(static_cast<std::size_t>(window), 0.0) {
        if (window < 1) throw std::invalid_argument("metrics: window must be >= 1");
    }

    MetricsRecord add(const SlotSample& s) {
        ++n_;
        sum_cost_ += s.cost;
        sum_power_ += s.power_w;
        sum_holding_ += s.holding;
        sum_overflow_ += s.overflow;
        off_ += s.idle_off ? 1 : 0;
        window_[head_] = s.mu;
        head_ = (head_ + 1) % window_.size();
        return current();
    }

    MetricsRecord current() const {
        MetricsRecord r;
        r.n = n_;
        if (n_ == 0) return r;
        const double n = static_cast<double>(n_);
        r.cum_cost = sum_cost_ / n;
        r.cum_power_w = sum_power_ / n;
        r.cum_holding = sum_holding_ / n;
        r.cum_overflow = sum_overflow_ / n;
        r.theta_off = static_cast<double>(off_) / n;
        const std::size_t filled = n_ < static_cast<long long>(window_.size()) ? static_cast<std::size_t>(n_) : window_.size();
        double acc = 0.0;
        // Oldest to newest, so the sum does not depend on where the ring starts.
        for (std::size_t i = 0; i < filled; ++i) acc += window_[(head_ + window_.size() - filled + i) % window_.size()];
        r.mu_window = acc / static_cast<double>(filled);
        return r;
    }

    long long count() const noexcept { return n_; }

    nlohmann::json save() const {
        return {{"n", n_},         {"cost", sum_cost_}, {"power", sum_power_}, {"holding", sum_holding_},
                {"overflow", sum_overflow_}, {"off", off_}, {"window", window_}, {"head", head_}};
    }

    void load(const nlohmann::json& j) {
        std::vector<double> w = j.at("window").get<std::vector<double>>();
        if (w.size() != window_.size()) throw std::runtime_error("metrics: saved window size differs");
        n_ = j.at("n").get<long long>();
        sum_cost_ = j.at("cost").get<double>();
        sum_power_ = j.at("power").get<double>();
        sum_holding_ = j.at("holding").get<double>();
        sum_overflow_ = j.at("overflow").get<double>();
        off_ = j.at("off").get<long long>();
        head_ = j.at("head").get<std::size_t>();
        if (head_ >= w.size()) throw std::runtime_error("metrics: saved window head out of range");
        window_ = std::move(w);
    }

private:
    long long n_ = 0;
    double sum_cost_ = 0.0, sum_power_ = 0.0, sum_holding_ = 0.0, sum_overflow_ = 0.0;
    long long off_ = 0;
    std::vector<double> window_;
    std::size_t head_ = 0;
};

inline constexpr const char* kMetricsHeader = "n,cum_cost,cum_power_w,cum_holding,cum_overflow,theta_off,mu_window";

namespace detail {

inline void append_number(std::string& out, double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, r.ptr);
}

inline void append_number(std::string& out, long long v) {
    char buf[24];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, r.ptr);
}

}  // namespace detail

/// One CSV line with shortest round-trip number formatting.
inline std::string csv_row(const MetricsRecord& r) {
    std::string s;
    detail::append_number(s, r.n);
    for (double v : {r.cum_cost, r.cum_power_w, r.cum_holding, r.cum_overflow, r.theta_off, r.mu_window}) {
        s += ',';
        detail::append_number(s, v);
    }
    return s;
}

inline void write_csv(std::ostream& os, const std::vector<MetricsRecord>& rows, bool header = true) {
    if (header) os << kMetricsHeader << '\n';
    for (const auto& r : rows) os << csv_row(r) << '\n';
}

}  // namespace pdsrl::harness
