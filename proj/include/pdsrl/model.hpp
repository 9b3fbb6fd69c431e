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

// State and action spaces of the joint buffer/channel/power-management
// system, plus the precomputed "known" quantities shared by every solver:
// per-slot power, expected holding cost and goodput distributions.

#include "pdsrl/common.hpp"
#include "pdsrl/phy.hpp"
#include "pdsrl/power_mgmt.hpp"
#include "pdsrl/traffic_queue.hpp"

#include <array>
#include <cassert>
#include <vector>

namespace pdsrl {

using power::PmAction;
using power::PowerState;

/// Joint system state (buffer, channel index, power state).
struct State {
    int b = 0;
    int h = 0;
    PowerState x = PowerState::on;

    friend bool operator==(const State&, const State&) = default;
};

/// Post-decision state: buffer after transmission, current channel, next power state.
/// It shares the component sets of State.
using PostDecisionState = State;

/// Joint action (power-management action, throughput, index into the PLR grid).
/// Actions with z = 0 carry the placeholder PLR index 0.
struct Action {
    PmAction y = PmAction::s_off;
    int z = 0;
    int plr = 0;

    friend bool operator==(const Action&, const Action&) = default;
};

/// Everything about the system that the controller knows a priori.
struct SystemConfig {
    phy::PhyConfig phy;
    power::PowerProfile power;
    queue::QueueConfig queue;
    std::vector<double> channel_gains_db{-18.82, -13.79, -11.23, -9.37, -7.80, -6.30, -4.68, -2.08};
    std::vector<double> plr_levels{0.01, 0.02, 0.04, 0.08, 0.16};
    int z_max = 10;
    double gamma = 0.98;

    int num_channels() const noexcept { return static_cast<int>(channel_gains_db.size()); }
    int num_plr() const noexcept { return static_cast<int>(plr_levels.size()); }
    int capacity() const noexcept { return queue.capacity; }

    void validate() const {
        phy.validate();
        power.validate();
        if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must be in [0, 1)");
        queue.validate(gamma);
        phy::validate_gain_table(channel_gains_db);
        if (plr_levels.empty()) throw ConfigError("empty PLR grid");
        for (std::size_t i = 0; i < plr_levels.size(); ++i) {
            if (!(plr_levels[i] > 0.0 && plr_levels[i] < 1.0)) throw ConfigError("PLR levels must be in (0, 1)");
            if (i > 0 && !(plr_levels[i] > plr_levels[i - 1])) throw ConfigError("PLR grid must be increasing");
        }
        if (z_max < 0) throw ConfigError("z_max must be >= 0");
        for (int z = 1; z <= z_max; ++z) (void)phy::bits_per_symbol(z, phy);
        for (double plr : plr_levels)
            if (phy::bep_of_plr(plr, phy.packet_size_bits) > 0.5) throw ConfigError("PLR grid implies BEP > 0.5");
    }
};

/// Dense index over State (and PostDecisionState).
class StateSpace {
public:
    StateSpace() = default;
    StateSpace(int capacity, int num_channels) : capacity_(capacity), channels_(num_channels) {}
    explicit StateSpace(const SystemConfig& cfg) : StateSpace(cfg.capacity(), cfg.num_channels()) {}

    int size() const noexcept { return (capacity_ + 1) * channels_ * power::kNumPowerStates; }
    int capacity() const noexcept { return capacity_; }
    int num_channels() const noexcept { return channels_; }

    int index(const State& s) const noexcept {
        return (s.b * channels_ + s.h) * power::kNumPowerStates + power::index_of(s.x);
    }
    int index(int b, int h, PowerState x) const noexcept { return index(State{b, h, x}); }
    State state(int i) const noexcept {
        const int x = i % power::kNumPowerStates;
        const int rest = i / power::kNumPowerStates;
        return {rest / channels_, rest % channels_, power::power_state_at(x)};
    }
    bool contains(const State& s) const noexcept {
        return s.b >= 0 && s.b <= capacity_ && s.h >= 0 && s.h < channels_;
    }

private:
    int capacity_ = 0;
    int channels_ = 0;
};

/// Dense index over the rectangular action grid in canonical order:
/// s_off first, then s_on with z ascending and PLR ascending within each z.
class ActionSpace {
public:
    ActionSpace() = default;
    ActionSpace(int z_max, int num_plr) : z_max_(z_max), num_plr_(num_plr) {}
    explicit ActionSpace(const SystemConfig& cfg) : ActionSpace(cfg.z_max, cfg.num_plr()) {}

    int size() const noexcept { return 2 + z_max_ * num_plr_; }
    int z_max() const noexcept { return z_max_; }
    int num_plr() const noexcept { return num_plr_; }

    int index(const Action& a) const noexcept {
        if (a.y == PmAction::s_off) return 0;
        if (a.z == 0) return 1;
        return 2 + (a.z - 1) * num_plr_ + a.plr;
    }
    Action action(int i) const noexcept {
        if (i == 0) return {PmAction::s_off, 0, 0};
        if (i == 1) return {PmAction::s_on, 0, 0};
        return {PmAction::s_on, 1 + (i - 2) / num_plr_, (i - 2) % num_plr_};
    }

    /// Feasible action indices for `s`, in canonical order.
    std::vector<int> feasible(const State& s) const {
        std::vector<int> out{0, 1};
        if (s.x == PowerState::on) {
            const int zmax = std::min(s.b, z_max_);
            for (int i = 2; i < 2 + zmax * num_plr_; ++i) out.push_back(i);
        }
        return out;
    }
    /// Number of feasible actions; they are exactly the indices [0, count).
    int feasible_count(const State& s) const noexcept {
        return s.x == PowerState::on ? 2 + std::min(s.b, z_max_) * num_plr_ : 2;
    }
    bool is_feasible(const State& s, const Action& a) const noexcept {
        if (a.z < 0 || a.z > z_max_ || a.plr < 0 || a.plr >= num_plr_) return false;
        if (a.z == 0) return a.plr == 0;
        return s.x == PowerState::on && a.y == PmAction::s_on && a.z <= s.b;
    }

private:
    int z_max_ = 0;
    int num_plr_ = 0;
};

/// Precomputed known dynamics and costs over the state/action grid.
class KnownModel {
public:
    KnownModel() = default;
    explicit KnownModel(SystemConfig cfg) : cfg_(std::move(cfg)), states_(cfg_), actions_(cfg_) {
        cfg_.validate();
        const int bits = cfg_.phy.packet_size_bits;
        for (double plr : cfg_.plr_levels) beps_.push_back(phy::BepLevel::from_plr(plr, bits));
        goodput_.resize(static_cast<std::size_t>(actions_.size()));
        expected_goodput_.resize(static_cast<std::size_t>(actions_.size()));
        for (int ai = 0; ai < actions_.size(); ++ai) {
            const Action a = actions_.action(ai);
            goodput_[ai] = phy::goodput_pmf(cfg_.plr_levels[a.plr], a.z);
            expected_goodput_[ai] = (1.0 - cfg_.plr_levels[a.plr]) * a.z;
        }
        const int H = cfg_.num_channels();
        power_.assign(static_cast<std::size_t>(H * power::kNumPowerStates * actions_.size()), 0.0);
        for (int h = 0; h < H; ++h)
            for (int xi = 0; xi < power::kNumPowerStates; ++xi)
                for (int ai = 0; ai < actions_.size(); ++ai) {
                    const Action a = actions_.action(ai);
                    const PowerState x = power::power_state_at(xi);
                    if (a.z > 0 && x == PowerState::off) continue;
                    power_[power_index(h, xi, ai)] = power::required_power(
                        cfg_.channel_gains_db[h], x, beps_[a.plr], a.y, a.z, cfg_.power, cfg_.phy);
                }
        for (int xi = 0; xi < power::kNumPowerStates; ++xi)
            for (int yi = 0; yi < 2; ++yi)
                pm_[xi][yi] = power::pm_transition_pmf(power::power_state_at(xi), static_cast<PmAction>(yi),
                                                       cfg_.power.theta);
    }

    const SystemConfig& config() const noexcept { return cfg_; }
    const StateSpace& states() const noexcept { return states_; }
    const ActionSpace& actions() const noexcept { return actions_; }
    const phy::BepLevel& bep(int plr_index) const { return beps_.at(static_cast<std::size_t>(plr_index)); }
    double gamma() const noexcept { return cfg_.gamma; }
    int capacity() const noexcept { return cfg_.capacity(); }

    /// rho(s, a): power drawn in the slot.
    double power_cost(const State& s, int ai) const noexcept {
        return power_[power_index(s.h, power::index_of(s.x), ai)];
    }
    /// Expected holding cost sum_f p(f) (b - f).
    double expected_holding(const State& s, int ai) const noexcept { return s.b - expected_goodput_[ai]; }
    /// Goodput pmf over f in {0..z}.
    const std::vector<double>& goodput(int ai) const noexcept { return goodput_[ai]; }
    /// p^x(x' | x, y) indexed by index_of(x').
    const std::array<double, 2>& pm_next(PowerState x, PmAction y) const noexcept {
        return pm_[power::index_of(x)][static_cast<int>(y)];
    }

private:
    std::size_t power_index(int h, int xi, int ai) const noexcept {
        return static_cast<std::size_t>((h * power::kNumPowerStates + xi) * actions_.size() + ai);
    }

    SystemConfig cfg_;
    StateSpace states_;
    ActionSpace actions_;
    std::vector<phy::BepLevel> beps_;
    std::vector<std::vector<double>> goodput_;
    std::vector<double> expected_goodput_;
    std::vector<double> power_;
    std::array<std::array<std::array<double, 2>, 2>, 2> pm_{};
};

/// Row-stochastic matrix p(h' | h) stored row-major.
class ChannelMatrix {
public:
    ChannelMatrix() = default;
    explicit ChannelMatrix(std::vector<std::vector<double>> rows) {
        n_ = static_cast<int>(rows.size());
        for (const auto& r : rows) {
            if (static_cast<int>(r.size()) != n_) throw ConfigError("channel matrix must be square");
            for (double p : r)
                if (!(p >= 0.0)) throw ConfigError("channel matrix has negative entries");
            if (std::abs(sum(r) - 1.0) > 1e-12) throw ConfigError("channel matrix rows must sum to 1");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static ChannelMatrix identity(int n) {
        std::vector<std::vector<double>> rows(static_cast<std::size_t>(n), std::vector<double>(n, 0.0));
        for (int i = 0; i < n; ++i) rows[i][i] = 1.0;
        return ChannelMatrix(std::move(rows));
    }

    /// Reflecting birth-death chain: stay `stay`, move to each neighbour with (1 - stay) / 2.
    static ChannelMatrix birth_death(int n, double stay = 0.6) {
        std::vector<std::vector<double>> rows(static_cast<std::size_t>(n), std::vector<double>(n, 0.0));
        const double move = (1.0 - stay) / 2.0;
        for (int i = 0; i < n; ++i) {
            if (n == 1) {
                rows[0][0] = 1.0;
                break;
            }
            rows[i][i] = stay;
            if (i > 0) rows[i][i - 1] += move; else rows[i][i] += move;
            if (i + 1 < n) rows[i][i + 1] += move; else rows[i][i] += move;
        }
        return ChannelMatrix(std::move(rows));
    }

    int size() const noexcept { return n_; }
    double operator()(int from, int to) const noexcept { return data_[static_cast<std::size_t>(from * n_ + to)]; }
    std::span<const double> row(int from) const noexcept {
        return std::span<const double>(data_).subspan(static_cast<std::size_t>(from * n_), static_cast<std::size_t>(n_));
    }
    std::vector<std::vector<double>> rows() const {
        std::vector<std::vector<double>> out;
        for (int i = 0; i < n_; ++i) out.emplace_back(row(i).begin(), row(i).end());
        return out;
    }

    friend bool operator==(const ChannelMatrix&, const ChannelMatrix&) = default;

private:
    int n_ = 0;
    std::vector<double> data_;
};

}  // namespace pdsrl
