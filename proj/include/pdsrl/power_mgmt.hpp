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

#include "pdsrl/common.hpp"
#include "pdsrl/phy.hpp"

#include <array>
#include <cstdint>

namespace pdsrl::power {

enum class PowerState : std::uint8_t { on = 0, off = 1 };
enum class PmAction : std::uint8_t { s_on = 0, s_off = 1 };

inline constexpr int kNumPowerStates = 2;

constexpr int index_of(PowerState x) noexcept { return static_cast<int>(x); }
constexpr PowerState power_state_at(int i) noexcept { return i == 0 ? PowerState::on : PowerState::off; }

inline const char* to_string(PowerState x) noexcept { return x == PowerState::on ? "on" : "off"; }
inline const char* to_string(PmAction y) noexcept { return y == PmAction::s_on ? "s_on" : "s_off"; }

struct PowerProfile {
    double p_on = 0.32;
    double p_off = 0.0;
    double p_tr = 0.32;
    /// Probability that a requested power-state switch succeeds.
    double theta = 1.0;

    void validate() const {
        if (!(p_tr >= p_on && p_on > p_off && p_off >= 0.0))
            throw ConfigError("power: require p_tr >= p_on > p_off >= 0");
        if (!(theta > 0.0 && theta <= 1.0)) throw ConfigError("power: theta must be in (0, 1]");
    }
};

/// True when the card can transmit in this slot.
constexpr bool can_transmit(PowerState x, PmAction y) noexcept {
    return x == PowerState::on && y == PmAction::s_on;
}

/// Power drawn in one slot: card power plus transmit power, idle power, or switching power.
inline double required_power(double gain_db, PowerState x, const phy::BepLevel& bep, PmAction y, int z,
                             const PowerProfile& profile, const phy::PhyConfig& cfg) {
    if (z > 0 && !can_transmit(x, y))
        throw FeasibilityError("required_power: throughput must be zero unless on and s_on");
    if (can_transmit(x, y)) return profile.p_on + phy::tx_power(gain_db, bep.bep, z, cfg);
    if (x == PowerState::off && y == PmAction::s_off) return profile.p_off;
    return profile.p_tr;
}

/// Next power-state distribution, indexed by index_of(x').
inline std::array<double, 2> pm_transition_pmf(PowerState x, PmAction y, double theta) {
    if (!(theta > 0.0 && theta <= 1.0)) throw std::domain_error("pm_transition_pmf: theta in (0, 1]");
    constexpr int on = 0, off = 1;
    std::array<double, 2> p{0.0, 0.0};
    if (y == PmAction::s_on) {
        if (x == PowerState::on) {
            p[on] = 1.0;
        } else {
            p[on] = theta;
            p[off] = 1.0 - theta;
        }
    } else {
        if (x == PowerState::on) {
            p[on] = 1.0 - theta;
            p[off] = theta;
        } else {
            p[off] = 1.0;
        }
    }
    return p;
}

}  // namespace pdsrl::power
