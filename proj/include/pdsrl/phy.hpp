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

// Adaptive-modulation physical layer: rectangular QAM bit-error model,
// required transmit power for a target BEP, and binomial goodput.

#include "pdsrl/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace pdsrl::phy {

struct PhyConfig {
    int packet_size_bits = 5000;
    double symbol_rate_hz = 500e3;
    double slot_seconds = 10e-3;
    double noise_psd_w_per_hz = 2e-11;
    double bandwidth_hz = 500e3;

    double noise_power_w() const noexcept { return noise_psd_w_per_hz * bandwidth_hz; }

    void validate() const {
        if (packet_size_bits <= 0 || symbol_rate_hz <= 0 || slot_seconds <= 0 || noise_psd_w_per_hz <= 0 ||
            bandwidth_hz <= 0)
            throw ConfigError("phy: all parameters must be positive");
        if (std::abs(bandwidth_hz - symbol_rate_hz) > 1e-9 * symbol_rate_hz)
            throw ConfigError("phy: bandwidth must equal the symbol rate");
    }
};

/// Linear power ratio of a gain in dB.
inline double db_to_linear(double db) noexcept { return std::pow(10.0, db / 10.0); }

/// Channel state: index into the gain table plus its gain.
struct ChannelState {
    int index = 0;
    double gain_db = 0.0;
};

/// Validates a gain table (non-empty, strictly increasing in dB).
inline void validate_gain_table(const std::vector<double>& gains_db) {
    if (gains_db.empty()) throw ConfigError("phy: empty channel gain table");
    for (std::size_t i = 1; i < gains_db.size(); ++i)
        if (!(gains_db[i] > gains_db[i - 1])) throw ConfigError("phy: channel gains must be strictly increasing");
}

/// Packet loss rate of an l-bit packet with independent bit errors.
inline double plr_of_bep(double bep, int bits) {
    if (bep < 0.0 || bep >= 1.0 || bits < 1) throw std::domain_error("plr_of_bep: bep in [0,1), bits >= 1");
    return -std::expm1(static_cast<double>(bits) * std::log1p(-bep));
}

/// Inverse of plr_of_bep.
inline double bep_of_plr(double plr, int bits) {
    if (plr < 0.0 || plr >= 1.0 || bits < 1) throw std::domain_error("bep_of_plr: plr in [0,1), bits >= 1");
    return -std::expm1(std::log1p(-plr) / static_cast<double>(bits));
}

/// Operating point of the link: BEP and the matching PLR for the packet size.
struct BepLevel {
    double bep = 0.0;
    double plr = 0.0;

    static BepLevel from_plr(double plr, int bits) { return {bep_of_plr(plr, bits), plr}; }
    static BepLevel from_bep(double bep, int bits) { return {bep, plr_of_bep(bep, bits)}; }
};

/// Constellation size needed to fit z packets into one slot.
inline int bits_per_symbol(int z, const PhyConfig& cfg) {
    if (z < 0) throw std::domain_error("bits_per_symbol: negative throughput");
    if (z == 0) return 0;
    const double beta = static_cast<double>(z) * cfg.packet_size_bits / (cfg.symbol_rate_hz * cfg.slot_seconds);
    const double rounded = std::round(beta);
    if (rounded < 1.0 || std::abs(beta - rounded) > 1e-9 * std::max(1.0, beta))
        throw ConfigError("bits_per_symbol: z packets do not map to an integer constellation size");
    return static_cast<int>(rounded);
}

/// M-QAM bit-error approximation 0.2 exp(-1.5 snr / (2^beta - 1)).
inline double bep_of_snr(double snr, int beta) {
    if (beta < 1) throw std::domain_error("bep_of_snr: beta must be >= 1");
    if (snr < 0.0) throw std::domain_error("bep_of_snr: negative snr");
    const double m1 = std::exp2(static_cast<double>(beta)) - 1.0;
    const double bep = 0.2 * std::exp(-1.5 * snr / m1);
    return std::clamp(bep, std::numeric_limits<double>::min(), 0.5);
}

/// SNR required to reach `bep` with a 2^beta constellation (zero when bep >= 0.2).
inline double snr_for_bep(double bep, int beta) {
    if (beta < 1) throw std::domain_error("snr_for_bep: beta must be >= 1");
    if (!(bep > 0.0)) throw std::domain_error("snr_for_bep: bep must be positive");
    const double m1 = std::exp2(static_cast<double>(beta)) - 1.0;
    return std::max(0.0, -m1 / 1.5 * std::log(bep / 0.2));
}

/// Transmit power (W) to deliver z packets at `bep` over a channel with gain `gain_db`.
inline double tx_power(double gain_db, double bep, int z, const PhyConfig& cfg) {
    if (z == 0) return 0.0;
    if (!(bep > 0.0) || bep > 0.5) throw std::domain_error("tx_power: bep must be in (0, 0.5]");
    const int beta = bits_per_symbol(z, cfg);
    return snr_for_bep(bep, beta) * cfg.noise_power_w() / db_to_linear(gain_db);
}

/// Binomial goodput distribution: f successes out of z with success 1 - plr.
inline std::vector<double> goodput_pmf(double plr, int z) {
    if (z < 0) throw std::domain_error("goodput_pmf: negative throughput");
    std::vector<double> pmf(static_cast<std::size_t>(z) + 1, 0.0);
    const double q = 1.0 - plr;
    double binom = 1.0;
    for (int f = 0; f <= z; ++f) {
        pmf[static_cast<std::size_t>(f)] = binom * std::pow(q, f) * std::pow(plr, z - f);
        binom = binom * static_cast<double>(z - f) / static_cast<double>(f + 1);
    }
    return pmf;
}

}  // namespace pdsrl::phy
