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

#include "pdsrl/model.hpp"
#include "pdsrl/phy.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace pdsrl;
using namespace pdsrl::phy;

TEST(Phy, BitsPerSymbolMatchesThroughput) {
    const PhyConfig cfg;
    EXPECT_EQ(bits_per_symbol(4, cfg), 4);
    EXPECT_EQ(bits_per_symbol(0, cfg), 0);
    EXPECT_EQ(bits_per_symbol(10, cfg), 10);
}

TEST(Phy, BitsPerSymbolRejectsFractionalConstellation) {
    PhyConfig cfg;
    cfg.packet_size_bits = 7500;  // 1.5 bits/symbol per packet
    EXPECT_THROW(bits_per_symbol(1, cfg), ConfigError);
    EXPECT_EQ(bits_per_symbol(2, cfg), 3);
}

TEST(Phy, ConfigValidation) {
    PhyConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_DOUBLE_EQ(cfg.noise_power_w(), 1e-5);
    cfg.bandwidth_hz = 1e6;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Phy, BepOfSnr) {
    EXPECT_DOUBLE_EQ(bep_of_snr(0.0, 1), 0.2);
    double prev = 1.0;
    for (double snr = 0.0; snr < 200.0; snr += 0.5) {
        const double b = bep_of_snr(snr, 3);
        EXPECT_LT(b, prev);
        prev = b;
    }
    EXPECT_LT(bep_of_snr(1e4, 1), 1e-300);
    EXPECT_GT(bep_of_snr(1e4, 1), 0.0);
    EXPECT_THROW(bep_of_snr(1.0, 0), std::domain_error);
}

TEST(Phy, SnrInversionForOnePercentPlr) {
    // Frozen from an independent evaluation: bep = 1 - 0.99^(1/5000), snr = ln(0.2 / bep) / 1.5.
    const double bep = bep_of_plr(0.01, 5000);
    EXPECT_NEAR(bep, 2.0100651505166266e-06, 1e-18);
    const double snr = snr_for_bep(bep, 1);
    EXPECT_NEAR(snr, 7.671937007194757, 1e-12);
    EXPECT_NEAR(bep_of_snr(snr, 1), bep, 1e-18);
}

TEST(Phy, TxPower) {
    const PhyConfig cfg;
    EXPECT_EQ(tx_power(-2.08, 1e-3, 0, cfg), 0.0);
    const double bep = bep_of_plr(0.01, cfg.packet_size_bits);
    // Frozen from the same independent evaluation with gain 10^(-0.208).
    EXPECT_NEAR(tx_power(-2.08, bep, 1, cfg), 0.00012385257154998638, 1e-17);
}

TEST(Phy, TxPowerMonotoneOverGrid) {
    const SystemConfig sys;
    const PhyConfig& cfg = sys.phy;
    for (std::size_t hi = 0; hi < sys.channel_gains_db.size(); ++hi)
        for (std::size_t pi = 0; pi < sys.plr_levels.size(); ++pi)
            for (int z = 0; z <= sys.z_max; ++z) {
                const double bep = bep_of_plr(sys.plr_levels[pi], cfg.packet_size_bits);
                const double p = tx_power(sys.channel_gains_db[hi], bep, z, cfg);
                if (z < sys.z_max) {
                    EXPECT_LE(p, tx_power(sys.channel_gains_db[hi], bep, z + 1, cfg));
                }
                if (hi + 1 < sys.channel_gains_db.size()) {
                    EXPECT_GE(p, tx_power(sys.channel_gains_db[hi + 1], bep, z, cfg));
                }
                if (pi + 1 < sys.plr_levels.size()) {
                    const double bep2 = bep_of_plr(sys.plr_levels[pi + 1], cfg.packet_size_bits);
                    EXPECT_GE(p, tx_power(sys.channel_gains_db[hi], bep2, z, cfg));
                }
            }
}

TEST(Phy, PlrOfBep) {
    EXPECT_EQ(plr_of_bep(0.0, 5000), 0.0);
    EXPECT_NEAR(plr_of_bep(bep_of_plr(0.01, 5000), 5000), 0.01, 1e-15);
    const BepLevel lvl = BepLevel::from_plr(0.16, 5000);
    EXPECT_NEAR(lvl.plr, 1.0 - std::pow(1.0 - lvl.bep, 5000), 1e-12);
}

TEST(Phy, PlrRoundTripProperty) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> plr(1e-6, 0.9);
    std::uniform_int_distribution<int> bits(1, 20000);
    for (int i = 0; i < 2000; ++i) {
        const double p = plr(rng);
        const int l = bits(rng);
        EXPECT_NEAR(plr_of_bep(bep_of_plr(p, l), l), p, 1e-10 * p);
    }
}

TEST(Phy, GoodputPmf) {
    const auto p0 = goodput_pmf(0.3, 0);
    ASSERT_EQ(p0.size(), 1u);
    EXPECT_EQ(p0[0], 1.0);

    const auto p2 = goodput_pmf(0.5, 2);
    EXPECT_DOUBLE_EQ(p2[0], 0.25);
    EXPECT_DOUBLE_EQ(p2[1], 0.5);
    EXPECT_DOUBLE_EQ(p2[2], 0.25);

    const auto p3 = goodput_pmf(0.01, 3);
    double mean = 0.0;
    for (int f = 0; f <= 3; ++f) mean += f * p3[f];
    EXPECT_NEAR(mean, 2.97, 1e-12);
}

TEST(Phy, GoodputPmfNormalizedOverGrid) {
    const SystemConfig sys;
    for (double plr : sys.plr_levels)
        for (int z = 0; z <= sys.z_max; ++z) {
            const auto p = goodput_pmf(plr, z);
            EXPECT_NEAR(sum(p), 1.0, 1e-12);
        }
}

TEST(Phy, GainTableMustIncrease) {
    EXPECT_NO_THROW(validate_gain_table({-3.0, -1.0}));
    EXPECT_THROW(validate_gain_table({-1.0, -3.0}), ConfigError);
    EXPECT_THROW(validate_gain_table({}), ConfigError);
}
