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

#include "pdsrl/traffic_queue.hpp"

#include <gtest/gtest.h>

#include <limits>
#include <random>

using namespace pdsrl;
using namespace pdsrl::queue;

TEST(TrafficQueue, NextBuffer) {
    EXPECT_EQ(next_buffer(5, 2, 3, 25), 6);
    EXPECT_EQ(next_buffer(24, 0, 5, 25), 25);
    EXPECT_EQ(next_buffer(0, 0, 0, 25), 0);
    EXPECT_THROW(next_buffer(1, 2, 0, 25), std::invalid_argument);
}

TEST(TrafficQueue, ArrivalDistributions) {
    const auto d = ArrivalDistribution::deterministic(3);
    EXPECT_EQ(d.max_arrivals(), 3);
    EXPECT_EQ(d(3), 1.0);
    const auto p = ArrivalDistribution::poisson(2.0);
    EXPECT_NEAR(sum(p.pmf()), 1.0, 1e-12);
    EXPECT_NEAR(p.mean(), 2.0, 1e-8);
    // Mass beyond the last bin is below 1e-9 and is folded into it.
    double beyond = 0.0, at_last = 0.0, term = std::exp(-2.0);
    for (int l = 0; l < 60; ++l) {
        if (l == p.max_arrivals()) at_last = term;
        if (l > p.max_arrivals()) beyond += term;
        term *= 2.0 / (l + 1);
    }
    EXPECT_LT(beyond, 1e-9);
    EXPECT_NEAR(p(p.max_arrivals()), at_last + beyond, 1e-15);
    const auto u = ArrivalDistribution::uniform(25);
    EXPECT_NEAR(u.mean(), 12.5, 1e-12);
    EXPECT_THROW(ArrivalDistribution(std::vector<double>{0.5, 0.4}), ConfigError);
}

TEST(TrafficQueue, BufferTransitionExamples) {
    const auto det1 = ArrivalDistribution::deterministic(1);
    auto p = buffer_transition_pmf(1, 1, 0.5, det1, 2);
    EXPECT_DOUBLE_EQ(p[0], 0.0);
    EXPECT_DOUBLE_EQ(p[1], 0.5);
    EXPECT_DOUBLE_EQ(p[2], 0.5);

    p = buffer_transition_pmf(7, 0, 0.01, ArrivalDistribution::deterministic(0), 25);
    EXPECT_EQ(p[7], 1.0);
    EXPECT_THROW(buffer_transition_pmf(1, 2, 0.01, det1, 25), FeasibilityError);
}

TEST(TrafficQueue, BufferTransitionNormalizedOverGrid) {
    const auto arrivals = ArrivalDistribution::poisson(2.0);
    for (int b = 0; b <= 25; ++b)
        for (int z = 0; z <= std::min(b, 10); ++z)
            for (double plr : {0.01, 0.02, 0.04, 0.08, 0.16}) EXPECT_NEAR(sum(buffer_transition_pmf(b, z, plr, arrivals, 25)), 1.0, 1e-12);
}

TEST(TrafficQueue, BufferCostExamples) {
    QueueConfig cfg{25, 49.0};
    EXPECT_DOUBLE_EQ(buffer_cost(3, 0, 0.01, ArrivalDistribution::deterministic(0), cfg), 3.0);
    EXPECT_DOUBLE_EQ(buffer_cost(1, 1, 0.5, ArrivalDistribution::deterministic(0), cfg), 0.5);
    cfg.capacity = 2;
    EXPECT_DOUBLE_EQ(buffer_cost(2, 0, 0.01, ArrivalDistribution::deterministic(1), cfg), 51.0);
}

TEST(TrafficQueue, CostTermBounds) {
    // Holding never exceeds b; overflow vanishes when nothing can spill.
    const QueueConfig cfg{25, 49.0};
    const auto small = ArrivalDistribution::deterministic(3);
    for (int b = 0; b <= 22; ++b)
        for (int z = 0; z <= std::min(b, 10); ++z) {
            const double c = buffer_cost(b, z, 0.04, small, cfg);
            EXPECT_LE(c, b + 1e-12);
            EXPECT_EQ(expected_overflow(b - 0, small, 25), 0.0);
        }
}

TEST(TrafficQueue, BufferCostMatchesMonteCarlo) {
    // Independent sampler: draw f ~ Bin(z, 1 - plr) and l ~ Poisson(2) with std distributions.
    const QueueConfig cfg{25, 49.0};
    const auto arrivals = ArrivalDistribution::poisson(2.0);
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> pick_b(0, 25), pick_plr(0, 4);
    const double plrs[] = {0.01, 0.02, 0.04, 0.08, 0.16};
    for (int trial = 0; trial < 20; ++trial) {
        const int b = 15 + pick_b(rng) % 11;
        std::uniform_int_distribution<int> pick_z(0, std::min(b, 10));
        const int z = pick_z(rng);
        const double plr = plrs[pick_plr(rng)];
        std::binomial_distribution<int> fdist(z, 1.0 - plr);
        std::poisson_distribution<int> ldist(2.0);
        const int n = 1000000;
        double s = 0.0, s2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const int f = fdist(rng);
            const int l = ldist(rng);
            const double c = (b - f) + cfg.eta * std::max(b - f + l - cfg.capacity, 0);
            s += c;
            s2 += c * c;
        }
        const double mean = s / n;
        const double se = std::sqrt(std::max(s2 / n - mean * mean, 0.0) / n);
        EXPECT_NEAR(buffer_cost(b, z, plr, arrivals, cfg), mean, 3.0 * se + 1e-9) << "b=" << b << " z=" << z;
    }
}

TEST(TrafficQueue, TransitionMatchesSampledRecursion) {
    const auto arrivals = ArrivalDistribution::poisson(2.0);
    const int b = 20, z = 6, B = 25;
    const double plr = 0.08;
    const auto pmf = buffer_transition_pmf(b, z, plr, arrivals, B);
    std::mt19937_64 rng(99);
    std::binomial_distribution<int> fdist(z, 1.0 - plr);
    std::poisson_distribution<int> ldist(2.0);
    const int n = 400000;
    std::vector<int> counts(B + 1, 0);
    for (int i = 0; i < n; ++i) ++counts[next_buffer(b, fdist(rng), ldist(rng), B)];
    for (int k = 0; k <= B; ++k) {
        const double p = pmf[k];
        const double se = std::sqrt(p * (1.0 - p) / n);
        EXPECT_NEAR(counts[k] / double(n), p, 3.0 * se + 1e-6) << "b'=" << k;
    }
}

TEST(TrafficQueue, OverflowPenalty) {
    EXPECT_EQ(overflow_penalty(0.98), 49.0);
    EXPECT_EQ(overflow_penalty(0.9), 9.0);
    EXPECT_EQ(overflow_penalty(0.75), 3.0);
    EXPECT_NEAR(overflow_penalty(1.0 / 3.0), 0.5, 1e-15);
    EXPECT_EQ(overflow_penalty(0.5), 1.0);
    EXPECT_EQ(overflow_penalty(0.0), 0.0);
    EXPECT_THROW(overflow_penalty(1.0), std::domain_error);
}

TEST(TrafficQueue, EtaLowerBound) {
    QueueConfig cfg{25, 10.0};
    EXPECT_THROW(cfg.validate(0.98), ConfigError);
    cfg.eta = 49.0;
    EXPECT_NO_THROW(cfg.validate(0.98));
}
