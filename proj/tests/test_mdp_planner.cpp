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

#include "pdsrl/mdp_planner.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>

using namespace pdsrl;
using namespace pdsrl::planner;

namespace {

SystemConfig reduced_system() {
    SystemConfig sys;
    sys.queue.capacity = 10;
    sys.channel_gains_db = {-13.79, -9.37, -6.30, -2.08};
    return sys;
}

JointModel reduced_model(double mu) {
    const SystemConfig sys = reduced_system();
    return {sys, ChannelMatrix::birth_death(sys.num_channels()),
            queue::ArrivalDistribution::poisson(2.0), mu};
}

}  // namespace

TEST(MdpPlanner, StateAndActionSpaceSizes) {
    const KnownModel known{SystemConfig{}};
    EXPECT_EQ(known.states().size(), 416);
    EXPECT_EQ(known.actions().size(), 52);
    EXPECT_EQ(known.actions().feasible_count({12, 3, PowerState::on}), 52);
    EXPECT_EQ(known.actions().feasible_count({10, 0, PowerState::on}), 52);
    EXPECT_EQ(known.actions().feasible_count({0, 0, PowerState::on}), 2);
    EXPECT_EQ(known.actions().feasible_count({20, 0, PowerState::off}), 2);
    EXPECT_EQ(known.actions().feasible_count({3, 0, PowerState::on}), 17);
}

TEST(MdpPlanner, CanonicalActionOrder) {
    const ActionSpace A(10, 5);
    const auto f = A.feasible({12, 1, PowerState::on});
    ASSERT_EQ(f.size(), 52u);
    EXPECT_EQ(A.action(f[0]), (Action{PmAction::s_off, 0, 0}));
    EXPECT_EQ(A.action(f[1]), (Action{PmAction::s_on, 0, 0}));
    for (std::size_t i = 2; i + 1 < f.size(); ++i) {
        const Action a = A.action(f[i]), b = A.action(f[i + 1]);
        EXPECT_TRUE(a.z < b.z || (a.z == b.z && a.plr < b.plr));
    }
    for (int i = 0; i < A.size(); ++i) EXPECT_EQ(A.index(A.action(i)), i);
    const auto off = A.feasible({12, 1, PowerState::off});
    ASSERT_EQ(off.size(), 2u);
}

TEST(MdpPlanner, StateIndexRoundTrip) {
    const StateSpace S(25, 8);
    for (int i = 0; i < S.size(); ++i) EXPECT_EQ(S.index(S.state(i)), i);
}

TEST(MdpPlanner, JointTransitionPointMass) {
    SystemConfig sys = reduced_system();
    const Mdp mdp(JointModel{sys, ChannelMatrix::identity(4), queue::ArrivalDistribution::deterministic(0), 0.0});
    const State s{6, 2, PowerState::on};
    const auto p = mdp.joint_transition_pmf(s, 1);
    ASSERT_EQ(p.size(), 1u);
    EXPECT_EQ(p[0].first, mdp.states().index(s));
    EXPECT_EQ(p[0].second, 1.0);
}

TEST(MdpPlanner, JointTransitionSumsToOne) {
    const Mdp mdp(reduced_model(1.0));
    for (int si = 0; si < mdp.states().size(); ++si) {
        const State s = mdp.states().state(si);
        for (int ai = 0; ai < mdp.actions().feasible_count(s); ++ai) {
            double total = 0.0;
            for (const auto& [next, p] : mdp.joint_transition_pmf(s, ai)) total += p;
            EXPECT_NEAR(total, 1.0, 1e-12);
        }
    }
}

TEST(MdpPlanner, JointTransitionMatchesBruteForceProduct) {
    // Two-buffer example composed with a two-state channel; enumerate (f, l, h', x') directly.
    SystemConfig sys;
    sys.queue.capacity = 2;
    sys.queue.eta = 49.0;
    sys.channel_gains_db = {-9.37, -2.08};
    sys.plr_levels = {0.5};
    sys.z_max = 2;
    const ChannelMatrix ch({{0.9, 0.1}, {0.2, 0.8}});
    const Mdp mdp(JointModel{sys, ch, queue::ArrivalDistribution::deterministic(1), 0.0});
    const State s{1, 0, PowerState::on};
    const int ai = mdp.actions().index({PmAction::s_on, 1, 0});
    std::map<int, double> expect;
    for (int f = 0; f <= 1; ++f)
        for (int h2 = 0; h2 < 2; ++h2) {
            const int b2 = std::min(1 - f + 1, 2);
            expect[mdp.states().index(b2, h2, PowerState::on)] += 0.5 * ch(0, h2);
        }
    std::map<int, double> got;
    for (const auto& [next, p] : mdp.joint_transition_pmf(s, ai)) got[next] += p;
    ASSERT_EQ(got.size(), expect.size());
    for (const auto& [k, v] : expect) EXPECT_NEAR(got[k], v, 1e-15);
    EXPECT_NEAR(got[mdp.states().index(1, 0, PowerState::on)], 0.45, 1e-15);
    EXPECT_NEAR(got[mdp.states().index(2, 1, PowerState::on)], 0.05, 1e-15);
}

TEST(MdpPlanner, LagrangianCost) {
    const Mdp m0(reduced_model(0.0));
    const Mdp m1(reduced_model(0.01));
    for (int si = 0; si < m0.states().size(); si += 7) {
        const State s = m0.states().state(si);
        for (int ai = 0; ai < m0.actions().feasible_count(s); ++ai) {
            EXPECT_EQ(m0.lagrangian_cost(s, ai), m0.power_cost(s, ai));
            EXPECT_NEAR(m1.lagrangian_cost(s, ai), m1.power_cost(s, ai) + 0.01 * m1.buffer_cost(s, ai), 1e-15);
        }
    }
    EXPECT_NEAR(0.08 + 0.01 * 3.0, 0.11, 1e-15);
}

TEST(MdpPlanner, LagrangianCostIndependentRecomputation) {
    // Full Table 4 state (b = 12, h = 5, x = on), action s_on, z = 3, PLR 4%, mu = 0.7, Poisson(2).
    SystemConfig sys;
    const Mdp mdp(JointModel{sys, ChannelMatrix::birth_death(8), queue::ArrivalDistribution::poisson(2.0), 0.7});
    const State s{12, 5, PowerState::on};
    const int ai = mdp.actions().index({PmAction::s_on, 3, 2});
    const double bep = 1.0 - std::pow(1.0 - 0.04, 1.0 / 5000.0);
    const double snr = std::log(0.2 / bep) * (std::pow(2.0, 3) - 1.0) / 1.5;
    const double ptx = snr * 2e-11 * 500e3 / std::pow(10.0, -6.30 / 10.0);
    const double rho = 0.32 + ptx;
    double g = 0.0;
    const double q = 0.96;
    const double pf[4] = {std::pow(1 - q, 3), 3 * q * std::pow(1 - q, 2), 3 * q * q * (1 - q), q * q * q};
    for (int f = 0; f <= 3; ++f) {
        double over = 0.0, pl = std::exp(-2.0);
        for (int l = 0; l < 80; ++l) {
            over += pl * std::max(12 - f + l - 25, 0);
            pl *= 2.0 / (l + 1);
        }
        g += pf[f] * ((12 - f) + 49.0 * over);
    }
    EXPECT_NEAR(mdp.power_cost(s, ai), rho, 1e-12 * rho);
    // Arrivals are truncated with 1e-9 tail mass; its overflow weight is bounded by mu * eta * B.
    EXPECT_NEAR(mdp.lagrangian_cost(s, ai), rho + 0.7 * g, 0.7 * 49.0 * 25.0 * 1e-9);
}

TEST(MdpPlanner, ValueIterationTrivialCases) {
    TabularMdp zero(3, 0.9);
    for (int s = 0; s < 3; ++s) zero.add_action(s, 0.0, {{(s + 1) % 3, 1.0}});
    auto r = value_iteration(zero);
    for (double v : r.values) EXPECT_EQ(v, 0.0);

    TabularMdp one(1, 0.5);
    one.add_action(0, 1.0, {{0, 1.0}});
    ViOptions tight;
    tight.tol = 1e-12;
    r = value_iteration(one, tight);
    EXPECT_NEAR(r.values[0], 2.0, 1e-11);
}

TEST(MdpPlanner, ValueIterationMatchesBackwardInduction) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = 5, na = 3;
    const double gamma = 0.9;
    TabularMdp m(n, gamma);
    std::vector<std::vector<double>> cost(n, std::vector<double>(na));
    std::vector<std::vector<std::vector<double>>> P(n, std::vector<std::vector<double>>(na, std::vector<double>(n)));
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < na; ++a) {
            cost[s][a] = u(rng);
            double t = 0.0;
            for (int j = 0; j < n; ++j) t += (P[s][a][j] = u(rng));
            std::vector<TabularMdp::Outcome> out;
            double acc = 0.0;
            for (int j = 0; j < n; ++j) {
                P[s][a][j] /= t;
                if (j + 1 < n) {
                    acc += P[s][a][j];
                } else {
                    P[s][a][j] = 1.0 - acc;
                }
                out.push_back({j, P[s][a][j]});
            }
            m.add_action(s, cost[s][a], out);
        }
    std::vector<double> v(n, 0.0), nv(n);
    for (int k = 0; k < 10000; ++k) {
        for (int s = 0; s < n; ++s) {
            double best = 1e300;
            for (int a = 0; a < na; ++a) {
                double e = 0.0;
                for (int j = 0; j < n; ++j) e += P[s][a][j] * v[j];
                best = std::min(best, cost[s][a] + gamma * e);
            }
            nv[s] = best;
        }
        v = nv;
    }
    ViOptions opt;
    opt.tol = 1e-10;
    const auto r = value_iteration(m, opt);
    for (int s = 0; s < n; ++s) EXPECT_NEAR(r.values[s], v[s], 1e-6);
}

TEST(MdpPlanner, NonConvergenceCarriesResidual) {
    TabularMdp one(1, 0.99);
    one.add_action(0, 1.0, {{0, 1.0}});
    try {
        ViOptions opt;
        opt.max_iters = 10;
        value_iteration(one, opt);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_GT(e.residual(), 0.0);
    }
}

TEST(MdpPlanner, BellmanOptimalityAndContraction) {
    const Mdp mdp(reduced_model(1.0));
    std::vector<double> residuals;
    ViOptions opt;
    opt.on_sweep = [&](int, double r) { residuals.push_back(r); };
    const auto r = value_iteration(mdp, opt);
    const auto q = action_values(mdp, r.values);
    for (int si = 0; si < mdp.states().size(); ++si) {
        const State s = mdp.states().state(si);
        double best = 1e300;
        for (int ai = 0; ai < mdp.actions().feasible_count(s); ++ai) best = std::min(best, q(si, ai));
        EXPECT_NEAR(best, r.values[si], opt.tol);
        EXPECT_NEAR(action_value(mdp, s, r.policy[si], r.values), r.values[si], opt.tol);
    }
    // Below ~1e-6 the residual is dominated by rounding in values of order 1e2.
    for (std::size_t i = 10; i < residuals.size(); ++i) {
        if (residuals[i] > 1e-6) {
            EXPECT_LE(residuals[i] / residuals[i - 1], mdp.gamma() + 1e-6);
        }
    }
}

TEST(MdpPlanner, ActionValueTrivialCases) {
    const Mdp mdp(reduced_model(1.0));
    const std::vector<double> zero(static_cast<std::size_t>(mdp.states().size()), 0.0);
    const State s{5, 1, PowerState::on};
    for (int ai = 0; ai < mdp.actions().feasible_count(s); ++ai)
        EXPECT_EQ(action_value(mdp, s, ai, zero), mdp.lagrangian_cost(s, ai));
    EXPECT_THROW(action_value(mdp, {5, 1, PowerState::off}, 5, zero), FeasibilityError);

    TabularMdp m(2, 0.0);
    m.add_action(0, 3.0, {{1, 1.0}});
    m.add_action(1, 1.0, {{0, 1.0}});
    EXPECT_EQ(action_value(m, 0, 0, std::vector<double>{7.0, 9.0}), 3.0);
}

TEST(MdpPlanner, PolicyEvaluation) {
    TabularMdp one(1, 0.5);
    one.add_action(0, 3.0, {{0, 1.0}});
    const auto v = evaluate_policy(one, PolicyTable{0}, [&](int s, int a) { return one.cost(s, a); }, 1e-12);
    EXPECT_NEAR(v[0], 6.0, 1e-11);

    const Mdp mdp(reduced_model(1.0));
    const auto r = value_iteration(mdp);
    const auto e = policy_evaluate(mdp, r.policy);
    for (std::size_t i = 0; i < e.lagrangian.size(); ++i) {
        EXPECT_NEAR(e.lagrangian[i], r.values[i], 10 * 1e-9 / (1 - mdp.gamma()));
        EXPECT_NEAR(e.lagrangian[i], e.power[i] + mdp.mu() * e.buffer[i], 1e-6);
    }

    const Mdp zero(JointModel{reduced_system(), ChannelMatrix::identity(4), queue::ArrivalDistribution::deterministic(0), 0.0});
    PolicyTable off(static_cast<std::size_t>(zero.states().size()), 0);
    // Start everything off with s_off: power, holding and overflow are all zero from b = 0.
    const auto z = policy_evaluate(zero, off);
    for (int si = 0; si < zero.states().size(); ++si) {
        const State s = zero.states().state(si);
        if (s.b == 0 && s.x == PowerState::off) {
            EXPECT_EQ(z.lagrangian[si], 0.0);
            EXPECT_EQ(z.power[si], 0.0);
            EXPECT_EQ(z.buffer[si], 0.0);
        }
    }
    PolicyTable bad = r.policy;
    bad[mdp.states().index({0, 0, PowerState::off})] = 10;
    EXPECT_THROW(policy_evaluate(mdp, bad), FeasibilityError);
}

TEST(MdpPlanner, CanonicalArgminTieBreak) {
    const std::vector<double> v{3.0, 1.0, 1.0 + 1e-12, 1.0};
    EXPECT_EQ(canonical_argmin(v, 1e-10), 1);
    const std::vector<double> w{1.0 + 1e-12, 1.0};
    EXPECT_EQ(canonical_argmin(w, 1e-10), 0);
    EXPECT_EQ(canonical_argmin(w, 0.0), 1);
}
