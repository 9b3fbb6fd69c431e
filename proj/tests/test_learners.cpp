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

#include "pdsrl/learners.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace pdsrl;
using namespace pdsrl::learn;

namespace {

SystemConfig reduced_system() {
    SystemConfig sys;
    sys.queue.capacity = 10;
    sys.channel_gains_db = {-13.79, -9.37, -6.30, -2.08};
    return sys;
}

PdsExperienceTuple make_tuple(const KnownModel& known, State s, int ai, int f, PowerState x_next, int l, int h_next) {
    PdsExperienceTuple e;
    e.s = s;
    e.a = ai;
    e.pds = pds::pds_of(s, known.actions().action(ai), f, x_next);
    e.arrivals = l;
    e.h_next = h_next;
    e.overflow_cost = pds::realized_overflow_cost(e.pds.b, l, known.capacity(), known.config().queue.eta);
    e.s_next = {std::min(e.pds.b + l, known.capacity()), h_next, x_next};
    return e;
}

}  // namespace

TEST(Learners, QUpdateExamples) {
    planner::QTable q(3, 2, 0.0);
    q_update(q, {0, 1, 2.0, 2}, 0.5, 0.5, 2);
    EXPECT_DOUBLE_EQ(q(0, 1), 1.0);
    const auto before = q.values;
    q_update(q, {1, 0, 5.0, 0}, 0.0, 0.5, 2);
    EXPECT_EQ(q.values, before);
    q_update(q, {2, 0, 3.0, 1}, 1.0, 0.9, 2);
    EXPECT_DOUBLE_EQ(q(2, 0), 3.0);
    int changed = 0;
    for (std::size_t i = 0; i < q.values.size(); ++i) changed += q.values[i] != before[i];
    EXPECT_EQ(changed, 1);
    EXPECT_THROW(q_update(q, {0, 0, 1.0, 0}, 1.5, 0.9, 2), std::invalid_argument);
}

TEST(Learners, QUpdateMinimizesOverFeasiblePrefix) {
    planner::QTable q(2, 3, 0.0);
    q(1, 0) = 4.0;
    q(1, 1) = 6.0;
    q(1, 2) = -100.0;
    q_update(q, {0, 0, 0.0, 1}, 1.0, 0.5, 2);
    EXPECT_DOUBLE_EQ(q(0, 0), 2.0);
}

TEST(Learners, EpsilonGreedy) {
    planner::QTable q(1, 4, 0.0);
    q(0, 0) = 3.0;
    q(0, 1) = 1.0;
    q(0, 2) = 1.0;
    q(0, 3) = 2.0;
    Rng rng(1);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(epsilon_greedy(q, 0, 4, 0.0, rng), 1);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(epsilon_greedy(q, 0, 1, 1.0, rng), 0);
    const int n = 100000;
    std::vector<int> counts(4, 0);
    for (int i = 0; i < n; ++i) ++counts[epsilon_greedy(q, 0, 4, 1.0, rng)];
    const double p = 0.25, se = std::sqrt(p * (1 - p) / n);
    for (int c : counts) EXPECT_NEAR(c / double(n), p, 3.0 * se);
}

TEST(Learners, Schedules) {
    const auto s = default_schedules();
    EXPECT_NO_THROW(s.validate());
    EXPECT_EQ(s.alpha(0), 1.0);
    EXPECT_EQ(s.beta(0), 1.0);
    EXPECT_NEAR(s.beta(10000) / s.alpha(10000), 0.06309384169901314, 1e-12);
    double prev = 1.0;
    for (long long n = 1; n < 100000; n += 97) {
        EXPECT_LT(s.beta(n), s.alpha(n));
        const double r = s.beta(n) / s.alpha(n);
        EXPECT_LT(r, prev);
        prev = r;
    }
    EXPECT_EQ(s.epsilon(0), 0.5);
    EXPECT_EQ(s.epsilon(1000000), 0.01);
    LearningSchedule bad;
    bad.alpha_exponent = 0.4;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Learners, MultiplierUpdate) {
    MultiplierState m{0.5, 100.0, 4.0};
    EXPECT_NEAR(mu_update(m, 6.0, 0.01).mu, 0.52, 1e-15);
    EXPECT_EQ(mu_update(m, 4.0, 0.3).mu, 0.5);
    m.mu = 100.0;
    EXPECT_EQ(mu_update(m, 10.0, 0.5).mu, 100.0);
    m.mu = 0.1;
    EXPECT_EQ(mu_update(m, 0.0, 1.0).mu, 0.0);
    EXPECT_THROW(mu_update(m, 1.0, -0.1), std::invalid_argument);
    EXPECT_NEAR(per_slot_target(200.0, 0.98), 4.0, 1e-12);
}

TEST(Learners, PdsUpdateExamples) {
    const KnownModel known(reduced_system());
    const std::size_t n = static_cast<std::size_t>(known.states().size());
    PdsLearner learner(known, pds::PdsValueTable(n, 0.0));
    const double mu = 0.7;
    const auto e = make_tuple(known, {4, 1, PowerState::on}, known.actions().index({PmAction::s_on, 2, 0}), 2,
                              PowerState::on, 1, 2);
    const auto before = learner.values();
    learner.update(e, 0.0, mu);
    EXPECT_EQ(learner.values(), before);

    learner.update(e, 1.0, mu);
    double best = 1e300;
    for (int ai = 0; ai < known.actions().feasible_count(e.s_next); ++ai)
        best = std::min(best, pds::known_cost(known, e.s_next, ai, mu));
    const int idx = known.states().index(e.pds);
    EXPECT_DOUBLE_EQ(learner.values()[idx], known.gamma() * best);
    int changed = 0;
    for (std::size_t i = 0; i < n; ++i) changed += learner.values()[i] != before[i];
    EXPECT_EQ(changed, 1);
}

TEST(Learners, PdsGreedyIsDeterministic) {
    const KnownModel known(reduced_system());
    const auto v = pds::init_pds_values(known);
    PdsLearner learner(known, v);
    for (int si = 0; si < known.states().size(); si += 3) {
        const State s = known.states().state(si);
        const int a = learner.greedy(s, 0.4);
        for (int k = 0; k < 3; ++k) EXPECT_EQ(learner.greedy(s, 0.4), a);
    }
    // Off with an empty buffer and a table that rewards staying off.
    pds::PdsValueTable favour_off(static_cast<std::size_t>(known.states().size()), 100.0);
    for (int si = 0; si < known.states().size(); ++si)
        if (known.states().state(si).x == PowerState::off) favour_off[si] = 0.0;
    PdsLearner off(known, favour_off);
    EXPECT_EQ(off.greedy({0, 0, PowerState::off}, 1.0), 0);
}

TEST(Learners, VirtualTuples) {
    const KnownModel known(SystemConfig{});
    const auto e = make_tuple(known, {9, 3, PowerState::on}, known.actions().index({PmAction::s_on, 3, 1}), 2,
                              PowerState::on, 4, 5);
    const auto vt = virtual_tuples(e, known);
    ASSERT_EQ(vt.size(), 52u);
    std::set<int> pds;
    bool contains_actual = false;
    for (const auto& v : vt) {
        EXPECT_EQ(v.pds.h, 3);
        EXPECT_EQ(v.s_next.h, 5);
        EXPECT_EQ(v.s_next.x, v.pds.x);
        EXPECT_EQ(v.s_next.b, std::min(v.pds.b + 4, 25));
        EXPECT_EQ(v.overflow_cost, 49.0 * std::max(v.pds.b + 4 - 25, 0));
        pds.insert(known.states().index(v.pds));
        if (v.pds == e.pds && v.s_next == e.s_next && v.overflow_cost == e.overflow_cost) contains_actual = true;
    }
    EXPECT_EQ(pds.size(), 52u);
    EXPECT_TRUE(contains_actual);

    const auto quiet = make_tuple(known, {9, 3, PowerState::on}, 1, 0, PowerState::on, 0, 3);
    for (const auto& v : virtual_tuples(quiet, known)) EXPECT_EQ(v.overflow_cost, 0.0);
}

TEST(Learners, VirtualExperienceTouchSet) {
    const KnownModel known(SystemConfig{});
    PdsLearner learner(known, pds::init_pds_values(known));
    const auto e = make_tuple(known, {9, 3, PowerState::on}, known.actions().index({PmAction::s_on, 3, 1}), 2,
                              PowerState::on, 4, 5);
    const auto before = learner.values();
    ve_batch_update(learner, e, 0.3, 0.8, 1, 17);
    int changed = 0;
    for (int si = 0; si < known.states().size(); ++si) {
        const bool same = learner.values()[si] == before[si];
        if (known.states().state(si).h != 3) {
            EXPECT_TRUE(same);
        }
        changed += !same;
    }
    EXPECT_EQ(changed, 52);

    // Off-period slot: plain single-entry update.
    const auto mid = learner.values();
    ve_batch_update(learner, e, 0.3, 0.8, 25, 17);
    changed = 0;
    for (int si = 0; si < known.states().size(); ++si) changed += learner.values()[si] != mid[si];
    EXPECT_EQ(changed, 1);
    EXPECT_THROW(ve_batch_update(learner, e, 0.3, 0.8, 0, 1), std::invalid_argument);
}

TEST(Learners, QLearnerSolvesTwoStateChain) {
    // Action 0 stays (cost 1), action 1 moves to the other state (cost 0 from state 1, 2 from state 0).
    QLearner ql({2, 2}, 2, 0.5);
    Rng rng(3);
    int s = 0;
    for (long long n = 0; n < 200000; ++n) {
        const int a = ql.act(s, 0.2, rng);
        const double cost = a == 0 ? 1.0 : (s == 0 ? 2.0 : 0.0);
        const int s2 = a == 0 ? s : 1 - s;
        ql.update({s, a, cost, s2}, std::pow(1.0 / (1.0 + n / 100.0), 0.7));
        s = s2;
    }
    // V(0) = min(1 + 0.5 V(0), 2 + 0.5 V(1)), V(1) = min(1 + 0.5 V(1), 0.5 V(0)); fixed point V = (2, 1).
    EXPECT_NEAR(ql.table()(0, 0), 2.0, 0.05);
    EXPECT_NEAR(ql.table()(0, 1), 2.5, 0.05);
    EXPECT_NEAR(ql.table()(1, 1), 1.0, 0.05);
    EXPECT_NEAR(ql.table()(1, 0), 1.5, 0.05);
    EXPECT_EQ(ql.greedy(0), 0);
    EXPECT_EQ(ql.greedy(1), 1);
}
