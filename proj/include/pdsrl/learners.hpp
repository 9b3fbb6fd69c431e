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

// Online learners: epsilon-greedy Q-learning, post-decision-state learning,
// virtual-experience batches, and the projected stochastic subgradient on
// the Lagrange multiplier.

#include "pdsrl/common.hpp"
#include "pdsrl/mdp_planner.hpp"
#include "pdsrl/pds_core.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace pdsrl::learn {

using Rng = std::mt19937_64;

/// Step sizes as functions of the slot index n.
struct LearningSchedule {
    /// alpha^n = (1 / (1 + n))^alpha_exponent
    double alpha_exponent = 0.7;
    /// beta^n = beta_scale * (1 / (1 + n))^beta_exponent
    double beta_exponent = 1.0;
    double beta_scale = 1.0;
    /// epsilon^n = max(epsilon_floor, epsilon_start * epsilon_decay^n)
    double epsilon_start = 0.5;
    double epsilon_decay = 0.9999;
    double epsilon_floor = 0.01;

    double alpha(long long n) const { return std::pow(1.0 / (1.0 + static_cast<double>(n)), alpha_exponent); }
    double beta(long long n) const {
        return beta_scale * std::pow(1.0 / (1.0 + static_cast<double>(n)), beta_exponent);
    }
    double epsilon(long long n) const {
        return std::max(epsilon_floor, epsilon_start * std::pow(epsilon_decay, static_cast<double>(n)));
    }

    void validate() const {
        if (!(alpha_exponent > 0.5 && alpha_exponent <= 1.0))
            throw ConfigError("schedule: alpha exponent must be in (0.5, 1]");
        if (!(beta_exponent > 0.5 && beta_exponent <= 1.0))
            throw ConfigError("schedule: beta exponent must be in (0.5, 1]");
        if (!(beta_exponent > alpha_exponent))
            throw ConfigError("schedule: multiplier steps must decay faster than value steps");
        if (!(beta_scale > 0.0)) throw ConfigError("schedule: beta scale must be positive");
        if (!(epsilon_floor >= 0.0 && epsilon_floor <= 1.0 && epsilon_start >= 0.0 && epsilon_start <= 1.0))
            throw ConfigError("schedule: epsilon values must be in [0, 1]");
    }
};

inline LearningSchedule default_schedules() { return {}; }

/// Lagrange multiplier with its projection bound and the per-slot constraint target.
struct MultiplierState {
    double mu = 0.0;
    double mu_max = 100.0;
    /// Per-slot buffer-cost target (1 - gamma) * delta.
    double target = 4.0;
};

/// Converts a discounted delay bound into the per-slot target used by mu_update.
inline double per_slot_target(double discounted_delta, double gamma) noexcept { return (1.0 - gamma) * discounted_delta; }

/// mu <- clamp(mu + beta (g - target), 0, mu_max).
inline MultiplierState mu_update(MultiplierState m, double g_realized, double beta) {
    if (beta < 0.0) throw std::invalid_argument("mu_update: negative step");
    m.mu = std::clamp(m.mu + beta * (g_realized - m.target), 0.0, m.mu_max);
    return m;
}

/// One observed transition for Q-learning (state and action indices).
struct ExperienceTuple {
    int s = 0;
    int a = 0;
    double cost = 0.0;
    int s_next = 0;
};

/// Q(s, a) <- (1 - alpha) Q(s, a) + alpha [c + gamma min_a' Q(s', a')], min over the first
/// `next_feasible` actions of s'.
inline void q_update(planner::QTable& q, const ExperienceTuple& e, double alpha, double gamma, int next_feasible) {
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("q_update: alpha must be in [0, 1]");
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < next_feasible; ++a) best = std::min(best, q(e.s_next, a));
    q(e.s, e.a) = (1.0 - alpha) * q(e.s, e.a) + alpha * (e.cost + gamma * best);
}

/// Greedy action (canonical tie-break) with probability 1 - eps, else uniform over the feasible prefix.
inline int epsilon_greedy(const planner::QTable& q, int s, int feasible, double eps, Rng& rng) {
    if (eps < 0.0 || eps > 1.0) throw std::invalid_argument("epsilon_greedy: eps must be in [0, 1]");
    if (feasible == 1) return 0;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) < eps) {
        std::uniform_int_distribution<int> pick(0, feasible - 1);
        return pick(rng);
    }
    const auto row = std::span<const double>(q.values).subspan(static_cast<std::size_t>(s) * q.num_actions,
                                                               static_cast<std::size_t>(feasible));
    return planner::canonical_argmin(row, 0.0);
}

/// Tabular Q-learner over a state space with prefix-feasible actions.
class QLearner {
public:
    QLearner(std::vector<int> feasible_counts, int num_actions, double gamma, double init = 0.0)
        : feasible_(std::move(feasible_counts)), gamma_(gamma),
          q_(static_cast<int>(feasible_.size()), num_actions, init) {}

    int act(int s, double eps, Rng& rng) const { return epsilon_greedy(q_, s, feasible_[s], eps, rng); }
    int greedy(int s) const { return epsilon_greedy(q_, s, feasible_[s], 0.0, dummy_rng()); }
    void update(const ExperienceTuple& e, double alpha) { q_update(q_, e, alpha, gamma_, feasible_[e.s_next]); }

    const planner::QTable& table() const noexcept { return q_; }
    planner::QTable& table() noexcept { return q_; }
    double gamma() const noexcept { return gamma_; }

private:
    static Rng& dummy_rng() {
        thread_local Rng r;
        return r;
    }

    std::vector<int> feasible_;
    double gamma_;
    planner::QTable q_;
};

/// One observed slot for PDS learning.
struct PdsExperienceTuple {
    State s;
    int a = 0;
    PostDecisionState pds;
    /// eta * max(b~ + l - B, 0), before weighting by mu.
    double overflow_cost = 0.0;
    State s_next;
    int arrivals = 0;
    int h_next = 0;
};

/// Table 2 learner state: the PDS value table plus the known model it is greedy against.
class PdsLearner {
public:
    PdsLearner(const KnownModel& known, pds::PdsValueTable initial) : known_(&known), v_(std::move(initial)) {
        if (static_cast<int>(v_.size()) != known.states().size()) throw std::invalid_argument("PdsLearner: table size");
    }

    const KnownModel& known() const noexcept { return *known_; }
    const pds::PdsValueTable& values() const noexcept { return v_; }
    pds::PdsValueTable& values() noexcept { return v_; }

    /// Greedy action: argmin_a c_k(s, a) + E_k[V~]. No exploration.
    int greedy(const State& s, double mu) const { return pds::pds_greedy_with_value(*known_, s, v_, mu).first; }

    /// V(s) = min_a c_k(s, a) + E_k[V~].
    double state_value(const State& s, double mu) const { return pds::pds_state_value(*known_, s, v_, mu); }

    /// V~(s~) <- (1 - alpha) V~(s~) + alpha [mu c_u + gamma V(s')].
    void update(const PdsExperienceTuple& e, double alpha, double mu) {
        const double target = update_target(e, mu);
        auto& slot = v_[static_cast<std::size_t>(known_->states().index(e.pds))];
        slot = (1.0 - alpha) * slot + alpha * target;
    }

    double update_target(const PdsExperienceTuple& e, double mu) const {
        return mu * e.overflow_cost + known_->gamma() * state_value(e.s_next, mu);
    }

    /// Applies the update to every tuple, all targets taken from the table before the batch.
    void batch_update(std::span<const PdsExperienceTuple> batch, double alpha, double mu) {
        targets_.resize(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) targets_[i] = update_target(batch[i], mu);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            auto& slot = v_[static_cast<std::size_t>(known_->states().index(batch[i].pds))];
            slot = (1.0 - alpha) * slot + alpha * targets_[i];
        }
    }

private:
    const KnownModel* known_;
    pds::PdsValueTable v_;
    std::vector<double> targets_;
};

/// Every (b~, x~) variant of an observed slot, sharing its channel, arrivals and next channel.
inline std::vector<PdsExperienceTuple> virtual_tuples(const PdsExperienceTuple& e, const KnownModel& known) {
    const int B = known.capacity();
    const double eta = known.config().queue.eta;
    std::vector<PdsExperienceTuple> out;
    out.reserve(static_cast<std::size_t>((B + 1) * power::kNumPowerStates));
    for (int b = 0; b <= B; ++b)
        for (int x = 0; x < power::kNumPowerStates; ++x) {
            const PowerState xs = power::power_state_at(x);
            PdsExperienceTuple v = e;
            v.pds = {b, e.pds.h, xs};
            v.overflow_cost = pds::realized_overflow_cost(b, e.arrivals, B, eta);
            v.s_next = {std::min(b + e.arrivals, B), e.h_next, xs};
            out.push_back(v);
        }
    return out;
}

/// Virtual-experience update every `period` slots (n mod period == 0); plain PDS update otherwise.
inline void ve_batch_update(PdsLearner& learner, const PdsExperienceTuple& e, double alpha, double mu, int period,
                            long long n) {
    if (period < 1) throw std::invalid_argument("ve_batch_update: period must be >= 1");
    if (n % period == 0) {
        const auto batch = virtual_tuples(e, learner.known());
        learner.batch_update(batch, alpha, mu);
    } else {
        learner.update(e, alpha, mu);
    }
}

}  // namespace pdsrl::learn
