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

// Post-decision states split each slot into a known part (transmission and
// power switching, s -> s~) and an unknown part (arrivals and channel
// evolution, s~ -> s'). The unknown part never depends on the action, so a
// value table over post-decision states is enough to act greedily.

#include "pdsrl/common.hpp"
#include "pdsrl/mdp_planner.hpp"
#include "pdsrl/model.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace pdsrl::pds {

/// Value per post-decision state, indexed like StateSpace.
using PdsValueTable = std::vector<double>;

/// Post-decision state reached from `s` after `a` delivers `f` packets and the card moves to `x_next`.
inline PostDecisionState pds_of(const State& s, const Action& a, int f, PowerState x_next) {
    if (f < 0 || f > a.z) throw std::invalid_argument("pds_of: goodput must be in [0, z]");
    return {s.b - f, s.h, x_next};
}

/// Realized overflow cost eta * max(b~ + l - B, 0) of one slot.
inline double realized_overflow_cost(int b_post, int l, int capacity, double eta) noexcept {
    return eta * static_cast<double>(queue::overflow_count(b_post, l, capacity));
}

/// Known part of the cost: rho(s, a) + mu * E[b - f].
inline double known_cost(const KnownModel& known, const State& s, int ai, double mu) noexcept {
    return known.power_cost(s, ai) + mu * known.expected_holding(s, ai);
}

/// p_k(s~ | s, a) as (pds index, probability) pairs.
inline std::vector<std::pair<int, double>> known_pmf(const KnownModel& known, const State& s, int ai) {
    if (ai >= known.actions().feasible_count(s)) throw FeasibilityError("known_pmf: infeasible action");
    const Action a = known.actions().action(ai);
    const auto& px = known.pm_next(s.x, a.y);
    const auto& pf = known.goodput(ai);
    std::vector<std::pair<int, double>> out;
    for (int f = 0; f <= a.z; ++f)
        for (int x2 = 0; x2 < power::kNumPowerStates; ++x2) {
            const double p = pf[static_cast<std::size_t>(f)] * px[x2];
            if (p > 0.0) out.emplace_back(known.states().index(s.b - f, s.h, power::power_state_at(x2)), p);
        }
    return out;
}

/// c_k(s, a) + sum_s~ p_k(s~ | s, a) V~(s~).
inline double pds_action_value(const KnownModel& known, const State& s, int ai, std::span<const double> vpds,
                               double mu) noexcept {
    const Action a = known.actions().action(ai);
    const auto& px = known.pm_next(s.x, a.y);
    const auto& pf = known.goodput(ai);
    const auto& S = known.states();
    double ev = 0.0;
    for (int x2 = 0; x2 < power::kNumPowerStates; ++x2) {
        if (px[x2] == 0.0) continue;
        const PowerState xn = power::power_state_at(x2);
        double acc = 0.0;
        for (int f = 0; f <= a.z; ++f)
            acc += pf[static_cast<std::size_t>(f)] * vpds[static_cast<std::size_t>(S.index(s.b - f, s.h, xn))];
        ev += px[x2] * acc;
    }
    return known_cost(known, s, ai, mu) + ev;
}

/// Greedy action index and its value under V~, canonical tie-break.
inline std::pair<int, double> pds_greedy_with_value(const KnownModel& known, const State& s,
                                                    std::span<const double> vpds, double mu,
                                                    double tie_tol = planner::kDefaultTieTolerance) {
    const int count = known.actions().feasible_count(s);
    double q[256];
    std::vector<double> heap;
    double* qs = q;
    if (count > 256) {
        heap.resize(static_cast<std::size_t>(count));
        qs = heap.data();
    }
    double best = std::numeric_limits<double>::infinity();
    for (int ai = 0; ai < count; ++ai) {
        qs[ai] = pds_action_value(known, s, ai, vpds, mu);
        best = std::min(best, qs[ai]);
    }
    const int arg = planner::canonical_argmin(std::span<const double>(qs, static_cast<std::size_t>(count)), tie_tol);
    return {arg, best};
}

/// V(s) = min_a { c_k(s, a) + sum p_k V~ }.
inline double pds_state_value(const KnownModel& known, const State& s, std::span<const double> vpds, double mu) noexcept {
    const int count = known.actions().feasible_count(s);
    double best = std::numeric_limits<double>::infinity();
    for (int ai = 0; ai < count; ++ai) best = std::min(best, pds_action_value(known, s, ai, vpds, mu));
    return best;
}

/// Greedy policy over V~ with the planner's tie-break rule.
inline planner::PolicyTable policy_from_pds(const KnownModel& known, std::span<const double> vpds, double mu,
                                            double tie_tol = planner::kDefaultTieTolerance) {
    if (static_cast<int>(vpds.size()) != known.states().size()) throw std::invalid_argument("policy_from_pds: size");
    planner::PolicyTable pi(static_cast<std::size_t>(known.states().size()));
    for (int si = 0; si < known.states().size(); ++si)
        pi[si] = pds_greedy_with_value(known, known.states().state(si), vpds, mu, tie_tol).first;
    return pi;
}

/// Arrival and channel statistics: the part of the dynamics the controller does not know.
struct UnknownDynamics {
    ChannelMatrix channel;
    queue::ArrivalDistribution arrivals;
};

/// Multipliers applied to the holding part (inside c_k) and the overflow part (c_u).
struct CostWeights {
    double holding = 0.0;
    double overflow = 0.0;

    static CostWeights lagrangian(double mu) noexcept { return {mu, mu}; }
};

/// Known and unknown factors of the joint model.
class FactoredDynamics {
public:
    FactoredDynamics(KnownModel known, UnknownDynamics unknown)
        : known_(std::move(known)), unknown_(std::move(unknown)) {
        if (unknown_.channel.size() != known_.config().num_channels())
            throw ConfigError("factored: channel matrix size does not match gain table");
        const int B = known_.capacity();
        for (int bp = 0; bp <= B; ++bp) {
            std::vector<double> next(static_cast<std::size_t>(B) + 1, 0.0);
            for (int l = 0; l <= unknown_.arrivals.max_arrivals(); ++l)
                next[static_cast<std::size_t>(std::min(bp + l, B))] += unknown_.arrivals(l);
            buffer_after_arrivals_.push_back(Pmf{bp, std::vector<double>(next.begin() + bp, next.end())});
            expected_overflow_.push_back(queue::expected_overflow(bp, unknown_.arrivals, B));
        }
    }

    const KnownModel& known() const noexcept { return known_; }
    const UnknownDynamics& unknown() const noexcept { return unknown_; }
    double eta() const noexcept { return known_.config().queue.eta; }

    /// p_u(s' | s~) as (state index, probability) pairs.
    std::vector<std::pair<int, double>> unknown_pmf(const PostDecisionState& p) const {
        const Pmf& pb = buffer_after_arrivals_[static_cast<std::size_t>(p.b)];
        std::vector<std::pair<int, double>> out;
        for (int b2 = pb.lo(); b2 <= pb.hi(); ++b2)
            for (int h2 = 0; h2 < unknown_.channel.size(); ++h2) {
                const double pr = pb(b2) * unknown_.channel(p.h, h2);
                if (pr > 0.0) out.emplace_back(known_.states().index(b2, h2, p.x), pr);
            }
        return out;
    }

    /// c_u(s~) = overflow_weight * eta * E[max(b~ + l - B, 0)].
    double unknown_cost(const PostDecisionState& p, double overflow_weight) const noexcept {
        return overflow_weight * eta() * expected_overflow_[static_cast<std::size_t>(p.b)];
    }

    /// sum_s' p_u(s' | s~) V(s') for every s~, written into `out` (laid out like V).
    void unknown_expectation(std::span<const double> v, std::vector<double>& out) const {
        const auto& S = known_.states();
        const int H = unknown_.channel.size();
        out.assign(v.size(), 0.0);
        std::vector<double> vh(v.size(), 0.0);
        for (int b = 0; b <= known_.capacity(); ++b)
            for (int h = 0; h < H; ++h)
                for (int x = 0; x < power::kNumPowerStates; ++x) {
                    double acc = 0.0;
                    for (int h2 = 0; h2 < H; ++h2)
                        acc += unknown_.channel(h, h2) * v[static_cast<std::size_t>(S.index(b, h2, power::power_state_at(x)))];
                    vh[static_cast<std::size_t>(S.index(b, h, power::power_state_at(x)))] = acc;
                }
        for (int si = 0; si < S.size(); ++si) {
            const State p = S.state(si);
            const Pmf& pb = buffer_after_arrivals_[static_cast<std::size_t>(p.b)];
            double acc = 0.0;
            for (int b2 = pb.lo(); b2 <= pb.hi(); ++b2) acc += pb(b2) * vh[static_cast<std::size_t>(S.index(b2, p.h, p.x))];
            out[static_cast<std::size_t>(si)] = acc;
        }
    }

private:
    KnownModel known_;
    UnknownDynamics unknown_;
    std::vector<Pmf> buffer_after_arrivals_;
    std::vector<double> expected_overflow_;
};

struct PdsViOptions {
    double tol = 1e-9;
    int max_iters = 200000;
    /// Called with (iteration, sup-norm change of V~) after every sweep.
    std::function<void(int, double)> on_sweep;
};

struct PdsViResult {
    PdsValueTable pds_values;
    planner::ValueTable values;
    int iterations = 0;
    double residual = 0.0;
};

/// Alternates V~ = c_u + gamma E_u[V] and V = min_a { c_k + E_k[V~] } until V~ moves less than `tol`.
inline PdsViResult pds_value_iteration(const FactoredDynamics& fd, CostWeights w, const PdsViOptions& opt = {}) {
    if (!(opt.tol > 0.0)) throw std::invalid_argument("pds_value_iteration: tol must be positive");
    const KnownModel& known = fd.known();
    const auto& S = known.states();
    const int n = S.size();
    const double gamma = known.gamma();
    std::vector<double> cu(static_cast<std::size_t>(n));
    for (int si = 0; si < n; ++si) cu[si] = fd.unknown_cost(S.state(si), w.overflow);

    PdsViResult r;
    r.values.assign(static_cast<std::size_t>(n), 0.0);
    r.pds_values.assign(static_cast<std::size_t>(n), 0.0);
    PdsValueTable next(static_cast<std::size_t>(n));
    std::vector<double> eu;
    for (int it = 1; it <= opt.max_iters; ++it) {
        fd.unknown_expectation(r.values, eu);
        for (int si = 0; si < n; ++si) next[si] = cu[si] + gamma * eu[si];
        r.residual = sup_norm_diff(next, r.pds_values);
        r.pds_values.swap(next);
        for (int si = 0; si < n; ++si) r.values[si] = pds_state_value(known, S.state(si), r.pds_values, w.holding);
        r.iterations = it;
        if (opt.on_sweep) opt.on_sweep(it, r.residual);
        if (r.residual < opt.tol) return r;
    }
    throw ConvergenceError("pds_value_iteration did not converge", r.residual);
}

/// Assumptions used to build the initial PDS value table offline.
struct InitAssumptions {
    queue::ArrivalDistribution arrivals = queue::ArrivalDistribution::deterministic(5);
    /// Identity over the gain table when empty.
    std::optional<ChannelMatrix> channel;
    /// Holding weight inside c_k during initialization.
    double mu_holding = 0.0;
    /// Weight on the assumed overflow cost.
    double overflow_weight = 1.0;
    double tol = 1e-9;
};

/// True if some off state has s_on as its greedy action under V~.
inline bool switches_on_somewhere(const KnownModel& known, std::span<const double> vpds, double mu) {
    for (int si = 0; si < known.states().size(); ++si) {
        const State s = known.states().state(si);
        if (s.x != PowerState::off) continue;
        const int ai = pds_greedy_with_value(known, s, vpds, mu).first;
        if (known.actions().action(ai).y == PmAction::s_on) return true;
    }
    return false;
}

/// Offline V~ from assumed arrival/channel statistics. Throws InitializationError when the
/// result would keep the card off in every off state.
inline PdsValueTable init_pds_values(const KnownModel& known, const InitAssumptions& assume = {}) {
    const int H = known.config().num_channels();
    UnknownDynamics guess{assume.channel.value_or(ChannelMatrix::identity(H)), assume.arrivals};
    const FactoredDynamics fd(known, std::move(guess));
    PdsViOptions opt;
    opt.tol = assume.tol;
    auto r = pds_value_iteration(fd, CostWeights{assume.mu_holding, assume.overflow_weight}, opt);
    if (!switches_on_somewhere(known, r.pds_values, assume.mu_holding))
        throw InitializationError(
            "init_pds_values: assumed arrivals never force a switch-on from the off state; assume a larger rate");
    return std::move(r.pds_values);
}

}  // namespace pdsrl::pds
