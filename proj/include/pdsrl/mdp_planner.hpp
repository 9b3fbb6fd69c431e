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

// Exact dynamic programming on the joint discounted MDP with the Lagrangian
// cost rho + mu * g. Transitions are the product of the buffer, channel and
// power-state chains; expectations are taken factor by factor.

#include "pdsrl/common.hpp"
#include "pdsrl/model.hpp"

#include <concepts>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

namespace pdsrl::planner {

using ValueTable = std::vector<double>;
/// Action index (into ActionSpace) per state index.
using PolicyTable = std::vector<int>;

/// Action values, dense over (state, action); infeasible entries are unused.
struct QTable {
    int num_states = 0;
    int num_actions = 0;
    std::vector<double> values;

    QTable() = default;
    QTable(int states, int actions, double init = 0.0)
        : num_states(states), num_actions(actions),
          values(static_cast<std::size_t>(states) * static_cast<std::size_t>(actions), init) {}

    double& operator()(int s, int a) noexcept { return values[static_cast<std::size_t>(s) * num_actions + a]; }
    double operator()(int s, int a) const noexcept { return values[static_cast<std::size_t>(s) * num_actions + a]; }
};

/// Full statistical description of the system for a fixed multiplier.
struct JointModel {
    SystemConfig system;
    ChannelMatrix channel;
    queue::ArrivalDistribution arrivals;
    double mu = 0.0;
};

/// Index of the canonical argmin: the first value within `tie_tol` (relative) of the minimum.
inline int canonical_argmin(std::span<const double> values, double tie_tol) noexcept {
    double m = std::numeric_limits<double>::infinity();
    for (double v : values) m = std::min(m, v);
    const double cut = m + tie_tol * std::max(1.0, std::abs(m));
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i] <= cut) return static_cast<int>(i);
    return 0;
}

inline constexpr double kDefaultTieTolerance = 1e-10;

/// The joint MDP with precomputed costs and buffer transitions.
class Mdp {
public:
    explicit Mdp(const JointModel& model) : Mdp(KnownModel(model.system), model) {}

    Mdp(KnownModel known, JointModel model)
        : known_(std::move(known)), channel_(std::move(model.channel)), arrivals_(std::move(model.arrivals)),
          mu_(model.mu) {
        const SystemConfig& cfg = known_.config();
        if (channel_.size() != cfg.num_channels()) throw ConfigError("channel matrix size does not match gain table");
        if (mu_ < 0.0) throw ConfigError("multiplier must be non-negative");
        const int B = cfg.capacity();
        const int A = known_.actions().size();
        buffer_next_.resize(static_cast<std::size_t>((B + 1) * A));
        buffer_cost_.assign(static_cast<std::size_t>((B + 1) * A), 0.0);
        for (int b = 0; b <= B; ++b)
            for (int ai = 0; ai < A; ++ai) {
                const Action a = known_.actions().action(ai);
                if (a.z > b) continue;
                const double plr = cfg.plr_levels[a.plr];
                const auto next = queue::buffer_transition_pmf(b, a.z, plr, arrivals_, B);
                int lo = 0, hi = B;
                while (lo < B && next[lo] == 0.0) ++lo;
                while (hi > lo && next[hi] == 0.0) --hi;
                buffer_next_[bi(b, ai)] = Pmf{lo, std::vector<double>(next.begin() + lo, next.begin() + hi + 1)};
                buffer_cost_[bi(b, ai)] = queue::buffer_cost(b, a.z, plr, arrivals_, cfg.queue);
            }
    }

    const KnownModel& known() const noexcept { return known_; }
    const StateSpace& states() const noexcept { return known_.states(); }
    const ActionSpace& actions() const noexcept { return known_.actions(); }
    const ChannelMatrix& channel() const noexcept { return channel_; }
    const queue::ArrivalDistribution& arrivals() const noexcept { return arrivals_; }
    double gamma() const noexcept { return known_.gamma(); }
    double mu() const noexcept { return mu_; }

    /// rho(s, a).
    double power_cost(const State& s, int ai) const noexcept { return known_.power_cost(s, ai); }
    /// g(s, a): expected holding plus eta-weighted overflow.
    double buffer_cost(const State& s, int ai) const noexcept { return buffer_cost_[bi(s.b, ai)]; }
    /// Lagrangian cost rho + mu g.
    double lagrangian_cost(const State& s, int ai) const noexcept {
        return power_cost(s, ai) + mu_ * buffer_cost(s, ai);
    }
    /// Distribution of b' given (b, a).
    const Pmf& buffer_next(int b, int ai) const noexcept { return buffer_next_[bi(b, ai)]; }

    /// p(s' | s, a) as (state index, probability) pairs with non-zero mass.
    std::vector<std::pair<int, double>> joint_transition_pmf(const State& s, int ai) const {
        if (ai >= actions().feasible_count(s)) throw FeasibilityError("joint_transition_pmf: infeasible action");
        const Action a = actions().action(ai);
        const auto& px = known_.pm_next(s.x, a.y);
        const Pmf& pb = buffer_next(s.b, ai);
        std::vector<std::pair<int, double>> out;
        for (int b2 = pb.lo(); b2 <= pb.hi(); ++b2)
            for (int h2 = 0; h2 < channel_.size(); ++h2)
                for (int x2 = 0; x2 < power::kNumPowerStates; ++x2) {
                    const double p = pb(b2) * channel_(s.h, h2) * px[x2];
                    if (p > 0.0) out.emplace_back(states().index(b2, h2, power::power_state_at(x2)), p);
                }
        return out;
    }

    /// E[V(s') | s, a] computed from the channel-averaged table `vh` (see channel_average).
    double expected_next(const State& s, int ai, std::span<const double> vh) const noexcept {
        const Action a = actions().action(ai);
        const auto& px = known_.pm_next(s.x, a.y);
        const Pmf& pb = buffer_next(s.b, ai);
        double ev = 0.0;
        for (int x2 = 0; x2 < power::kNumPowerStates; ++x2) {
            if (px[x2] == 0.0) continue;
            double acc = 0.0;
            for (int b2 = pb.lo(); b2 <= pb.hi(); ++b2)
                acc += pb(b2) * vh[static_cast<std::size_t>(states().index(b2, s.h, power::power_state_at(x2)))];
            ev += px[x2] * acc;
        }
        return ev;
    }

    /// vh(b', h, x') = sum_h' p(h' | h) V(b', h', x'), laid out like V.
    void channel_average(std::span<const double> v, std::vector<double>& vh) const {
        vh.assign(v.size(), 0.0);
        const int H = channel_.size();
        for (int b = 0; b <= known_.capacity(); ++b)
            for (int h = 0; h < H; ++h)
                for (int x = 0; x < power::kNumPowerStates; ++x) {
                    double acc = 0.0;
                    for (int h2 = 0; h2 < H; ++h2)
                        acc += channel_(h, h2) * v[static_cast<std::size_t>(states().index(b, h2, power::power_state_at(x)))];
                    vh[static_cast<std::size_t>(states().index(b, h, power::power_state_at(x)))] = acc;
                }
    }

private:
    std::size_t bi(int b, int ai) const noexcept { return static_cast<std::size_t>(b * known_.actions().size() + ai); }

    KnownModel known_;
    ChannelMatrix channel_;
    queue::ArrivalDistribution arrivals_;
    double mu_ = 0.0;
    std::vector<Pmf> buffer_next_;
    std::vector<double> buffer_cost_;
};

/// A finite discounted MDP whose feasible actions in state s are the indices [0, num_actions(s)).
/// `prepare` turns a value table into a workspace from which `expected(s, a, ws)` returns E[V(s') | s, a].
template <class M>
concept FiniteMdp = requires(const M& m, int s, int a, std::span<const double> v, std::vector<double>& ws) {
    { m.num_states() } -> std::convertible_to<int>;
    { m.num_actions(s) } -> std::convertible_to<int>;
    { m.cost(s, a) } -> std::convertible_to<double>;
    { m.discount() } -> std::convertible_to<double>;
    m.prepare(v, ws);
    { m.expected(s, a, std::span<const double>(ws)) } -> std::convertible_to<double>;
};

/// Small explicit MDP: per (state, action) a cost and a list of (next state, probability).
class TabularMdp {
public:
    struct Outcome {
        int next;
        double prob;
    };

    TabularMdp(int num_states, double discount) : discount_(discount), rows_(static_cast<std::size_t>(num_states)) {
        if (!(discount >= 0.0 && discount < 1.0)) throw ConfigError("discount must be in [0, 1)");
    }

    /// Appends an action to state `s`; returns its index.
    int add_action(int s, double cost, std::vector<Outcome> outcomes) {
        double total = 0.0;
        for (const auto& o : outcomes) {
            if (o.next < 0 || o.next >= num_states() || o.prob < 0.0) throw ConfigError("bad transition");
            total += o.prob;
        }
        if (std::abs(total - 1.0) > 1e-12) throw ConfigError("transition probabilities must sum to 1");
        rows_[static_cast<std::size_t>(s)].push_back({cost, std::move(outcomes)});
        return static_cast<int>(rows_[static_cast<std::size_t>(s)].size()) - 1;
    }

    int num_states() const noexcept { return static_cast<int>(rows_.size()); }
    int num_actions(int s) const noexcept { return static_cast<int>(rows_[static_cast<std::size_t>(s)].size()); }
    double cost(int s, int a) const noexcept { return entry(s, a).cost; }
    double discount() const noexcept { return discount_; }
    const std::vector<Outcome>& outcomes(int s, int a) const noexcept { return entry(s, a).outcomes; }

    void prepare(std::span<const double> v, std::vector<double>& ws) const { ws.assign(v.begin(), v.end()); }
    double expected(int s, int a, std::span<const double> ws) const noexcept {
        double e = 0.0;
        for (const auto& o : outcomes(s, a)) e += o.prob * ws[static_cast<std::size_t>(o.next)];
        return e;
    }

private:
    struct Entry {
        double cost;
        std::vector<Outcome> outcomes;
    };
    const Entry& entry(int s, int a) const noexcept {
        return rows_[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
    }

    double discount_;
    std::vector<std::vector<Entry>> rows_;
};

/// Adapts the wireless Mdp to FiniteMdp with the Lagrangian cost.
struct LagrangianView {
    const Mdp& mdp;

    int num_states() const noexcept { return mdp.states().size(); }
    int num_actions(int s) const noexcept { return mdp.actions().feasible_count(mdp.states().state(s)); }
    double cost(int s, int a) const noexcept { return mdp.lagrangian_cost(mdp.states().state(s), a); }
    double discount() const noexcept { return mdp.gamma(); }
    void prepare(std::span<const double> v, std::vector<double>& ws) const { mdp.channel_average(v, ws); }
    double expected(int s, int a, std::span<const double> ws) const noexcept {
        return mdp.expected_next(mdp.states().state(s), a, ws);
    }
};

/// Q(s, a) = c(s, a) + gamma E[V(s') | s, a].
template <FiniteMdp M>
double action_value(const M& m, int s, int a, std::span<const double> v) {
    std::vector<double> ws;
    m.prepare(v, ws);
    return m.cost(s, a) + m.discount() * m.expected(s, a, ws);
}

inline double action_value(const Mdp& mdp, const State& s, int ai, std::span<const double> v) {
    if (ai >= mdp.actions().feasible_count(s)) throw FeasibilityError("action_value: infeasible action");
    return action_value(LagrangianView{mdp}, mdp.states().index(s), ai, v);
}

struct ViOptions {
    double tol = 1e-9;
    int max_iters = 200000;
    double tie_tol = kDefaultTieTolerance;
    /// Optional starting point; zeros when empty.
    ValueTable initial;
    /// Called with (iteration, sup-norm residual) after every sweep.
    std::function<void(int, double)> on_sweep;
};

struct ViResult {
    ValueTable values;
    PolicyTable policy;
    int iterations = 0;
    double residual = 0.0;
};

/// Full action-value table of `v`; infeasible entries are +inf.
template <FiniteMdp M>
QTable action_values(const M& m, std::span<const double> v) {
    int width = 0;
    for (int s = 0; s < m.num_states(); ++s) width = std::max(width, m.num_actions(s));
    QTable q(m.num_states(), width, std::numeric_limits<double>::infinity());
    std::vector<double> ws;
    m.prepare(v, ws);
    for (int s = 0; s < m.num_states(); ++s)
        for (int a = 0; a < m.num_actions(s); ++a) q(s, a) = m.cost(s, a) + m.discount() * m.expected(s, a, ws);
    return q;
}

inline QTable action_values(const Mdp& mdp, std::span<const double> v) {
    QTable q = action_values(LagrangianView{mdp}, v);
    if (q.num_actions < mdp.actions().size()) {
        QTable wide(q.num_states, mdp.actions().size(), std::numeric_limits<double>::infinity());
        for (int s = 0; s < q.num_states; ++s)
            for (int a = 0; a < q.num_actions; ++a) wide(s, a) = q(s, a);
        return wide;
    }
    return q;
}

/// Greedy policy of `v` with canonical tie-breaking.
template <FiniteMdp M>
PolicyTable greedy_policy(const M& m, std::span<const double> v, double tie_tol = kDefaultTieTolerance) {
    std::vector<double> ws;
    m.prepare(v, ws);
    PolicyTable pi(static_cast<std::size_t>(m.num_states()), 0);
    std::vector<double> q;
    for (int s = 0; s < m.num_states(); ++s) {
        q.resize(static_cast<std::size_t>(m.num_actions(s)));
        for (int a = 0; a < m.num_actions(s); ++a) q[a] = m.cost(s, a) + m.discount() * m.expected(s, a, ws);
        pi[s] = canonical_argmin(q, tie_tol);
    }
    return pi;
}

inline PolicyTable greedy_policy(const Mdp& mdp, std::span<const double> v, double tie_tol = kDefaultTieTolerance) {
    return greedy_policy(LagrangianView{mdp}, v, tie_tol);
}

/// Jacobi value iteration to a sup-norm Bellman residual below `tol`.
template <FiniteMdp M>
ViResult value_iteration(const M& m, const ViOptions& opt = {}) {
    if (!(opt.tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
    const int n = m.num_states();
    ViResult r;
    r.values = opt.initial.empty() ? ValueTable(static_cast<std::size_t>(n), 0.0) : opt.initial;
    if (static_cast<int>(r.values.size()) != n) throw std::invalid_argument("value_iteration: bad initial size");
    ValueTable next(static_cast<std::size_t>(n));
    std::vector<double> ws;
    for (int it = 1; it <= opt.max_iters; ++it) {
        m.prepare(r.values, ws);
        for (int s = 0; s < n; ++s) {
            double best = std::numeric_limits<double>::infinity();
            for (int a = 0; a < m.num_actions(s); ++a)
                best = std::min(best, m.cost(s, a) + m.discount() * m.expected(s, a, ws));
            next[s] = best;
        }
        r.residual = sup_norm_diff(next, r.values);
        r.values.swap(next);
        r.iterations = it;
        if (opt.on_sweep) opt.on_sweep(it, r.residual);
        if (r.residual < opt.tol) {
            r.policy = greedy_policy(m, r.values, opt.tie_tol);
            return r;
        }
    }
    throw ConvergenceError("value_iteration did not converge", r.residual);
}

inline ViResult value_iteration(const Mdp& mdp, const ViOptions& opt = {}) {
    return value_iteration(LagrangianView{mdp}, opt);
}

/// Discounted value of a stationary policy under the per-step cost `cost(s, a)`.
template <FiniteMdp M, class Cost>
ValueTable evaluate_policy(const M& m, const PolicyTable& pi, Cost&& cost, double tol = 1e-9,
                           int max_iters = 200000) {
    const int n = m.num_states();
    if (static_cast<int>(pi.size()) != n) throw std::invalid_argument("evaluate_policy: policy size mismatch");
    for (int s = 0; s < n; ++s)
        if (pi[s] < 0 || pi[s] >= m.num_actions(s)) throw FeasibilityError("evaluate_policy: infeasible action");
    ValueTable v(static_cast<std::size_t>(n), 0.0), next(static_cast<std::size_t>(n), 0.0);
    std::vector<double> ws;
    double residual = 0.0;
    for (int it = 1; it <= max_iters; ++it) {
        m.prepare(v, ws);
        for (int s = 0; s < n; ++s) next[s] = cost(s, pi[s]) + m.discount() * m.expected(s, pi[s], ws);
        residual = sup_norm_diff(next, v);
        v.swap(next);
        if (residual < tol) return v;
    }
    throw ConvergenceError("evaluate_policy did not converge", residual);
}

/// Discounted Lagrangian, power and buffer cost of a stationary policy, per state.
struct PolicyEvaluation {
    ValueTable lagrangian;
    ValueTable power;
    ValueTable buffer;
};

inline PolicyEvaluation policy_evaluate(const Mdp& mdp, const PolicyTable& pi, double tol = 1e-9) {
    const LagrangianView view{mdp};
    const auto& S = mdp.states();
    PolicyEvaluation e;
    e.lagrangian = evaluate_policy(view, pi, [&](int s, int a) { return mdp.lagrangian_cost(S.state(s), a); }, tol);
    e.power = evaluate_policy(view, pi, [&](int s, int a) { return mdp.power_cost(S.state(s), a); }, tol);
    e.buffer = evaluate_policy(view, pi, [&](int s, int a) { return mdp.buffer_cost(S.state(s), a); }, tol);
    return e;
}

}  // namespace pdsrl::planner
