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

// Slot-by-slot experiment driver for every algorithm, with checkpoint and resume.

#include "pdsrl/harness/config.hpp"
#include "pdsrl/harness/metrics.hpp"
#include "pdsrl/harness/serialize.hpp"
#include "pdsrl/learners.hpp"
#include "pdsrl/mdp_planner.hpp"
#include "pdsrl/pds_core.hpp"
#include "pdsrl/sim_env.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <functional>
#include <future>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

namespace pdsrl::harness {

/// Stream id for exploration draws, disjoint from the environment's.
inline constexpr std::uint32_t kPolicyStream = 7;

/// Per-slot arrival law of the configured source. For MMPP traffic, the stationary mixture.
inline queue::ArrivalDistribution true_arrivals(const ExperimentConfig& c) {
    const double dt = c.system.phy.slot_seconds;
    switch (c.arrivals.mode) {
    case sim::ArrivalMode::deterministic: return queue::ArrivalDistribution::deterministic(c.arrivals.count);
    case sim::ArrivalMode::poisson: return queue::ArrivalDistribution::poisson(c.arrivals.rate_per_s * dt);
    case sim::ArrivalMode::mmpp: break;
    }
    std::vector<double> mix;
    double total = 0.0;
    for (std::size_t i = 0; i < c.arrivals.mmpp.rates_per_s.size(); ++i) {
        const auto pmf = queue::ArrivalDistribution::poisson(c.arrivals.mmpp.rates_per_s[i] * dt).pmf();
        if (mix.size() < pmf.size()) mix.resize(pmf.size(), 0.0);
        for (std::size_t l = 0; l < pmf.size(); ++l) mix[l] += c.arrivals.mmpp.stationary[i] * pmf[l];
        total += c.arrivals.mmpp.stationary[i];
    }
    for (double& p : mix) p /= total;
    const double s = sum(mix);
    mix.back() += 1.0 - s;
    return queue::ArrivalDistribution(std::move(mix));
}

/// Long-run average of `cost(s, pi(s))` under the chain the policy induces, from the lazy chain's fixed point.
inline double stationary_average(const planner::Mdp& mdp, const planner::PolicyTable& pi,
                                 const std::function<double(const State&, int)>& cost, double tol = 1e-10,
                                 int max_iters = 20000) {
    const auto& S = mdp.states();
    const int n = S.size();
    std::vector<std::vector<std::pair<int, double>>> rows(static_cast<std::size_t>(n));
    for (int si = 0; si < n; ++si) rows[si] = mdp.joint_transition_pmf(S.state(si), pi[si]);
    std::vector<double> p(static_cast<std::size_t>(n), 1.0 / n), next(static_cast<std::size_t>(n));
    for (int it = 0; it < max_iters; ++it) {
        for (int si = 0; si < n; ++si) next[si] = 0.5 * p[si];
        for (int si = 0; si < n; ++si)
            for (const auto& [sj, pr] : rows[si]) next[sj] += 0.5 * p[si] * pr;
        double change = 0.0;
        for (int si = 0; si < n; ++si) change += std::abs(next[si] - p[si]);
        p.swap(next);
        if (change < tol) break;
    }
    double avg = 0.0;
    for (int si = 0; si < n; ++si) avg += p[si] * cost(S.state(si), pi[si]);
    return avg;
}

struct ConstrainedPlan {
    double mu = 0.0;
    planner::ViResult vi;
    double avg_buffer = 0.0;
};

/// Smallest multiplier on a log grid (5% resolution) whose greedy policy keeps the stationary average
/// buffer cost at or below `target`; mu_max when none does. Searches outward from `mu_guess`.
inline ConstrainedPlan solve_constrained(const KnownModel& known, const planner::JointModel& model, double target,
                                         double mu_max, double mu_guess, double tol, planner::ValueTable warm) {
    auto solve = [&](double mu) {
        planner::JointModel m = model;
        m.mu = mu;
        const planner::Mdp mdp(known, std::move(m));
        planner::ViOptions opt;
        opt.tol = tol;
        opt.initial = warm;
        ConstrainedPlan c;
        c.mu = mu;
        c.vi = planner::value_iteration(mdp, opt);
        c.avg_buffer = stationary_average(mdp, c.vi.policy,
                                          [&](const State& s, int ai) { return mdp.buffer_cost(s, ai); });
        warm = c.vi.values;
        return c;
    };
    const double floor_mu = 1e-7 * std::max(1.0, mu_max);
    ConstrainedPlan zero = solve(0.0);
    if (zero.avg_buffer <= target) return zero;
    double lo = 0.0, hi = std::clamp(mu_guess, floor_mu, mu_max);
    ConstrainedPlan best = solve(hi);
    if (best.avg_buffer > target) {
        while (best.avg_buffer > target && hi < mu_max) {
            lo = hi;
            hi = std::min(2.0 * hi, mu_max);
            best = solve(hi);
        }
        if (best.avg_buffer > target) return best;
    } else {
        for (;;) {
            const double down = hi / 2.0;
            if (down < floor_mu) break;
            ConstrainedPlan c = solve(down);
            if (c.avg_buffer > target) {
                lo = down;
                break;
            }
            hi = down;
            best = std::move(c);
        }
    }
    while (lo > 0.0 && hi / lo > 1.05) {
        const double mid = std::sqrt(lo * hi);
        ConstrainedPlan c = solve(mid);
        if (c.avg_buffer > target) {
            lo = mid;
        } else {
            hi = mid;
            best = std::move(c);
        }
    }
    return best;
}

class Experiment {
public:
    /// With `fixed_policy`, actions come from the table and nothing is learned.
    explicit Experiment(ExperimentConfig cfg, std::optional<planner::PolicyTable> fixed_policy = std::nullopt)
        : cfg_((cfg.validate(), std::move(cfg))), known_(cfg_.system),
          channel_(cfg_.channel.build(cfg_.system.num_channels())),
          env_(known_, sim::ChannelModel{channel_, cfg_.channel.mode, cfg_.channel.perturb_magnitude}, cfg_.arrivals,
               cfg_.seed),
          policy_rng_(sim::make_stream(cfg_.seed, kPolicyStream)),
          mult_{cfg_.multiplier.mu0, cfg_.multiplier.mu_max, cfg_.multiplier.holding_target},
          metrics_(cfg_.mu_window), s_(cfg_.initial_state), fixed_(std::move(fixed_policy)) {
        const auto& S = known_.states();
        if (fixed_ && static_cast<int>(fixed_->size()) != S.size())
            throw std::invalid_argument("experiment: fixed policy size mismatch");
        if (fixed_) return;
        switch (cfg_.algorithm) {
        case Algorithm::pds:
        case Algorithm::pds_ve: pds_.emplace(known_, pds::init_pds_values(known_, cfg_.init_assumptions())); break;
        case Algorithm::q: {
            std::vector<int> feasible(static_cast<std::size_t>(S.size()));
            for (int si = 0; si < S.size(); ++si) feasible[si] = known_.actions().feasible_count(S.state(si));
            q_.emplace(std::move(feasible), known_.actions().size(), known_.gamma());
            break;
        }
        case Algorithm::per_step_suboptimal: {
            const int H = cfg_.system.num_channels();
            arrival_counts_.assign(static_cast<std::size_t>(cfg_.system.capacity()) + 1, 1.0);
            channel_counts_.assign(static_cast<std::size_t>(H * H), 1.0);
            break;
        }
        case Algorithm::vi:
        case Algorithm::threshold_k: break;
        }
    }

    Experiment(const Experiment&) = delete;
    Experiment& operator=(const Experiment&) = delete;

    const ExperimentConfig& config() const noexcept { return cfg_; }
    const KnownModel& known() const noexcept { return known_; }
    long long slot() const noexcept { return n_; }
    const State& state() const noexcept { return s_; }
    double mu() const noexcept { return mult_.mu; }
    const MetricsAccumulator& metrics() const noexcept { return metrics_; }
    const std::optional<learn::PdsLearner>& pds_learner() const noexcept { return pds_; }
    const std::optional<learn::QLearner>& q_learner() const noexcept { return q_; }
    const planner::PolicyTable& plan_policy() const noexcept { return policy_; }
    const planner::ValueTable& plan_values() const noexcept { return plan_values_; }

    /// Runs slots until `slot() == until`, handing each slot's record to `sink`.
    void run_until(long long until, const std::function<void(const MetricsRecord&)>& sink = {}) {
        while (n_ < until) {
            const MetricsRecord r = step();
            if (sink) sink(r);
        }
    }

    /// Advances one slot.
    MetricsRecord step() {
        if (needs_plan()) plan(mult_.mu);
        const double mu = mult_.mu;
        const int ai = choose(mu);
        const sim::SlotOutcome o = env_.step(s_, ai);
        const long long n = n_;
        if (!fixed_) learn_from(o, ai, mu, n);
        if (learns_mu()) mult_ = learn::mu_update(mult_, o.g_realized, cfg_.schedule.beta(n));
        SlotSample sample;
        sample.power_w = o.power_w;
        sample.holding = o.holding;
        sample.overflow = o.overflow;
        sample.cost = o.power_w + mu * o.g_realized;
        sample.idle_off = s_.x == PowerState::off && known_.actions().action(ai).y == PmAction::s_off;
        sample.mu = mu;
        s_ = o.s_next;
        ++n_;
        return metrics_.add(sample);
    }

    /// Greedy policy of whatever the algorithm currently holds, at multiplier `mu`.
    planner::PolicyTable current_policy(double mu) const {
        const auto& S = known_.states();
        if (fixed_) return *fixed_;
        planner::PolicyTable pi(static_cast<std::size_t>(S.size()), 0);
        switch (cfg_.algorithm) {
        case Algorithm::pds:
        case Algorithm::pds_ve: return pds::policy_from_pds(known_, pds_->values(), mu);
        case Algorithm::q:
            for (int si = 0; si < S.size(); ++si) pi[si] = q_->greedy(si);
            return pi;
        case Algorithm::threshold_k:
            for (int si = 0; si < S.size(); ++si) pi[si] = threshold_index(S.state(si));
            return pi;
        case Algorithm::vi:
        case Algorithm::per_step_suboptimal:
            if (policy_.empty()) throw std::logic_error("experiment: no plan yet");
            return policy_;
        }
        return pi;
    }

    /// Learned tables in serializable form.
    std::vector<Table> tables() const {
        std::vector<Table> out;
        if (pds_) out.push_back(values_table("pds_values", pds_->values()));
        if (q_) out.push_back(q_table(q_->table()));
        if (!plan_values_.empty()) out.push_back(values_table("values", plan_values_));
        if (!policy_.empty() || pds_ || q_ || cfg_.algorithm == Algorithm::threshold_k || fixed_)
            out.push_back(policy_table(current_policy(mult_.mu)));
        return out;
    }

    Json checkpoint() const {
        std::ostringstream rng;
        rng << policy_rng_;
        Json j{{"format", "pdsrl-checkpoint"},
               {"version", 1},
               {"config_hash", trajectory_hash(cfg_)},
               {"n", n_},
               {"state", {s_.b, s_.h, s_.x == PowerState::on ? 0 : 1}},
               {"mu", mult_.mu},
               {"metrics", metrics_.save()},
               {"env", env_.save_state()},
               {"policy_rng", rng.str()},
               {"plan_values", plan_values_},
               {"policy", policy_},
               {"arrival_counts", arrival_counts_},
               {"channel_counts", channel_counts_}};
        if (pds_) j["pds_values"] = pds_->values();
        if (q_) j["q"] = q_->table().values;
        return j;
    }

    void restore(const Json& j) {
        try {
            if (j.at("format") != "pdsrl-checkpoint" || j.at("version") != 1)
                throw std::runtime_error("checkpoint: unknown format");
            if (j.at("config_hash").get<std::string>() != trajectory_hash(cfg_))
                throw std::runtime_error("checkpoint: config differs from the one that wrote it");
            const auto st = j.at("state").get<std::vector<int>>();
            if (st.size() != 3) throw std::runtime_error("checkpoint: bad state");
            const State s{st[0], st[1], power::power_state_at(st[2])};
            if (!known_.states().contains(s)) throw std::runtime_error("checkpoint: state out of range");
            const std::size_t ns = static_cast<std::size_t>(known_.states().size());
            auto take = [&](const char* key, std::vector<double>& dst, std::size_t expect) {
                auto v = j.at(key).get<std::vector<double>>();
                if (v.size() != expect) throw std::runtime_error(std::string("checkpoint: bad size for ") + key);
                dst = std::move(v);
            };
            metrics_.load(j.at("metrics"));
            env_.load_state(j.at("env").get<std::string>());
            std::istringstream rng(j.at("policy_rng").get<std::string>());
            rng >> policy_rng_;
            if (!rng) throw std::runtime_error("checkpoint: bad generator state");
            plan_values_ = j.at("plan_values").get<planner::ValueTable>();
            policy_ = j.at("policy").get<planner::PolicyTable>();
            if (!plan_values_.empty() && plan_values_.size() != ns) throw std::runtime_error("checkpoint: plan size");
            if (!policy_.empty() && policy_.size() != ns) throw std::runtime_error("checkpoint: policy size");
            take("arrival_counts", arrival_counts_, arrival_counts_.size());
            take("channel_counts", channel_counts_, channel_counts_.size());
            if (pds_) take("pds_values", pds_->values(), ns);
            if (q_) take("q", q_->table().values, q_->table().values.size());
            n_ = j.at("n").get<long long>();
            if (n_ != metrics_.count()) throw std::runtime_error("checkpoint: slot counter mismatch");
            s_ = s;
            mult_.mu = j.at("mu").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(std::string("checkpoint: ") + e.what());
        }
    }

private:
    /// Learners follow the slow multiplier recursion; planners pick the multiplier when they plan.
    bool learns_mu() const noexcept {
        return !fixed_ && cfg_.multiplier.learn &&
               (cfg_.algorithm == Algorithm::q || cfg_.algorithm == Algorithm::pds ||
                cfg_.algorithm == Algorithm::pds_ve);
    }

    bool needs_plan() const noexcept {
        if (fixed_) return false;
        if (cfg_.algorithm == Algorithm::per_step_suboptimal) return n_ % cfg_.suboptimal.epoch == 0;
        if (cfg_.algorithm == Algorithm::vi) return policy_.empty();
        return false;
    }

    void plan(double mu) {
        ChannelMatrix ch = channel_;
        queue::ArrivalDistribution arr = true_arrivals(cfg_);
        if (cfg_.algorithm == Algorithm::per_step_suboptimal) {
            const int H = cfg_.system.num_channels();
            std::vector<std::vector<double>> rows(static_cast<std::size_t>(H));
            for (int h = 0; h < H; ++h) {
                const auto first = channel_counts_.begin() + h * H;
                const double total = std::accumulate(first, first + H, 0.0);
                for (int h2 = 0; h2 < H; ++h2) rows[h].push_back(first[h2] / total);
            }
            ch = ChannelMatrix(std::move(rows));
            const double total = sum(arrival_counts_);
            std::vector<double> pmf;
            for (double c : arrival_counts_) pmf.push_back(c / total);
            pmf.back() += 1.0 - sum(pmf);
            arr = queue::ArrivalDistribution(std::move(pmf));
        }
        planner::JointModel model{cfg_.system, std::move(ch), std::move(arr), mu};
        if (cfg_.multiplier.learn) {
            auto c = solve_constrained(known_, model, cfg_.multiplier.holding_target, cfg_.multiplier.mu_max,
                                       mu > 0.0 ? mu : 1.0, cfg_.suboptimal.tol, plan_values_);
            mult_.mu = c.mu;
            plan_values_ = std::move(c.vi.values);
            policy_ = std::move(c.vi.policy);
            return;
        }
        const planner::Mdp mdp(known_, std::move(model));
        planner::ViOptions opt;
        opt.tol = cfg_.suboptimal.tol;
        opt.initial = plan_values_;
        auto r = planner::value_iteration(mdp, opt);
        plan_values_ = std::move(r.values);
        policy_ = std::move(r.policy);
    }

    int threshold_index(const State& s) const {
        return known_.actions().index(
            sim::threshold_k_action(s, cfg_.threshold.k, cfg_.system.z_max, cfg_.threshold.plr_index));
    }

    int choose(double mu) {
        const int si = known_.states().index(s_);
        if (fixed_) return (*fixed_)[static_cast<std::size_t>(si)];
        switch (cfg_.algorithm) {
        case Algorithm::pds:
        case Algorithm::pds_ve: return pds_->greedy(s_, mu);
        case Algorithm::q: return q_->act(si, cfg_.schedule.epsilon(n_), policy_rng_);
        case Algorithm::threshold_k: return threshold_index(s_);
        case Algorithm::vi:
        case Algorithm::per_step_suboptimal: return policy_[static_cast<std::size_t>(si)];
        }
        return 0;
    }

    void learn_from(const sim::SlotOutcome& o, int ai, double mu, long long n) {
        const auto& S = known_.states();
        const double alpha = cfg_.schedule.alpha(n);
        switch (cfg_.algorithm) {
        case Algorithm::q:
            q_->update({S.index(s_), ai, o.power_w + mu * o.g_realized, S.index(o.s_next)}, alpha);
            break;
        case Algorithm::pds:
        case Algorithm::pds_ve: {
            learn::PdsExperienceTuple e;
            e.s = s_;
            e.a = ai;
            e.pds = o.pds;
            e.overflow_cost = cfg_.system.queue.eta * o.overflow;
            e.s_next = o.s_next;
            e.arrivals = o.l;
            e.h_next = o.h_next;
            if (cfg_.algorithm == Algorithm::pds) pds_->update(e, alpha, mu);
            else learn::ve_batch_update(*pds_, e, alpha, mu, cfg_.ve_period, n);
            break;
        }
        case Algorithm::per_step_suboptimal: {
            const int H = cfg_.system.num_channels();
            arrival_counts_[static_cast<std::size_t>(std::min(o.l, cfg_.system.capacity()))] += 1.0;
            channel_counts_[static_cast<std::size_t>(s_.h * H + o.h_next)] += 1.0;
            break;
        }
        case Algorithm::vi:
        case Algorithm::threshold_k: break;
        }
    }

    ExperimentConfig cfg_;
    KnownModel known_;
    ChannelMatrix channel_;
    sim::Environment env_;
    sim::Rng policy_rng_;
    learn::MultiplierState mult_;
    MetricsAccumulator metrics_;
    State s_;
    long long n_ = 0;
    std::optional<planner::PolicyTable> fixed_;
    std::optional<learn::PdsLearner> pds_;
    std::optional<learn::QLearner> q_;
    planner::PolicyTable policy_;
    planner::ValueTable plan_values_;
    std::vector<double> arrival_counts_;
    std::vector<double> channel_counts_;
};

struct RunOptions {
    /// Keep every slot's record in the result.
    bool keep_records = true;
    /// CSV destination; falls back to the config's metrics path when null.
    std::ostream* csv = nullptr;
    std::optional<planner::PolicyTable> fixed_policy;
};

struct RunResult {
    std::vector<MetricsRecord> records;
    MetricsRecord final_record;
    double final_mu = 0.0;
    std::vector<Table> tables;
};

/// Runs `cfg.horizon` slots from scratch.
inline RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
    Experiment ex(cfg, opt.fixed_policy);
    std::ofstream file;
    std::ostream* csv = opt.csv;
    if (!csv && !cfg.metrics_path.empty()) {
        file.open(cfg.metrics_path);
        if (!file) throw std::runtime_error("cannot write '" + cfg.metrics_path + "'");
        csv = &file;
    }
    if (csv) *csv << kMetricsHeader << '\n';
    RunResult r;
    if (opt.keep_records) r.records.reserve(static_cast<std::size_t>(cfg.horizon));
    ex.run_until(cfg.horizon, [&](const MetricsRecord& m) {
        if (opt.keep_records) r.records.push_back(m);
        if (csv) *csv << csv_row(m) << '\n';
    });
    r.final_record = ex.metrics().current();
    r.final_mu = ex.mu();
    r.tables = ex.tables();
    if (!cfg.tables_path.empty())
        for (const Table& t : r.tables) save_table(cfg.tables_path + "." + t.kind + ".json", t, cfg.system);
    return r;
}

/// Calls `f(i)` for i in [0, count) on up to `threads` workers (all hardware threads when 0); results in index order.
template <class F>
auto parallel_map(std::size_t count, F f, unsigned threads = 0) -> std::vector<decltype(f(std::size_t{}))> {
    using R = decltype(f(std::size_t{}));
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
    std::vector<std::optional<R>> slots(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) slots[i].emplace(f(i));
    };
    std::vector<std::future<void>> pool;
    for (unsigned t = 1; t < threads; ++t) pool.push_back(std::async(std::launch::async, worker));
    worker();
    for (auto& p : pool) p.get();
    std::vector<R> out;
    out.reserve(count);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

}  // namespace pdsrl::harness
