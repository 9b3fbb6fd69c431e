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

// Slot-level stochastic environment. Each random component (goodput, power
// transition, arrivals, channel, perturbation, traffic state) draws from its
// own generator so that streams stay aligned when one component changes.

#include "pdsrl/common.hpp"
#include "pdsrl/model.hpp"
#include "pdsrl/pds_core.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace pdsrl::sim {

using Rng = std::mt19937_64;

/// Generator for substream `stream` of experiment seed `seed`.
inline Rng make_stream(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream, 0x9e3779b9u};
    return Rng(seq);
}

/// Uniform draw in [0, 1) from the top 53 bits.
inline double unit(Rng& rng) noexcept { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Inverse-CDF draw from a (non-normalized tail-tolerant) pmf.
inline int sample_index(std::span<const double> pmf, double u) noexcept {
    double c = 0.0;
    for (std::size_t i = 0; i < pmf.size(); ++i) {
        c += pmf[i];
        if (u < c) return static_cast<int>(i);
    }
    for (std::size_t i = pmf.size(); i-- > 0;)
        if (pmf[i] > 0.0) return static_cast<int>(i);
    return 0;
}

/// Adds uniform noise in [-magnitude, magnitude] to every non-zero entry, clamps at 0 and renormalizes rows.
/// Structural zeros stay zero.
inline ChannelMatrix perturb_channel(const ChannelMatrix& m, double magnitude, Rng& rng) {
    if (!(magnitude >= 0.0 && magnitude < 1.0)) throw std::domain_error("perturb_channel: magnitude in [0, 1)");
    if (magnitude == 0.0) return m;
    auto rows = m.rows();
    for (auto& r : rows) {
        for (double& p : r)
            if (p > 0.0) p = std::max(0.0, p + magnitude * (2.0 * unit(rng) - 1.0));
        double total = sum(r);
        if (total <= 0.0) {
            r = std::vector<double>(r.size(), 1.0 / static_cast<double>(r.size()));
            continue;
        }
        for (double& p : r) p /= total;
        // Pin the row sum to exactly 1.
        double head = 0.0;
        for (std::size_t i = 0; i + 1 < r.size(); ++i) head += r[i];
        r.back() = std::max(0.0, 1.0 - head);
        total = sum(r);
        if (std::abs(total - 1.0) > 1e-12) for (double& p : r) p /= total;
    }
    return ChannelMatrix(std::move(rows));
}

enum class ChannelMode { stationary, perturbed };

struct ChannelModel {
    ChannelMatrix matrix;
    ChannelMode mode = ChannelMode::stationary;
    double perturb_magnitude = 0.0;
};

/// Five-state traffic chain: Poisson rates in packets/s with a prescribed stationary law.
struct MmppSpec {
    std::array<double, 5> rates_per_s{0.0, 100.0, 200.0, 300.0, 400.0};
    std::array<double, 5> stationary{0.0188, 0.3755, 0.0973, 0.4842, 0.0242};
    /// Probability of keeping the current traffic state; otherwise redraw from `stationary`.
    double stay = 0.99;

    double mean_rate_per_s() const noexcept {
        double m = 0.0;
        for (std::size_t i = 0; i < rates_per_s.size(); ++i) m += rates_per_s[i] * stationary[i];
        return m;
    }
    /// Row `i` of the transition matrix.
    std::array<double, 5> transition_row(int i) const noexcept {
        std::array<double, 5> r{};
        for (std::size_t j = 0; j < r.size(); ++j) r[j] = (1.0 - stay) * stationary[j];
        r[static_cast<std::size_t>(i)] += stay;
        return r;
    }
};

/// Emits the current state's rate (packets/s) and draws the next traffic state.
inline std::pair<double, int> mmpp_step(int state, const MmppSpec& spec, Rng& rng) {
    if (state < 0 || state >= 5) throw std::out_of_range("mmpp_step: state index");
    const double rate = spec.rates_per_s[static_cast<std::size_t>(state)];
    const double u = unit(rng);
    int next = state;
    if (u >= spec.stay) next = sample_index(spec.stationary, (u - spec.stay) / (1.0 - spec.stay));
    return {rate, next};
}

enum class ArrivalMode { deterministic, poisson, mmpp };

struct ArrivalModel {
    ArrivalMode mode = ArrivalMode::poisson;
    /// Packets per slot for `deterministic`.
    int count = 2;
    /// Packets per second for `poisson`.
    double rate_per_s = 200.0;
    MmppSpec mmpp;
};

/// Everything that happened in one slot.
struct SlotOutcome {
    int f = 0;
    int l = 0;
    int h_next = 0;
    PowerState x_next = PowerState::on;
    double power_w = 0.0;
    int holding = 0;
    int overflow = 0;
    /// holding + eta * overflow
    double g_realized = 0.0;
    State s_next;
    PostDecisionState pds;
};

/// Canonical stream ids.
enum Stream : std::uint32_t { kGoodput = 1, kPower = 2, kArrivals = 3, kChannel = 4, kPerturb = 5, kTraffic = 6 };

class Environment {
public:
    Environment(const KnownModel& known, ChannelModel channel, ArrivalModel arrivals, std::uint64_t seed)
        : known_(&known), channel_(std::move(channel)), arrivals_(std::move(arrivals)),
          rng_goodput_(make_stream(seed, kGoodput)), rng_power_(make_stream(seed, kPower)),
          rng_arrivals_(make_stream(seed, kArrivals)), rng_channel_(make_stream(seed, kChannel)),
          rng_perturb_(make_stream(seed, kPerturb)), rng_traffic_(make_stream(seed, kTraffic)) {
        if (channel_.matrix.size() != known.config().num_channels())
            throw ConfigError("environment: channel matrix size does not match gain table");
        const double dt = known.config().phy.slot_seconds;
        switch (arrivals_.mode) {
        case ArrivalMode::deterministic:
            slot_pmfs_.push_back(queue::ArrivalDistribution::deterministic(arrivals_.count).pmf());
            break;
        case ArrivalMode::poisson:
            slot_pmfs_.push_back(queue::ArrivalDistribution::poisson(arrivals_.rate_per_s * dt).pmf());
            break;
        case ArrivalMode::mmpp:
            for (double r : arrivals_.mmpp.rates_per_s)
                slot_pmfs_.push_back(queue::ArrivalDistribution::poisson(r * dt).pmf());
            traffic_state_ = sample_index(arrivals_.mmpp.stationary, unit(rng_traffic_));
            break;
        }
    }

    /// Arrival distribution of the stationary modes (the model a planner with true statistics uses).
    queue::ArrivalDistribution stationary_arrivals() const {
        if (arrivals_.mode == ArrivalMode::mmpp) throw std::logic_error("mmpp arrivals are not i.i.d.");
        return queue::ArrivalDistribution(slot_pmfs_.front());
    }

    /// Samples one slot: goodput, power transition, arrivals, then channel.
    SlotOutcome step(const State& s, int ai) {
        const KnownModel& known = *known_;
        if (ai < 0 || ai >= known.actions().feasible_count(s) || !known.states().contains(s))
            throw FeasibilityError("env_step: infeasible action");
        const Action a = known.actions().action(ai);
        const int B = known.capacity();
        SlotOutcome o;
        o.f = sample_index(known.goodput(ai), unit(rng_goodput_));
        o.x_next = power::power_state_at(sample_index(known.pm_next(s.x, a.y), unit(rng_power_)));

        int pmf_index = 0;
        if (arrivals_.mode == ArrivalMode::mmpp) {
            pmf_index = traffic_state_;
            traffic_state_ = mmpp_step(traffic_state_, arrivals_.mmpp, rng_traffic_).second;
        }
        o.l = sample_index(slot_pmfs_[static_cast<std::size_t>(pmf_index)], unit(rng_arrivals_));

        if (channel_.mode == ChannelMode::perturbed) {
            const ChannelMatrix m = perturb_channel(channel_.matrix, channel_.perturb_magnitude, rng_perturb_);
            o.h_next = sample_index(m.row(s.h), unit(rng_channel_));
        } else {
            o.h_next = sample_index(channel_.matrix.row(s.h), unit(rng_channel_));
        }

        o.power_w = known.power_cost(s, ai);
        o.pds = pds::pds_of(s, a, o.f, o.x_next);
        o.holding = o.pds.b;
        o.overflow = queue::overflow_count(o.pds.b, o.l, B);
        o.g_realized = static_cast<double>(o.holding) + known.config().queue.eta * static_cast<double>(o.overflow);
        o.s_next = {queue::next_buffer(s.b, o.f, o.l, B), o.h_next, o.x_next};
        return o;
    }

    const ChannelModel& channel() const noexcept { return channel_; }
    const ArrivalModel& arrivals() const noexcept { return arrivals_; }
    int traffic_state() const noexcept { return traffic_state_; }

    /// Generator and traffic state, as text.
    std::string save_state() const {
        std::ostringstream os;
        os << rng_goodput_ << ' ' << rng_power_ << ' ' << rng_arrivals_ << ' ' << rng_channel_ << ' ' << rng_perturb_
           << ' ' << rng_traffic_ << ' ' << traffic_state_;
        return os.str();
    }
    void load_state(const std::string& text) {
        std::istringstream is(text);
        is >> rng_goodput_ >> rng_power_ >> rng_arrivals_ >> rng_channel_ >> rng_perturb_ >> rng_traffic_ >>
            traffic_state_;
        if (!is) throw std::runtime_error("environment: malformed saved state");
    }

private:
    const KnownModel* known_;
    ChannelModel channel_;
    ArrivalModel arrivals_;
    std::vector<std::vector<double>> slot_pmfs_;
    Rng rng_goodput_, rng_power_, rng_arrivals_, rng_channel_, rng_perturb_, rng_traffic_;
    int traffic_state_ = 0;
};

/// Baseline: wake when the backlog exceeds k, then drain at full rate with a fixed PLR and sleep when empty.
inline Action threshold_k_action(const State& s, int k, int z_max, int plr_index) {
    if (s.x == PowerState::off) return s.b > k ? Action{PmAction::s_on, 0, 0} : Action{PmAction::s_off, 0, 0};
    if (s.b == 0) return {PmAction::s_off, 0, 0};
    const int z = std::min(s.b, z_max);
    return z == 0 ? Action{PmAction::s_on, 0, 0} : Action{PmAction::s_on, z, plr_index};
}

}  // namespace pdsrl::sim
