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

// Experiment configuration and its JSON form. Missing keys keep their
// defaults (the full-scale profile); unknown keys are rejected.

#include "pdsrl/learners.hpp"
#include "pdsrl/model.hpp"
#include "pdsrl/pds_core.hpp"
#include "pdsrl/sim_env.hpp"

#include "json.hpp"

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

namespace pdsrl::harness {

using Json = nlohmann::json;

enum class Algorithm { vi, q, pds, pds_ve, threshold_k, per_step_suboptimal };

inline const char* to_string(Algorithm a) noexcept {
    switch (a) {
    case Algorithm::vi: return "vi";
    case Algorithm::q: return "q";
    case Algorithm::pds: return "pds";
    case Algorithm::pds_ve: return "pds_ve";
    case Algorithm::threshold_k: return "threshold_k";
    case Algorithm::per_step_suboptimal: return "per_step_suboptimal";
    }
    return "?";
}

inline Algorithm algorithm_from_string(const std::string& s) {
    for (Algorithm a : {Algorithm::vi, Algorithm::q, Algorithm::pds, Algorithm::pds_ve, Algorithm::threshold_k,
                        Algorithm::per_step_suboptimal})
        if (s == to_string(a)) return a;
    if (s == "pds-ve") return Algorithm::pds_ve;
    throw ConfigError("unknown algorithm '" + s + "'");
}

struct ChannelConfig {
    /// Explicit p(h' | h); a birth-death chain with `stay` when empty.
    std::vector<std::vector<double>> matrix;
    double stay = 0.6;
    sim::ChannelMode mode = sim::ChannelMode::stationary;
    double perturb_magnitude = 0.0;

    ChannelMatrix build(int num_channels) const {
        if (matrix.empty()) return ChannelMatrix::birth_death(num_channels, stay);
        ChannelMatrix m(matrix);
        if (m.size() != num_channels) throw ConfigError("channel matrix size does not match gain table");
        return m;
    }
};

struct MultiplierConfig {
    double mu0 = 0.0;
    double mu_max = 100.0;
    /// Per-slot buffer-cost target, (1 - gamma) times the discounted bound.
    double holding_target = 4.0;
    /// When false, mu stays at mu0.
    bool learn = true;
};

/// Offline PDS initialization assumptions.
struct InitConfig {
    enum class Kind { deterministic, uniform } kind = Kind::deterministic;
    int count = 5;
};

struct ThresholdConfig {
    int k = 0;
    int plr_index = 0;
};

struct SuboptimalConfig {
    /// Slots between re-plans.
    int epoch = 100;
    double tol = 1e-6;
};

struct ExperimentConfig {
    SystemConfig system;
    ChannelConfig channel;
    sim::ArrivalModel arrivals;
    Algorithm algorithm = Algorithm::pds_ve;
    int ve_period = 1;
    long long horizon = 75000;
    std::uint64_t seed = 1;
    learn::LearningSchedule schedule;
    MultiplierConfig multiplier;
    InitConfig init;
    ThresholdConfig threshold;
    SuboptimalConfig suboptimal;
    State initial_state{0, 0, PowerState::on};
    int mu_window = 1000;
    std::string metrics_path;
    std::string tables_path;

    void validate() const {
        system.validate();
        if (horizon < 1) throw ConfigError("horizon must be >= 1");
        if (ve_period < 1) throw ConfigError("ve_period must be >= 1");
        if (mu_window < 1) throw ConfigError("mu_window must be >= 1");
        schedule.validate();
        if (!(multiplier.mu0 >= 0.0 && multiplier.mu0 <= multiplier.mu_max))
            throw ConfigError("multiplier: require 0 <= mu0 <= mu_max");
        if (!(multiplier.holding_target >= 0.0)) throw ConfigError("multiplier: negative target");
        (void)channel.build(system.num_channels());
        if (!(channel.perturb_magnitude >= 0.0 && channel.perturb_magnitude < 1.0))
            throw ConfigError("channel: perturb magnitude must be in [0, 1)");
        if (arrivals.count < 0 || !(arrivals.rate_per_s >= 0.0)) throw ConfigError("arrivals: negative rate");
        if (!(arrivals.mmpp.stay >= 0.0 && arrivals.mmpp.stay < 1.0)) throw ConfigError("arrivals: mmpp stay in [0, 1)");
        if (init.count < 0) throw ConfigError("init: negative arrival count");
        if (threshold.k < 0 || threshold.k > system.capacity()) throw ConfigError("threshold: k must be in [0, B]");
        if (threshold.plr_index < 0 || threshold.plr_index >= system.num_plr())
            throw ConfigError("threshold: PLR index out of range");
        if (suboptimal.epoch < 1 || !(suboptimal.tol > 0.0)) throw ConfigError("suboptimal: bad epoch or tolerance");
        if (!StateSpace(system).contains(initial_state)) throw ConfigError("initial state out of range");
    }

    pds::InitAssumptions init_assumptions() const {
        pds::InitAssumptions a;
        a.arrivals = init.kind == InitConfig::Kind::uniform ? queue::ArrivalDistribution::uniform(system.capacity())
                                                            : queue::ArrivalDistribution::deterministic(init.count);
        a.mu_holding = multiplier.mu0;
        a.overflow_weight = multiplier.learn ? 1.0 : multiplier.mu0;
        return a;
    }
};

/// Table 4 configuration.
inline ExperimentConfig default_profile() { return {}; }

/// Small instance for quick runs: B = 10, four channel states, 20,000 slots.
inline ExperimentConfig reduced_profile() {
    ExperimentConfig c;
    c.system.queue.capacity = 10;
    c.system.channel_gains_db = {-13.79, -9.37, -6.30, -2.08};
    c.horizon = 20000;
    return c;
}

namespace detail {

/// Reads the keys of one JSON object, rejecting any it does not know.
class ObjectReader {
public:
    ObjectReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }
    ~ObjectReader() noexcept(false) {
        if (std::uncaught_exceptions() > 0) return;
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }
    const Json* child(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

private:
    const Json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

}  // namespace detail

inline Json system_to_json(const SystemConfig& s) {
    return Json{{"packet_size_bits", s.phy.packet_size_bits},
                {"symbol_rate_hz", s.phy.symbol_rate_hz},
                {"slot_seconds", s.phy.slot_seconds},
                {"noise_psd_w_per_hz", s.phy.noise_psd_w_per_hz},
                {"bandwidth_hz", s.phy.bandwidth_hz},
                {"p_on", s.power.p_on},
                {"p_off", s.power.p_off},
                {"p_tr", s.power.p_tr},
                {"theta", s.power.theta},
                {"capacity", s.queue.capacity},
                {"eta", s.queue.eta},
                {"channel_gains_db", s.channel_gains_db},
                {"plr_levels", s.plr_levels},
                {"z_max", s.z_max},
                {"gamma", s.gamma}};
}

inline void system_from_json(const Json& j, SystemConfig& s) {
    detail::ObjectReader r(j, "system");
    r.get("packet_size_bits", s.phy.packet_size_bits);
    r.get("symbol_rate_hz", s.phy.symbol_rate_hz);
    r.get("slot_seconds", s.phy.slot_seconds);
    r.get("noise_psd_w_per_hz", s.phy.noise_psd_w_per_hz);
    r.get("bandwidth_hz", s.phy.bandwidth_hz);
    r.get("p_on", s.power.p_on);
    // The switching power defaults to the on power.
    s.power.p_tr = s.power.p_on;
    r.get("p_off", s.power.p_off);
    r.get("p_tr", s.power.p_tr);
    r.get("theta", s.power.theta);
    r.get("capacity", s.queue.capacity);
    r.get("eta", s.queue.eta);
    r.get("channel_gains_db", s.channel_gains_db);
    r.get("plr_levels", s.plr_levels);
    r.get("z_max", s.z_max);
    r.get("gamma", s.gamma);
}

inline Json to_json(const ExperimentConfig& c) {
    const char* channel_mode = c.channel.mode == sim::ChannelMode::perturbed ? "perturbed" : "stationary";
    const char* arrival_mode = c.arrivals.mode == sim::ArrivalMode::deterministic ? "deterministic"
                               : c.arrivals.mode == sim::ArrivalMode::mmpp       ? "mmpp"
                                                                                  : "poisson";
    return Json{
        {"system", system_to_json(c.system)},
        {"channel",
         {{"matrix", c.channel.matrix},
          {"stay", c.channel.stay},
          {"mode", channel_mode},
          {"perturb_magnitude", c.channel.perturb_magnitude}}},
        {"arrivals",
         {{"mode", arrival_mode},
          {"count", c.arrivals.count},
          {"rate_per_s", c.arrivals.rate_per_s},
          {"mmpp_stay", c.arrivals.mmpp.stay}}},
        {"algorithm", to_string(c.algorithm)},
        {"ve_period", c.ve_period},
        {"horizon", c.horizon},
        {"seed", c.seed},
        {"schedule",
         {{"alpha_exponent", c.schedule.alpha_exponent},
          {"beta_exponent", c.schedule.beta_exponent},
          {"beta_scale", c.schedule.beta_scale},
          {"epsilon_start", c.schedule.epsilon_start},
          {"epsilon_decay", c.schedule.epsilon_decay},
          {"epsilon_floor", c.schedule.epsilon_floor}}},
        {"multiplier",
         {{"mu0", c.multiplier.mu0},
          {"mu_max", c.multiplier.mu_max},
          {"holding_target", c.multiplier.holding_target},
          {"learn", c.multiplier.learn}}},
        {"init",
         {{"arrivals", c.init.kind == InitConfig::Kind::uniform ? "uniform" : "deterministic"},
          {"count", c.init.count}}},
        {"threshold", {{"k", c.threshold.k}, {"plr_index", c.threshold.plr_index}}},
        {"suboptimal", {{"epoch", c.suboptimal.epoch}, {"tol", c.suboptimal.tol}}},
        {"initial_state",
         {{"b", c.initial_state.b}, {"h", c.initial_state.h}, {"x", power::to_string(c.initial_state.x)}}},
        {"mu_window", c.mu_window},
        {"output", {{"metrics", c.metrics_path}, {"tables", c.tables_path}}}};
}

/// Overlays `j` on `base`.
inline ExperimentConfig from_json(const Json& j, ExperimentConfig base = default_profile()) {
    ExperimentConfig c = std::move(base);
    detail::ObjectReader r(j, "config");
    if (const Json* s = r.child("system")) system_from_json(*s, c.system);
    if (const Json* ch = r.child("channel")) {
        detail::ObjectReader cr(*ch, "channel");
        cr.get("matrix", c.channel.matrix);
        cr.get("stay", c.channel.stay);
        std::string mode = c.channel.mode == sim::ChannelMode::perturbed ? "perturbed" : "stationary";
        cr.get("mode", mode);
        if (mode == "perturbed") c.channel.mode = sim::ChannelMode::perturbed;
        else if (mode == "stationary") c.channel.mode = sim::ChannelMode::stationary;
        else throw ConfigError("channel.mode must be stationary or perturbed");
        cr.get("perturb_magnitude", c.channel.perturb_magnitude);
    }
    if (const Json* a = r.child("arrivals")) {
        detail::ObjectReader ar(*a, "arrivals");
        std::string mode;
        ar.get("mode", mode);
        if (mode == "deterministic") c.arrivals.mode = sim::ArrivalMode::deterministic;
        else if (mode == "poisson") c.arrivals.mode = sim::ArrivalMode::poisson;
        else if (mode == "mmpp") c.arrivals.mode = sim::ArrivalMode::mmpp;
        else if (!mode.empty()) throw ConfigError("arrivals.mode must be deterministic, poisson or mmpp");
        ar.get("count", c.arrivals.count);
        ar.get("rate_per_s", c.arrivals.rate_per_s);
        ar.get("mmpp_stay", c.arrivals.mmpp.stay);
    }
    std::string algo;
    r.get("algorithm", algo);
    if (!algo.empty()) c.algorithm = algorithm_from_string(algo);
    r.get("ve_period", c.ve_period);
    r.get("horizon", c.horizon);
    r.get("seed", c.seed);
    if (const Json* s = r.child("schedule")) {
        detail::ObjectReader sr(*s, "schedule");
        sr.get("alpha_exponent", c.schedule.alpha_exponent);
        sr.get("beta_exponent", c.schedule.beta_exponent);
        sr.get("beta_scale", c.schedule.beta_scale);
        sr.get("epsilon_start", c.schedule.epsilon_start);
        sr.get("epsilon_decay", c.schedule.epsilon_decay);
        sr.get("epsilon_floor", c.schedule.epsilon_floor);
    }
    if (const Json* m = r.child("multiplier")) {
        detail::ObjectReader mr(*m, "multiplier");
        mr.get("mu0", c.multiplier.mu0);
        mr.get("mu_max", c.multiplier.mu_max);
        mr.get("holding_target", c.multiplier.holding_target);
        mr.get("learn", c.multiplier.learn);
    }
    if (const Json* i = r.child("init")) {
        detail::ObjectReader ir(*i, "init");
        std::string kind;
        ir.get("arrivals", kind);
        if (kind == "uniform") c.init.kind = InitConfig::Kind::uniform;
        else if (kind == "deterministic") c.init.kind = InitConfig::Kind::deterministic;
        else if (!kind.empty()) throw ConfigError("init.arrivals must be deterministic or uniform");
        ir.get("count", c.init.count);
    }
    if (const Json* t = r.child("threshold")) {
        detail::ObjectReader tr(*t, "threshold");
        tr.get("k", c.threshold.k);
        tr.get("plr_index", c.threshold.plr_index);
    }
    if (const Json* s = r.child("suboptimal")) {
        detail::ObjectReader sr(*s, "suboptimal");
        sr.get("epoch", c.suboptimal.epoch);
        sr.get("tol", c.suboptimal.tol);
    }
    if (const Json* s = r.child("initial_state")) {
        detail::ObjectReader sr(*s, "initial_state");
        sr.get("b", c.initial_state.b);
        sr.get("h", c.initial_state.h);
        std::string x = power::to_string(c.initial_state.x);
        sr.get("x", x);
        if (x != "on" && x != "off") throw ConfigError("initial_state.x must be on or off");
        c.initial_state.x = x == "on" ? PowerState::on : PowerState::off;
    }
    r.get("mu_window", c.mu_window);
    if (const Json* o = r.child("output")) {
        detail::ObjectReader orr(*o, "output");
        orr.get("metrics", c.metrics_path);
        orr.get("tables", c.tables_path);
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = default_profile()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    ExperimentConfig c = from_json(j, std::move(base));
    c.validate();
    return c;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return out;
}

/// Hash of the grids and parameters that give table entries their meaning.
inline std::string system_hash(const SystemConfig& s) { return hex64(fnv1a(system_to_json(s).dump())); }

/// Hash of everything that determines a run's trajectory (horizon and output paths excluded).
inline std::string trajectory_hash(const ExperimentConfig& c) {
    Json j = to_json(c);
    j.erase("horizon");
    j.erase("output");
    return hex64(fnv1a(j.dump()));
}

}  // namespace pdsrl::harness
