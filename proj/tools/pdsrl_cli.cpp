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

// Command-line front end: solve, learn, baseline, suboptimal and eval.

#include "pdsrl/pdsrl.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace pdsrl;
using namespace pdsrl::harness;

namespace {

struct Common {
    std::string config;
    bool reduced = false;
    std::optional<std::uint64_t> seed;
    std::optional<long long> horizon;
    std::optional<double> p_on_mw;
    std::optional<double> mu;
    std::string out = ".";
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "JSON configuration file")->check(CLI::ExistingFile);
    app->add_flag("--reduced", c.reduced, "Start from the small profile (B = 10, four channel states)");
    app->add_option("--seed", c.seed, "Random seed");
    app->add_option("--horizon", c.horizon, "Number of slots")->check(CLI::PositiveNumber);
    app->add_option("--p-on", c.p_on_mw, "Power in the on state, mW (the switching power follows)");
    app->add_option("--mu", c.mu, "Lagrange multiplier; fixes it for learning runs");
    app->add_option("--out", c.out, "Output directory");
}

ExperimentConfig resolve(const Common& c) {
    ExperimentConfig cfg = c.reduced ? reduced_profile() : default_profile();
    if (!c.config.empty()) cfg = load_config(c.config, cfg);
    if (c.seed) cfg.seed = *c.seed;
    if (c.horizon) cfg.horizon = *c.horizon;
    if (c.p_on_mw) {
        cfg.system.power.p_on = *c.p_on_mw * 1e-3;
        cfg.system.power.p_tr = cfg.system.power.p_on;
    }
    if (c.mu) {
        cfg.multiplier.mu0 = *c.mu;
        cfg.multiplier.learn = false;
    }
    cfg.validate();
    fs::create_directories(c.out);
    return cfg;
}

std::string path_in(const Common& c, const std::string& name) { return (fs::path(c.out) / name).string(); }

void print_summary(const MetricsRecord& r, double mu) {
    std::printf("slots %lld\navg_cost %.6g\navg_power_mw %.6g\navg_holding %.6g\navg_overflow %.6g\ntheta_off %.6g\n"
                "mu %.6g\n",
                r.n, r.cum_cost, r.cum_power_w * 1e3, r.cum_holding, r.cum_overflow, r.theta_off, mu);
}

/// Runs to the horizon, optionally resuming from and writing a checkpoint.
int run_with_checkpoints(const ExperimentConfig& cfg, const Common& c, const std::string& resume,
                         long long checkpoint_at, const std::string& checkpoint_file) {
    Experiment ex(cfg);
    const std::string csv_path = path_in(c, "metrics.csv");
    std::ofstream csv;
    if (!resume.empty()) {
        std::ifstream in(resume);
        if (!in) throw std::runtime_error("cannot open checkpoint '" + resume + "'");
        ex.restore(Json::parse(in));
        csv.open(csv_path, std::ios::app);
    } else {
        csv.open(csv_path);
        csv << kMetricsHeader << '\n';
    }
    if (!csv) throw std::runtime_error("cannot write '" + csv_path + "'");
    auto sink = [&](const MetricsRecord& r) { csv << csv_row(r) << '\n'; };
    if (checkpoint_at > ex.slot()) {
        ex.run_until(std::min(checkpoint_at, cfg.horizon), sink);
        std::ofstream cp(checkpoint_file.empty() ? path_in(c, "checkpoint.json") : checkpoint_file);
        cp << ex.checkpoint().dump() << '\n';
    }
    ex.run_until(cfg.horizon, sink);
    for (const Table& t : ex.tables()) save_table(path_in(c, t.kind + ".json"), t, cfg.system);
    print_summary(ex.metrics().current(), ex.mu());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Power-aware wireless transmission scheduling with post-decision state learning"};
    app.require_subcommand(1);

    Common solve_c, learn_c, base_c, sub_c, eval_c;

    auto* solve = app.add_subcommand("solve", "Exact value iteration with the true statistics");
    add_common(solve, solve_c);
    std::string method = "vi";
    double tol = 1e-9;
    solve->add_option("--method", method, "vi or pds")->check(CLI::IsMember({"vi", "pds"}));
    solve->add_option("--tol", tol, "Stopping tolerance (sup-norm)");

    auto* learn = app.add_subcommand("learn", "Online learning");
    add_common(learn, learn_c);
    std::string algo = "pds-ve";
    int ve_period = 1;
    std::string resume, checkpoint_file;
    long long checkpoint_at = 0;
    learn->add_option("algo", algo, "q, pds or pds-ve")->check(CLI::IsMember({"q", "pds", "pds-ve"}));
    learn->add_option("--ve-period", ve_period, "Slots between virtual-experience batches")->check(CLI::PositiveNumber);
    learn->add_option("--checkpoint-at", checkpoint_at, "Write a checkpoint after this many slots");
    learn->add_option("--checkpoint", checkpoint_file, "Checkpoint path (default <out>/checkpoint.json)");
    learn->add_option("--resume", resume, "Resume from a checkpoint, appending to <out>/metrics.csv")
        ->check(CLI::ExistingFile);

    auto* base = app.add_subcommand("baseline", "Threshold-k policy");
    add_common(base, base_c);
    int k = 0, plr_index = 0;
    bool sweep = false;
    unsigned threads = 0;
    base->add_option("--k", k, "Backlog threshold");
    base->add_flag("--k-sweep", sweep, "Run every k in [0, B] and write threshold_sweep.csv");
    base->add_option("--plr-index", plr_index, "PLR level used while draining");
    base->add_option("--threads", threads, "Worker threads for the sweep (0 = all)");

    auto* sub = app.add_subcommand("suboptimal", "Re-plan with estimated statistics every epoch");
    add_common(sub, sub_c);
    int epoch = 100;
    sub->add_option("--epoch", epoch, "Slots between re-plans")->check(CLI::PositiveNumber);

    auto* eval = app.add_subcommand("eval", "Evaluate a stored policy");
    add_common(eval, eval_c);
    std::string policy_path;
    eval->add_option("--policy", policy_path, "Policy table")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*solve) {
            ExperimentConfig cfg = resolve(solve_c);
            const double mu = cfg.multiplier.mu0;
            const planner::Mdp mdp(planner::JointModel{cfg.system, cfg.channel.build(cfg.system.num_channels()),
                                                       true_arrivals(cfg), mu});
            planner::ValueTable values;
            planner::PolicyTable policy;
            int iterations = 0;
            if (method == "vi") {
                planner::ViOptions opt;
                opt.tol = tol;
                auto r = planner::value_iteration(mdp, opt);
                values = std::move(r.values);
                policy = std::move(r.policy);
                iterations = r.iterations;
            } else {
                const pds::FactoredDynamics fd(mdp.known(), pds::UnknownDynamics{mdp.channel(), mdp.arrivals()});
                pds::PdsViOptions opt;
                opt.tol = tol;
                auto r = pds::pds_value_iteration(fd, pds::CostWeights::lagrangian(mu), opt);
                policy = pds::policy_from_pds(mdp.known(), r.pds_values, mu);
                values = std::move(r.values);
                iterations = r.iterations;
                save_table(path_in(solve_c, "pds_values.json"), values_table("pds_values", r.pds_values), cfg.system);
            }
            save_table(path_in(solve_c, "values.json"), values_table("values", values), cfg.system);
            save_table(path_in(solve_c, "policy.json"), policy_table(policy), cfg.system);
            const auto ev = planner::policy_evaluate(mdp, policy);
            const int s0 = mdp.states().index(cfg.initial_state);
            std::printf("iterations %d\nmu %.6g\nvalue %.10g\ndiscounted_power %.10g\ndiscounted_buffer %.10g\n",
                        iterations, mu, values[s0], ev.power[s0], ev.buffer[s0]);
            return 0;
        }
        if (*learn) {
            ExperimentConfig cfg = resolve(learn_c);
            cfg.algorithm = algorithm_from_string(algo);
            cfg.ve_period = ve_period;
            return run_with_checkpoints(cfg, learn_c, resume, checkpoint_at, checkpoint_file);
        }
        if (*base) {
            ExperimentConfig cfg = resolve(base_c);
            cfg.algorithm = Algorithm::threshold_k;
            cfg.threshold.plr_index = plr_index;
            if (!sweep) {
                cfg.threshold.k = k;
                cfg.metrics_path = path_in(base_c, "metrics.csv");
                cfg.validate();
                RunOptions opt;
                opt.keep_records = false;
                const auto r = run_experiment(cfg, opt);
                print_summary(r.final_record, r.final_mu);
                return 0;
            }
            const int B = cfg.system.capacity();
            const auto rows = parallel_map(
                static_cast<std::size_t>(B) + 1,
                [&](std::size_t i) {
                    ExperimentConfig c = cfg;
                    c.threshold.k = static_cast<int>(i);
                    RunOptions opt;
                    opt.keep_records = false;
                    return run_experiment(c, opt).final_record;
                },
                threads);
            std::ofstream out(path_in(base_c, "threshold_sweep.csv"));
            out << "k,avg_power_w,avg_holding,avg_overflow,theta_off\n";
            std::printf("k avg_power_mw avg_holding avg_overflow theta_off\n");
            for (int i = 0; i <= B; ++i) {
                const auto& r = rows[static_cast<std::size_t>(i)];
                std::string line = std::to_string(i);
                for (double v : {r.cum_power_w, r.cum_holding, r.cum_overflow, r.theta_off}) {
                    line += ',';
                    harness::detail::append_number(line, v);
                }
                out << line << '\n';
                std::printf("%d %.6g %.6g %.6g %.6g\n", i, r.cum_power_w * 1e3, r.cum_holding, r.cum_overflow,
                            r.theta_off);
            }
            return 0;
        }
        if (*sub) {
            ExperimentConfig cfg = resolve(sub_c);
            cfg.algorithm = Algorithm::per_step_suboptimal;
            cfg.suboptimal.epoch = epoch;
            cfg.metrics_path = path_in(sub_c, "metrics.csv");
            RunOptions opt;
            opt.keep_records = false;
            const auto r = run_experiment(cfg, opt);
            print_summary(r.final_record, r.final_mu);
            return 0;
        }
        if (*eval) {
            ExperimentConfig cfg = resolve(eval_c);
            const auto policy = to_policy(load_table(policy_path, "policy", cfg.system));
            const double mu = cfg.multiplier.mu0;
            const planner::Mdp mdp(planner::JointModel{cfg.system, cfg.channel.build(cfg.system.num_channels()),
                                                       true_arrivals(cfg), mu});
            const auto ev = planner::policy_evaluate(mdp, policy);
            const int s0 = mdp.states().index(cfg.initial_state);
            std::printf("discounted_lagrangian %.10g\ndiscounted_power %.10g\ndiscounted_buffer %.10g\n",
                        ev.lagrangian[s0], ev.power[s0], ev.buffer[s0]);
            cfg.metrics_path = path_in(eval_c, "metrics.csv");
            RunOptions opt;
            opt.keep_records = false;
            opt.fixed_policy = policy;
            const auto r = run_experiment(cfg, opt);
            print_summary(r.final_record, r.final_mu);
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
