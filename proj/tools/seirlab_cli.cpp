/*
* Copyright (C) 2026 seirlab contributors
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*     http://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
*/

// Command-line front end: one subcommand per library entry point plus batch experiments.

#include "seirlab/error.hpp"
#include "seirlab/experiment.hpp"
#include "seirlab/expression.hpp"
#include "seirlab/fields.hpp"
#include "seirlab/hydro.hpp"
#include "seirlab/io.hpp"
#include "seirlab/ldp.hpp"
#include "seirlab/mdp.hpp"
#include "seirlab/model.hpp"
#include "seirlab/oracle.hpp"
#include "seirlab/parallel.hpp"
#include "seirlab/simulator.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace seir;

namespace
{

struct Common {
    std::string model;
    double T           = 1.0;
    std::uint64_t seed = 1;
    std::string out    = ".";
};

void add_common(CLI::App* app, Common& c, bool needs_model = true)
{
    auto* opt = app->add_option("--model", c.model, "model INI file");
    if (needs_model) {
        opt->required()->check(CLI::ExistingFile);
    }
    app->add_option("--T", c.T, "time horizon")->check(CLI::PositiveNumber);
    app->add_option("--seed", c.seed, "random seed");
    app->add_option("--out", c.out, "output directory");
}

TorusFunction function_of_u(const std::string& text, std::size_t M)
{
    const Expression e = Expression::parse(text);
    return TorusFunction::sample([&](double u) { return e(u); }, M);
}

Triple triple_of(const std::vector<std::string>& texts, std::size_t M)
{
    if (texts.size() != 3) {
        throw Error(ErrorCode::InvalidArgument, "expected three expressions (S, E, I components)");
    }
    return {function_of_u(texts[0], M), function_of_u(texts[1], M), function_of_u(texts[2], M)};
}

ControlPath control_of(const std::vector<std::string>& texts, double T, std::size_t J, std::size_t M)
{
    if (texts.size() != 3) {
        throw Error(ErrorCode::InvalidArgument, "expected three control expressions F G H in u and t");
    }
    const Expression F = Expression::parse(texts[0]), G = Expression::parse(texts[1]), H = Expression::parse(texts[2]);
    return ControlPath::sample([&](double t, double u) { return F(u, 0.0, t); },
                               [&](double t, double u) { return G(u, 0.0, t); },
                               [&](double t, double u) { return H(u, 0.0, t); }, T, J, M);
}

fs::path prepare(const std::string& dir)
{
    fs::create_directories(dir);
    return dir;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"seirlab: spatial SEIR particle systems, limits and rate functions"};
    app.require_subcommand(1);
    const std::size_t workers = worker_count();

    // simulate
    Common sim;
    std::size_t sim_N = 100;
    std::vector<std::string> sim_tilt;
    std::size_t sim_tilt_steps = 50;
    auto* simulate = app.add_subcommand("simulate", "simulate one trajectory");
    add_common(simulate, sim);
    simulate->add_option("--N", sim_N, "number of vertices")->check(CLI::PositiveNumber);
    simulate->add_option("--tilt", sim_tilt, "control expressions F G H in u and t");
    simulate->add_option("--tilt-steps", sim_tilt_steps, "time steps of the control grid");

    // oracle
    Common orc;
    std::size_t orc_N = 4;
    std::size_t orc_times = 10;
    auto* oracle = app.add_subcommand("oracle", "exact moments of a small system");
    add_common(oracle, orc);
    oracle->add_option("--N", orc_N, "number of vertices (at most 8)")->check(CLI::Range(1, 8));
    oracle->add_option("--times", orc_times, "number of equally spaced output times");

    // hydro
    Common hyd;
    SolverSettings hyd_settings;
    bool hyd_admissibility = false;
    auto* hydro = app.add_subcommand("hydro", "solve the deterministic limit");
    add_common(hydro, hyd);
    hydro->add_option("--steps", hyd_settings.steps, "time steps (0 selects the default)");
    hydro->add_option("--tolerance", hyd_settings.tolerance, "step-halving error bound");
    hydro->add_flag("--admissibility", hyd_admissibility, "also report the admissibility check");

    // rates-ldp
    Common ldp;
    std::vector<std::string> ldp_control;
    std::size_t ldp_control_steps = 50;
    bool ldp_tilted = false;
    auto* rates_ldp = app.add_subcommand("rates-ldp", "large-deviation functionals along the limit or a tilted path");
    add_common(rates_ldp, ldp);
    rates_ldp->add_option("--control", ldp_control, "control expressions F G H in u and t")->expected(3);
    rates_ldp->add_option("--control-steps", ldp_control_steps, "time steps of the control grid");
    rates_ldp->add_flag("--tilted", ldp_tilted, "evaluate along the path tilted by the control");

    // rates-mdp
    Common mdp;
    std::vector<std::string> mdp_test = {"1", "0", "0"};
    double mdp_x = 1.0;
    std::string mdp_save;
    auto* rates_mdp = app.add_subcommand("rates-mdp", "moderate-deviation contraction rate of a terminal pairing");
    add_common(rates_mdp, mdp);
    rates_mdp->add_option("--test", mdp_test, "test expressions for the S, E, I components")->expected(3);
    rates_mdp->add_option("--x", mdp_x, "deviation size");
    rates_mdp->add_option("--save-propagator", mdp_save, "write the propagator checkpoints to this file");

    // hit
    Common hit;
    std::vector<std::string> hit_test = {"-1", "0", "0"};
    std::optional<double> hit_c;
    auto* hitting = app.add_subcommand("hit", "hitting time of a pairing level and its rate coefficient");
    add_common(hitting, hit);
    hitting->add_option("--test", hit_test, "test expressions for the S, E, I components")->expected(3);
    hitting->add_option("--c", hit_c, "level (default: limit value at T/2)");

    // experiment
    auto* experiment = app.add_subcommand("experiment", "batch experiments");
    experiment->require_subcommand(1);
    std::string exp_config;
    std::optional<std::uint64_t> exp_seed;
    bool exp_fresh = false;
    auto* exp_run = experiment->add_subcommand("run", "run an experiment config");
    exp_run->add_option("config", exp_config, "JSON experiment config")->required()->check(CLI::ExistingFile);
    exp_run->add_option("--seed", exp_seed, "override the config seed");
    exp_run->add_flag("--fresh", exp_fresh, "ignore replicas already in the output directory");
    std::string exp_dir;
    std::uint64_t report_seed = 0;
    auto* exp_report = experiment->add_subcommand("report", "summarize a finished run");
    exp_report->add_option("dir", exp_dir, "run output directory")->required()->check(CLI::ExistingDirectory);
    exp_report->add_option("--seed", report_seed, "accepted for uniformity; unused");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) {
            const ModelBundle b = load_model(sim.model);
            Rng rng             = make_rng(sim.seed, 0);
            const auto init     = sample_initial(b.law, sim_N, rng);
            Simulator s(b.model, sim_N);
            std::optional<ControlPath> tilt;
            std::string tilt_hash = "none";
            if (!sim_tilt.empty()) {
                tilt = control_of(sim_tilt, sim.T, sim_tilt_steps, b.grid_size());
                const auto& d = tilt->data();
                tilt_hash     = hex_digest(fnv1a(d.data(), d.size() * sizeof(double)));
            }
            const Trajectory traj = s.run(init, sim.T, rng, tilt ? &*tilt : nullptr);
            const fs::path dir    = prepare(sim.out);
            write_trajectory(traj, dir / "trajectory.csv", dir / "trajectory.json", sim.seed,
                             hex_digest(model_hash(b)), tilt_hash);
            std::cout << "events " << traj.events.size() << ", final S/E/I/R " << traj.final_state().count(State::S)
                      << '/' << traj.final_state().count(State::E) << '/' << traj.final_state().count(State::I) << '/'
                      << traj.final_state().count(State::R) << '\n';
        }
        else if (oracle->parsed()) {
            const ModelBundle b = load_model(orc.model);
            std::vector<double> times;
            for (std::size_t q = 0; q <= orc_times; ++q) {
                times.push_back(orc.T * static_cast<double>(q) / static_cast<double>(orc_times));
            }
            const auto Q    = build_generator(b.model, orc_N);
            const auto path = evolve_path(Q, product_law(b.law, orc_N), times);
            const auto rep  = exact_moments(path, times);
            const fs::path dir = prepare(orc.out);
            write_moments(rep, dir / "moments.csv");
            std::cout << "states " << Q.dim << ", max cross covariance at T " << rep.max_cross_covariance(orc_times)
                      << '\n';
        }
        else if (hydro->parsed()) {
            const ModelBundle b  = load_model(hyd.model);
            const DensityPath mu = solve_hydrodynamic(b, hyd.T, hyd_settings);
            const fs::path dir   = prepare(hyd.out);
            write_density_path(mu, dir / "density.csv", dir / "density.json");
            std::cout << "steps " << mu.steps() << ", error estimate " << mu.error_estimate << '\n';
            if (hyd_admissibility) {
                const auto rep = is_admissible_D0(mu);
                std::cout << "admissible " << (rep.admissible ? "yes" : "no") << ", chain margin " << rep.chain_margin
                          << ", derivative margin " << rep.derivative_margin;
                if (!rep.admissible) {
                    std::cout << " (" << rep.detail << ')';
                }
                std::cout << '\n';
            }
        }
        else if (rates_ldp->parsed()) {
            const ModelBundle b = load_model(ldp.model);
            const std::size_t M = b.grid_size();
            const ControlPath control =
                ldp_control.empty() ? ControlPath(ldp.T, ldp_control_steps, M)
                                    : control_of(ldp_control, ldp.T, ldp_control_steps, M);
            const std::array<TorusFunction, 3> w0{b.law.rho0, b.law.rho1, b.law.rho2};
            const DensityPath W = ldp_tilted ? solve_tilted(b.model, w0, control, ldp.T)
                                             : solve_hydrodynamic(b, ldp.T);
            const LDPReport rep = eval_I1(b.model, W, control);
            const fs::path dir  = prepare(ldp.out);
            write_ldp_report(rep, dir / "ldp.json", dir / "ldp_integrands.csv");
            std::cout << "I1 " << format_number(rep.I1) << '\n';
            try {
                std::cout << "I_dyn " << format_number(I_dyn_closed(b.model, W)) << '\n';
            }
            catch (const Error& e) {
                std::cout << "I_dyn unavailable: " << e.what() << '\n';
            }
            std::cout << "I_ini " << format_number(I_ini_closed(w0, b.law)) << '\n';
        }
        else if (rates_mdp->parsed()) {
            const ModelBundle b  = load_model(mdp.model);
            const DensityPath mu = solve_hydrodynamic(b, mdp.T);
            const Propagator prop(b.model, mu);
            if (!mdp_save.empty()) {
                prop.save(mdp_save);
            }
            const ContraResult r = J_contra(prop, b.law, triple_of(mdp_test, b.grid_size()), mdp_x);
            nlohmann::json j{{"x", r.x},
                             {"J_contra", r.value},
                             {"denominator", r.denominator},
                             {"denominator_B12_part", r.b12_part},
                             {"denominator_B10_part", r.b10_part},
                             {"propagator_rcond", prop.rcond()}};
            const fs::path dir = prepare(mdp.out);
            write_file_atomic(dir / "mdp.json", j.dump(2) + "\n");
            std::cout << j.dump(2) << '\n';
        }
        else if (hitting->parsed()) {
            const ModelBundle b = load_model(hit.model);
            const Triple f      = triple_of(hit_test, b.grid_size());
            double c;
            if (hit_c) {
                c = *hit_c;
            }
            else {
                const DensityPath mu = solve_hydrodynamic(b, hit.T);
                c                    = 0.0;
                for (int k = 0; k < 3; ++k) {
                    c += mu.pairing(mu.steps() / 2, k, f[static_cast<std::size_t>(k)]);
                }
            }
            const HitReport rep = hitting_report(b.model, b.law, f, c, hit.T);
            const fs::path dir  = prepare(hit.out);
            write_hit_report(rep, dir / "hit.json");
            std::cout << "c " << format_number(rep.c) << ", tau " << format_number(rep.tau) << ", J_hit coefficient "
                      << format_number(rep.coefficient) << '\n';
        }
        else if (exp_run->parsed()) {
            ExperimentConfig cfg = load_experiment(exp_config);
            if (exp_seed) {
                cfg.seed = *exp_seed;
            }
            RunOptions opt;
            opt.workers = workers;
            opt.resume  = !exp_fresh;
            const RunManifest man = run_experiment(cfg, opt);
            std::cout << experiment_report(cfg.output);
            return man.passed ? 0 : 3;
        }
        else if (exp_report->parsed()) {
            std::cout << experiment_report(exp_dir);
        }
    }
    catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
