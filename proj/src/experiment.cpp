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

#include "seirlab/experiment.hpp"

#include "seirlab/error.hpp"
#include "seirlab/expression.hpp"
#include "seirlab/fields.hpp"
#include "seirlab/hydro.hpp"
#include "seirlab/io.hpp"
#include "seirlab/ldp.hpp"
#include "seirlab/mdp.hpp"
#include "seirlab/model.hpp"
#include "seirlab/oracle.hpp"
#include "seirlab/rng.hpp"
#include "seirlab/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#ifndef SEIRLAB_VERSION
#define SEIRLAB_VERSION "unknown"
#endif

namespace seir
{

using json = nlohmann::json;

namespace
{

struct KindName {
    ExperimentKind kind;
    const char* name;
};

constexpr KindName kind_names[] = {
    {ExperimentKind::OracleValidation, "oracle-validation"},
    {ExperimentKind::HydroConvergence, "hydro-convergence"},
    {ExperimentKind::TiltedLLN, "tilted-lln"},
    {ExperimentKind::TiltingIdentity, "tilting-identity"},
    {ExperimentKind::RateZero, "rate-zero"},
    {ExperimentKind::CltVariance, "clt-variance"},
    {ExperimentKind::HittingClt, "hitting-clt"},
    {ExperimentKind::SkeletonAudit, "skeleton-audit"},
};

// Population sizes and replica counts used when a config leaves them out.
struct KindDefaults {
    std::vector<std::size_t> N;
    std::size_t replicas;
    double T;
};

KindDefaults kind_defaults(ExperimentKind kind)
{
    switch (kind) {
    case ExperimentKind::OracleValidation: return {{4}, 100000, 1.0};
    case ExperimentKind::HydroConvergence: return {{250, 1000, 4000}, 200, 1.0};
    case ExperimentKind::TiltedLLN: return {{2000}, 5, 1.0};
    case ExperimentKind::TiltingIdentity: return {{30}, 2000, 1.0};
    case ExperimentKind::RateZero: return {{}, 0, 3.0};
    case ExperimentKind::CltVariance: return {{4000}, 5000, 2.0};
    case ExperimentKind::HittingClt: return {{500, 2000}, 500, 2.0};
    case ExperimentKind::SkeletonAudit: return {{}, 0, 1.0};
    }
    return {{}, 0, 1.0};
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

double param(const ExperimentConfig& c, const char* key, double def)
{
    return c.params.contains(key) ? c.params.at(key).get<double>() : def;
}

std::string param_string(const ExperimentConfig& c, const char* key, const std::string& def)
{
    return c.params.contains(key) ? c.params.at(key).get<std::string>() : def;
}

double threshold(const ExperimentConfig& c, const char* key)
{
    return c.thresholds.at(key).get<double>();
}

TorusFunction expression_function(const std::string& text, std::size_t M)
{
    const Expression e = Expression::parse(text);
    return TorusFunction::sample([&](double u) { return e(u); }, M);
}

Triple triple_param(const ExperimentConfig& c, const char* key, const std::array<std::string, 3>& def, std::size_t M)
{
    std::array<std::string, 3> text = def;
    if (c.params.contains(key)) {
        const json& a = c.params.at(key);
        if (!a.is_array() || a.size() != 3) {
            throw Error(ErrorCode::ParseError, std::string("params.") + key + " must list three expressions");
        }
        for (int k = 0; k < 3; ++k) {
            text[static_cast<std::size_t>(k)] = a[static_cast<std::size_t>(k)].get<std::string>();
        }
    }
    Triple t;
    for (int k = 0; k < 3; ++k) {
        t[static_cast<std::size_t>(k)] = expression_function(text[static_cast<std::size_t>(k)], M);
    }
    return t;
}

// Control F, G, H given as expressions in u and t.
ControlPath control_param(const ExperimentConfig& c, const std::array<std::string, 3>& def, double T, std::size_t M)
{
    const Expression F = Expression::parse(param_string(c, "F", def[0]));
    const Expression G = Expression::parse(param_string(c, "G", def[1]));
    const Expression H = Expression::parse(param_string(c, "H", def[2]));
    const auto J = static_cast<std::size_t>(param(c, "control_steps", 50));
    if (J == 0) {
        throw Error(ErrorCode::InvalidArgument, "control_steps must be positive");
    }
    return ControlPath::sample([&](double t, double u) { return F(u, 0.0, t); },
                               [&](double t, double u) { return G(u, 0.0, t); },
                               [&](double t, double u) { return H(u, 0.0, t); }, T, J, M);
}

std::array<TorusFunction, 3> law_triple(const InitialLaw& law)
{
    return {law.rho0, law.rho1, law.rho2};
}

// Node indices spread evenly over [0, J].
std::vector<std::size_t> node_grid(std::size_t J, std::size_t count)
{
    std::vector<std::size_t> nodes;
    for (std::size_t q = 0; q <= count; ++q) {
        const auto j = static_cast<std::size_t>(std::llround(static_cast<double>(q * J) / static_cast<double>(count)));
        if (nodes.empty() || nodes.back() != j) {
            nodes.push_back(j);
        }
    }
    return nodes;
}

double sample_mean(const std::vector<double>& v)
{
    return v.empty() ? std::numeric_limits<double>::quiet_NaN()
                     : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v)
{
    if (v.size() < 2) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const double m = sample_mean(v);
    double ss      = 0.0;
    for (double x : v) {
        ss += (x - m) * (x - m);
    }
    return ss / static_cast<double>(v.size() - 1);
}

double median(std::vector<double> v)
{
    if (v.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------------------------
// Replica engine

struct ReplicaRow {
    std::size_t N = 0, r = 0;
    std::uint64_t seed = 0;
    std::string status;
    std::vector<double> values;
};

using ReplicaBody = std::function<std::vector<double>(std::size_t N, Rng& rng)>;

std::string replicas_csv(const std::vector<std::string>& columns, const std::vector<ReplicaRow>& rows)
{
    std::ostringstream out;
    out << "seed,N,replica,status";
    for (const auto& c : columns) {
        out << ',' << c;
    }
    out << '\n';
    for (const auto& row : rows) {
        if (row.status.empty()) {
            continue;
        }
        out << row.seed << ',' << row.N << ',' << row.r << ',' << row.status;
        for (double v : row.values) {
            out << ',' << format_number(v);
        }
        out << '\n';
    }
    return out.str();
}

class ReplicaRunner
{
public:
    ReplicaRunner(const ExperimentConfig& config, const RunOptions& options, RunManifest& manifest,
                  std::vector<std::string> columns)
        : m_config(config)
        , m_options(options)
        , m_manifest(manifest)
        , m_columns(std::move(columns))
    {
    }

    /// Rows grouped by N, in replica order.
    std::map<std::size_t, std::vector<ReplicaRow>> run(const ReplicaBody& body)
    {
        const auto& cfg = m_config;
        std::vector<ReplicaRow> rows;
        for (std::size_t N : cfg.N) {
            json seeds = json::array();
            for (std::size_t r = 0; r < cfg.replicas; ++r) {
                ReplicaRow row;
                row.N    = N;
                row.r    = r;
                row.seed = replica_seed(cfg.seed, N, r);
                seeds.push_back(row.seed);
                rows.push_back(std::move(row));
            }
            m_manifest.replica_seeds[std::to_string(N)] = std::move(seeds);
        }
        const auto file = cfg.output / "replicas.csv";
        const auto meta = cfg.output / "replicas.json";
        const std::string hash = config_hash(cfg);
        if (m_options.resume) {
            restore(file, meta, hash, rows);
        }
        std::vector<std::size_t> todo;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].status.empty()) {
                todo.push_back(i);
            }
        }
        write_file_atomic(meta, json{{"config_hash", hash}}.dump(2) + "\n");
        // Flush the table a few times so an interrupted run can pick up where it stopped.
        const std::size_t batch = std::max<std::size_t>(64, (todo.size() + 19) / 20);
        for (std::size_t start = 0; start < todo.size(); start += batch) {
            const std::size_t count = std::min(batch, todo.size() - start);
            parallel_for(count, m_options.workers, [&](std::size_t q) {
                ReplicaRow& row = rows[todo[start + q]];
                Rng rng         = make_rng(row.seed, 0);
                try {
                    row.values = body(row.N, rng);
                    row.status = "ok";
                }
                catch (const Error& e) {
                    row.values.assign(m_columns.size(), std::numeric_limits<double>::quiet_NaN());
                    row.status = to_string(e.code());
                }
                catch (const std::exception&) {
                    row.values.assign(m_columns.size(), std::numeric_limits<double>::quiet_NaN());
                    row.status = "Exception";
                }
            });
            write_file_atomic(file, replicas_csv(m_columns, rows));
        }
        if (todo.empty()) {
            write_file_atomic(file, replicas_csv(m_columns, rows));
        }
        std::map<std::size_t, std::vector<ReplicaRow>> grouped;
        for (auto& row : rows) {
            if (row.status != "ok") {
                ++m_manifest.failed_replicas;
            }
            grouped[row.N].push_back(std::move(row));
        }
        m_manifest.files.push_back("replicas.csv");
        m_manifest.files.push_back("replicas.json");
        return grouped;
    }

private:
    void restore(const std::filesystem::path& file, const std::filesystem::path& meta, const std::string& hash,
                 std::vector<ReplicaRow>& rows)
    {
        if (!std::filesystem::exists(file) || !std::filesystem::exists(meta)) {
            return;
        }
        try {
            if (json::parse(read_file(meta)).value("config_hash", "") != hash) {
                return;
            }
            const CsvTable table = read_csv(file);
            if (table.header.size() != m_columns.size() + 4) {
                return;
            }
            std::map<std::pair<std::size_t, std::size_t>, std::size_t> index;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                index[{rows[i].N, rows[i].r}] = i;
            }
            for (const auto& cells : table.rows) {
                if (cells.size() != table.header.size() || cells[3] != "ok") {
                    continue;
                }
                const auto it = index.find({std::stoull(cells[1]), std::stoull(cells[2])});
                if (it == index.end()) {
                    continue;
                }
                ReplicaRow& row = rows[it->second];
                if (std::stoull(cells[0]) != row.seed) {
                    continue;
                }
                row.values.clear();
                for (std::size_t c = 4; c < cells.size(); ++c) {
                    row.values.push_back(std::stod(cells[c]));
                }
                row.status = "ok";
                ++m_manifest.resumed_replicas;
            }
        }
        catch (const std::exception&) {
            // an unreadable table is recomputed from scratch
            for (auto& row : rows) {
                row.status.clear();
                row.values.clear();
            }
            m_manifest.resumed_replicas = 0;
        }
    }

    const ExperimentConfig& m_config;
    const RunOptions& m_options;
    RunManifest& m_manifest;
    std::vector<std::string> m_columns;
};

std::vector<double> ok_column(const std::vector<ReplicaRow>& rows, std::size_t c)
{
    std::vector<double> out;
    for (const auto& row : rows) {
        if (row.status == "ok" && std::isfinite(row.values[c])) {
            out.push_back(row.values[c]);
        }
    }
    return out;
}

struct Outcome {
    std::vector<ResultTable> tables;
    json summary = json::object();
    bool passed  = true;
};

void check(Outcome& out, const std::string& name, double value, double limit, bool pass)
{
    out.summary["checks"].push_back({{"name", name}, {"value", value}, {"threshold", limit}, {"pass", pass}});
    out.passed = out.passed && pass;
}

// ---------------------------------------------------------------------------------------------
// Kinds

Outcome run_oracle_validation(const ExperimentConfig& cfg, const ModelBundle& b, const RunOptions& opt,
                              RunManifest& man)
{
    const std::string initial = param_string(cfg, "initial", "");
    std::map<std::size_t, Configuration> fixed;
    for (std::size_t N : cfg.N) {
        if (initial.empty()) {
            continue;
        }
        if (initial.size() != N) {
            throw Error(ErrorCode::InvalidArgument, "params.initial must have one state digit per vertex");
        }
        Configuration c;
        for (char ch : initial) {
            if (ch < '0' || ch > '3') {
                throw Error(ErrorCode::InvalidArgument, "params.initial digits must be 0..3");
            }
            c.states.push_back(static_cast<std::uint8_t>(ch - '0'));
        }
        fixed[N] = c;
    }
    ReplicaRunner runner(cfg, opt, man, {"final_state"});
    const auto rows = runner.run([&](std::size_t N, Rng& rng) {
        const Configuration init = initial.empty() ? sample_initial(b.law, N, rng) : fixed.at(N);
        Simulator sim(b.model, N);
        return std::vector<double>{static_cast<double>(encode(sim.run(init, cfg.T, rng).final_state()))};
    });
    Outcome out;
    ResultTable dist{"distribution", {"N", "state", "empirical", "exact"}, {}};
    for (std::size_t N : cfg.N) {
        const auto Q       = build_generator(b.model, N);
        const auto p0      = initial.empty() ? product_law(b.law, N) : point_mass(fixed.at(N));
        const auto exact   = evolve(Q, p0, cfg.T);
        const auto samples = ok_column(rows.at(N), 0);
        std::vector<double> counts(exact.p.size(), 0.0);
        for (double s : samples) {
            counts[static_cast<std::size_t>(s)] += 1.0;
        }
        double tv = 0.0;
        for (std::size_t x = 0; x < counts.size(); ++x) {
            const double emp = samples.empty() ? 0.0 : counts[x] / static_cast<double>(samples.size());
            tv += std::fabs(emp - exact.p[x]);
            if (emp > 0.0 || exact.p[x] > 1e-15) {
                dist.rows.push_back({static_cast<double>(N), static_cast<double>(x), emp, exact.p[x]});
            }
        }
        tv *= 0.5;
        out.summary["total_variation"][std::to_string(N)] = tv;
        check(out, "total_variation_N" + std::to_string(N), tv, threshold(cfg, "tv"), tv <= threshold(cfg, "tv"));
    }
    out.tables.push_back(std::move(dist));
    return out;
}

Outcome run_hydro_convergence(const ExperimentConfig& cfg, const ModelBundle& b, const RunOptions& opt,
                              RunManifest& man)
{
    const std::size_t M     = b.grid_size();
    const TorusFunction f   = expression_function(param_string(cfg, "test", "cos(2*pi*u)"), M);
    const DensityPath mu    = solve_hydrodynamic(b, cfg.T);
    const auto nodes        = node_grid(mu.steps(), static_cast<std::size_t>(param(cfg, "times", 50)));
    std::vector<double> times;
    std::vector<double> limit;
    for (std::size_t j : nodes) {
        times.push_back(mu.time(j));
        for (int k = 0; k < 3; ++k) {
            limit.push_back(mu.pairing(j, k, f));
        }
    }
    ReplicaRunner runner(cfg, opt, man, {"sup_deviation"});
    const auto rows = runner.run([&](std::size_t N, Rng& rng) {
        Simulator sim(b.model, N);
        const auto traj = sim.run(sample_initial(b.law, N, rng), cfg.T, rng);
        const auto emp  = empirical_pairings(traj, {f}, times);
        double sup      = 0.0;
        for (std::size_t q = 0; q < times.size(); ++q) {
            for (int k = 0; k < 3; ++k) {
                sup = std::max(sup, std::fabs(emp.value(q, k, 0) - limit[q * 3 + static_cast<std::size_t>(k)]));
            }
        }
        return std::vector<double>{sup};
    });
    Outcome out;
    ResultTable table{"convergence", {"N", "median_sup_deviation", "mean_sup_deviation", "replicas"}, {}};
    std::vector<double> xs, ys;
    for (std::size_t N : cfg.N) {
        const auto v   = ok_column(rows.at(N), 0);
        const double m = median(v);
        table.rows.push_back({static_cast<double>(N), m, sample_mean(v), static_cast<double>(v.size())});
        xs.push_back(std::log(static_cast<double>(N)));
        ys.push_back(std::log(m));
    }
    out.tables.push_back(std::move(table));
    const RateFit fit = fit_rate(xs, ys);
    out.summary["slope"]        = fit.slope;
    out.summary["intercept"]    = fit.intercept;
    out.summary["slope_stderr"] = fit.stderr_slope;
    const double dev = std::fabs(fit.slope - threshold(cfg, "slope"));
    check(out, "slope_deviation", dev, threshold(cfg, "slope_tolerance"), dev <= threshold(cfg, "slope_tolerance"));
    return out;
}

const std::array<std::string, 3> default_tilt = {"0.3*cos(2*pi*u)", "0.2*sin(2*pi*u)*t", "-0.2"};
const std::array<std::string, 3> small_tilt   = {"0.05*sin(t+2*pi*u)", "0.03*cos(2*t)", "-0.04*cos(2*pi*u)"};

Outcome run_tilted_lln(const ExperimentConfig& cfg, const ModelBundle& b, const RunOptions& opt, RunManifest& man)
{
    const std::size_t M       = b.grid_size();
    const ControlPath control = control_param(cfg, default_tilt, cfg.T, M);
    const DensityPath target  = solve_tilted(b.model, law_triple(b.law), control, cfg.T);
    std::vector<std::string> texts = {"1", "cos(2*pi*u)", "sin(2*pi*u)", "cos(4*pi*u)", "sin(4*pi*u)"};
    if (cfg.params.contains("tests")) {
        texts = cfg.params.at("tests").get<std::vector<std::string>>();
    }
    std::vector<TorusFunction> tests;
    for (const auto& t : texts) {
        tests.push_back(expression_function(t, M));
    }
    const auto nodes = node_grid(target.steps(), static_cast<std::size_t>(param(cfg, "times", 50)));
    std::vector<double> times;
    for (std::size_t j : nodes) {
        times.push_back(target.time(j));
    }
    ReplicaRunner runner(cfg, opt, man, {"sup_discrepancy"});
    const auto rows = runner.run([&](std::size_t N, Rng& rng) {
        Simulator sim(b.model, N);
        const auto traj = sim.run(sample_initial(b.law, N, rng), cfg.T, rng, &control);
        const auto emp  = empirical_pairings(traj, tests, times);
        double sup      = 0.0;
        for (std::size_t q = 0; q < nodes.size(); ++q) {
            for (int k = 0; k < 3; ++k) {
                for (std::size_t s = 0; s < tests.size(); ++s) {
                    sup = std::max(sup, std::fabs(emp.value(q, k, s) - target.pairing(nodes[q], k, tests[s])));
                }
            }
        }
        return std::vector<double>{sup};
    });
    Outcome out;
    ResultTable table{"discrepancy", {"N", "max_sup_discrepancy", "mean_sup_discrepancy", "replicas"}, {}};
    for (std::size_t N : cfg.N) {
        const auto v    = ok_column(rows.at(N), 0);
        const double mx = v.empty() ? std::numeric_limits<double>::infinity() : *std::max_element(v.begin(), v.end());
        table.rows.push_back({static_cast<double>(N), mx, sample_mean(v), static_cast<double>(v.size())});
        check(out, "sup_discrepancy_N" + std::to_string(N), mx, threshold(cfg, "max_discrepancy"),
              mx <= threshold(cfg, "max_discrepancy"));
    }
    out.tables.push_back(std::move(table));
    return out;
}

Outcome run_tilting_identity(const ExperimentConfig& cfg, const ModelBundle& b, const RunOptions& opt,
                             RunManifest& man)
{
    const ControlPath control = control_param(cfg, small_tilt, cfg.T, b.grid_size());
    ReplicaRunner runner(cfg, opt, man, {"exp_N_I1"});
    const auto rows = runner.run([&](std::size_t N, Rng& rng) {
        Simulator sim(b.model, N);
        const auto traj = sim.run(sample_initial(b.law, N, rng), cfg.T, rng);
        return std::vector<double>{std::exp(static_cast<double>(N) * eval_I1(b.model, traj, control).I1)};
    });
    Outcome out;
    ResultTable table{"estimates", {"N", "mean", "std_error", "ci_low", "ci_high", "replicas"}, {}};
    for (std::size_t N : cfg.N) {
        const auto v      = ok_column(rows.at(N), 0);
        const double mean = sample_mean(v);
        const double se   = std::sqrt(sample_variance(v) / static_cast<double>(v.size()));
        const double lo = mean - 1.96 * se, hi = mean + 1.96 * se;
        table.rows.push_back({static_cast<double>(N), mean, se, lo, hi, static_cast<double>(v.size())});
        const std::string tag = "_N" + std::to_string(N);
        check(out, "mean_above" + tag, mean, threshold(cfg, "mean_low"), mean >= threshold(cfg, "mean_low"));
        check(out, "mean_below" + tag, mean, threshold(cfg, "mean_high"), mean <= threshold(cfg, "mean_high"));
        check(out, "ci_contains_one" + tag, hi - lo, 1.0, lo <= 1.0 && 1.0 <= hi);
        check(out, "ci_half_width" + tag, 1.96 * se, threshold(cfg, "max_half_width"),
              1.96 * se <= threshold(cfg, "max_half_width"));
    }
    out.tables.push_back(std::move(table));
    return out;
}

// Random control built from smooth Fourier modes in u with a linear trend in t.
ControlPath random_control(Rng& rng, double amplitude, double T, std::size_t J, std::size_t M)
{
    std::normal_distribution<double> normal;
    double c[3][2][5];
    for (auto& comp : c) {
        for (auto& part : comp) {
            for (double& x : part) {
                x = normal(rng);
            }
        }
    }
    auto value = [&](int k, double t, double u) {
        double s = 0.0;
        for (int p = 0; p < 2; ++p) {
            const double* a = c[k][p];
            const double w  = 2 * std::numbers::pi * u;
            const double v  = a[0] + a[1] * std::cos(w) + a[2] * std::sin(w) + 0.5 * (a[3] * std::cos(2 * w) + a[4] * std::sin(2 * w));
            s += (p == 0 ? 1.0 : t / T) * v;
        }
        return amplitude * s / 3.0;
    };
    return ControlPath::sample([&](double t, double u) { return value(0, t, u); },
                               [&](double t, double u) { return value(1, t, u); },
                               [&](double t, double u) { return value(2, t, u); }, T, J, M);
}

Outcome run_rate_zero(const ExperimentConfig& cfg, const ModelBundle& b, RunManifest&)
{
    const DensityPath mu = solve_hydrodynamic(b, cfg.T);
    const double i_ini   = I_ini_closed(law_triple(b.law), b.law);
    ControlDiagnostics diag;
    const double i_dyn   = I_dyn_closed(b.model, mu, &diag);
    const auto count     = static_cast<std::size_t>(param(cfg, "random_controls", 100));
    const double amp     = param(cfg, "amplitude", 0.5);
    const auto J         = static_cast<std::size_t>(param(cfg, "control_steps", 20));
    Rng rng              = make_rng(cfg.seed, 0);
    ResultTable controls{"random_controls", {"index", "sup_norm", "I1"}, {}};
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < count; ++q) {
        const ControlPath c = random_control(rng, amp, cfg.T, J, b.grid_size());
        const double v      = eval_I1(b.model, mu, c).I1;
        worst               = std::max(worst, v);
        controls.rows.push_back({static_cast<double>(q), c.sup_norm(), v});
    }
    Outcome out;
    out.tables.push_back({"rates", {"I_ini", "I_dyn", "max_I1_random", "chain_margin", "derivative_margin"},
                          {{i_ini, i_dyn, worst, diag.chain_margin, diag.derivative_margin}}});
    out.tables.push_back(std::move(controls));
    check(out, "I_ini_at_law", i_ini, threshold(cfg, "I_ini"), i_ini <= threshold(cfg, "I_ini"));
    check(out, "I_dyn_at_solution", i_dyn, threshold(cfg, "I_dyn"), i_dyn <= threshold(cfg, "I_dyn"));
    check(out, "max_I1_random_controls", worst, threshold(cfg, "I1"), worst <= threshold(cfg, "I1"));
    return out;
}

const std::array<std::string, 3> default_pairing_test = {"1+0.5*cos(2*pi*u)", "sin(2*pi*u)", "0.5+0.3*cos(4*pi*u)"};
const std::array<std::string, 3> default_hit_test     = {"-1-0.3*cos(2*pi*u)", "0", "0"};

// Hitting level: the explicit params.hit_level, else the limit value at T/2.
double hit_level(const ExperimentConfig& cfg, const DensityPath& mu, const Triple& h)
{
    if (cfg.params.contains("hit_level")) {
        return cfg.params.at("hit_level").get<double>();
    }
    const std::size_t j = mu.steps() / 2;
    double c            = 0.0;
    for (int k = 0; k < 3; ++k) {
        c += mu.pairing(j, k, h[static_cast<std::size_t>(k)]);
    }
    return c;
}

Outcome run_clt_variance(const ExperimentConfig& cfg, const ModelBundle& b, const RunOptions& opt, RunManifest& man)
{
    const std::size_t M  = b.grid_size();
    const Triple f       = triple_param(cfg, "pairing_test", default_pairing_test, M);
    const Triple h       = triple_param(cfg, "hit_test", default_hit_test, M);
    const DensityPath mu = solve_hydrodynamic(b, cfg.T);
    double limit_T       = 0.0;
    for (int k = 0; k < 3; ++k) {
        limit_T += mu.pairing(mu.steps(), k, f[static_cast<std::size_t>(k)]);
    }
    const double c        = hit_level(cfg, mu, h);
    const Propagator prop(b.model, mu);
    const ContraResult contra = J_contra(prop, b.law, f, 1.0);
    const HitReport hit       = hitting_report(b.model, b.law, h, c, cfg.T);
    const double predicted_pairing = contra.denominator;
    const double predicted_hitting = 1.0 / (2.0 * hit.coefficient);

    ReplicaRunner runner(cfg, opt, man, {"pairing_fluctuation", "hitting_fluctuation"});
    const auto rows = runner.run([&](std::size_t N, Rng& rng) {
        Simulator sim(b.model, N);
        const auto traj  = sim.run(sample_initial(b.law, N, rng), cfg.T, rng);
        const auto emp   = empirical_pairings(traj, {f[0], f[1], f[2]}, {cfg.T});
        double pairing   = 0.0;
        for (int k = 0; k < 3; ++k) {
            pairing += emp.value(0, k, static_cast<std::size_t>(k));
        }
        const double tau = hitting_time_empirical(traj, h[0], h[1], h[2], c);
        const double sq  = std::sqrt(static_cast<double>(N));
        return std::vector<double>{sq * (pairing - limit_T),
                                   std::isfinite(tau) ? sq * (tau - hit.tau) : std::numeric_limits<double>::quiet_NaN()};
    });
    Outcome out;
    ResultTable table{"variance",
                      {"N", "pairing_variance", "pairing_predicted", "hitting_variance", "hitting_predicted",
                       "pairing_samples", "hitting_samples"},
                      {}};
    for (std::size_t N : cfg.N) {
        const auto x  = ok_column(rows.at(N), 0);
        const auto y  = ok_column(rows.at(N), 1);
        const double vx = sample_variance(x), vy = sample_variance(y);
        table.rows.push_back({static_cast<double>(N), vx, predicted_pairing, vy, predicted_hitting,
                              static_cast<double>(x.size()), static_cast<double>(y.size())});
        const double ex = std::fabs(vx / predicted_pairing - 1.0);
        const double ey = std::fabs(vy / predicted_hitting - 1.0);
        const std::string tag = "_N" + std::to_string(N);
        check(out, "pairing_variance_relative_error" + tag, ex, threshold(cfg, "pairing_relative"),
              ex <= threshold(cfg, "pairing_relative"));
        check(out, "hitting_variance_relative_error" + tag, ey, threshold(cfg, "hitting_relative"),
              ey <= threshold(cfg, "hitting_relative"));
    }
    out.tables.push_back(std::move(table));
    out.summary["denominator_B12_part"] = contra.b12_part;
    out.summary["denominator_B10_part"] = contra.b10_part;
    out.summary["hit_level"]            = c;
    out.summary["tau"]                  = hit.tau;
    out.summary["J_hit_coefficient"]    = hit.coefficient;
    return out;
}

Outcome run_hitting_clt(const ExperimentConfig& cfg, const ModelBundle& b, const RunOptions& opt, RunManifest& man)
{
    const Triple h       = triple_param(cfg, "hit_test", default_hit_test, b.grid_size());
    const DensityPath mu = solve_hydrodynamic(b, cfg.T);
    const double c       = hit_level(cfg, mu, h);
    const HittingTime lim = hitting_time_limit(mu, h[0], h[1], h[2], c);
    ReplicaRunner runner(cfg, opt, man, {"scaled_deviation"});
    const auto rows = runner.run([&](std::size_t N, Rng& rng) {
        Simulator sim(b.model, N);
        const auto traj  = sim.run(sample_initial(b.law, N, rng), cfg.T, rng);
        const double tau = hitting_time_empirical(traj, h[0], h[1], h[2], c);
        if (!std::isfinite(tau)) {
            throw Error(ErrorCode::OutOfRange, "level not reached before the horizon");
        }
        const double n = static_cast<double>(N);
        return std::vector<double>{n / b.schedule.gamma(n) * (tau - lim.tau)};
    });
    Outcome out;
    ResultTable table{"hitting", {"N", "gamma", "mean", "std_dev", "samples"}, {}};
    double previous_sd = std::numeric_limits<double>::infinity();
    bool shrinking     = true;
    for (std::size_t N : cfg.N) {
        const auto v    = ok_column(rows.at(N), 0);
        const double m  = sample_mean(v);
        const double sd = std::sqrt(sample_variance(v));
        table.rows.push_back({static_cast<double>(N), b.schedule.gamma(static_cast<double>(N)), m, sd,
                              static_cast<double>(v.size())});
        const double ratio = std::fabs(m) / sd;
        check(out, "center_ratio_N" + std::to_string(N), ratio, threshold(cfg, "max_center_ratio"),
              ratio <= threshold(cfg, "max_center_ratio"));
        shrinking   = shrinking && sd < previous_sd;
        previous_sd = sd;
    }
    check(out, "spread_shrinks", shrinking ? 1.0 : 0.0, 1.0, shrinking);
    out.tables.push_back(std::move(table));
    out.summary["hit_level"] = c;
    out.summary["tau"]       = lim.tau;
    return out;
}

Outcome run_skeleton_audit(const ExperimentConfig& cfg, const ModelBundle& b, RunManifest&)
{
    const std::size_t M  = b.grid_size();
    const Triple f       = triple_param(cfg, "pairing_test", default_pairing_test, M);
    const double x       = param(cfg, "x", 1.7);
    const DensityPath mu = solve_hydrodynamic(b, cfg.T);
    const Propagator prop(b.model, mu);

    const ContraResult one = J_contra(prop, b.law, f, 1.0);
    const ContraResult big = J_contra(prop, b.law, f, x);
    const double scaling   = std::fabs(big.value - x * x * one.value) / (x * x * one.value);

    const Eigen::MatrixXd phi0 = prop.matrix(0);
    const double identity =
        (phi0 - Eigen::MatrixXd::Identity(phi0.rows(), phi0.cols())).cwiseAbs().maxCoeff();

    SkeletonSettings settings;
    settings.tolerance = threshold(cfg, "dual_methods") / 10.0;
    settings.test_seed = cfg.seed;
    Rng rng            = make_rng(cfg.seed, 1);
    const ControlPath tilt = random_control(rng, param(cfg, "tilt_amplitude", 0.3), cfg.T, 40, M);
    const Triple init      = random_test_triples(1, M, cfg.seed + 1).front();
    double discrepancy     = std::numeric_limits<double>::infinity();
    double residual        = std::numeric_limits<double>::infinity();
    try {
        const SkeletonPath sk = solve_skeleton(prop, tilt, init, settings);
        discrepancy           = sk.discrepancy;
        residual              = skeleton_residual(prop, sk, random_test_triples(5, M, cfg.seed + 2));
    }
    catch (const Error& e) {
        if (e.code() != ErrorCode::MethodsDisagree) {
            throw;
        }
    }
    const SkeletonPath opt = solve_skeleton(prop, one.tilt, one.initial, settings);
    double endpoint        = 0.0;
    for (int k = 0; k < 3; ++k) {
        endpoint += opt.path.pairing(opt.path.steps(), k, f[static_cast<std::size_t>(k)]);
    }
    const double roundtrip = std::fabs(endpoint - 1.0);

    Outcome out;
    out.tables.push_back({"skeleton",
                          {"x", "J_contra_x", "J_contra_1", "scaling_error", "identity_error", "dual_discrepancy",
                           "residual", "optimizer_endpoint_error", "rcond"},
                          {{x, big.value, one.value, scaling, identity, discrepancy, residual, roundtrip,
                            prop.rcond()}}});
    out.summary["denominator_B12_part"] = one.b12_part;
    out.summary["denominator_B10_part"] = one.b10_part;
    check(out, "quadratic_scaling", scaling, threshold(cfg, "scaling"), scaling <= threshold(cfg, "scaling"));
    check(out, "propagator_identity_at_zero", identity, threshold(cfg, "identity"),
          identity <= threshold(cfg, "identity"));
    check(out, "dual_method_discrepancy", discrepancy, threshold(cfg, "dual_methods"),
          discrepancy <= threshold(cfg, "dual_methods"));
    check(out, "optimizer_endpoint", roundtrip, threshold(cfg, "dual_methods"),
          roundtrip <= threshold(cfg, "dual_methods"));
    return out;
}

} // namespace

// ---------------------------------------------------------------------------------------------

const char* to_string(ExperimentKind k)
{
    for (const auto& kn : kind_names) {
        if (kn.kind == k) {
            return kn.name;
        }
    }
    return "unknown";
}

ExperimentKind parse_kind(const std::string& s)
{
    for (const auto& kn : kind_names) {
        if (s == kn.name) {
            return kn.kind;
        }
    }
    throw Error(ErrorCode::ParseError, "unknown experiment kind '" + s + "'");
}

json default_thresholds(ExperimentKind kind)
{
    switch (kind) {
    case ExperimentKind::OracleValidation: return {{"tv", 0.01}, {"max_seconds", 120.0}};
    case ExperimentKind::HydroConvergence:
        return {{"slope", -0.5}, {"slope_tolerance", 0.15}, {"max_seconds", 300.0}};
    case ExperimentKind::TiltedLLN: return {{"max_discrepancy", 0.05}};
    case ExperimentKind::TiltingIdentity:
        return {{"mean_low", 0.8}, {"mean_high", 1.2}, {"max_half_width", 0.5}};
    case ExperimentKind::RateZero: return {{"I_ini", 0.0}, {"I_dyn", 1e-3}, {"I1", 1e-4}};
    case ExperimentKind::CltVariance:
        return {{"pairing_relative", 0.15}, {"hitting_relative", 0.20}, {"max_seconds", 600.0}};
    case ExperimentKind::HittingClt: return {{"max_center_ratio", 0.5}};
    case ExperimentKind::SkeletonAudit: return {{"scaling", 1e-12}, {"identity", 0.0}, {"dual_methods", 1e-5}};
    }
    return json::object();
}

json ExperimentConfig::canonical() const
{
    json j;
    j["kind"]       = to_string(kind);
    j["model"]      = model_path.generic_string();
    j["N"]          = N;
    j["replicas"]   = replicas;
    j["seed"]       = seed;
    j["T"]          = T;
    j["output"]     = output.generic_string();
    j["params"]     = params;
    j["thresholds"] = thresholds;
    return j;
}

ExperimentConfig parse_experiment(const json& j, const std::filesystem::path& base_dir)
{
    if (!j.is_object()) {
        throw Error(ErrorCode::ParseError, "experiment config must be a JSON object");
    }
    static const char* known[] = {"kind", "model", "N", "replicas", "seed", "T", "output", "params", "thresholds"};
    for (const auto& [key, value] : j.items()) {
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
            std::end(known)) {
            throw Error(ErrorCode::ParseError, "unknown config key '" + key + "'");
        }
    }
    if (!j.contains("kind") || !j.contains("model")) {
        throw Error(ErrorCode::ParseError, "config needs 'kind' and 'model'");
    }
    ExperimentConfig c;
    try {
        c.kind                = parse_kind(j.at("kind").get<std::string>());
        const KindDefaults d  = kind_defaults(c.kind);
        const std::filesystem::path model = j.at("model").get<std::string>();
        c.model_path = model.is_absolute() ? model : base_dir / model;
        c.N          = j.contains("N") ? j.at("N").get<std::vector<std::size_t>>() : d.N;
        c.replicas   = j.value("replicas", d.replicas);
        c.seed       = j.value("seed", std::uint64_t{1});
        c.T          = j.value("T", d.T);
        const std::filesystem::path output = j.value("output", std::string("out/") + to_string(c.kind));
        c.output     = output.is_absolute() ? output : base_dir / output;
        c.params     = j.value("params", json::object());
        c.thresholds = default_thresholds(c.kind);
        for (const auto& [key, value] : j.value("thresholds", json::object()).items()) {
            if (!c.thresholds.contains(key)) {
                throw Error(ErrorCode::ParseError, "unknown threshold '" + key + "'");
            }
            c.thresholds[key] = value;
        }
    }
    catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, e.what());
    }
    if (!std::is_sorted(c.N.begin(), c.N.end()) || std::adjacent_find(c.N.begin(), c.N.end()) != c.N.end()) {
        throw Error(ErrorCode::InvalidArgument, "N must be strictly ascending");
    }
    if (std::find(c.N.begin(), c.N.end(), std::size_t{0}) != c.N.end()) {
        throw Error(ErrorCode::InvalidArgument, "N entries must be positive");
    }
    if (!(c.T > 0.0) || !std::isfinite(c.T)) {
        throw Error(ErrorCode::InvalidArgument, "T must be positive");
    }
    const bool sampled = c.kind != ExperimentKind::RateZero && c.kind != ExperimentKind::SkeletonAudit;
    if (sampled && (c.N.empty() || c.replicas == 0)) {
        throw Error(ErrorCode::InvalidArgument, "sampling experiments need N and replicas");
    }
    if (!std::filesystem::exists(c.model_path)) {
        throw Error(ErrorCode::IoError, "model file not found: " + c.model_path.string());
    }
    return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& file)
{
    json j;
    try {
        j = json::parse(read_file(file));
    }
    catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, file.string() + ": " + e.what());
    }
    return parse_experiment(j, file.parent_path());
}

std::string config_hash(const ExperimentConfig& config)
{
    const std::string text = config.canonical().dump();
    return hex_digest(fnv1a(text.data(), text.size()));
}

std::uint64_t replica_seed(std::uint64_t seed, std::size_t N, std::size_t r)
{
    return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(N) ^ splitmix64(static_cast<std::uint64_t>(r))));
}

json RunManifest::to_json() const
{
    json j;
    j["config_hash"]        = config_hash;
    j["version"]            = version;
    j["kind"]               = kind;
    j["seed"]               = seed;
    j["replica_seeds"]      = replica_seeds;
    j["wall_clock_seconds"] = wall_clock_seconds;
    j["files"]              = files;
    j["resumed_replicas"]   = resumed_replicas;
    j["failed_replicas"]    = failed_replicas;
    j["passed"]             = passed;
    return j;
}

RateFit fit_rate(const std::vector<double>& xs, const std::vector<double>& ys)
{
    if (xs.size() != ys.size()) {
        throw Error(ErrorCode::InvalidArgument, "fit inputs differ in length");
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) {
            throw Error(ErrorCode::DegenerateFit, "non-finite point in fit");
        }
    }
    const std::size_t n = xs.size();
    if (n < 2) {
        throw Error(ErrorCode::DegenerateFit, "at least two points are needed");
    }
    const double mx = sample_mean(xs), my = sample_mean(ys);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (!(sxx > 0.0)) {
        throw Error(ErrorCode::DegenerateFit, "all abscissae coincide");
    }
    RateFit fit;
    fit.slope     = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (n > 2) {
        double ssr = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = ys[i] - fit.intercept - fit.slope * xs[i];
            ssr += e * e;
        }
        fit.stderr_slope = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
    }
    return fit;
}

std::vector<std::string> write_outputs(const std::filesystem::path& dir, const std::vector<ResultTable>& tables,
                                       RunManifest& manifest)
{
    std::filesystem::create_directories(dir);
    std::vector<std::string> written;
    for (const auto& t : tables) {
        std::ostringstream out;
        for (std::size_t c = 0; c < t.header.size(); ++c) {
            out << (c ? "," : "") << t.header[c];
        }
        out << '\n';
        for (const auto& row : t.rows) {
            for (std::size_t c = 0; c < row.size(); ++c) {
                out << (c ? "," : "") << format_number(row[c]);
            }
            out << '\n';
        }
        const std::string name = t.name + ".csv";
        write_file_atomic(dir / name, out.str());
        written.push_back(name);
    }
    written.push_back("summary.json");
    written.push_back("manifest.json");
    for (const auto& w : written) {
        if (std::find(manifest.files.begin(), manifest.files.end(), w) == manifest.files.end()) {
            manifest.files.push_back(w);
        }
    }
    json summary      = manifest.summary;
    summary["kind"]   = manifest.kind;
    summary["passed"] = manifest.passed;
    write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");
    write_file_atomic(dir / "manifest.json", manifest.to_json().dump(2) + "\n");
    return written;
}

RunManifest run_experiment(const ExperimentConfig& config, const RunOptions& options)
{
    const auto start = std::chrono::steady_clock::now();
    std::filesystem::create_directories(config.output);
    const ModelBundle bundle = load_model(config.model_path);

    RunManifest man;
    man.config_hash = config_hash(config);
    man.version     = SEIRLAB_VERSION;
    man.kind        = to_string(config.kind);
    man.seed        = config.seed;

    Outcome out;
    switch (config.kind) {
    case ExperimentKind::OracleValidation: out = run_oracle_validation(config, bundle, options, man); break;
    case ExperimentKind::HydroConvergence: out = run_hydro_convergence(config, bundle, options, man); break;
    case ExperimentKind::TiltedLLN: out = run_tilted_lln(config, bundle, options, man); break;
    case ExperimentKind::TiltingIdentity: out = run_tilting_identity(config, bundle, options, man); break;
    case ExperimentKind::RateZero: out = run_rate_zero(config, bundle, man); break;
    case ExperimentKind::CltVariance: out = run_clt_variance(config, bundle, options, man); break;
    case ExperimentKind::HittingClt: out = run_hitting_clt(config, bundle, options, man); break;
    case ExperimentKind::SkeletonAudit: out = run_skeleton_audit(config, bundle, man); break;
    }
    man.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (config.thresholds.contains("max_seconds")) {
        const double limit = config.thresholds.at("max_seconds").get<double>();
        check(out, "wall_clock_seconds", man.wall_clock_seconds, limit, man.wall_clock_seconds <= limit);
    }
    out.summary["failed_replicas"] = man.failed_replicas;
    man.passed                     = out.passed;
    man.summary                    = out.summary;
    write_outputs(config.output, out.tables, man);
    return man;
}

std::string experiment_report(const std::filesystem::path& dir)
{
    const auto summary_file  = dir / "summary.json";
    const auto manifest_file = dir / "manifest.json";
    if (!std::filesystem::exists(summary_file) || !std::filesystem::exists(manifest_file)) {
        throw Error(ErrorCode::IoError, "no finished run in " + dir.string());
    }
    json summary, manifest;
    try {
        summary  = json::parse(read_file(summary_file));
        manifest = json::parse(read_file(manifest_file));
    }
    catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, e.what());
    }
    std::ostringstream out;
    out << "kind        " << manifest.value("kind", "?") << '\n';
    out << "config hash " << manifest.value("config_hash", "?") << '\n';
    out << "version     " << manifest.value("version", "?") << '\n';
    out << "seed        " << manifest.value("seed", std::uint64_t{0}) << '\n';
    out << "wall clock  " << format_number(manifest.value("wall_clock_seconds", 0.0)) << " s\n";
    out << "replicas    resumed " << manifest.value("resumed_replicas", 0) << ", failed "
        << manifest.value("failed_replicas", 0) << '\n';
    for (const auto& c : summary.value("checks", json::array())) {
        out << (c.value("pass", false) ? "PASS " : "FAIL ") << c.value("name", "?") << "  value "
            << format_number(c.value("value", std::numeric_limits<double>::quiet_NaN())) << "  threshold "
            << format_number(c.value("threshold", std::numeric_limits<double>::quiet_NaN())) << '\n';
    }
    out << "overall     " << (summary.value("passed", false) ? "PASS" : "FAIL") << '\n';
    return out.str();
}

} // namespace seir
