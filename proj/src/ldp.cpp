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

#include "seirlab/ldp.hpp"
#include "seirlab/error.hpp"
#include "seirlab/hydro.hpp"
#include "seirlab/io.hpp"
#include "seirlab/numerics.hpp"
#include "seirlab/parallel.hpp"
#include "seirlab/rng.hpp"
#include "seirlab/simulator.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace seir
{

namespace
{

void check_grids(const RateModel& model, const DensityPath& W, const ControlPath& control)
{
    const std::size_t M = model.grid_size();
    if (W.grid_size() != M || control.grid_size() != M) {
        throw Error(ErrorCode::GridMismatch, "path, control and rates must share the spatial grid");
    }
    if (std::fabs(control.horizon() - W.horizon()) > 1e-9 * std::max(1.0, W.horizon())) {
        throw Error(ErrorCode::GridMismatch, "path and control cover different horizons");
    }
}

/// d/dt of control component c at spatial node m, linear between the control's own time nodes.
double control_rate(const ControlPath& control, int c, double t, std::size_t m)
{
    const double x = std::clamp(t / control.dt(), 0.0, static_cast<double>(control.steps()));
    const std::size_t j = std::min(static_cast<std::size_t>(x), control.steps() - 1);
    const double s      = x - static_cast<double>(j);
    return (1 - s) * control.time_derivative(c, j, m) + s * control.time_derivative(c, j + 1, m);
}

double grid_mean(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

/// Integral of exp(x(s)) - 1 over an interval of length len on which x moves linearly from x0 to x1.
double integral_expm1_linear(double x0, double x1, double len)
{
    const double d = x1 - x0;
    double mean_exp;
    if (std::fabs(d) < 1e-8) {
        mean_exp = std::exp(x0) * (1.0 + 0.5 * d);
    }
    else {
        mean_exp = std::exp(x0) * std::expm1(d) / d;
    }
    return len * (mean_exp - 1.0);
}

} // namespace

LDPReport eval_I1(const RateModel& model, const DensityPath& W, const ControlPath& control)
{
    check_grids(model, W, control);
    const std::size_t J = W.steps(), M = W.grid_size();
    InfectionOperator infection(model);
    LDPReport r;
    r.times.resize(J + 1);
    r.trace_B1.resize(J + 1);
    r.trace_B2.resize(J + 1);
    r.trace_B3.resize(J + 1);
    std::vector<double> drift(J + 1), a(M);
    const auto& psi = model.psi.values();
    const auto& phi = model.phi.values();
    for (std::size_t j = 0; j <= J; ++j) {
        const double t = W.time(j);
        r.times[j]     = t;
        infection.apply(W.slice(j, 2), a.data());
        double b1 = 0.0, b2 = 0.0, b3 = 0.0, d = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            const double F = control.at_time(0, t, m), G = control.at_time(1, t, m), H = control.at_time(2, t, m);
            const double w1 = W.w(j, 0, m), w2 = W.w(j, 1, m), w3 = W.w(j, 2, m);
            b1 += w1 * a[m] * std::expm1(-F + G);
            b2 += w2 * psi[m] * std::expm1(-G + H);
            b3 += w3 * phi[m] * std::expm1(-H);
            d += w1 * control_rate(control, 0, t, m) + w2 * control_rate(control, 1, t, m) +
                 w3 * control_rate(control, 2, t, m);
        }
        r.trace_B1[j] = b1 / static_cast<double>(M);
        r.trace_B2[j] = b2 / static_cast<double>(M);
        r.trace_B3[j] = b3 / static_cast<double>(M);
        drift[j]      = d / static_cast<double>(M);
    }
    auto endpoint = [&](std::size_t j) {
        double s = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            for (int k = 0; k < 3; ++k) {
                s += W.w(j, k, m) * control.at_time(k, W.time(j), m);
            }
        }
        return s / static_cast<double>(M);
    };
    const double h = W.dt();
    r.l1           = endpoint(J) - endpoint(0) - trapezoid(drift, h);
    r.B1           = trapezoid(r.trace_B1, h);
    r.B2           = trapezoid(r.trace_B2, h);
    r.B3           = trapezoid(r.trace_B3, h);
    r.I1           = r.l1 - r.B1 - r.B2 - r.B3;
    return r;
}

LDPReport eval_I1(const RateModel& model, const Trajectory& traj, const ControlPath& control)
{
    if (!std::isfinite(traj.horizon) || traj.horizon > control.horizon() * (1 + 1e-12)) {
        throw Error(ErrorCode::GridMismatch, "control must cover the finite trajectory horizon");
    }
    const std::size_t N = traj.size();
    const double inv_n  = 1.0 / static_cast<double>(N);
    std::vector<double> pos(N), psi(N), phi(N), pressure(N, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        pos[i] = static_cast<double>(i) * inv_n;
        psi[i] = model.psi(pos[i]);
        phi[i] = model.phi(pos[i]);
    }
    std::vector<double> kernel;
    auto lambda = [&](std::size_t i, std::size_t j) { return model.lambda(pos[i], pos[j]); };
    if (N <= 2048) {
        kernel.resize(N * N);
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t j = 0; j < N; ++j) {
                kernel[i * N + j] = lambda(i, j);
            }
        }
    }
    auto k_at = [&](std::size_t i, std::size_t j) { return kernel.empty() ? lambda(i, j) : kernel[i * N + j]; };

    std::vector<std::uint8_t> state = traj.initial.states;
    for (std::size_t j = 0; j < N; ++j) {
        if (state[j] == 2) {
            for (std::size_t i = 0; i < N; ++i) {
                pressure[i] += k_at(i, j) * inv_n;
            }
        }
    }
    // Control exponents for the three transitions at vertex i and time t.
    auto exponent = [&](int kind, double t, std::size_t i) {
        switch (kind) {
        case 0:
            return -control.eval(0, t, pos[i]) + control.eval(1, t, pos[i]);
        case 1:
            return -control.eval(1, t, pos[i]) + control.eval(2, t, pos[i]);
        default:
            return -control.eval(2, t, pos[i]);
        }
    };
    LDPReport r;
    auto accumulate = [&](double s0, double s1) {
        if (s1 <= s0) {
            return;
        }
        const double len = s1 - s0;
        for (std::size_t i = 0; i < N; ++i) {
            const int s = state[i];
            if (s == 0) {
                r.B1 += pressure[i] * integral_expm1_linear(exponent(0, s0, i), exponent(0, s1, i), len);
            }
            else if (s == 1) {
                r.B2 += psi[i] * integral_expm1_linear(exponent(1, s0, i), exponent(1, s1, i), len);
            }
            else if (s == 2) {
                r.B3 += phi[i] * integral_expm1_linear(exponent(2, s0, i), exponent(2, s1, i), len);
            }
        }
    };
    // Integrate from `from` to `to`, splitting at control cell boundaries so exponents stay linear.
    auto advance = [&](double from, double to) {
        double t = from;
        while (t < to) {
            const double cell_end =
                std::min(to, control.dt() * (std::floor(t / control.dt() + 1e-12) + 1.0));
            accumulate(t, cell_end);
            t = cell_end;
        }
    };
    double t = 0.0;
    for (const Event& e : traj.events) {
        advance(t, e.time);
        t                   = e.time;
        const std::size_t i = e.vertex;
        const int a         = static_cast<int>(e.kind);
        const double before = control.eval(a, t, pos[i]);
        const double after  = a < 2 ? control.eval(a + 1, t, pos[i]) : 0.0;
        r.l1 += after - before;
        state[i] = static_cast<std::uint8_t>(a + 1);
        if (e.kind == Transition::EI || e.kind == Transition::IR) {
            const double sign = e.kind == Transition::EI ? 1.0 : -1.0;
            for (std::size_t v = 0; v < N; ++v) {
                pressure[v] += sign * k_at(v, i) * inv_n;
            }
        }
    }
    advance(t, traj.horizon);
    r.l1 *= inv_n;
    r.B1 *= inv_n;
    r.B2 *= inv_n;
    r.B3 *= inv_n;
    r.I1 = r.l1 - r.B1 - r.B2 - r.B3;
    return r;
}

namespace
{

void check_triple(const std::array<TorusFunction, 3>& f, std::size_t M, const char* what)
{
    for (const auto& x : f) {
        if (x.size() != M) {
            throw Error(ErrorCode::GridMismatch, std::string(what) + " and law use different grids");
        }
    }
}

} // namespace

double eval_I2(const std::array<TorusFunction, 3>& pi0, const std::array<TorusFunction, 3>& f, const InitialLaw& law)
{
    const std::size_t M = law.rho0.size();
    check_triple(pi0, M, "densities");
    check_triple(f, M, "test functions");
    std::vector<double> integrand(M);
    for (std::size_t m = 0; m < M; ++m) {
        double arg = 1.0, linear = 0.0;
        for (int k = 0; k < 3; ++k) {
            arg += law.rho(k)[m] * std::expm1(f[k][m]);
            linear += pi0[k][m] * f[k][m];
        }
        if (!(arg > log_guard)) {
            throw Error(ErrorCode::LogDomain, "log argument " + format_number(arg) + " at node " + std::to_string(m));
        }
        integrand[m] = linear - std::log(arg);
    }
    return grid_mean(integrand);
}

double I_ini_closed(const std::array<TorusFunction, 3>& w0, const InitialLaw& law)
{
    const std::size_t M = law.rho0.size();
    check_triple(w0, M, "densities");
    std::vector<double> integrand(M);
    for (std::size_t m = 0; m < M; ++m) {
        double sum_w = 0.0, sum_rho = 0.0, s = 0.0;
        for (int k = 0; k < 3; ++k) {
            const double w = w0[k][m];
            if (!(w > log_guard)) {
                throw Error(ErrorCode::DomainViolation, "initial density not positive at node " + std::to_string(m));
            }
            sum_w += w;
            sum_rho += law.rho(k)[m];
            s += w * std::log(w / law.rho(k)[m]);
        }
        if (!(sum_w < 1.0 - log_guard)) {
            throw Error(ErrorCode::DomainViolation, "initial densities sum to 1 or more at node " + std::to_string(m));
        }
        s -= (1.0 - sum_w) * std::log((1.0 - sum_rho) / (1.0 - sum_w));
        integrand[m] = s;
    }
    return grid_mean(integrand);
}

std::array<TorusFunction, 3> initial_optimizer(const std::array<TorusFunction, 3>& w0, const InitialLaw& law)
{
    const std::size_t M = law.rho0.size();
    check_triple(w0, M, "densities");
    std::array<std::vector<double>, 3> f;
    for (auto& v : f) {
        v.resize(M);
    }
    for (std::size_t m = 0; m < M; ++m) {
        const double sum_w   = w0[0][m] + w0[1][m] + w0[2][m];
        const double sum_rho = law.rho0[m] + law.rho1[m] + law.rho2[m];
        if (!(sum_w < 1.0 - log_guard)) {
            throw Error(ErrorCode::DomainViolation, "initial densities sum to 1 or more");
        }
        const double shift = std::log((1.0 - sum_w) / (1.0 - sum_rho));
        for (int k = 0; k < 3; ++k) {
            if (!(w0[k][m] > log_guard)) {
                throw Error(ErrorCode::DomainViolation, "initial density not positive");
            }
            f[k][m] = std::log(w0[k][m] / law.rho(k)[m]) - shift;
        }
    }
    return {TorusFunction(std::move(f[0])), TorusFunction(std::move(f[1])), TorusFunction(std::move(f[2]))};
}

ControlPath optimal_controls(const RateModel& model, const DensityPath& W, ControlDiagnostics* diagnostics)
{
    const std::size_t J = W.steps(), M = W.grid_size();
    if (M != model.grid_size()) {
        throw Error(ErrorCode::GridMismatch, "path and rates use different grids");
    }
    if (J < 4) {
        throw Error(ErrorCode::NotAdmissible, "at least five time nodes are needed to estimate derivatives");
    }
    for (double v : W.data()) {
        if (!(v > log_guard)) {
            throw Error(ErrorCode::DomainViolation, "a density is not positive; the controls are infinite");
        }
    }
    const AdmissibilityReport adm = is_admissible_D0(W);
    if (!adm.admissible) {
        throw Error(ErrorCode::NotAdmissible, adm.detail);
    }
    // Partial-sum derivatives in second and fourth order; their gap estimates the difference error.
    std::vector<double> d2((J + 1) * 3 * M);
    std::vector<double> series(J + 1);
    double fd_error = 0.0;
    for (int k = 0; k < 3; ++k) {
        for (std::size_t m = 0; m < M; ++m) {
            for (std::size_t j = 0; j <= J; ++j) {
                double s = 0.0;
                for (int q = 0; q <= k; ++q) {
                    s += W.w(j, q, m);
                }
                series[j] = s;
            }
            const auto a = finite_difference(series, W.dt());
            const auto b = finite_difference4(series, W.dt());
            for (std::size_t j = 0; j <= J; ++j) {
                d2[(j * 3 + static_cast<std::size_t>(k)) * M + m] = a[j];
                fd_error = std::max(fd_error, std::fabs(a[j] - b[j]));
            }
        }
    }
    if (diagnostics != nullptr) {
        diagnostics->chain_margin      = adm.chain_margin;
        diagnostics->derivative_margin = adm.derivative_margin;
        diagnostics->fd_error          = fd_error;
    }
    if (!(adm.derivative_margin > 10.0 * fd_error)) {
        throw Error(ErrorCode::NotAdmissible, "monotonicity margin " + format_number(adm.derivative_margin) +
                                                  " does not exceed 10x the difference error " +
                                                  format_number(fd_error));
    }
    InfectionOperator infection(model);
    ControlPath out(W.horizon(), J, M);
    std::vector<double> a(M);
    auto guarded_log = [](double x, const char* what, std::size_t j, std::size_t m) {
        if (!(x > log_guard)) {
            throw Error(ErrorCode::DomainViolation, std::string(what) + " ratio not positive at node (" +
                                                        std::to_string(j) + ", " + std::to_string(m) + ")");
        }
        return std::log(x);
    };
    for (std::size_t j = 0; j <= J; ++j) {
        infection.apply(W.slice(j, 2), a.data());
        for (std::size_t m = 0; m < M; ++m) {
            const double w1 = W.w(j, 0, m), w2 = W.w(j, 1, m), w3 = W.w(j, 2, m);
            const double ds1 = d2[(j * 3 + 0) * M + m];
            const double ds2 = d2[(j * 3 + 1) * M + m];
            const double ds3 = d2[(j * 3 + 2) * M + m];
            const double H   = -guarded_log(-ds3 / (model.phi[m] * w3), "removal", j, m);
            const double G   = H - guarded_log(-ds2 / (model.psi[m] * w2), "progression", j, m);
            const double F   = G - guarded_log(-ds1 / (w1 * a[m]), "infection", j, m);
            out.at(0, j, m)  = F;
            out.at(1, j, m)  = G;
            out.at(2, j, m)  = H;
        }
    }
    return out;
}

double I_dyn_closed(const RateModel& model, const DensityPath& W, ControlDiagnostics* diagnostics)
{
    return eval_I1(model, W, optimal_controls(model, W, diagnostics)).I1;
}

TiltingEstimate tilting_identity_estimate(const RateModel& model, const InitialLaw& law, std::size_t N, double T,
                                          const ControlPath& control, std::size_t replicas, std::uint64_t seed,
                                          std::size_t workers)
{
    validate_rates(model);
    validate_law(law);
    if (replicas < 2) {
        throw Error(ErrorCode::InvalidArgument, "at least two replicas are needed for an interval");
    }
    TiltingEstimate est;
    est.replicas = replicas;
    est.samples.resize(replicas);
    parallel_for(replicas, workers, [&](std::size_t r) {
        Rng rng             = make_rng(seed, r);
        const auto init     = sample_initial(law, N, rng);
        Simulator sim(model, N);
        const auto traj     = sim.run(init, T, rng);
        est.samples[r]      = std::exp(static_cast<double>(N) * eval_I1(model, traj, control).I1);
    });
    double sum = 0.0;
    for (double v : est.samples) {
        sum += v;
    }
    est.mean   = sum / static_cast<double>(replicas);
    double ss  = 0.0;
    for (double v : est.samples) {
        ss += (v - est.mean) * (v - est.mean);
    }
    est.std_error       = std::sqrt(ss / static_cast<double>(replicas - 1) / static_cast<double>(replicas));
    const double half   = 1.96 * est.std_error;
    est.ci_low          = est.mean - half;
    est.ci_high         = est.mean + half;
    // Degenerate weights give a tiny sample spread around a collapsed mean, so the interval is also judged
    // relative to the mean.
    est.variance_blowup = !(half <= 0.5) || !(est.mean > 0.0 && half <= 0.5 * est.mean);
    return est;
}

void write_ldp_report(const LDPReport& report, const std::filesystem::path& json, const std::filesystem::path& csv)
{
    nlohmann::json j;
    j["I1"] = report.I1;
    j["l1"] = report.l1;
    j["B1"] = report.B1;
    j["B2"] = report.B2;
    j["B3"] = report.B3;
    write_file_atomic(json, j.dump(2) + "\n");
    std::ostringstream out;
    out << "t,integrand_B1,integrand_B2,integrand_B3\n";
    for (std::size_t n = 0; n < report.times.size(); ++n) {
        out << format_number(report.times[n]) << ',' << format_number(report.trace_B1[n]) << ','
            << format_number(report.trace_B2[n]) << ',' << format_number(report.trace_B3[n]) << '\n';
    }
    write_file_atomic(csv, out.str());
}

} // namespace seir
