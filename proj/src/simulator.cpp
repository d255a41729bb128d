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

#include "seirlab/simulator.hpp"
#include "seirlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace seir
{

Configuration sample_initial(const TorusFunction& p0, const TorusFunction& p1, const TorusFunction& p2,
                             std::size_t N, Rng& rng)
{
    Configuration c;
    c.states.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        const double u  = static_cast<double>(i) / static_cast<double>(N);
        const double r0 = p0(u);
        const double r1 = r0 + p1(u);
        const double r2 = r1 + p2(u);
        const double x  = uniform01(rng);
        c.states[i]     = static_cast<std::uint8_t>(x < r0 ? 0 : (x < r1 ? 1 : (x < r2 ? 2 : 3)));
    }
    return c;
}

Configuration sample_initial(const InitialLaw& law, std::size_t N, Rng& rng)
{
    return sample_initial(law.rho0, law.rho1, law.rho2, N, rng);
}

Configuration sample_initial(const InitialLaw& law, std::size_t N, std::uint64_t seed)
{
    Rng rng = make_rng(seed, 0);
    return sample_initial(law, N, rng);
}

namespace
{

constexpr std::size_t kernel_cache_limit = 1024;

double relative_gap(double maintained, double fresh)
{
    const double scale = std::max(std::fabs(maintained), std::fabs(fresh));
    return scale == 0.0 ? 0.0 : std::fabs(maintained - fresh) / scale;
}

} // namespace

Simulator::Simulator(const RateModel& model, std::size_t N)
    : m_model(model)
    , m_N(N)
    , m_product(model.product_form)
    , m_psi(N)
    , m_phi(N)
    , m_state(N)
    , m_s(N)
    , m_e(N)
    , m_i(N)
{
    if (N == 0 || N > std::numeric_limits<std::uint32_t>::max()) {
        throw Error(ErrorCode::InvalidArgument, "population size out of range");
    }
    for (std::size_t i = 0; i < N; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(N);
        m_psi[i]       = model.psi(u);
        m_phi[i]       = model.phi(u);
    }
    if (m_product) {
        m_l1.resize(N);
        m_l2.resize(N);
        for (std::size_t i = 0; i < N; ++i) {
            const double u = static_cast<double>(i) / static_cast<double>(N);
            m_l1[i]        = (*model.lambda1)(u);
            m_l2[i]        = (*model.lambda2)(u);
        }
        m_a.resize(N);
    }
    else {
        m_pressure.resize(N);
        if (N <= kernel_cache_limit) {
            m_kernel_cache.resize(N * N);
            for (std::size_t i = 0; i < N; ++i) {
                for (std::size_t j = 0; j < N; ++j) {
                    m_kernel_cache[i * N + j] =
                        model.lambda(static_cast<double>(i) / static_cast<double>(N), static_cast<double>(j) / static_cast<double>(N));
                }
            }
        }
    }
}

double Simulator::kernel(std::size_t i, std::size_t j) const
{
    if (!m_kernel_cache.empty()) {
        return m_kernel_cache[i * m_N + j];
    }
    return m_model.lambda(static_cast<double>(i) / static_cast<double>(m_N), static_cast<double>(j) / static_cast<double>(m_N));
}

void Simulator::reset(const Configuration& init)
{
    if (init.size() != m_N) {
        throw Error(ErrorCode::InvalidArgument, "initial configuration has the wrong size");
    }
    m_state    = init.states;
    m_infected = 0;
    std::vector<double> ws(m_N, 0.0), we(m_N, 0.0), wi(m_N, 0.0), wa(m_N, 0.0);
    for (std::size_t i = 0; i < m_N; ++i) {
        switch (m_state[i]) {
        case 0:
            ws[i] = m_product ? m_l1[i] : 0.0;
            break;
        case 1:
            we[i] = m_psi[i];
            break;
        case 2:
            wi[i] = m_phi[i];
            if (m_product) {
                wa[i] = m_l2[i];
            }
            ++m_infected;
            break;
        case 3:
            break;
        default:
            throw Error(ErrorCode::InvalidArgument, "vertex state outside {0,1,2,3}");
        }
    }
    m_e.assign(we);
    m_i.assign(wi);
    if (m_product) {
        m_s.assign(ws);
        m_a.assign(wa);
    }
    else {
        std::fill(m_pressure.begin(), m_pressure.end(), 0.0);
        for (std::size_t j = 0; j < m_N; ++j) {
            if (m_state[j] != 2) {
                continue;
            }
            for (std::size_t i = 0; i < m_N; ++i) {
                if (m_state[i] == 0) {
                    m_pressure[i] += kernel(i, j) / static_cast<double>(m_N);
                }
            }
        }
        for (std::size_t i = 0; i < m_N; ++i) {
            ws[i] = m_state[i] == 0 ? m_pressure[i] : 0.0;
        }
        m_s.assign(ws);
    }
    m_stats       = SimulationStats{};
    m_since_audit = 0;
}

double Simulator::infection_total() const
{
    if (m_product) {
        return m_a.total() / static_cast<double>(m_N) * m_s.total();
    }
    return m_s.total();
}

std::size_t Simulator::pick_susceptible(Rng& rng) const
{
    return m_s.find(uniform01(rng) * m_s.total());
}

void Simulator::infected_changed(std::size_t j, double sign)
{
    if (m_product) {
        m_a.set(j, sign > 0 ? m_l2[j] : 0.0);
        return;
    }
    std::vector<double> ws(m_N, 0.0);
    const double inv_n = 1.0 / static_cast<double>(m_N);
    for (std::size_t i = 0; i < m_N; ++i) {
        if (m_state[i] != 0) {
            continue;
        }
        m_pressure[i] = m_infected == 0 ? 0.0 : m_pressure[i] + sign * kernel(i, j) * inv_n;
        ws[i]         = std::max(m_pressure[i], 0.0);
    }
    m_s.assign(ws);
}

void Simulator::apply(Trajectory& traj, double t, std::size_t i, Transition kind)
{
    switch (kind) {
    case Transition::SE:
        m_s.set(i, 0.0);
        m_e.set(i, m_psi[i]);
        m_state[i] = 1;
        break;
    case Transition::EI:
        m_e.set(i, 0.0);
        m_i.set(i, m_phi[i]);
        m_state[i] = 2;
        ++m_infected;
        infected_changed(i, +1.0);
        break;
    case Transition::IR:
        m_i.set(i, 0.0);
        m_state[i] = 3;
        --m_infected;
        infected_changed(i, -1.0);
        break;
    }
    traj.events.push_back(Event{t, static_cast<std::uint32_t>(i), kind});
    ++m_stats.events;
    if (++m_since_audit >= audit_interval) {
        audit();
    }
}

void Simulator::audit()
{
    m_since_audit = 0;
    ++m_stats.audits;
    double gap = 0.0;
    if (m_product) {
        double a = 0.0, s = 0.0;
        for (std::size_t i = 0; i < m_N; ++i) {
            if (m_state[i] == 2) {
                a += m_l2[i];
            }
            else if (m_state[i] == 0) {
                s += m_l1[i];
            }
        }
        gap = std::max(relative_gap(m_a.total(), a), relative_gap(m_s.total(), s));
    }
    else {
        std::vector<double> fresh(m_N, 0.0), ws(m_N, 0.0);
        for (std::size_t j = 0; j < m_N; ++j) {
            if (m_state[j] != 2) {
                continue;
            }
            for (std::size_t i = 0; i < m_N; ++i) {
                if (m_state[i] == 0) {
                    fresh[i] += kernel(i, j) / static_cast<double>(m_N);
                }
            }
        }
        double maintained = 0.0, total = 0.0;
        for (std::size_t i = 0; i < m_N; ++i) {
            if (m_state[i] == 0) {
                maintained += m_pressure[i];
                total += fresh[i];
                m_pressure[i] = fresh[i];
                ws[i]         = fresh[i];
            }
        }
        gap = relative_gap(maintained, total);
        m_s.assign(ws);
    }
    m_stats.max_audit_drift = std::max(m_stats.max_audit_drift, gap);
    if (gap > audit_tolerance) {
        ++m_stats.audit_failures;
    }
}

Trajectory Simulator::run(const Configuration& init, double T, Rng& rng, const ControlPath* tilt)
{
    if (!(T >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "horizon must be nonnegative");
    }
    reset(init);
    Trajectory traj;
    traj.initial = init;
    traj.horizon = T;
    if (tilt != nullptr && !tilt->is_zero()) {
        if (!std::isfinite(T) || tilt->horizon() < T * (1 - 1e-12)) {
            throw Error(ErrorCode::InvalidArgument, "tilt must cover the simulation horizon");
        }
        run_tilted(traj, T, rng, *tilt);
    }
    else {
        run_plain(traj, T, rng);
    }
    return traj;
}

void Simulator::run_plain(Trajectory& traj, double T, Rng& rng)
{
    double t = 0.0;
    for (;;) {
        const double r_se  = infection_total();
        const double r_ei  = m_e.total();
        const double r_ir  = m_i.total();
        const double total = r_se + r_ei + r_ir;
        if (!(total > 0.0)) {
            break;
        }
        t += exponential(rng, total);
        if (t > T) {
            break;
        }
        ++m_stats.candidates;
        const double x = uniform01(rng) * total;
        if (x < r_se && r_se > 0.0) {
            apply(traj, t, pick_susceptible(rng), Transition::SE);
        }
        else if ((x < r_se + r_ei && r_ei > 0.0) || !(r_ir > 0.0)) {
            apply(traj, t, m_e.find(uniform01(rng) * r_ei), Transition::EI);
        }
        else {
            apply(traj, t, m_i.find(uniform01(rng) * r_ir), Transition::IR);
        }
    }
}

void Simulator::run_tilted(Trajectory& traj, double T, Rng& rng, const ControlPath& tilt)
{
    const std::size_t M = tilt.grid_size();
    auto exponent       = [&](int kind, double t, double u) {
        switch (kind) {
        case 0:
            return -tilt.eval(0, t, u) + tilt.eval(1, t, u);
        case 1:
            return -tilt.eval(1, t, u) + tilt.eval(2, t, u);
        default:
            return -tilt.eval(2, t, u);
        }
    };
    // Each exponent is linear in time on a cell and a linear interpolant in space, so its maximum over
    // the cell is attained at a grid node at one of the two cell ends.
    auto log_majorant = [&](int kind, std::size_t cell) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = cell; j <= cell + 1; ++j) {
            for (std::size_t m = 0; m < M; ++m) {
                double e = 0.0;
                if (kind == 0) {
                    e = -tilt.at(0, j, m) + tilt.at(1, j, m);
                }
                else if (kind == 1) {
                    e = -tilt.at(1, j, m) + tilt.at(2, j, m);
                }
                else {
                    e = -tilt.at(2, j, m);
                }
                best = std::max(best, e);
            }
        }
        return best;
    };

    const double inv_n = 1.0 / static_cast<double>(m_N);
    double t           = 0.0;
    for (std::size_t cell = 0; cell < tilt.steps() && t < T; ++cell) {
        const double cell_end = std::min(tilt.time(cell + 1), T);
        const double log_k[3] = {log_majorant(0, cell), log_majorant(1, cell), log_majorant(2, cell)};
        const double k[3]     = {std::exp(log_k[0]), std::exp(log_k[1]), std::exp(log_k[2])};
        for (;;) {
            const double r[3]  = {k[0] * infection_total(), k[1] * m_e.total(), k[2] * m_i.total()};
            const double total = r[0] + r[1] + r[2];
            if (!(total > 0.0)) {
                return;
            }
            const double next = t + exponential(rng, total);
            if (next > cell_end) {
                t = cell_end;
                break;
            }
            t = next;
            ++m_stats.candidates;
            const double x = uniform01(rng) * total;
            int kind       = 0;
            std::size_t i  = 0;
            if (x < r[0] && r[0] > 0.0) {
                kind = 0;
                i    = pick_susceptible(rng);
            }
            else if ((x < r[0] + r[1] && r[1] > 0.0) || !(r[2] > 0.0)) {
                kind = 1;
                i    = m_e.find(uniform01(rng) * m_e.total());
            }
            else {
                kind = 2;
                i    = m_i.find(uniform01(rng) * m_i.total());
            }
            const double accept = std::exp(exponent(kind, t, static_cast<double>(i) * inv_n) - log_k[kind]);
            if (uniform01(rng) < accept) {
                apply(traj, t, i, static_cast<Transition>(kind));
            }
        }
    }
}

Trajectory simulate(const RateModel& model, const Configuration& init, double T, std::uint64_t seed,
                    const std::optional<ControlPath>& tilt)
{
    Simulator sim(model, init.size());
    Rng rng = make_rng(seed, 1);
    return sim.run(init, T, rng, tilt ? &*tilt : nullptr);
}

} // namespace seir
