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

#include "seirlab/fields.hpp"
#include "seirlab/error.hpp"
#include "seirlab/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace seir
{

namespace
{

std::vector<double> sample_at_vertices(const TorusFunction& f, std::size_t N)
{
    std::vector<double> v(N);
    for (std::size_t i = 0; i < N; ++i) {
        v[i] = f(static_cast<double>(i) / static_cast<double>(N));
    }
    return v;
}

void check_times(const std::vector<double>& times, double T)
{
    for (std::size_t n = 0; n < times.size(); ++n) {
        if (times[n] < 0.0 || times[n] > T || (n > 0 && times[n] < times[n - 1])) {
            throw Error(ErrorCode::InvalidArgument, "sample times must be sorted inside [0, T]");
        }
    }
}

/// Raw sums sum_i 1{state_i = k} f(i/N), layout [time][k][test].
std::vector<double> raw_sums(const Trajectory& traj, const std::vector<std::vector<double>>& fv,
                             const std::vector<double>& times)
{
    const std::size_t N  = traj.size();
    const std::size_t nt = fv.size();
    std::vector<double> sums(3 * nt, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        const int s = traj.initial.states[i];
        if (s < 3) {
            for (std::size_t q = 0; q < nt; ++q) {
                sums[static_cast<std::size_t>(s) * nt + q] += fv[q][i];
            }
        }
    }
    std::vector<double> out(times.size() * 3 * nt);
    std::size_t e = 0;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        while (e < traj.events.size() && traj.events[e].time <= times[ti]) {
            const Event& ev     = traj.events[e++];
            const std::size_t a = static_cast<std::size_t>(ev.kind);
            for (std::size_t q = 0; q < nt; ++q) {
                sums[a * nt + q] -= fv[q][ev.vertex];
                if (a < 2) {
                    sums[(a + 1) * nt + q] += fv[q][ev.vertex];
                }
            }
        }
        std::copy(sums.begin(), sums.end(), out.begin() + static_cast<std::ptrdiff_t>(ti * 3 * nt));
    }
    return out;
}

} // namespace

EmpiricalPath empirical_pairings(const Trajectory& traj, const std::vector<TorusFunction>& tests,
                                 const std::vector<double>& times, std::size_t bins)
{
    check_times(times, traj.horizon);
    const std::size_t N = traj.size();
    std::vector<std::vector<double>> fv;
    for (const auto& f : tests) {
        fv.push_back(sample_at_vertices(f, N));
    }
    EmpiricalPath path;
    path.times  = times;
    path.tests  = tests.size();
    path.values = raw_sums(traj, fv, times);
    for (double& v : path.values) {
        v /= static_cast<double>(N);
    }
    if (bins > 0) {
        // One indicator per bin turns the histogram into plain pairings.
        std::vector<std::vector<double>> indicators(bins, std::vector<double>(N, 0.0));
        for (std::size_t i = 0; i < N; ++i) {
            const double u = static_cast<double>(i) / static_cast<double>(N);
            indicators[static_cast<std::size_t>(std::llround(u * bins)) % bins][i] = static_cast<double>(bins);
        }
        path.bins      = bins;
        path.densities = raw_sums(traj, indicators, times);
        for (double& v : path.densities) {
            v /= static_cast<double>(N);
        }
    }
    return path;
}

void write_pairings(const EmpiricalPath& path, const std::filesystem::path& csv)
{
    std::ostringstream out;
    out << "time,k,test_id,value\n";
    for (std::size_t ti = 0; ti < path.times.size(); ++ti) {
        for (int k = 0; k < 3; ++k) {
            for (std::size_t q = 0; q < path.tests; ++q) {
                out << format_number(path.times[ti]) << ',' << k + 1 << ',' << q << ','
                    << format_number(path.value(ti, k, q)) << '\n';
            }
        }
    }
    write_file_atomic(csv, out.str());
}

std::vector<FluctuationPath> fluctuation_pairings(const std::vector<Trajectory>& replicas,
                                                  const std::vector<TorusFunction>& tests,
                                                  const std::vector<double>& times, const ScalingSchedule& schedule,
                                                  Centering centering, const CenteringInputs& inputs)
{
    validate_schedule(schedule);
    if (replicas.empty()) {
        throw Error(ErrorCode::CenteringUnavailable, "no replicas");
    }
    const std::size_t N  = replicas.front().size();
    const std::size_t nt = tests.size();
    for (const auto& r : replicas) {
        if (r.size() != N) {
            throw Error(ErrorCode::InvalidArgument, "replicas differ in population size");
        }
    }
    std::vector<std::vector<double>> fv;
    for (const auto& f : tests) {
        fv.push_back(sample_at_vertices(f, N));
    }
    std::vector<std::vector<double>> sums;
    for (const auto& r : replicas) {
        check_times(times, r.horizon);
        sums.push_back(raw_sums(r, fv, times));
    }
    const std::size_t len = times.size() * 3 * nt;
    std::vector<double> centers(len, 0.0); // sum_i m(i) f(i/N)

    switch (centering) {
    case Centering::ReplicaMean:
        if (replicas.size() < 2) {
            throw Error(ErrorCode::CenteringUnavailable, "replica-mean centering needs at least two replicas");
        }
        for (const auto& s : sums) {
            for (std::size_t n = 0; n < len; ++n) {
                centers[n] += s[n];
            }
        }
        for (double& c : centers) {
            c /= static_cast<double>(replicas.size());
        }
        break;
    case Centering::OracleMean: {
        const VertexMeans* means = inputs.oracle;
        if (means == nullptr || N > 8) {
            throw Error(ErrorCode::CenteringUnavailable, "oracle-mean centering needs exact means and N <= 8");
        }
        if (means->N != N || means->times.size() != times.size()) {
            throw Error(ErrorCode::CenteringUnavailable, "exact means do not match the sampling grid");
        }
        for (std::size_t ti = 0; ti < times.size(); ++ti) {
            if (std::fabs(means->times[ti] - times[ti]) > 1e-12) {
                throw Error(ErrorCode::CenteringUnavailable, "exact means sampled at different times");
            }
            for (int k = 0; k < 3; ++k) {
                for (std::size_t q = 0; q < nt; ++q) {
                    double c = 0.0;
                    for (std::size_t i = 0; i < N; ++i) {
                        c += means->at(ti, i, k) * fv[q][i];
                    }
                    centers[(ti * 3 + static_cast<std::size_t>(k)) * nt + q] = c;
                }
            }
        }
        break;
    }
    case Centering::HydrodynamicMean: {
        const DensityPath* theta = inputs.hydrodynamic;
        if (theta == nullptr) {
            throw Error(ErrorCode::CenteringUnavailable, "hydrodynamic centering needs a solved density path");
        }
        for (std::size_t ti = 0; ti < times.size(); ++ti) {
            if (times[ti] > theta->horizon() * (1 + 1e-12)) {
                throw Error(ErrorCode::CenteringUnavailable, "density path ends before the sample time");
            }
            for (int k = 0; k < 3; ++k) {
                for (std::size_t q = 0; q < nt; ++q) {
                    double c = 0.0;
                    for (std::size_t i = 0; i < N; ++i) {
                        c += theta->eval(k, times[ti], static_cast<double>(i) / static_cast<double>(N)) * fv[q][i];
                    }
                    centers[(ti * 3 + static_cast<std::size_t>(k)) * nt + q] = c;
                }
            }
        }
        break;
    }
    }

    const double gamma = schedule.gamma(static_cast<double>(N));
    std::vector<FluctuationPath> out;
    out.reserve(replicas.size());
    for (const auto& s : sums) {
        FluctuationPath p;
        p.times                   = times;
        p.tests                   = nt;
        p.centering               = centering;
        p.centering_is_asymptotic = centering == Centering::HydrodynamicMean;
        p.values.resize(len);
        p.centers.resize(len);
        for (std::size_t n = 0; n < len; ++n) {
            p.values[n]  = (s[n] - centers[n]) / gamma;
            p.centers[n] = centers[n] / static_cast<double>(N);
        }
        out.push_back(std::move(p));
    }
    return out;
}

double dynkin_residual(const Trajectory& traj, const RateModel& model, const TorusFunction& f, int k)
{
    if (k < 0 || k > 2) {
        throw Error(ErrorCode::InvalidArgument, "compartment index must be 0, 1 or 2");
    }
    const std::size_t N = traj.size();
    const double inv_n  = 1.0 / static_cast<double>(N);
    std::vector<double> fv = sample_at_vertices(f, N), psi(N), phi(N);
    for (std::size_t i = 0; i < N; ++i) {
        const double u = static_cast<double>(i) * inv_n;
        psi[i]         = model.psi(u);
        phi[i]         = model.phi(u);
    }
    auto lambda = [&](std::size_t i, std::size_t j) { return model.lambda(static_cast<double>(i) * inv_n, static_cast<double>(j) * inv_n); };

    std::vector<std::uint8_t> state = traj.initial.states;
    std::vector<double> pressure(N, 0.0); // (1/N) sum_{j in I} lambda(i, j)
    for (std::size_t j = 0; j < N; ++j) {
        if (state[j] == 2) {
            for (std::size_t i = 0; i < N; ++i) {
                pressure[i] += lambda(i, j) * inv_n;
            }
        }
    }
    auto drift = [&]() {
        double infection = 0.0, progression = 0.0, removal = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            if (state[i] == 0) {
                infection += fv[i] * pressure[i];
            }
            else if (state[i] == 1) {
                progression += fv[i] * psi[i];
            }
            else if (state[i] == 2) {
                removal += fv[i] * phi[i];
            }
        }
        infection *= inv_n;
        progression *= inv_n;
        removal *= inv_n;
        if (k == 0) {
            return -infection;
        }
        if (k == 1) {
            return infection - progression;
        }
        return progression - removal;
    };
    auto pairing = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            if (state[i] == k) {
                s += fv[i];
            }
        }
        return s * inv_n;
    };

    const double start = pairing();
    double integral    = 0.0;
    double t           = 0.0;
    double d           = drift();
    for (const Event& e : traj.events) {
        integral += d * (e.time - t);
        t = e.time;
        state[e.vertex] = static_cast<std::uint8_t>(static_cast<int>(e.kind) + 1);
        if (e.kind == Transition::EI || e.kind == Transition::IR) {
            const double sign = e.kind == Transition::EI ? 1.0 : -1.0;
            for (std::size_t i = 0; i < N; ++i) {
                pressure[i] += sign * lambda(i, e.vertex) * inv_n;
            }
        }
        d = drift();
    }
    integral += d * (traj.horizon - t);
    return pairing() - start - integral;
}

double hitting_time_empirical(const Trajectory& traj, const TorusFunction& f1, const TorusFunction& f2,
                              const TorusFunction& f3, double c)
{
    const std::size_t N = traj.size();
    const std::vector<double> g[3] = {sample_at_vertices(f1, N), sample_at_vertices(f2, N), sample_at_vertices(f3, N)};
    double v = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const int s = traj.initial.states[i];
        if (s < 3) {
            v += g[s][i];
        }
    }
    const double target = c * static_cast<double>(N);
    if (v >= target) {
        return 0.0;
    }
    for (const Event& e : traj.events) {
        const std::size_t a = static_cast<std::size_t>(e.kind);
        v -= g[a][e.vertex];
        if (a < 2) {
            v += g[a + 1][e.vertex];
        }
        if (v >= target) {
            return e.time;
        }
    }
    return std::numeric_limits<double>::infinity();
}

} // namespace seir
