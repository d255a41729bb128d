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

#include "seirlab/oracle.hpp"
#include "seirlab/error.hpp"
#include "seirlab/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

namespace seir
{

std::size_t encode(const Configuration& c)
{
    std::size_t x = 0;
    for (std::size_t i = c.size(); i-- > 0;) {
        x = 4 * x + c.states[i];
    }
    return x;
}

Configuration decode(std::size_t x, std::size_t N)
{
    Configuration c;
    c.states.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        c.states[i] = static_cast<std::uint8_t>(x % 4);
        x /= 4;
    }
    return c;
}

GeneratorMatrix build_generator(const RateModel& model, std::size_t N)
{
    if (N > oracle_max_vertices) {
        throw Error(ErrorCode::TooLarge, "exact generator limited to N <= 8, got " + std::to_string(N));
    }
    if (N == 0) {
        throw Error(ErrorCode::InvalidArgument, "population must be positive");
    }
    GeneratorMatrix Q;
    Q.N   = N;
    Q.dim = std::size_t{1} << (2 * N);
    Q.row_start.reserve(Q.dim + 1);
    Q.diagonal.resize(Q.dim);
    std::vector<double> psi(N), phi(N), lambda(N * N);
    for (std::size_t i = 0; i < N; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(N);
        psi[i]         = model.psi(u);
        phi[i]         = model.phi(u);
        for (std::size_t j = 0; j < N; ++j) {
            lambda[i * N + j] = model.lambda(u, static_cast<double>(j) / static_cast<double>(N));
        }
    }
    std::vector<std::uint8_t> s(N);
    for (std::size_t x = 0; x < Q.dim; ++x) {
        Q.row_start.push_back(Q.rate.size());
        std::size_t y = x;
        for (std::size_t i = 0; i < N; ++i) {
            s[i] = static_cast<std::uint8_t>(y % 4);
            y /= 4;
        }
        double out        = 0.0;
        std::size_t place = 1;
        for (std::size_t i = 0; i < N; ++i, place *= 4) {
            double r = 0.0;
            if (s[i] == 1) {
                r = psi[i];
            }
            else if (s[i] == 2) {
                r = phi[i];
            }
            else if (s[i] == 0) {
                for (std::size_t j = 0; j < N; ++j) {
                    if (s[j] == 2) {
                        r += lambda[i * N + j];
                    }
                }
                r /= static_cast<double>(N);
            }
            if (r > 0.0) {
                Q.target.push_back(static_cast<std::uint32_t>(x + place));
                Q.rate.push_back(r);
                out += r;
            }
        }
        Q.diagonal[x] = -out;
    }
    Q.row_start.push_back(Q.rate.size());
    return Q;
}

double Distribution::total() const
{
    return std::accumulate(p.begin(), p.end(), 0.0);
}

Distribution point_mass(const Configuration& c)
{
    if (c.size() > oracle_max_vertices) {
        throw Error(ErrorCode::TooLarge, "exact distributions limited to N <= 8");
    }
    Distribution d;
    d.N = c.size();
    d.p.assign(std::size_t{1} << (2 * d.N), 0.0);
    d.p[encode(c)] = 1.0;
    return d;
}

Distribution product_law(const InitialLaw& law, std::size_t N)
{
    if (N > oracle_max_vertices) {
        throw Error(ErrorCode::TooLarge, "exact distributions limited to N <= 8");
    }
    std::vector<std::array<double, 4>> marg(N);
    for (std::size_t i = 0; i < N; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(N);
        marg[i]        = {law.rho0(u), law.rho1(u), law.rho2(u), 0.0};
        marg[i][3]     = 1.0 - marg[i][0] - marg[i][1] - marg[i][2];
    }
    Distribution d;
    d.N = N;
    d.p.resize(std::size_t{1} << (2 * N));
    for (std::size_t x = 0; x < d.p.size(); ++x) {
        double q      = 1.0;
        std::size_t y = x;
        for (std::size_t i = 0; i < N; ++i) {
            q *= marg[i][y % 4];
            y /= 4;
        }
        d.p[x] = q;
    }
    return d;
}

namespace
{

constexpr double max_chunk_intensity = 20.0;

void step(const GeneratorMatrix& Q, double inv_lambda, const std::vector<double>& v, std::vector<double>& out)
{
    for (std::size_t x = 0; x < Q.dim; ++x) {
        out[x] = v[x] * (1.0 + Q.diagonal[x] * inv_lambda);
    }
    for (std::size_t x = 0; x < Q.dim; ++x) {
        const double vx = v[x];
        if (vx == 0.0) {
            continue;
        }
        for (std::size_t n = Q.row_start[x]; n < Q.row_start[x + 1]; ++n) {
            out[Q.target[n]] += vx * Q.rate[n] * inv_lambda;
        }
    }
}

} // namespace

Distribution evolve(const GeneratorMatrix& Q, const Distribution& p0, double t, double tail)
{
    if (!(t >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "evolution time must be nonnegative");
    }
    if (p0.p.size() != Q.dim) {
        throw Error(ErrorCode::InvalidArgument, "distribution and generator sizes differ");
    }
    double Lambda = 0.0;
    for (double d : Q.diagonal) {
        Lambda = std::max(Lambda, -d);
    }
    if (t == 0.0 || Lambda == 0.0) {
        return p0;
    }
    const double inv_lambda = 1.0 / Lambda;
    const std::size_t chunks = static_cast<std::size_t>(std::ceil(Lambda * t / max_chunk_intensity));
    const double tau         = t / static_cast<double>(chunks);
    const double a           = Lambda * tau;

    std::vector<double> current = p0.p, v(Q.dim), next(Q.dim), acc(Q.dim);
    for (std::size_t c = 0; c < chunks; ++c) {
        v             = current;
        double weight = std::exp(-a);
        double mass   = weight;
        for (std::size_t x = 0; x < Q.dim; ++x) {
            acc[x] = weight * v[x];
        }
        for (std::size_t k = 1; 1.0 - mass > tail; ++k) {
            step(Q, inv_lambda, v, next);
            std::swap(v, next);
            weight *= a / static_cast<double>(k);
            mass += weight;
            for (std::size_t x = 0; x < Q.dim; ++x) {
                acc[x] += weight * v[x];
            }
            if (k > 10000) {
                break;
            }
        }
        current = acc;
    }
    return Distribution{p0.N, std::move(current)};
}

std::vector<Distribution> evolve_path(const GeneratorMatrix& Q, const Distribution& p0, const std::vector<double>& times,
                                      double tail)
{
    std::vector<Distribution> out;
    Distribution current = p0;
    double t             = 0.0;
    for (double s : times) {
        if (s < t) {
            throw Error(ErrorCode::InvalidArgument, "times must be sorted and nonnegative");
        }
        current = evolve(Q, current, s - t, tail);
        t       = s;
        out.push_back(current);
    }
    return out;
}

double MomentReport::max_cross_covariance(std::size_t ti) const
{
    double best = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
            if (i == j) {
                continue;
            }
            for (int k1 = 0; k1 < 4; ++k1) {
                for (int k2 = 0; k2 < 4; ++k2) {
                    best = std::max(best, std::fabs(covariance(ti, i, j, k1, k2)));
                }
            }
        }
    }
    return best;
}

MomentReport exact_moments(const std::vector<Distribution>& path, const std::vector<double>& times)
{
    if (path.size() != times.size() || path.empty()) {
        throw Error(ErrorCode::InvalidArgument, "one distribution per time is required");
    }
    const std::size_t N = path.front().N;
    MomentReport r;
    r.N           = N;
    r.times       = times;
    r.means.N     = N;
    r.means.times = times;
    r.means.values.assign(times.size() * N * 4, 0.0);
    r.joint.assign(times.size() * N * N * 16, 0.0);
    std::vector<std::uint8_t> s(N);
    for (std::size_t ti = 0; ti < path.size(); ++ti) {
        const auto& p = path[ti].p;
        for (std::size_t x = 0; x < p.size(); ++x) {
            const double q = p[x];
            if (q == 0.0) {
                continue;
            }
            std::size_t y = x;
            for (std::size_t i = 0; i < N; ++i) {
                s[i] = static_cast<std::uint8_t>(y % 4);
                y /= 4;
            }
            for (std::size_t i = 0; i < N; ++i) {
                r.means.values[(ti * N + i) * 4 + s[i]] += q;
                for (std::size_t j = 0; j < N; ++j) {
                    r.joint[(((ti * N + i) * N + j) * 4 + s[i]) * 4 + s[j]] += q;
                }
            }
        }
    }
    return r;
}

void write_moments(const MomentReport& report, const std::filesystem::path& csv)
{
    std::ostringstream out;
    out << "time,i,j,k1,k2,value\n";
    for (std::size_t ti = 0; ti < report.times.size(); ++ti) {
        for (std::size_t i = 0; i < report.N; ++i) {
            for (std::size_t j = 0; j < report.N; ++j) {
                for (int k1 = 0; k1 < 4; ++k1) {
                    for (int k2 = 0; k2 < 4; ++k2) {
                        if (i == j && k1 != k2) {
                            continue;
                        }
                        out << format_number(report.times[ti]) << ',' << i << ',' << j << ',' << k1 << ',' << k2 << ','
                            << format_number(report.second_moment(ti, i, j, k1, k2)) << '\n';
                    }
                }
            }
        }
    }
    write_file_atomic(csv, out.str());
}

} // namespace seir
