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

#include "seirlab/torus.hpp"
#include "seirlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace seir
{

TorusFunction::TorusFunction(std::vector<double> grid_values)
    : m_values(std::move(grid_values))
{
    if (m_values.empty()) {
        throw Error(ErrorCode::InvalidArgument, "torus function needs at least one sample");
    }
    for (double v : m_values) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::InvalidArgument, "torus function samples must be finite");
        }
    }
}

TorusFunction TorusFunction::constant(double value, std::size_t M)
{
    return TorusFunction(std::vector<double>(M, value));
}

double wrap_unit(double u)
{
    double x = u - std::floor(u);
    // floor can round u - floor(u) up to exactly 1 for tiny negative u
    return x >= 1.0 ? 0.0 : x;
}

double TorusFunction::operator()(double u) const
{
    const std::size_t M = m_values.size();
    const double s      = wrap_unit(u) * static_cast<double>(M);
    std::size_t m       = static_cast<std::size_t>(s);
    if (m >= M) {
        m = M - 1;
    }
    const double frac = s - static_cast<double>(m);
    const double a    = m_values[m];
    if (frac == 0.0) {
        return a;
    }
    const double b = m_values[(m + 1) % M];
    return a + frac * (b - a);
}

double TorusFunction::integral() const
{
    return std::accumulate(m_values.begin(), m_values.end(), 0.0) / static_cast<double>(m_values.size());
}

double TorusFunction::min() const
{
    return *std::min_element(m_values.begin(), m_values.end());
}

double TorusFunction::max() const
{
    return *std::max_element(m_values.begin(), m_values.end());
}

double eval_periodic(const TorusFunction& f, double u)
{
    return f(u);
}

TorusKernel::TorusKernel(std::size_t M, std::vector<double> values)
    : m_M(M)
    , m_values(std::move(values))
{
    if (M == 0 || m_values.size() != M * M) {
        throw Error(ErrorCode::InvalidArgument, "kernel needs M*M samples");
    }
    for (double v : m_values) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::InvalidArgument, "kernel samples must be finite");
        }
    }
}

TorusKernel TorusKernel::outer(const TorusFunction& f, const TorusFunction& g)
{
    if (f.size() != g.size()) {
        throw Error(ErrorCode::GridMismatch, "outer product of functions on different grids");
    }
    const std::size_t M = f.size();
    std::vector<double> values(M * M);
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t n = 0; n < M; ++n) {
            values[m * M + n] = f[m] * g[n];
        }
    }
    return TorusKernel(M, std::move(values));
}

double TorusKernel::operator()(double u, double v) const
{
    const double M = static_cast<double>(m_M);
    const double s = wrap_unit(u) * M;
    const double r = wrap_unit(v) * M;
    std::size_t m  = std::min(static_cast<std::size_t>(s), m_M - 1);
    std::size_t n  = std::min(static_cast<std::size_t>(r), m_M - 1);
    const double a = s - static_cast<double>(m);
    const double b = r - static_cast<double>(n);
    const std::size_t m1 = (m + 1) % m_M;
    const std::size_t n1 = (n + 1) % m_M;
    return (1 - a) * (1 - b) * at(m, n) + a * (1 - b) * at(m1, n) + (1 - a) * b * at(m, n1) + a * b * at(m1, n1);
}

namespace
{

struct WeightedPoints {
    std::vector<double> x;
    std::vector<double> w;
    std::size_t grid = 0; // nonzero for grid densities
};

WeightedPoints expand(const Measure& nu)
{
    WeightedPoints p;
    if (const auto* d = std::get_if<GridDensity>(&nu)) {
        const std::size_t M = d->density.size();
        p.grid              = M;
        p.x.resize(M);
        p.w.resize(M);
        for (std::size_t m = 0; m < M; ++m) {
            p.x[m] = static_cast<double>(m) / static_cast<double>(M);
            p.w[m] = d->density[m] / static_cast<double>(M);
        }
    }
    else {
        const auto& a = std::get<AtomicMeasure>(nu);
        if (a.positions.size() != a.masses.size()) {
            throw Error(ErrorCode::InvalidArgument, "atom positions and masses differ in length");
        }
        p.x = a.positions;
        p.w = a.masses;
    }
    return p;
}

void check_grids(const WeightedPoints& a, const WeightedPoints& b)
{
    if (a.grid != 0 && b.grid != 0 && a.grid != b.grid) {
        throw Error(ErrorCode::GridMismatch,
                    "densities on grids " + std::to_string(a.grid) + " and " + std::to_string(b.grid));
    }
}

} // namespace

double pair(const Measure& nu, const TorusFunction& f)
{
    const WeightedPoints p = expand(nu);
    double s               = 0.0;
    for (std::size_t i = 0; i < p.x.size(); ++i) {
        s += p.w[i] * f(p.x[i]);
    }
    return s;
}

double pair_product(const Measure& nu1, const Measure& nu2, const TorusKernel& h)
{
    const WeightedPoints a = expand(nu1);
    const WeightedPoints b = expand(nu2);
    check_grids(a, b);
    if ((a.grid != 0 && a.grid != h.size()) || (b.grid != 0 && b.grid != h.size())) {
        throw Error(ErrorCode::GridMismatch, "kernel grid differs from density grid");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.x.size(); ++i) {
        if (a.w[i] == 0.0) {
            continue;
        }
        double row = 0.0;
        for (std::size_t j = 0; j < b.x.size(); ++j) {
            const double hv = (a.grid != 0 && b.grid != 0) ? h.at(i, j) : h(a.x[i], b.x[j]);
            row += hv * b.w[j];
        }
        s += a.w[i] * row;
    }
    return s;
}

double pair_product(const Measure& nu1, const Measure& nu2, const TorusFunction& f, const TorusFunction& g)
{
    check_grids(expand(nu1), expand(nu2));
    return pair(nu1, f) * pair(nu2, g);
}

double pair_product(const Measure& nu1, const Measure& nu2, const std::function<double(double, double)>& h)
{
    const WeightedPoints a = expand(nu1);
    const WeightedPoints b = expand(nu2);
    check_grids(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.x.size(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < b.x.size(); ++j) {
            row += h(a.x[i], b.x[j]) * b.w[j];
        }
        s += a.w[i] * row;
    }
    return s;
}

GridDensity bin_to_grid(const AtomicMeasure& atoms, std::size_t M)
{
    std::vector<double> d(M, 0.0);
    for (std::size_t i = 0; i < atoms.positions.size(); ++i) {
        const std::size_t m = static_cast<std::size_t>(std::llround(wrap_unit(atoms.positions[i]) * M)) % M;
        d[m] += atoms.masses[i] * static_cast<double>(M);
    }
    return GridDensity{TorusFunction(std::move(d))};
}

} // namespace seir
