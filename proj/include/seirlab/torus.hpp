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

#ifndef SEIRLAB_TORUS_HPP
#define SEIRLAB_TORUS_HPP

#include <cstddef>
#include <functional>
#include <variant>
#include <vector>

namespace seir
{

/// Uniform samples u_m = m/M of a function on [0,1) with linear periodic interpolation.
class TorusFunction
{
public:
    TorusFunction() = default;
    explicit TorusFunction(std::vector<double> grid_values);

    static TorusFunction constant(double value, std::size_t M);

    template <class F>
    static TorusFunction sample(F&& f, std::size_t M)
    {
        std::vector<double> values(M);
        for (std::size_t m = 0; m < M; ++m) {
            values[m] = f(static_cast<double>(m) / static_cast<double>(M));
        }
        return TorusFunction(std::move(values));
    }

    std::size_t size() const
    {
        return m_values.size();
    }
    bool empty() const
    {
        return m_values.empty();
    }
    const std::vector<double>& values() const
    {
        return m_values;
    }
    double operator[](std::size_t m) const
    {
        return m_values[m];
    }

    double operator()(double u) const;

    /// Periodic trapezoid rule, i.e. the grid mean.
    double integral() const;

    double min() const;
    double max() const;

    friend bool operator==(const TorusFunction&, const TorusFunction&) = default;

private:
    std::vector<double> m_values;
};

double eval_periodic(const TorusFunction& f, double u);

/// Wraps u into [0,1).
double wrap_unit(double u);

/// M x M samples h(u_m, v_n), row index m, with bilinear periodic interpolation.
class TorusKernel
{
public:
    TorusKernel() = default;
    TorusKernel(std::size_t M, std::vector<double> values);

    template <class F>
    static TorusKernel sample(F&& h, std::size_t M)
    {
        std::vector<double> values(M * M);
        for (std::size_t m = 0; m < M; ++m) {
            for (std::size_t n = 0; n < M; ++n) {
                values[m * M + n] = h(static_cast<double>(m) / M, static_cast<double>(n) / M);
            }
        }
        return TorusKernel(M, std::move(values));
    }

    static TorusKernel outer(const TorusFunction& f, const TorusFunction& g);

    std::size_t size() const
    {
        return m_M;
    }
    double at(std::size_t m, std::size_t n) const
    {
        return m_values[m * m_M + n];
    }
    double& at(std::size_t m, std::size_t n)
    {
        return m_values[m * m_M + n];
    }
    const std::vector<double>& values() const
    {
        return m_values;
    }

    double operator()(double u, double v) const;

    friend bool operator==(const TorusKernel&, const TorusKernel&) = default;

private:
    std::size_t m_M = 0;
    std::vector<double> m_values;
};

/// Absolutely continuous measure with a sampled density.
struct GridDensity {
    TorusFunction density;
};

/// Finite sum of point masses.
struct AtomicMeasure {
    std::vector<double> positions;
    std::vector<double> masses;
};

using Measure = std::variant<GridDensity, AtomicMeasure>;

/// nu(f) for a single measure.
double pair(const Measure& nu, const TorusFunction& f);

double pair_product(const Measure& nu1, const Measure& nu2, const TorusKernel& h);
/// Separable kernel h(u,v) = f(u) g(v).
double pair_product(const Measure& nu1, const Measure& nu2, const TorusFunction& f, const TorusFunction& g);
double pair_product(const Measure& nu1, const Measure& nu2, const std::function<double(double, double)>& h);

/// Mass of an atomic measure deposited onto the nearest node of an M-grid, returned as a density.
GridDensity bin_to_grid(const AtomicMeasure& atoms, std::size_t M);

} // namespace seir

#endif // SEIRLAB_TORUS_HPP
