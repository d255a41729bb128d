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

#ifndef SEIRLAB_CONTROL_PATH_HPP
#define SEIRLAB_CONTROL_PATH_HPP

#include "seirlab/torus.hpp"

#include <cstddef>
#include <vector>

namespace seir
{

/**
 * Three time-space functions (F, G, H) sampled on t_j = j*T/J, j = 0..J, and the
 * spatial grid u_m = m/M. Linear interpolation in both variables.
 * Component index c: 0 = F, 1 = G, 2 = H.
 */
class ControlPath
{
public:
    ControlPath() = default;
    ControlPath(double T, std::size_t J, std::size_t M);

    template <class FF, class FG, class FH>
    static ControlPath sample(FF&& f, FG&& g, FH&& h, double T, std::size_t J, std::size_t M)
    {
        ControlPath c(T, J, M);
        for (std::size_t j = 0; j <= J; ++j) {
            const double t = c.time(j);
            for (std::size_t m = 0; m < M; ++m) {
                const double u = static_cast<double>(m) / M;
                c.at(0, j, m)  = f(t, u);
                c.at(1, j, m)  = g(t, u);
                c.at(2, j, m)  = h(t, u);
            }
        }
        return c;
    }

    double horizon() const
    {
        return m_T;
    }
    std::size_t steps() const
    {
        return m_J;
    }
    std::size_t grid_size() const
    {
        return m_M;
    }
    double dt() const
    {
        return m_T / static_cast<double>(m_J);
    }
    double time(std::size_t j) const
    {
        return m_T * static_cast<double>(j) / static_cast<double>(m_J);
    }

    double at(int c, std::size_t j, std::size_t m) const
    {
        return m_data[(static_cast<std::size_t>(c) * (m_J + 1) + j) * m_M + m];
    }
    double& at(int c, std::size_t j, std::size_t m)
    {
        return m_data[(static_cast<std::size_t>(c) * (m_J + 1) + j) * m_M + m];
    }
    const double* slice(int c, std::size_t j) const
    {
        return &m_data[(static_cast<std::size_t>(c) * (m_J + 1) + j) * m_M];
    }
    double* slice(int c, std::size_t j)
    {
        return &m_data[(static_cast<std::size_t>(c) * (m_J + 1) + j) * m_M];
    }

    TorusFunction function(int c, std::size_t j) const;

    /// Value at the spatial node m and arbitrary time t (linear in time).
    double at_time(int c, double t, std::size_t m) const;

    /// Value at arbitrary (t, u).
    double eval(int c, double t, double u) const;

    /// Time derivative at node (j, m) by second-order finite differences.
    double time_derivative(int c, std::size_t j, std::size_t m) const;

    bool is_zero() const;
    double sup_norm() const;

    ControlPath& operator*=(double s);
    ControlPath& operator+=(const ControlPath& other);

    const std::vector<double>& data() const
    {
        return m_data;
    }

    friend bool operator==(const ControlPath&, const ControlPath&) = default;

private:
    double m_T        = 0.0;
    std::size_t m_J   = 0;
    std::size_t m_M   = 0;
    std::vector<double> m_data;
};

ControlPath operator*(double s, ControlPath c);
ControlPath operator+(ControlPath a, const ControlPath& b);

} // namespace seir

#endif // SEIRLAB_CONTROL_PATH_HPP
