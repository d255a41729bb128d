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

#include "seirlab/control_path.hpp"
#include "seirlab/error.hpp"

#include <algorithm>
#include <cmath>

namespace seir
{

ControlPath::ControlPath(double T, std::size_t J, std::size_t M)
    : m_T(T)
    , m_J(J)
    , m_M(M)
    , m_data(3 * (J + 1) * M, 0.0)
{
    if (!(T > 0.0) || J == 0 || M == 0) {
        throw Error(ErrorCode::InvalidArgument, "control path needs T > 0, J >= 1, M >= 1");
    }
}

TorusFunction ControlPath::function(int c, std::size_t j) const
{
    const double* p = slice(c, j);
    return TorusFunction(std::vector<double>(p, p + m_M));
}

double ControlPath::at_time(int c, double t, std::size_t m) const
{
    const double s = std::clamp(t / dt(), 0.0, static_cast<double>(m_J));
    std::size_t j  = std::min(static_cast<std::size_t>(s), m_J - 1);
    const double a = s - static_cast<double>(j);
    return (1 - a) * at(c, j, m) + a * at(c, j + 1, m);
}

double ControlPath::eval(int c, double t, double u) const
{
    const double s = wrap_unit(u) * static_cast<double>(m_M);
    std::size_t m  = std::min(static_cast<std::size_t>(s), m_M - 1);
    const double b = s - static_cast<double>(m);
    return (1 - b) * at_time(c, t, m) + b * at_time(c, t, (m + 1) % m_M);
}

double ControlPath::time_derivative(int c, std::size_t j, std::size_t m) const
{
    const double h = dt();
    if (m_J == 1) {
        return (at(c, 1, m) - at(c, 0, m)) / h;
    }
    if (j == 0) {
        return (-3 * at(c, 0, m) + 4 * at(c, 1, m) - at(c, 2, m)) / (2 * h);
    }
    if (j == m_J) {
        return (3 * at(c, m_J, m) - 4 * at(c, m_J - 1, m) + at(c, m_J - 2, m)) / (2 * h);
    }
    return (at(c, j + 1, m) - at(c, j - 1, m)) / (2 * h);
}

bool ControlPath::is_zero() const
{
    return std::all_of(m_data.begin(), m_data.end(), [](double v) { return v == 0.0; });
}

double ControlPath::sup_norm() const
{
    double s = 0.0;
    for (double v : m_data) {
        s = std::max(s, std::fabs(v));
    }
    return s;
}

ControlPath& ControlPath::operator*=(double s)
{
    for (double& v : m_data) {
        v *= s;
    }
    return *this;
}

ControlPath& ControlPath::operator+=(const ControlPath& other)
{
    if (other.m_J != m_J || other.m_M != m_M || other.m_T != m_T) {
        throw Error(ErrorCode::GridMismatch, "adding control paths on different grids");
    }
    for (std::size_t i = 0; i < m_data.size(); ++i) {
        m_data[i] += other.m_data[i];
    }
    return *this;
}

ControlPath operator*(double s, ControlPath c)
{
    c *= s;
    return c;
}

ControlPath operator+(ControlPath a, const ControlPath& b)
{
    a += b;
    return a;
}

} // namespace seir
