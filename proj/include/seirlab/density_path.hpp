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

#ifndef SEIRLAB_DENSITY_PATH_HPP
#define SEIRLAB_DENSITY_PATH_HPP

#include "seirlab/torus.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace seir
{

enum class Provenance
{
    Hydrodynamic,
    Tilted,
    Skeleton,
    User
};

const char* to_string(Provenance p);

/**
 * Three grid densities (S, E, I; index k = 0, 1, 2) at each node t_j = j*T/J.
 * Optional stored time derivatives enable cubic Hermite interpolation between nodes.
 */
class DensityPath
{
public:
    DensityPath() = default;
    DensityPath(double T, std::size_t J, std::size_t M, Provenance provenance);

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
    Provenance provenance() const
    {
        return m_provenance;
    }

    double w(std::size_t j, int k, std::size_t m) const
    {
        return m_w[(j * 3 + static_cast<std::size_t>(k)) * m_M + m];
    }
    double& w(std::size_t j, int k, std::size_t m)
    {
        return m_w[(j * 3 + static_cast<std::size_t>(k)) * m_M + m];
    }
    const double* slice(std::size_t j, int k) const
    {
        return &m_w[(j * 3 + static_cast<std::size_t>(k)) * m_M];
    }
    double* slice(std::size_t j, int k)
    {
        return &m_w[(j * 3 + static_cast<std::size_t>(k)) * m_M];
    }

    bool has_derivatives() const
    {
        return !m_dw.empty();
    }
    double dw(std::size_t j, int k, std::size_t m) const
    {
        return m_dw[(j * 3 + static_cast<std::size_t>(k)) * m_M + m];
    }
    double& dw(std::size_t j, int k, std::size_t m)
    {
        return m_dw[(j * 3 + static_cast<std::size_t>(k)) * m_M + m];
    }
    void enable_derivatives()
    {
        m_dw.assign(m_w.size(), 0.0);
    }
    void drop_derivatives()
    {
        m_dw.clear();
    }

    TorusFunction density(std::size_t j, int k) const;

    /// Value at grid node m and arbitrary time (Hermite when derivatives are stored, linear otherwise).
    double at_time(int k, double t, std::size_t m) const;

    /// Value at arbitrary (t, u).
    double eval(int k, double t, double u) const;

    /// Integral of w_k(t_j, .) f over the torus.
    double pairing(std::size_t j, int k, const TorusFunction& f) const;

    const std::vector<double>& data() const
    {
        return m_w;
    }

    std::uint64_t model_hash = 0;
    double error_estimate    = 0.0;

private:
    double m_T        = 0.0;
    std::size_t m_J   = 0;
    std::size_t m_M   = 0;
    Provenance m_provenance = Provenance::User;
    std::vector<double> m_w;
    std::vector<double> m_dw;
};

/// CSV `t,u,w1,w2,w3` and JSON metadata {M, dt, provenance, model_hash}.
void write_density_path(const DensityPath& path, const std::filesystem::path& csv, const std::filesystem::path& json);
DensityPath read_density_path(const std::filesystem::path& csv, const std::filesystem::path& json);

} // namespace seir

#endif // SEIRLAB_DENSITY_PATH_HPP
