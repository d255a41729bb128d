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

#ifndef SEIRLAB_ORACLE_HPP
#define SEIRLAB_ORACLE_HPP

#include "seirlab/fields.hpp"
#include "seirlab/model.hpp"
#include "seirlab/trajectory.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace seir
{

inline constexpr std::size_t oracle_max_vertices = 8;

/// State x packs vertex i's state into base-4 digit i.
std::size_t encode(const Configuration& c);
Configuration decode(std::size_t x, std::size_t N);

/// Generator of the full chain in compressed rows; only off-diagonal rates are stored.
struct GeneratorMatrix {
    std::size_t N   = 0;
    std::size_t dim = 0;
    std::vector<std::size_t> row_start;
    std::vector<std::uint32_t> target;
    std::vector<double> rate;
    std::vector<double> diagonal;

    std::size_t row_nonzeros(std::size_t x) const
    {
        return row_start[x + 1] - row_start[x];
    }
};

GeneratorMatrix build_generator(const RateModel& model, std::size_t N);

struct Distribution {
    std::size_t N = 0;
    std::vector<double> p;

    double total() const;
};

Distribution point_mass(const Configuration& c);

/// Law of independent vertices with position-dependent probabilities.
Distribution product_law(const InitialLaw& law, std::size_t N);

/// p0 exp(Qt) by uniformization; the Poisson series is cut once its tail drops below `tail`.
Distribution evolve(const GeneratorMatrix& Q, const Distribution& p0, double t, double tail = 1e-12);

/// Distributions at sorted times, each obtained from the previous one.
std::vector<Distribution> evolve_path(const GeneratorMatrix& Q, const Distribution& p0, const std::vector<double>& times,
                                      double tail = 1e-12);

/// Per-vertex marginals and pairwise joint probabilities at each time.
struct MomentReport {
    std::size_t N = 0;
    std::vector<double> times;
    VertexMeans means;
    std::vector<double> joint; ///< P(state_i = k1, state_j = k2), layout [time][i][j][k1][k2]

    double mean(std::size_t ti, std::size_t i, int k) const
    {
        return means.at(ti, i, k);
    }
    double second_moment(std::size_t ti, std::size_t i, std::size_t j, int k1, int k2) const
    {
        return joint[(((ti * N + i) * N + j) * 4 + static_cast<std::size_t>(k1)) * 4 + static_cast<std::size_t>(k2)];
    }
    double covariance(std::size_t ti, std::size_t i, std::size_t j, int k1, int k2) const
    {
        return second_moment(ti, i, j, k1, k2) - mean(ti, i, k1) * mean(ti, j, k2);
    }
    /// Largest |cov| over i != j and all state pairs.
    double max_cross_covariance(std::size_t ti) const;
};

MomentReport exact_moments(const std::vector<Distribution>& path, const std::vector<double>& times);

/// CSV `time,i,j,k1,k2,value`; rows with i = j and k1 = k2 carry the marginal probabilities.
void write_moments(const MomentReport& report, const std::filesystem::path& csv);

} // namespace seir

#endif // SEIRLAB_ORACLE_HPP
