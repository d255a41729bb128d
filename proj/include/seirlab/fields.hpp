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

#ifndef SEIRLAB_FIELDS_HPP
#define SEIRLAB_FIELDS_HPP

#include "seirlab/density_path.hpp"
#include "seirlab/model.hpp"
#include "seirlab/torus.hpp"
#include "seirlab/trajectory.hpp"

#include <filesystem>
#include <vector>

namespace seir
{

/**
 * Pairings mu_{t,k}(f) = (1/N) sum_i 1{state_i(t) = k} f(i/N) for k = 0 (S), 1 (E), 2 (I),
 * one value per (sample time, k, test function).
 */
struct EmpiricalPath {
    std::vector<double> times;
    std::size_t tests = 0;
    std::vector<double> values;

    /// Histogram densities [time][k][m] when requested; each atom goes to its nearest node, an O(1/M) bias.
    std::size_t bins = 0;
    std::vector<double> densities;

    double value(std::size_t ti, int k, std::size_t test) const
    {
        return values[(ti * 3 + static_cast<std::size_t>(k)) * tests + test];
    }
};

EmpiricalPath empirical_pairings(const Trajectory& traj, const std::vector<TorusFunction>& tests,
                                 const std::vector<double>& times, std::size_t bins = 0);

/// CSV `time,k,test_id,value` with k reported as 1, 2, 3.
void write_pairings(const EmpiricalPath& path, const std::filesystem::path& csv);

enum class Centering
{
    ReplicaMean,
    OracleMean,
    HydrodynamicMean
};

/// Per-vertex state probabilities P(state_i(t) = k) on a list of times, layout [time][i][k] with k = 0..3.
struct VertexMeans {
    std::vector<double> times;
    std::size_t N = 0;
    std::vector<double> values;

    double at(std::size_t ti, std::size_t i, int k) const
    {
        return values[(ti * N + i) * 4 + static_cast<std::size_t>(k)];
    }
};

struct CenteringInputs {
    const VertexMeans* oracle      = nullptr;
    const DensityPath* hydrodynamic = nullptr;
};

/**
 * eta_{t,k}(f) = sum_i (1{state_i = k} - m_{t,k}(i)) f(i/N) / gamma(N).
 * Hydrodynamic centering uses the limit densities in place of the exact expectations; the two
 * differ by O(1/gamma(N)) because vertex states are only asymptotically independent.
 */
struct FluctuationPath {
    std::vector<double> times;
    std::size_t tests = 0;
    std::vector<double> values;
    std::vector<double> centers; ///< (1/N) sum_i m_{t,k}(i) f(i/N), same layout as values
    Centering centering = Centering::ReplicaMean;
    bool centering_is_asymptotic = false;

    double value(std::size_t ti, int k, std::size_t test) const
    {
        return values[(ti * 3 + static_cast<std::size_t>(k)) * tests + test];
    }
};

std::vector<FluctuationPath> fluctuation_pairings(const std::vector<Trajectory>& replicas,
                                                  const std::vector<TorusFunction>& tests,
                                                  const std::vector<double>& times, const ScalingSchedule& schedule,
                                                  Centering centering, const CenteringInputs& inputs = {});

/**
 * Martingale residual mu_{T,k}(f) - mu_{0,k}(f) - int_0^T (drift of mu_{s,k}(f)) ds, with the
 * drift integrated exactly between events.
 */
double dynkin_residual(const Trajectory& traj, const RateModel& model, const TorusFunction& f, int k);

/// First event time at which sum_k mu_{t,k}(f_k) >= c; 0 when already met, +infinity when never met.
double hitting_time_empirical(const Trajectory& traj, const TorusFunction& f1, const TorusFunction& f2,
                              const TorusFunction& f3, double c);

} // namespace seir

#endif // SEIRLAB_FIELDS_HPP
