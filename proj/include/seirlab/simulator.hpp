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

#ifndef SEIRLAB_SIMULATOR_HPP
#define SEIRLAB_SIMULATOR_HPP

#include "seirlab/control_path.hpp"
#include "seirlab/model.hpp"
#include "seirlab/rng.hpp"
#include "seirlab/sum_tree.hpp"
#include "seirlab/trajectory.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace seir
{

Configuration sample_initial(const InitialLaw& law, std::size_t N, Rng& rng);
Configuration sample_initial(const InitialLaw& law, std::size_t N, std::uint64_t seed);

/// Initial configuration drawn from arbitrary per-position probabilities of S, E, I.
Configuration sample_initial(const TorusFunction& p0, const TorusFunction& p1, const TorusFunction& p2,
                             std::size_t N, Rng& rng);

struct SimulationStats {
    std::size_t events     = 0;
    std::size_t candidates = 0; ///< proposals drawn by thinning (equals events without a tilt)
    std::size_t audits     = 0;
    std::size_t audit_failures = 0;
    double max_audit_drift     = 0.0; ///< largest relative gap between maintained and recomputed infection aggregates
};

/**
 * Exact event-driven simulation of the N-vertex chain.
 * Product-form models keep the susceptibles in a partial-sum tree weighted by lambda1 and
 * the infected in one weighted by lambda2, so each event costs O(log N). Other kernels keep
 * a per-vertex infection pressure that is refreshed in O(N) whenever the infected set changes.
 * A non-zero tilt is handled by Poisson thinning against a majorant that is constant on each
 * cell of the control time grid.
 */
class Simulator
{
public:
    Simulator(const RateModel& model, std::size_t N);

    std::size_t size() const
    {
        return m_N;
    }

    /// Simulates on [0, T]; T may be infinite for untilted runs, which then stop once no event is possible.
    Trajectory run(const Configuration& init, double T, Rng& rng, const ControlPath* tilt = nullptr);

    const SimulationStats& stats() const
    {
        return m_stats;
    }

    std::size_t audit_interval   = 10000;
    double audit_tolerance       = 1e-9;

private:
    void reset(const Configuration& init);
    void apply(Trajectory& traj, double t, std::size_t i, Transition kind);
    double infection_total() const;
    std::size_t pick_susceptible(Rng& rng) const;
    void infected_changed(std::size_t j, double sign);
    void audit();
    double kernel(std::size_t i, std::size_t j) const;

    void run_plain(Trajectory& traj, double T, Rng& rng);
    void run_tilted(Trajectory& traj, double T, Rng& rng, const ControlPath& tilt);

    const RateModel& m_model;
    std::size_t m_N;
    bool m_product;
    std::vector<double> m_l1, m_l2, m_psi, m_phi;
    std::vector<double> m_kernel_cache; // N*N, only for small generic models
    std::vector<double> m_pressure;     // generic kernels: (1/N) sum over infected of lambda(i, j)
    std::vector<std::uint8_t> m_state;
    std::size_t m_infected = 0;
    SumTree m_s, m_e, m_i, m_a;
    SimulationStats m_stats;
    std::size_t m_since_audit = 0;
};

Trajectory simulate(const RateModel& model, const Configuration& init, double T, std::uint64_t seed,
                    const std::optional<ControlPath>& tilt = std::nullopt);

} // namespace seir

#endif // SEIRLAB_SIMULATOR_HPP
