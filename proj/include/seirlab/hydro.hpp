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

#ifndef SEIRLAB_HYDRO_HPP
#define SEIRLAB_HYDRO_HPP

#include "seirlab/control_path.hpp"
#include "seirlab/density_path.hpp"
#include "seirlab/model.hpp"

#include <array>
#include <string>
#include <vector>

namespace seir
{

/// a(u) = int lambda(u, v) w(v) dv on the model grid; a single inner product under product form.
class InfectionOperator
{
public:
    explicit InfectionOperator(const RateModel& model);

    std::size_t grid_size() const
    {
        return m_M;
    }

    void apply(const double* w, double* out) const;
    std::vector<double> apply(const std::vector<double>& w) const;

    /// Kernel sample lambda(u_m, v_n).
    double kernel(std::size_t m, std::size_t n) const
    {
        return m_product ? m_l1[m] * m_l2[n] : m_kernel[m * m_M + n];
    }

private:
    std::size_t m_M;
    bool m_product;
    std::vector<double> m_l1, m_l2, m_kernel;
};

enum class Integrator
{
    RungeKutta4,
    ImplicitTrapezoid
};

struct SolverSettings {
    std::size_t steps   = 0;    ///< 0 selects the default (2000, refined to the control grid for tilted solves)
    double tolerance    = 1e-6; ///< bound on the step-halving error estimate
    bool verify         = true;
    Integrator integrator = Integrator::RungeKutta4;
};

/// Limit densities of (S, E, I) from the initial law; stores exact node derivatives.
DensityPath solve_hydrodynamic(const RateModel& model, const InitialLaw& law, double T, const SolverSettings& settings = {});
DensityPath solve_hydrodynamic(const ModelBundle& bundle, double T, const SolverSettings& settings = {});

/// Same system from arbitrary initial grid densities (no positivity requirement beyond finiteness).
DensityPath solve_hydrodynamic(const RateModel& model, const std::array<TorusFunction, 3>& init, double T,
                               const SolverSettings& settings = {});

struct TiltedDiagnostics {
    double integral_residual = 0.0; ///< sup over nodes of the integral-equation residual
    double min_chain_margin  = 0.0;
};

/**
 * Tilted limit system, integrated in the partial sums (s1, s2, s3) = (w1, w1+w2, w1+w2+w3):
 *   s1' = -w1 a(w3) e^{-F+G},  s2' = -psi w2 e^{-G+H},  s3' = -phi w3 e^{-H}.
 */
DensityPath solve_tilted(const RateModel& model, const std::array<TorusFunction, 3>& init, const ControlPath& control,
                         double T, const SolverSettings& settings = {}, TiltedDiagnostics* diagnostics = nullptr);

struct AdmissibilityReport {
    bool admissible          = false;
    int violated_condition   = 0; ///< 1: non-finite values, 2: strict chain, 3: partial sums not strictly decreasing
    double chain_margin      = 0.0;
    double derivative_margin = 0.0; ///< min over nodes of -d/dt of the partial sums
    std::size_t node         = 0;
    std::string detail;
};

AdmissibilityReport is_admissible_D0(const DensityPath& path);

struct HittingTime {
    double tau        = 0.0;
    double derivative = 0.0; ///< d/dt sum_k <w_k, f_k> at tau
};

/// First crossing of sum_k <w_{t,k}, f_k> through c.
HittingTime hitting_time_limit(const DensityPath& path, const TorusFunction& f1, const TorusFunction& f2,
                               const TorusFunction& f3, double c);

/// Partial-sum time derivatives by finite differences, layout [j][k][m] with k indexing s1, s2, s3.
std::vector<double> partial_sum_derivatives(const DensityPath& path);

} // namespace seir

#endif // SEIRLAB_HYDRO_HPP
