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

#ifndef SEIRLAB_LDP_HPP
#define SEIRLAB_LDP_HPP

#include "seirlab/control_path.hpp"
#include "seirlab/density_path.hpp"
#include "seirlab/model.hpp"
#include "seirlab/trajectory.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace seir
{

/// Guard for every logarithm in this module; arguments at or below it are errors, never clamped.
inline constexpr double log_guard = 1e-12;

struct LDPReport {
    double l1 = 0.0;
    double B1 = 0.0, B2 = 0.0, B3 = 0.0;
    double I1 = 0.0; ///< l1 - B1 - B2 - B3

    /// Per-node integrands of the three exponential terms (empty for empirical paths).
    std::vector<double> times, trace_B1, trace_B2, trace_B3;
};

/**
 * Dynamic functional of a density path against a control: endpoint pairings minus the
 * pairing with the control's time derivative, minus the three exponential terms.
 * Time integrals use the trapezoid rule on the path grid.
 */
LDPReport eval_I1(const RateModel& model, const DensityPath& W, const ControlPath& control);

/// Same functional on the empirical path of a trajectory; jumps and sojourn integrals are handled exactly.
LDPReport eval_I1(const RateModel& model, const Trajectory& traj, const ControlPath& control);

/// Initial-state functional: sum_k <pi_k, f_k> - int log(1 + sum_k rho_k (e^{f_k} - 1)).
double eval_I2(const std::array<TorusFunction, 3>& pi0, const std::array<TorusFunction, 3>& f, const InitialLaw& law);

/// Closed-form relative entropy of initial densities against the law.
double I_ini_closed(const std::array<TorusFunction, 3>& w0, const InitialLaw& law);

/// Maximizer of eval_I2 for given initial densities.
std::array<TorusFunction, 3> initial_optimizer(const std::array<TorusFunction, 3>& w0, const InitialLaw& law);

struct ControlDiagnostics {
    double chain_margin      = 0.0;
    double derivative_margin = 0.0;
    double fd_error          = 0.0; ///< max |second-order minus fourth-order difference| of the partial sums
};

/// Controls that make the tilted limit reproduce W; W must be smooth and strictly monotone.
ControlPath optimal_controls(const RateModel& model, const DensityPath& W, ControlDiagnostics* diagnostics = nullptr);

/// eval_I1 at the optimal controls.
double I_dyn_closed(const RateModel& model, const DensityPath& W, ControlDiagnostics* diagnostics = nullptr);

struct TiltingEstimate {
    double mean      = 0.0;
    double std_error = 0.0;
    double ci_low = 0.0, ci_high = 0.0; ///< 95% normal interval
    std::size_t replicas = 0;
    bool variance_blowup = false;       ///< CI half-width above 0.5
    std::vector<double> samples;
};

/// Monte-Carlo mean of exp(N * I1(empirical path, control)) over untilted runs; replica r uses stream r of `seed`.
TiltingEstimate tilting_identity_estimate(const RateModel& model, const InitialLaw& law, std::size_t N, double T,
                                          const ControlPath& control, std::size_t replicas, std::uint64_t seed,
                                          std::size_t workers = 1);

/// JSON {I1, l1, B1, B2, B3} and CSV `t,integrand_B1,integrand_B2,integrand_B3`.
void write_ldp_report(const LDPReport& report, const std::filesystem::path& json, const std::filesystem::path& csv);

} // namespace seir

#endif // SEIRLAB_LDP_HPP
