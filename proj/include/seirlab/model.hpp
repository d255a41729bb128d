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

#ifndef SEIRLAB_MODEL_HPP
#define SEIRLAB_MODEL_HPP

#include "seirlab/torus.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace seir
{

/// Spatial rate fields. Infection rate is lambda(u, v) from an infected vertex at v to a susceptible at u.
struct RateModel {
    std::optional<TorusFunction> lambda1;
    std::optional<TorusFunction> lambda2;
    std::optional<TorusKernel> kernel;
    TorusFunction psi; ///< E -> I rate
    TorusFunction phi; ///< I -> R rate
    bool product_form = false;

    static RateModel product(TorusFunction lambda1, TorusFunction lambda2, TorusFunction psi, TorusFunction phi);
    static RateModel general(TorusKernel kernel, TorusFunction psi, TorusFunction phi);

    std::size_t grid_size() const
    {
        return psi.size();
    }

    /// Interpolated infection rate at arbitrary positions.
    double lambda(double u, double v) const;

    /// Kernel samples on the model grid (built from the factors under product form).
    TorusKernel kernel_on_grid() const;

    friend bool operator==(const RateModel&, const RateModel&) = default;
};

/// Independent initial states: vertex at u is S, E, I with probabilities rho0, rho1, rho2.
struct InitialLaw {
    TorusFunction rho0, rho1, rho2;

    const TorusFunction& rho(int k) const
    {
        return k == 0 ? rho0 : (k == 1 ? rho1 : rho2);
    }

    friend bool operator==(const InitialLaw&, const InitialLaw&) = default;
};

/// Fluctuation scale gamma(N) = N^a.
struct ScalingSchedule {
    double a = 0.75;

    double gamma(double N) const;

    friend bool operator==(const ScalingSchedule&, const ScalingSchedule&) = default;
};

/// Model, initial law and scaling that passed validate_model.
struct ModelBundle {
    RateModel model;
    InitialLaw law;
    ScalingSchedule schedule;

    std::size_t grid_size() const
    {
        return model.grid_size();
    }

    friend bool operator==(const ModelBundle&, const ModelBundle&) = default;
};

inline constexpr double product_form_tolerance = 1e-10;

void validate_rates(const RateModel& model);
void validate_law(const InitialLaw& law);
void validate_schedule(const ScalingSchedule& schedule);

ModelBundle validate_model(const RateModel& model, const InitialLaw& law, const ScalingSchedule& schedule);
ModelBundle validate_model(const ModelBundle& bundle);

/**
 * Reads the INI-style model format:
 *   [model]   lambda1, lambda2 | lambda_kernel, psi, phi
 *   [initial] rho0, rho1, rho2
 *   [scaling] a
 *   [grid]    M
 * Each function value is a constant, an expression in u (v for the second kernel argument),
 * or a bracketed sample list.
 */
ModelBundle parse_model(const std::string& text);
ModelBundle load_model(const std::filesystem::path& path);

/// Stable 64-bit FNV-1a digest of all samples.
std::uint64_t model_hash(const RateModel& model);
std::uint64_t model_hash(const ModelBundle& bundle);
std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed = 14695981039346656037ull);
std::string hex_digest(std::uint64_t h);

} // namespace seir

#endif // SEIRLAB_MODEL_HPP
