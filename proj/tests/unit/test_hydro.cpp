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

#include "support.hpp"

#include "seirlab/error.hpp"
#include "seirlab/hydro.hpp"

#include <gtest/gtest.h>

#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>

using namespace seir;
using namespace seir::testing;

namespace
{

std::array<TorusFunction, 3> law_triple(const InitialLaw& law)
{
    return {law.rho0, law.rho1, law.rho2};
}

double sup_difference(const DensityPath& a, const DensityPath& b)
{
    double d = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        d = std::max(d, std::fabs(a.data()[i] - b.data()[i]));
    }
    return d;
}

double mass(const DensityPath& p, std::size_t j, int k)
{
    return p.pairing(j, k, TorusFunction::constant(1.0, p.grid_size()));
}

} // namespace

TEST(SolveHydrodynamic, MatchesScalarSeirIntegrator)
{
    const ModelBundle b = homogeneous();
    const double beta = 1.0 * 2.0, psi = 1.5, phi = 1.0, T = 6.0;
    const DensityPath mu = solve_hydrodynamic(b, T);

    using state = std::array<double, 3>;
    auto rhs = [&](const state& x, state& dx, double) {
        dx[0] = -beta * x[0] * x[2];
        dx[1] = beta * x[0] * x[2] - psi * x[1];
        dx[2] = psi * x[1] - phi * x[2];
    };
    namespace ode = boost::numeric::odeint;
    auto stepper = ode::make_dense_output(1e-13, 1e-13, ode::runge_kutta_dopri5<state>());
    state x      = {0.9, 0.04, 0.05};
    double worst = 0.0;
    std::size_t next = 0;
    const std::size_t stride = mu.steps() / 60;
    std::vector<double> times;
    for (std::size_t q = 0; q <= 60; ++q) {
        times.push_back(mu.time(q * stride));
    }
    ode::integrate_times(stepper, rhs, x, times.begin(), times.end(), mu.dt(), [&](const state& s, double) {
        const std::size_t j = next * stride;
        for (int k = 0; k < 3; ++k) {
            worst = std::max(worst, std::fabs(mass(mu, j, k) - s[static_cast<std::size_t>(k)]));
        }
        ++next;
    });
    EXPECT_EQ(next, 61u);
    EXPECT_LE(worst, 1e-6);
}

TEST(SolveHydrodynamic, NoInfectionKeepsSusceptiblesConstant)
{
    const std::size_t M = 16;
    const RateModel m = RateModel::product(constant(1e-300, M), constant(1e-300, M), fn("1+0.2*cos(2*pi*u)", M),
                                           constant(0.5, M));
    const InitialLaw law{fn("0.6+0.1*sin(2*pi*u)", M), constant(0.1, M), constant(0.1, M)};
    const DensityPath mu = solve_hydrodynamic(m, law, 2.0);
    for (std::size_t j = 0; j <= mu.steps(); j += 100) {
        for (std::size_t m2 = 0; m2 < M; ++m2) {
            EXPECT_EQ(mu.w(j, 0, m2), law.rho0[m2]);
        }
    }
}

TEST(SolveHydrodynamic, SpeciesSumNonIncreasingAndMassBalance)
{
    for (const auto& b : {spatial_product(), spatial_kernel()}) {
        const DensityPath mu = solve_hydrodynamic(b, 4.0);
        ASSERT_TRUE(mu.has_derivatives());
        for (std::size_t j = 0; j <= mu.steps(); ++j) {
            for (std::size_t m = 0; m < mu.grid_size(); ++m) {
                const double dsum = mu.dw(j, 0, m) + mu.dw(j, 1, m) + mu.dw(j, 2, m);
                EXPECT_LE(dsum, 0.0);
                EXPECT_NEAR(dsum + b.model.phi[m] * mu.w(j, 2, m), 0.0, 1e-14);
                if (j > 0) {
                    const double s  = mu.w(j, 0, m) + mu.w(j, 1, m) + mu.w(j, 2, m);
                    const double s0 = mu.w(j - 1, 0, m) + mu.w(j - 1, 1, m) + mu.w(j - 1, 2, m);
                    EXPECT_LE(s, s0 + 1e-15);
                }
            }
        }
    }
}

TEST(SolveHydrodynamic, IntegratorsAgree)
{
    const ModelBundle b = spatial_kernel();
    SolverSettings rk, trap;
    trap.integrator = Integrator::ImplicitTrapezoid;
    trap.verify     = false;
    EXPECT_LE(sup_difference(solve_hydrodynamic(b, 3.0, rk), solve_hydrodynamic(b, 3.0, trap)), 1e-5);
}

TEST(SolveHydrodynamic, GronwallStability)
{
    const ModelBundle b = spatial_product();
    const std::size_t M = b.grid_size();
    const double delta  = 1e-3, T = 2.0;
    auto init2          = law_triple(b.law);
    init2[1]            = fn("0.06+0.02*sin(2*pi*u)+0.001*cos(6*pi*u)", M);
    const DensityPath a = solve_hydrodynamic(b.model, law_triple(b.law), T);
    const DensityPath c = solve_hydrodynamic(b.model, init2, T);
    double lmax = 0, pmax = 0, fmax = 0;
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t n = 0; n < M; ++n) {
            lmax = std::max(lmax, b.model.lambda(static_cast<double>(m) / M, static_cast<double>(n) / M));
        }
        pmax = std::max(pmax, b.model.psi[m]);
        fmax = std::max(fmax, b.model.phi[m]);
    }
    const double K1 = 2 * (lmax + pmax + fmax);
    EXPECT_LE(sup_difference(a, c), delta * std::exp(K1 * T));
    EXPECT_GT(sup_difference(a, c), 0.0);
}

TEST(SolveHydrodynamic, CoarseStepsRejected)
{
    SolverSettings s;
    s.steps     = 4;
    s.tolerance = 1e-12;
    try {
        solve_hydrodynamic(spatial_product(), 5.0, s);
        FAIL();
    }
    catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::StepSizeTooCoarse);
    }
}

TEST(SolveTilted, ZeroControlMatchesHydrodynamic)
{
    const ModelBundle b = spatial_product();
    const ControlPath zero(2.0, 20, b.grid_size());
    EXPECT_LE(sup_difference(solve_tilted(b.model, law_triple(b.law), zero, 2.0), solve_hydrodynamic(b, 2.0)), 1e-8);
}

TEST(SolveTilted, LargeRemovalTiltSlowsDecay)
{
    const ModelBundle b = spatial_product();
    const double T      = 2.0;
    const auto c        = ControlPath::sample([](double, double) { return 0.0; }, [](double, double) { return 0.0; },
                                              [](double, double) { return 1.5; }, T, 10, b.grid_size());
    const DensityPath tilted = solve_tilted(b.model, law_triple(b.law), c, T);
    const DensityPath plain  = solve_hydrodynamic(b, T);
    for (std::size_t j = 1; j <= plain.steps(); j += 50) {
        for (std::size_t m = 0; m < b.grid_size(); ++m) {
            const double st = tilted.w(j, 0, m) + tilted.w(j, 1, m) + tilted.w(j, 2, m);
            const double sp = plain.w(j, 0, m) + plain.w(j, 1, m) + plain.w(j, 2, m);
            EXPECT_GT(st, sp);
        }
    }
}

TEST(SolveTilted, IntegralEquationResidual)
{
    const ModelBundle b = spatial_kernel();
    const auto c        = ControlPath::sample([](double t, double u) { return 0.2 * std::sin(6.283185307179586 * u + t); },
                                              [](double t, double) { return 0.1 * t; },
                                              [](double, double u) { return -0.15 * std::cos(6.283185307179586 * u); }, 2.0,
                                              25, b.grid_size());
    TiltedDiagnostics d;
    solve_tilted(b.model, law_triple(b.law), c, 2.0, {}, &d);
    EXPECT_LE(d.integral_residual, 1e-6);
}

TEST(Admissibility, HydrodynamicPathAdmissible)
{
    const auto rep = is_admissible_D0(solve_hydrodynamic(spatial_product(), 3.0));
    EXPECT_TRUE(rep.admissible) << rep.detail;
    EXPECT_GT(rep.chain_margin, 0.0);
    EXPECT_GT(rep.derivative_margin, 0.0);
}

TEST(Admissibility, VanishingExposedFailsChain)
{
    DensityPath mu = solve_hydrodynamic(spatial_product(), 1.0);
    mu.drop_derivatives();
    for (std::size_t j = 0; j <= mu.steps(); ++j) {
        for (std::size_t m = 0; m < mu.grid_size(); ++m) {
            mu.w(j, 1, m) = 0.0;
        }
    }
    const auto rep = is_admissible_D0(mu);
    EXPECT_FALSE(rep.admissible);
    EXPECT_EQ(rep.violated_condition, 2);
}

TEST(Admissibility, TimeConstantPathFailsMonotonicity)
{
    DensityPath p(1.0, 50, 8, Provenance::User);
    for (std::size_t j = 0; j <= 50; ++j) {
        for (std::size_t m = 0; m < 8; ++m) {
            p.w(j, 0, m) = 0.5;
            p.w(j, 1, m) = 0.1;
            p.w(j, 2, m) = 0.1;
        }
    }
    const auto rep = is_admissible_D0(p);
    EXPECT_FALSE(rep.admissible);
    EXPECT_EQ(rep.violated_condition, 3);
}

TEST(HittingTimeLimit, LevelBelowStart)
{
    const ModelBundle b  = homogeneous();
    const DensityPath mu = solve_hydrodynamic(b, 1.0);
    const auto z = constant(0.0, b.grid_size()), one = constant(1.0, b.grid_size());
    try {
        hitting_time_limit(mu, z, z, one, 0.01);
        FAIL();
    }
    catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OutOfRange);
    }
}

TEST(HittingTimeLimit, InfectedMassCrossingAndRichardson)
{
    const ModelBundle b = homogeneous();
    const auto z = constant(0.0, b.grid_size()), one = constant(1.0, b.grid_size());
    const DensityPath mu = solve_hydrodynamic(b, 0.3);
    const HittingTime h  = hitting_time_limit(mu, z, z, one, 0.052);
    EXPECT_GT(h.tau, 0.0);
    EXPECT_LT(h.tau, 0.3);
    EXPECT_GT(h.derivative, 0.0);

    double tau[3];
    int q = 0;
    for (std::size_t J : {6u, 12u, 24u}) {
        SolverSettings s;
        s.steps  = J;
        s.verify = false;
        tau[q++] = hitting_time_limit(solve_hydrodynamic(b, 0.3, s), z, z, one, 0.052).tau;
    }
    const double d1 = std::fabs(tau[0] - tau[1]), d2 = std::fabs(tau[1] - tau[2]);
    EXPECT_LE(d2, d1 / 4.0 + 1e-15);
}
