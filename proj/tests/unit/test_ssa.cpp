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
#include "seirlab/fields.hpp"
#include "seirlab/oracle.hpp"
#include "seirlab/simulator.hpp"
#include "seirlab/sum_tree.hpp"

#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <map>

using namespace seir;
using namespace seir::testing;

TEST(SumTree, FindAndTotals)
{
    SumTree t(5);
    t.assign({1.0, 0.0, 2.0, 0.5, 0.0});
    EXPECT_DOUBLE_EQ(t.total(), 3.5);
    EXPECT_EQ(t.find(0.5), 0u);
    EXPECT_EQ(t.find(1.0), 2u);
    EXPECT_EQ(t.find(3.2), 3u);
    t.set(2, 0.0);
    EXPECT_DOUBLE_EQ(t.total(), 1.5);
    EXPECT_EQ(t.find(1.2), 3u);
    EXPECT_DOUBLE_EQ(t.recompute_total(), t.total());
}

TEST(SampleInitial, BinomialCounts)
{
    const std::size_t M = 16, N = 10000;
    const auto law = constant_law(0.5, 0.2, 0.1, M);
    const Configuration c = sample_initial(law, N, 42);
    const double expect[4] = {5000, 2000, 1000, 2000};
    const double p[4]      = {0.5, 0.2, 0.1, 0.2};
    for (int k = 0; k < 4; ++k) {
        const double sd = std::sqrt(N * p[k] * (1 - p[k]));
        EXPECT_NEAR(static_cast<double>(c.count(static_cast<State>(k))), expect[k], 4 * sd);
    }
}

TEST(SampleInitial, Deterministic)
{
    const auto b = spatial_product();
    EXPECT_EQ(sample_initial(b.law, 500, 7), sample_initial(b.law, 500, 7));
    EXPECT_NE(sample_initial(b.law, 500, 7), sample_initial(b.law, 500, 8));
}

TEST(SampleInitial, JointLawMatchesProductLaw)
{
    const auto b = spatial_product();
    const std::size_t N = 4, draws = 1000000;
    const Distribution exact = product_law(b.law, N);
    std::vector<double> counts(exact.p.size(), 0.0);
    Rng rng = make_rng(5, 0);
    for (std::size_t d = 0; d < draws; ++d) {
        counts[encode(sample_initial(b.law, N, rng))] += 1.0;
    }
    double chi2 = 0.0;
    std::size_t cells = 0;
    for (std::size_t x = 0; x < counts.size(); ++x) {
        const double e = exact.p[x] * draws;
        if (e > 0) {
            chi2 += (counts[x] - e) * (counts[x] - e) / e;
            ++cells;
        }
    }
    const boost::math::chi_squared dist(static_cast<double>(cells - 1));
    EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 0.001);
}

TEST(Simulate, ZeroInfectionHasNoInfections)
{
    const std::size_t M = 16;
    const RateModel m = RateModel::product(constant(1e-300, M), constant(1e-300, M), constant(1, M), constant(1, M));
    // vanishing but positive infection rates behave like lambda = 0 on any finite horizon
    const auto law = constant_law(0.5, 0.2, 0.2, M);
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto traj = simulate(m, sample_initial(law, 200, s), 5.0, s);
        for (const Event& e : traj.events) {
            EXPECT_NE(e.kind, Transition::SE);
        }
    }
}

TEST(Simulate, SingleVertexRemovalProbability)
{
    const std::size_t M = 8, R = 100000;
    const RateModel m = constant_rates(1, 1, 1, 1, M);
    Configuration init;
    init.states = {static_cast<std::uint8_t>(State::I)};
    Simulator sim(m, 1);
    std::size_t removed = 0;
    for (std::size_t r = 0; r < R; ++r) {
        Rng rng = make_rng(9, r);
        removed += sim.run(init, 1.0, rng).final_state().states[0] == static_cast<std::uint8_t>(State::R);
    }
    const double p = 1 - std::exp(-1.0);
    EXPECT_NEAR(static_cast<double>(removed) / R, p, 3 * std::sqrt(p * (1 - p) / R));
}

TEST(Simulate, TrajectoryInvariants)
{
    for (const auto& b : {spatial_product(), spatial_kernel()}) {
        for (std::uint64_t s = 0; s < 5; ++s) {
            const std::size_t N = 300;
            const auto traj = simulate(b.model, sample_initial(b.law, N, s), INFINITY, s);
            EXPECT_EQ(check_trajectory(traj), "");
            EXPECT_LE(traj.events.size(), 3 * N);
            const auto fin = traj.final_state();
            EXPECT_EQ(fin.count(State::E) + fin.count(State::I), 0u);
        }
    }
}

TEST(Simulate, Deterministic)
{
    const auto b    = spatial_product();
    const auto init = sample_initial(b.law, 400, 3);
    EXPECT_EQ(simulate(b.model, init, 2.0, 77), simulate(b.model, init, 2.0, 77));
    EXPECT_NE(simulate(b.model, init, 2.0, 77), simulate(b.model, init, 2.0, 78));
}

TEST(Simulate, ZeroTiltIdenticalTrajectory)
{
    const auto b    = spatial_product();
    const auto init = sample_initial(b.law, 400, 3);
    const ControlPath zero(2.0, 10, b.grid_size());
    EXPECT_EQ(simulate(b.model, init, 2.0, 5, zero), simulate(b.model, init, 2.0, 5));
}

TEST(Simulate, DriftAuditHolds)
{
    const auto b = spatial_product();
    const std::size_t N = 20000;
    Simulator sim(b.model, N);
    sim.audit_interval = 1000;
    Rng rng = make_rng(1, 0);
    sim.run(sample_initial(b.law, N, rng), INFINITY, rng);
    EXPECT_GT(sim.stats().audits, 5u);
    EXPECT_EQ(sim.stats().audit_failures, 0u);
    EXPECT_LE(sim.stats().max_audit_drift, 1e-9);
}

TEST(EmpiricalPairings, ConstantTestCountsStates)
{
    const auto b    = spatial_product();
    const std::size_t N = 500;
    const auto traj = simulate(b.model, sample_initial(b.law, N, 2), 2.0, 2);
    const std::vector<double> times = {0.0, 0.5, 1.0, 2.0};
    const auto emp = empirical_pairings(traj, {constant(1.0, b.grid_size())}, times);
    for (std::size_t q = 0; q < times.size(); ++q) {
        const auto c = traj.state_at(times[q]);
        for (int k = 0; k < 3; ++k) {
            EXPECT_EQ(emp.value(q, k, 0), static_cast<double>(c.count(static_cast<State>(k))) / N);
        }
    }
}

TEST(EmpiricalPairings, SusceptiblePairingNonIncreasing)
{
    const auto b = spatial_kernel();
    const auto f = fn("1+0.9*cos(2*pi*u)", b.grid_size());
    std::vector<double> times;
    for (int q = 0; q <= 100; ++q) {
        times.push_back(0.04 * q);
    }
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto traj = simulate(b.model, sample_initial(b.law, 300, s), 4.0, s);
        const auto emp  = empirical_pairings(traj, {f}, times);
        for (std::size_t q = 1; q < times.size(); ++q) {
            EXPECT_LE(emp.value(q, 0, 0), emp.value(q - 1, 0, 0));
        }
    }
}

TEST(EmpiricalPairings, InitialMeanMatchesQuadrature)
{
    const auto b = spatial_product();
    const std::size_t M = b.grid_size(), N = 200, R = 10000;
    const auto f = fn("1+cos(2*pi*u)", M);
    std::vector<double> v(R);
    for (std::size_t r = 0; r < R; ++r) {
        Rng rng = make_rng(4, r);
        Trajectory t;
        t.initial = sample_initial(b.law, N, rng);
        v[r]      = empirical_pairings(t, {f}, {0.0}).value(0, 0, 0);
    }
    double mean = 0, ss = 0;
    for (double x : v) {
        mean += x / R;
    }
    for (double x : v) {
        ss += (x - mean) * (x - mean);
    }
    const double se = std::sqrt(ss / (R - 1) / R);
    double integral = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        integral += b.law.rho0[m] * f[m] / M;
    }
    EXPECT_NEAR(mean, integral, 4 * se + 1e-4);
}

TEST(FluctuationPairings, ReplicaMeanCenteringIsCentered)
{
    const auto b = spatial_product();
    std::vector<Trajectory> reps;
    for (std::uint64_t s = 0; s < 50; ++s) {
        reps.push_back(simulate(b.model, sample_initial(b.law, 100, s), 1.0, s));
    }
    const auto f     = fn("sin(2*pi*u)", b.grid_size());
    const auto paths = fluctuation_pairings(reps, {f}, {0.0, 0.5, 1.0}, b.schedule, Centering::ReplicaMean);
    for (std::size_t q = 0; q < 3; ++q) {
        for (int k = 0; k < 3; ++k) {
            double s = 0.0;
            for (const auto& p : paths) {
                s += p.value(q, k, 0);
            }
            EXPECT_NEAR(s / paths.size(), 0.0, 1e-14);
        }
    }
}

TEST(FluctuationPairings, OracleCenteringUsesExactMeans)
{
    const auto b = spatial_product();
    const std::size_t N = 6;
    const std::vector<double> times = {0.0, 0.5, 1.0};
    const auto Q    = build_generator(b.model, N);
    const auto path = evolve_path(Q, product_law(b.law, N), times);
    const auto mom  = exact_moments(path, times);
    VertexMeans vm;
    vm.times = times;
    vm.N     = N;
    for (std::size_t q = 0; q < times.size(); ++q) {
        for (std::size_t i = 0; i < N; ++i) {
            for (int k = 0; k < 4; ++k) {
                vm.values.push_back(mom.mean(q, i, k));
            }
        }
    }
    std::vector<Trajectory> reps = {simulate(b.model, sample_initial(b.law, N, 1), 1.0, 1)};
    const auto f = fn("1+0.5*cos(2*pi*u)", b.grid_size());
    CenteringInputs in;
    in.oracle = &vm;
    const auto p = fluctuation_pairings(reps, {f}, times, b.schedule, Centering::OracleMean, in);
    for (std::size_t q = 0; q < times.size(); ++q) {
        for (int k = 0; k < 3; ++k) {
            double center = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                center += mom.mean(q, i, k) * f(static_cast<double>(i) / N) / N;
            }
            EXPECT_NEAR(p[0].centers[q * 3 + static_cast<std::size_t>(k)], center, 1e-8);
        }
    }
}

TEST(DynkinResidual, ZeroTestIsZero)
{
    const auto b    = spatial_product();
    const auto traj = simulate(b.model, sample_initial(b.law, 100, 1), 1.0, 1);
    for (int k = 0; k < 3; ++k) {
        EXPECT_EQ(dynkin_residual(traj, b.model, constant(0.0, b.grid_size()), k), 0.0);
    }
}

TEST(DynkinResidual, SingleVertexMeanZero)
{
    const std::size_t M = 8, R = 100000;
    const RateModel m = constant_rates(1, 1, 1, 1, M);
    Configuration init;
    init.states = {static_cast<std::uint8_t>(State::I)};
    double sum = 0, sq = 0;
    Simulator sim(m, 1);
    for (std::size_t r = 0; r < R; ++r) {
        Rng rng      = make_rng(21, r);
        const auto t = sim.run(init, 1.0, rng);
        const double v = dynkin_residual(t, m, constant(1.0, M), 2);
        // closed form: I_T - 1 + int_0^T I_s ds
        const double tr = t.events.empty() ? 1.0 : t.events.front().time;
        const double closed = (t.events.empty() ? 1.0 : 0.0) - 1.0 + tr;
        EXPECT_NEAR(v, closed, 1e-12);
        sum += v;
        sq += v * v;
    }
    const double mean = sum / R;
    const double se   = std::sqrt((sq / R - mean * mean) / R);
    EXPECT_LE(std::fabs(mean), 4 * se);
}

TEST(DynkinResidual, MartingaleMeanZero)
{
    const auto b = spatial_product();
    const std::size_t R = 2000;
    const auto f = fn("1+0.5*sin(2*pi*u)", b.grid_size());
    for (int k = 0; k < 3; ++k) {
        double sum = 0, sq = 0;
        for (std::size_t r = 0; r < R; ++r) {
            Rng rng        = make_rng(31, r);
            Simulator sim(b.model, 100);
            const auto t   = sim.run(sample_initial(b.law, 100, rng), 1.5, rng);
            const double v = dynkin_residual(t, b.model, f, k);
            sum += v;
            sq += v * v;
        }
        const double mean = sum / R;
        const double se   = std::sqrt((sq / R - mean * mean) / R);
        EXPECT_LE(std::fabs(mean), 4 * se) << "k = " << k;
    }
}

TEST(HittingTimeEmpirical, ImmediateAndUnreachable)
{
    const auto b    = spatial_product();
    const std::size_t M = b.grid_size();
    const auto traj = simulate(b.model, sample_initial(b.law, 200, 4), 2.0, 4);
    const auto z = constant(0.0, M), one = constant(1.0, M), minus = constant(-1.0, M);
    EXPECT_EQ(hitting_time_empirical(traj, minus, z, z, -2.0), 0.0);
    EXPECT_TRUE(std::isinf(hitting_time_empirical(traj, one, one, one, 1.5)));
    const double tau = hitting_time_empirical(traj, minus, z, z, -0.6);
    EXPECT_GT(tau, 0.0);
    const auto at = traj.state_at(tau);
    EXPECT_GE(-static_cast<double>(at.count(State::S)) / 200.0, -0.6 - 1e-12);
}
