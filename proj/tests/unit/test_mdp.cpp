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
#include "seirlab/mdp.hpp"

#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

using namespace seir;
using namespace seir::testing;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace
{

struct Fixture {
    ModelBundle b;
    DensityPath mu;
    Propagator prop;

    explicit Fixture(ModelBundle bundle, double T = 1.0, std::size_t steps = 400)
        : b(std::move(bundle))
        , mu(solve_hydrodynamic(b, T, settings(steps)))
        , prop(b.model, mu)
    {
    }

    static SolverSettings settings(std::size_t steps)
    {
        SolverSettings s;
        s.steps = steps;
        return s;
    }
};

const Fixture& product_fixture()
{
    static const Fixture f(spatial_product());
    return f;
}

ControlPath smooth_control(std::mt19937_64& rng, double amp, double T, std::size_t M, std::size_t steps = 40)
{
    std::normal_distribution<double> n;
    double c[3][4];
    for (auto& row : c) {
        for (double& x : row) {
            x = n(rng);
        }
    }
    auto v = [&](int k, double t, double u) {
        const double w = 2 * std::numbers::pi * u;
        return amp * (c[k][0] + c[k][1] * std::cos(w) + c[k][2] * std::sin(w) + c[k][3] * std::sin(t)) / 2.0;
    };
    return ControlPath::sample([&](double t, double u) { return v(0, t, u); }, [&](double t, double u) { return v(1, t, u); },
                               [&](double t, double u) { return v(2, t, u); }, T, steps, M);
}

Triple scaled(const Triple& t, double s)
{
    Triple out;
    for (int k = 0; k < 3; ++k) {
        std::vector<double> v = t[static_cast<std::size_t>(k)].values();
        for (double& x : v) {
            x *= s;
        }
        out[static_cast<std::size_t>(k)] = TorusFunction(v);
    }
    return out;
}

double terminal_pairing(const DensityPath& W, const Triple& f)
{
    double s = 0.0;
    for (int k = 0; k < 3; ++k) {
        s += W.pairing(W.steps(), k, f[static_cast<std::size_t>(k)]);
    }
    return s;
}

double inner(const Triple& a, const Triple& b)
{
    double s = 0.0;
    for (int k = 0; k < 3; ++k) {
        for (std::size_t m = 0; m < a[0].size(); ++m) {
            s += a[static_cast<std::size_t>(k)][m] * b[static_cast<std::size_t>(k)][m];
        }
    }
    return s / static_cast<double>(a[0].size());
}

} // namespace

TEST(Operators, GeneratorIsBlockTransposeOfPrintedLayout)
{
    const auto& fx = product_fixture();
    const auto& ops = fx.prop.operators();
    const std::size_t M = ops.grid_size();
    for (std::size_t j : {0u, 123u, 400u}) {
        const MatrixXd X = ops.xi(j), A = ops.generator(j);
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                const auto Mi = static_cast<Eigen::Index>(M);
                EXPECT_EQ((A.block(r * Mi, c * Mi, Mi, Mi) - X.block(c * Mi, r * Mi, Mi, Mi)).cwiseAbs().maxCoeff(), 0.0);
            }
        }
        // the matrix-free action agrees with the assembled generator
        std::mt19937_64 rng(j);
        std::normal_distribution<double> n;
        MatrixXd g(3 * M, 2);
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            g.data()[i] = n(rng);
        }
        MatrixXd out;
        ops.apply_generator(ops.frame(j), g, out);
        EXPECT_LE((out - A * g).cwiseAbs().maxCoeff(), 1e-12);
        ops.apply_transpose(ops.frame(j), g, out);
        EXPECT_LE((out - A.transpose() * g).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Forms, SplitSymmetryBilinearityAndZero)
{
    const auto& fx = product_fixture();
    const std::size_t M = fx.b.grid_size();
    std::mt19937_64 rng(1);
    const ControlPath x = smooth_control(rng, 0.5, 1.0, M), y = smooth_control(rng, 0.5, 1.0, M);
    const FormReport xx = eval_forms(fx.b.model, fx.mu, x, x);
    EXPECT_NEAR(xx.B10, xx.B4 + xx.B5 + xx.B6, 1e-14 * std::fabs(xx.B10));
    const double xy = eval_forms(fx.b.model, fx.mu, x, y).B10, yx = eval_forms(fx.b.model, fx.mu, y, x).B10;
    EXPECT_NEAR(xy, yx, 1e-14);
    EXPECT_NEAR(eval_forms(fx.b.model, fx.mu, 2.5 * x, y).B10, 2.5 * xy, 1e-13);
    const ControlPath zero(1.0, 40, M);
    const FormReport z = eval_forms(fx.b.model, fx.mu, zero, zero);
    EXPECT_EQ(z.B10, 0.0);
    EXPECT_EQ(z.B4 + z.B5 + z.B6, 0.0);
}

TEST(Forms, PositiveSemidefiniteAndCauchySchwarz)
{
    const auto& fx = product_fixture();
    const std::size_t M = fx.b.grid_size();
    std::mt19937_64 rng(2);
    for (int q = 0; q < 100; ++q) {
        const ControlPath x = smooth_control(rng, 1.0, 1.0, M), y = smooth_control(rng, 1.0, 1.0, M);
        const double bxx = eval_forms(fx.b.model, fx.mu, x, x).B10;
        const double byy = eval_forms(fx.b.model, fx.mu, y, y).B10;
        const double bxy = eval_forms(fx.b.model, fx.mu, x, y).B10;
        EXPECT_GE(bxx, 0.0);
        EXPECT_LE(bxy * bxy, bxx * byy * (1 + 1e-12));
    }
    const auto tests = random_test_triples(200, M, 3);
    for (std::size_t q = 0; q + 1 < tests.size(); q += 2) {
        const double gg = B12(tests[q], tests[q], fx.b.law), hh = B12(tests[q + 1], tests[q + 1], fx.b.law);
        const double gh = B12(tests[q], tests[q + 1], fx.b.law);
        EXPECT_GE(gg, 0.0);
        EXPECT_LE(gh * gh, gg * hh * (1 + 1e-12));
    }
}

TEST(Forms, PairingAgainstR4IsPlainInnerProduct)
{
    const auto& fx = product_fixture();
    const auto t = random_test_triples(2, fx.b.grid_size(), 5);
    EXPECT_NEAR(B12(t[0], R4(t[1], fx.b.law), fx.b.law), inner(t[0], t[1]), 1e-13);
}

TEST(JIni, ZeroScalingAndDominance)
{
    const auto& fx = product_fixture();
    const std::size_t M = fx.b.grid_size();
    const Triple zero = {constant(0, M), constant(0, M), constant(0, M)};
    EXPECT_EQ(J_ini_closed_mdp(zero, fx.b.law), 0.0);
    const Triple h = {fn("0.1*cos(2*pi*u)", M), fn("-0.05+0.02*sin(2*pi*u)", M), fn("0.03", M)};
    const double j1 = J_ini_closed_mdp(h, fx.b.law);
    EXPECT_NEAR(J_ini_closed_mdp(scaled(h, 3.0), fx.b.law), 9.0 * j1, 1e-14 * j1);
    for (const Triple& f : random_test_triples(100, M, 9)) {
        EXPECT_GE(j1 + 1e-12, J2(h, f, fx.b.law));
    }
}

TEST(Propagator, IdentityAtZeroAndDuality)
{
    const auto& fx = product_fixture();
    const MatrixXd P0 = fx.prop.matrix(0);
    EXPECT_TRUE(P0 == MatrixXd::Identity(P0.rows(), P0.cols()));
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    VectorXd g(fx.prop.dim()), nu(fx.prop.dim());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        g[i]  = n(rng);
        nu[i] = n(rng);
    }
    for (double t : {0.25, 0.5, 1.0}) {
        const double lhs = fx.prop.apply_adjoint(t, nu).dot(g);
        const double rhs = nu.dot(fx.prop.apply(t, g));
        EXPECT_NEAR(lhs, rhs, 1e-12 * (1 + std::fabs(lhs)));
    }
}

TEST(Propagator, Semigroup)
{
    const auto& fx = product_fixture();
    const std::size_t s = 150, t = 400;
    const MatrixXd direct   = fx.prop.matrix(t);
    const MatrixXd composed = fx.prop.transition(s, t) * fx.prop.matrix(s);
    EXPECT_LE((direct - composed).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Propagator, NoInfectionMatchesMatrixExponential)
{
    const std::size_t M = 8;
    const double psi = 1.3, phi = 0.6, T = 1.0;
    const RateModel m = RateModel::product(constant(1e-300, M), constant(1e-300, M), constant(psi, M), constant(phi, M));
    const InitialLaw law = constant_law(0.6, 0.1, 0.1, M);
    SolverSettings s;
    s.steps = 200;
    const DensityPath theta = solve_hydrodynamic(m, law, T, s);
    const Propagator prop(m, theta);
    const MatrixXd A = prop.operators().generator(0);
    for (std::size_t j : {50u, 200u}) {
        const MatrixXd oracle = (-A * theta.time(j)).exp();
        const MatrixXd P      = prop.matrix(j);
        EXPECT_LE((P - oracle).cwiseAbs().maxCoeff(), 1e-8 * oracle.cwiseAbs().maxCoeff());
        for (std::size_t i = 0; i < M; ++i) {
            const auto e = static_cast<Eigen::Index>(M + i), in = static_cast<Eigen::Index>(2 * M + i);
            EXPECT_NEAR(P(e, e), std::exp(psi * theta.time(j)), 1e-8);
            EXPECT_NEAR(P(in, in), std::exp(phi * theta.time(j)), 1e-8);
        }
    }
}

TEST(Propagator, SaveLoadRoundTrip)
{
    const auto& fx = product_fixture();
    const auto file = std::filesystem::temp_directory_path() / "seirlab_prop_test.bin";
    fx.prop.save(file);
    const Propagator back = Propagator::load(file, fx.b.model, fx.mu);
    for (std::size_t j : {0u, 77u, 400u}) {
        EXPECT_TRUE(back.matrix(j) == fx.prop.matrix(j));
    }
    std::filesystem::remove(file);
}

TEST(Skeleton, ZeroDataGivesZeroPath)
{
    const auto& fx = product_fixture();
    const std::size_t M = fx.b.grid_size();
    const SkeletonPath sk = solve_skeleton(fx.prop, ControlPath(1.0, 10, M), {constant(0, M), constant(0, M), constant(0, M)});
    for (double v : sk.path.data()) {
        EXPECT_EQ(v, 0.0);
    }
}

TEST(Skeleton, DualMethodsAgreeAndResidualSmall)
{
    const auto& fx = product_fixture();
    const std::size_t M = fx.b.grid_size();
    std::mt19937_64 rng(4);
    const ControlPath tilt = smooth_control(rng, 0.5, 1.0, M);
    const Triple init      = random_test_triples(1, M, 12).front();
    const SkeletonPath sk  = solve_skeleton(fx.prop, tilt, init);
    EXPECT_LE(sk.discrepancy, 1e-5);
    EXPECT_LE(skeleton_residual(fx.prop, sk, random_test_triples(10, M, 13)), 1e-5);
}

TEST(Skeleton, Superposition)
{
    const auto& fx = product_fixture();
    const std::size_t M = fx.b.grid_size();
    std::mt19937_64 rng(5);
    const ControlPath x = smooth_control(rng, 0.5, 1.0, M), y = smooth_control(rng, 0.5, 1.0, M);
    const auto inits = random_test_triples(2, M, 14);
    Triple sum;
    for (int k = 0; k < 3; ++k) {
        std::vector<double> v(M);
        for (std::size_t m = 0; m < M; ++m) {
            v[m] = inits[0][static_cast<std::size_t>(k)][m] + inits[1][static_cast<std::size_t>(k)][m];
        }
        sum[static_cast<std::size_t>(k)] = TorusFunction(v);
    }
    const SkeletonPath a = solve_skeleton(fx.prop, x, inits[0]);
    const SkeletonPath b = solve_skeleton(fx.prop, y, inits[1]);
    const SkeletonPath c = solve_skeleton(fx.prop, x + y, sum);
    double err = 0.0;
    for (std::size_t i = 0; i < c.path.data().size(); ++i) {
        err = std::max(err, std::fabs(c.path.data()[i] - a.path.data()[i] - b.path.data()[i]));
    }
    EXPECT_LE(err, 1e-8);
}

TEST(Skeleton, LinearPairingEqualsForm)
{
    // For a skeleton driven by tilt x from zero initial data, l2(W, y) = B10(x, y).
    const auto& fx = product_fixture();
    const std::size_t M = fx.b.grid_size();
    const auto zero     = Triple{constant(0, M), constant(0, M), constant(0, M)};
    auto steady = [&](double a, double b, double c) {
        return ControlPath::sample([&](double, double u) { return a * std::cos(2 * std::numbers::pi * u); },
                                   [&](double, double u) { return b + 0.1 * std::sin(2 * std::numbers::pi * u); },
                                   [&](double, double) { return c; }, 1.0, 40, M);
    };
    const ControlPath x = steady(0.3, -0.2, 0.4), y = steady(-0.5, 0.1, 0.25);
    const SkeletonPath sk = solve_skeleton(fx.prop, x, zero);
    const FormReport r    = eval_forms(fx.b.model, fx.mu, y, x, &sk.path);
    EXPECT_NEAR(r.l2, r.B10, 1e-10 * std::fabs(r.B10));
}

TEST(Skeleton, LinearPairingTimeVaryingControlsConverge)
{
    // Time-varying controls are linear interpolants; the identity holds up to the square of the control step.
    const auto& fx = product_fixture();
    const std::size_t M = fx.b.grid_size();
    const auto zero     = Triple{constant(0, M), constant(0, M), constant(0, M)};
    double gap[2];
    int q = 0;
    for (std::size_t cs : {40u, 80u}) {
        std::mt19937_64 rng(6);
        const ControlPath x = smooth_control(rng, 0.5, 1.0, M, cs), y = smooth_control(rng, 0.5, 1.0, M, cs);
        const SkeletonPath sk = solve_skeleton(fx.prop, x, zero);
    const FormReport r    = eval_forms(fx.b.model, fx.mu, y, x, &sk.path);
        EXPECT_NEAR(r.l2, r.B10, 1e-3 * std::fabs(r.B10));
        gap[q++] = std::fabs(r.l2 - r.B10);
    }
    EXPECT_GE(gap[0] / gap[1], 3.5);
}

TEST(JContra, QuadraticScalingAndOptimizerRoundTrip)
{
    const auto& fx = product_fixture();
    const std::size_t M = fx.b.grid_size();
    const Triple f = {fn("1+0.5*cos(2*pi*u)", M), fn("sin(2*pi*u)", M), fn("0.5", M)};
    const ContraResult one = J_contra(fx.prop, fx.b.law, f, 1.0);
    EXPECT_EQ(J_contra(fx.prop, fx.b.law, f, 0.0).value, 0.0);
    for (double x : {-2.0, 0.3, 1.7, 10.0}) {
        const double v = J_contra(fx.prop, fx.b.law, f, x).value;
        EXPECT_NEAR(v, x * x * one.value, 1e-12 * x * x * one.value);
    }
    const SkeletonPath sk = solve_skeleton(fx.prop, one.tilt, one.initial);
    EXPECT_NEAR(terminal_pairing(sk.path, f), 1.0, 1e-5);
    const double value = J_ini_closed_mdp(one.initial, fx.b.law) + 0.5 * eval_forms(fx.b.model, fx.mu, one.tilt, one.tilt).B10;
    EXPECT_NEAR(value, one.value, 1e-6);
}

TEST(JContra, DegenerateDenominator)
{
    const auto& fx = product_fixture();
    const std::size_t M = fx.b.grid_size();
    try {
        J_contra(fx.prop, fx.b.law, {constant(0, M), constant(0, M), constant(0, M)}, 1.0);
        FAIL();
    }
    catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateDenominator);
    }
}

TEST(JHit, ZeroSymmetricAndComponentwise)
{
    const ModelBundle b  = homogeneous();
    const std::size_t M  = b.grid_size();
    const Triple f       = {constant(0, M), constant(0, M), constant(1, M)};
    const double T       = 0.3;
    const DensityPath mu = solve_hydrodynamic(b, T);
    const double c       = 0.052;
    const HittingTime ht = hitting_time_limit(mu, f[0], f[1], f[2], c);
    EXPECT_EQ(J_hit(0.0, ht.tau, f, b.model, b.law, mu), 0.0);
    const double jp = J_hit(0.7, ht.tau, f, b.model, b.law, mu), jm = J_hit(-0.7, ht.tau, f, b.model, b.law, mu);
    EXPECT_EQ(jp, jm);

    // independent assembly: hydro on [0, tau], its propagator, J_contra(1) and the crossing slope
    const DensityPath mu_tau = solve_hydrodynamic(b, ht.tau);
    const Propagator prop(b.model, mu_tau);
    const double jc = J_contra(prop, b.law, f, 1.0).value;
    double slope    = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        slope += (b.model.psi[m] * mu_tau.w(mu_tau.steps(), 1, m) - b.model.phi[m] * mu_tau.w(mu_tau.steps(), 2, m)) / M;
    }
    EXPECT_NEAR(jp, 0.49 * jc * slope * slope, 1e-6 * jp);
}
