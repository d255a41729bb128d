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
#include "seirlab/io.hpp"
#include "seirlab/torus.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

using namespace seir;
using namespace seir::testing;

namespace
{

void expect_code(ErrorCode code, const std::function<void()>& f)
{
    try {
        f();
        FAIL() << "expected " << to_string(code);
    }
    catch (const Error& e) {
        EXPECT_EQ(e.code(), code) << e.what();
    }
}

} // namespace

TEST(EvalPeriodic, ConstantFunction)
{
    EXPECT_DOUBLE_EQ(eval_periodic(constant(3.0, 16), 0.7), 3.0);
}

TEST(EvalPeriodic, Periodicity)
{
    const auto f = fn("cos(2*pi*u)+0.3*sin(4*pi*u)", 64);
    EXPECT_NEAR(eval_periodic(f, 1.2), eval_periodic(f, 0.2), 1e-15);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int q = 0; q < 200; ++q) {
        const double u = U(rng);
        for (int k : {-3, -1, 1, 2, 7}) {
            EXPECT_NEAR(eval_periodic(f, u + k), eval_periodic(f, u), 1e-12);
        }
    }
}

TEST(EvalPeriodic, NodeValueOfSine)
{
    const auto f = fn("sin(2*pi*u)", 256);
    EXPECT_NEAR(eval_periodic(f, 0.25), 1.0, 1e-4);
}

TEST(PairProduct, SeparableKernelFactorizes)
{
    const std::size_t M = 32;
    const auto f = fn("1+0.5*cos(2*pi*u)", M), g = fn("2+sin(2*pi*u)", M);
    const Measure a = GridDensity{fn("0.5+0.2*sin(2*pi*u)", M)};
    const Measure b = AtomicMeasure{{0.1, 0.35, 0.8}, {0.2, 0.5, 0.3}};
    const double lhs = pair_product(a, b, TorusKernel::outer(f, g));
    EXPECT_NEAR(lhs, pair(a, f) * pair(b, g), 1e-12);
    EXPECT_NEAR(pair_product(a, b, f, g), pair(a, f) * pair(b, g), 1e-12);
}

TEST(PairProduct, ZeroMeasure)
{
    const Measure z = AtomicMeasure{};
    const Measure a = GridDensity{constant(1.0, 8)};
    EXPECT_EQ(pair_product(z, a, [](double u, double v) { return 1.0 + u * v; }), 0.0);
    EXPECT_EQ(pair_product(z, z, [](double, double) { return 1.0; }), 0.0);
}

TEST(PairProduct, AtomsAgreeWithBinnedGridWithinMeshSize)
{
    const std::size_t N = 1000, M = 256;
    AtomicMeasure atoms;
    for (std::size_t i = 0; i < N; ++i) {
        atoms.positions.push_back(static_cast<double>(i) / N);
        atoms.masses.push_back((1.0 + 0.5 * std::cos(2 * std::numbers::pi * i / N)) / N);
    }
    auto h = [](double u, double v) { return std::exp(std::cos(2 * std::numbers::pi * (u - v))); };
    const double exact  = pair_product(Measure{atoms}, Measure{atoms}, h);
    const Measure grid  = bin_to_grid(atoms, M);
    const double binned = pair_product(grid, grid, h);
    // |dh| <= 2 pi e, total mass 1, each atom moves at most 1/(2M)
    const double bound = 2.0 * 2 * std::numbers::pi * std::exp(1.0) / (2.0 * M);
    EXPECT_LE(std::fabs(exact - binned), bound);
}

TEST(PairProduct, BilinearAndMonotone)
{
    const Measure a = AtomicMeasure{{0.1, 0.6}, {0.3, 0.7}};
    const Measure b = AtomicMeasure{{0.2, 0.9}, {0.5, 0.4}};
    const Measure a2 = AtomicMeasure{{0.1, 0.6}, {0.6, 1.4}};
    auto h = [](double u, double v) { return 1.0 + u + v * v; };
    EXPECT_NEAR(pair_product(a2, b, h), 2.0 * pair_product(a, b, h), 1e-14);
    auto h_big = [&](double u, double v) { return h(u, v) + 0.1; };
    EXPECT_GT(pair_product(a, b, h_big), pair_product(a, b, h));
}

TEST(ValidateModel, InitialLawSumTooLarge)
{
    const std::size_t M = 8;
    expect_code(ErrorCode::InvalidInitialLaw, [&] {
        validate_model(constant_rates(1, 1, 1, 1, M), constant_law(0.4, 0.4, 0.3, M), {});
    });
}

TEST(ValidateModel, ZeroRecoveryRate)
{
    const std::size_t M = 8;
    auto phi = constant(1.0, M).values();
    phi[3]   = 0.0;
    const RateModel m = RateModel::product(constant(1, M), constant(1, M), constant(1, M), TorusFunction(phi));
    expect_code(ErrorCode::NonPositiveRate, [&] { validate_model(m, constant_law(0.5, 0.1, 0.1, M), {}); });
}

TEST(ValidateModel, ProductFormMismatch)
{
    const std::size_t M = 8;
    RateModel m = constant_rates(1.5, 2.0, 1, 1, M);
    TorusKernel k = TorusKernel::outer(*m.lambda1, *m.lambda2);
    k.at(2, 5) += 0.01;
    m.kernel = k;
    expect_code(ErrorCode::ProductFormMismatch, [&] { validate_model(m, constant_law(0.5, 0.1, 0.1, M), {}); });
}

TEST(ValidateModel, ScalingExponentRange)
{
    const std::size_t M = 8;
    expect_code(ErrorCode::InvalidExponent, [&] {
        validate_model(constant_rates(1, 1, 1, 1, M), constant_law(0.5, 0.1, 0.1, M), ScalingSchedule{0.4});
    });
}

TEST(ValidateModel, Idempotent)
{
    const ModelBundle b = spatial_product();
    EXPECT_EQ(validate_model(b), b);
    EXPECT_EQ(validate_model(validate_model(b)), b);
}

TEST(ParseModel, AllConfigsLoad)
{
    EXPECT_TRUE(spatial_product().model.product_form);
    EXPECT_FALSE(spatial_kernel().model.product_form);
    EXPECT_EQ(homogeneous().grid_size(), 32u);
}

TEST(ParseModel, ListsAndErrors)
{
    const ModelBundle b = parse_model("[model]\nlambda1=[1,1,1,1]\nlambda2=2\npsi=1\nphi=1\n"
                                      "[initial]\nrho0=0.5\nrho1=0.1\nrho2=0.1\n[grid]\nM=4\n");
    EXPECT_EQ(b.grid_size(), 4u);
    EXPECT_DOUBLE_EQ(b.model.lambda(0.3, 0.6), 2.0);
    expect_code(ErrorCode::ParseError, [] { parse_model("[model]\npsi=1\nphi=1\n[grid]\nM=4\n"); });
    expect_code(ErrorCode::GridMismatch, [] {
        parse_model("[model]\nlambda1=[1,1,1]\nlambda2=2\npsi=1\nphi=1\n[initial]\nrho0=0.5\nrho1=0.1\nrho2=0.1\n[grid]\nM=4\n");
    });
    expect_code(ErrorCode::IoError, [] { load_model("/nonexistent/model.ini"); });
}

TEST(ParseModel, HashTracksContent)
{
    const ModelBundle a = spatial_product();
    ModelBundle b       = a;
    EXPECT_EQ(model_hash(a), model_hash(b));
    b.schedule.a = 0.8;
    EXPECT_NE(model_hash(a), model_hash(b));
}

TEST(Expression, Arithmetic)
{
    EXPECT_DOUBLE_EQ(Expression::parse("2^3 - 4/2 + -1")(0.0), 5.0);
    EXPECT_NEAR(Expression::parse("exp(log(3)) * sqrt(4)")(0.0), 6.0, 1e-14);
    EXPECT_DOUBLE_EQ(Expression::parse("u + 2*v + 3*t")(1.0, 2.0, 3.0), 14.0);
    expect_code(ErrorCode::ParseError, [] { Expression::parse("1 + "); });
    expect_code(ErrorCode::ParseError, [] { Expression::parse("foo(u)"); });
}

TEST(Io, NumbersRoundTripBitwise)
{
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n;
    for (int q = 0; q < 1000; ++q) {
        const double x = n(rng) * std::pow(10.0, q % 40 - 20);
        EXPECT_EQ(std::stod(format_number(x)), x);
    }
}

TEST(Io, CsvRoundTrip)
{
    const auto dir = std::filesystem::temp_directory_path() / "seirlab_io_test";
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "t.csv", "a,b\n1,2.5\n3,4\n");
    const CsvTable t = read_csv(dir / "t.csv");
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.column("b"), 1u);
    EXPECT_EQ(t.rows[0][1], "2.5");
    std::filesystem::remove_all(dir);
}
