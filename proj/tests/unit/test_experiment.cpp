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
#include "seirlab/experiment.hpp"
#include "seirlab/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <thread>

using namespace seir;
using namespace seir::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace
{

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("seirlab_exp_" + name);
    fs::remove_all(p);
    return p;
}

ExperimentConfig make_config(json j, const fs::path& out)
{
    j["model"]  = std::string(SEIRLAB_CONFIG_DIR) + "/spatial_product.ini";
    j["output"] = out.string();
    return parse_experiment(j, fs::current_path());
}

ErrorCode code_of(const std::function<void()>& f)
{
    try {
        f();
    }
    catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::InvalidArgument;
}

} // namespace

TEST(FitRate, ExactLinearData)
{
    std::vector<double> xs, ys;
    for (double N : {10.0, 20.0, 40.0}) {
        xs.push_back(N);
        ys.push_back(-2.0 * N);
    }
    const RateFit f = fit_rate(xs, ys);
    EXPECT_NEAR(f.slope, -2.0, 1e-12);
    EXPECT_NEAR(f.intercept, 0.0, 1e-10);
}

TEST(FitRate, DegenerateInputs)
{
    EXPECT_EQ(code_of([] { fit_rate({1.0}, {2.0}); }), ErrorCode::DegenerateFit);
    EXPECT_EQ(code_of([] { fit_rate({3.0, 3.0}, {1.0, 2.0}); }), ErrorCode::DegenerateFit);
}

TEST(FitRate, NoisySlopeWithinThreeStandardErrors)
{
    std::mt19937_64 rng(99);
    std::normal_distribution<double> noise(0.0, 0.1);
    int hits = 0;
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> xs, ys;
        for (int i = 0; i < 12; ++i) {
            xs.push_back(i * 0.5);
            ys.push_back(1.5 - 0.8 * xs.back() + noise(rng));
        }
        const RateFit f = fit_rate(xs, ys);
        hits += std::fabs(f.slope + 0.8) <= 3 * f.stderr_slope;
    }
    EXPECT_GE(hits, 48);
}

TEST(ExperimentConfig, Validation)
{
    const fs::path out = scratch("cfg");
    EXPECT_EQ(code_of([&] { make_config({{"kind", "tilted-lln"}, {"N", {2000, 500}}, {"replicas", 2}}, out); }),
              ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { make_config({{"kind", "no-such-kind"}}, out); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([&] { make_config({{"kind", "rate-zero"}, {"thresholds", {{"bogus", 1}}}}, out); }),
              ErrorCode::ParseError);
    EXPECT_EQ(code_of([&] {
                  parse_experiment({{"kind", "rate-zero"}, {"model", "/nonexistent.ini"}}, fs::current_path());
              }),
              ErrorCode::IoError);
    const ExperimentConfig c = make_config({{"kind", "tilted-lln"}}, out);
    EXPECT_EQ(c.thresholds.at("max_discrepancy").get<double>(), 0.05);
    EXPECT_EQ(c.N, std::vector<std::size_t>{2000});
}

TEST(ExperimentConfig, HashChangesIffConfigChanges)
{
    const fs::path out = scratch("hash");
    const json base    = {{"kind", "tilting-identity"}, {"N", {30}}, {"replicas", 10}, {"seed", 4}};
    const std::string h = config_hash(make_config(base, out));
    EXPECT_EQ(config_hash(make_config(base, out)), h);
    const std::vector<std::pair<std::string, json>> changes = {
        {"seed", 5}, {"replicas", 11}, {"T", 0.5}, {"N", json::array({31})}};
    for (const auto& [key, value] : changes) {
        json changed = base;
        changed[key] = value;
        EXPECT_NE(config_hash(make_config(changed, out)), h) << key;
    }
}

TEST(RunExperiment, ZeroControlTiltingIdentityIsExactlyOne)
{
    const fs::path out = scratch("zero");
    const auto cfg     = make_config({{"kind", "tilting-identity"},
                                      {"N", {30}},
                                      {"replicas", 40},
                                      {"params", {{"F", "0"}, {"G", "0"}, {"H", "0"}}}},
                                     out);
    const RunManifest man = run_experiment(cfg);
    EXPECT_TRUE(man.passed);
    const CsvTable t = read_csv(out / "estimates.csv");
    EXPECT_EQ(std::stod(t.rows.at(0).at(t.column("mean"))), 1.0);
    EXPECT_EQ(std::stod(t.rows.at(0).at(t.column("std_error"))), 0.0);
    fs::remove_all(out);
}

TEST(RunExperiment, OracleValidationTable)
{
    const fs::path out = scratch("oracle");
    const auto cfg = make_config({{"kind", "oracle-validation"}, {"N", {3}}, {"replicas", 20000}, {"seed", 3}}, out);
    const RunManifest man = run_experiment(cfg);
    const CsvTable t      = read_csv(out / "distribution.csv");
    double emp = 0.0, exact = 0.0, tv = 0.0;
    for (const auto& row : t.rows) {
        const double e = std::stod(row[t.column("empirical")]), x = std::stod(row[t.column("exact")]);
        emp += e;
        exact += x;
        tv += 0.5 * std::fabs(e - x);
    }
    EXPECT_NEAR(emp, 1.0, 1e-12);
    EXPECT_NEAR(exact, 1.0, 1e-9);
    EXPECT_EQ(man.summary.at("total_variation").at("3").get<double>(), tv);
    EXPECT_LT(tv, 0.03);
    fs::remove_all(out);
}

TEST(RunExperiment, SerialAndParallelPayloadsIdentical)
{
    const fs::path a = scratch("serial"), b = scratch("parallel");
    const json j = {{"kind", "hydro-convergence"}, {"N", {50, 100}}, {"replicas", 12}, {"seed", 8}};
    RunOptions serial, parallel;
    serial.workers   = 1;
    parallel.workers = 4;
    run_experiment(make_config(j, a), serial);
    run_experiment(make_config(j, b), parallel);
    for (const char* f : {"replicas.csv", "convergence.csv"}) {
        EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(RunExperiment, ResumeSkipsFinishedReplicas)
{
    const fs::path out = scratch("resume");
    const json j       = {{"kind", "tilting-identity"}, {"N", {20}}, {"replicas", 60}, {"seed", 2}};
    const auto cfg     = make_config(j, out);
    run_experiment(cfg);
    const std::string full     = read_file(out / "replicas.csv");
    const std::string estimate = read_file(out / "estimates.csv");

    // drop the last 25 rows, as if the run had been interrupted
    std::vector<std::string> lines;
    std::stringstream ss(full);
    for (std::string line; std::getline(ss, line);) {
        lines.push_back(line);
    }
    std::string partial;
    for (std::size_t i = 0; i + 25 < lines.size(); ++i) {
        partial += lines[i] + "\n";
    }
    write_file_atomic(out / "replicas.csv", partial);
    const RunManifest man = run_experiment(cfg);
    EXPECT_EQ(man.resumed_replicas, 35u);
    EXPECT_EQ(read_file(out / "replicas.csv"), full);
    EXPECT_EQ(read_file(out / "estimates.csv"), estimate);

    // a different config does not reuse rows
    auto other = cfg;
    other.seed = 3;
    EXPECT_EQ(run_experiment(other).resumed_replicas, 0u);
    fs::remove_all(out);
}

TEST(RunExperiment, DoesNotMutateInputs)
{
    const fs::path out   = scratch("mutate");
    const auto cfg       = make_config({{"kind", "rate-zero"}, {"params", {{"random_controls", 5}}}}, out);
    const std::string before = read_file(cfg.model_path);
    const ExperimentConfig copy = cfg;
    run_experiment(cfg);
    EXPECT_EQ(read_file(cfg.model_path), before);
    EXPECT_EQ(cfg.canonical(), copy.canonical());
    fs::remove_all(out);
}

TEST(WriteOutputs, ReadBackIsBitwiseIdentical)
{
    const fs::path out = scratch("write");
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    ResultTable t{"values", {"a", "b"}, {}};
    for (int i = 0; i < 200; ++i) {
        t.rows.push_back({n(rng) * 1e-7, n(rng) * 1e9});
    }
    RunManifest man;
    const auto files = write_outputs(out, {t}, man);
    EXPECT_EQ(files.front(), "values.csv");
    const CsvTable back = read_csv(out / "values.csv");
    ASSERT_EQ(back.rows.size(), t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        EXPECT_EQ(std::stod(back.rows[i][0]), t.rows[i][0]);
        EXPECT_EQ(std::stod(back.rows[i][1]), t.rows[i][1]);
    }
    EXPECT_TRUE(fs::exists(out / "manifest.json"));
    fs::remove_all(out);
}

TEST(WriteOutputs, ConcurrentWritersDoNotInterleave)
{
    std::vector<std::thread> threads;
    std::vector<fs::path> dirs;
    for (int w = 0; w < 8; ++w) {
        dirs.push_back(scratch("concurrent" + std::to_string(w)));
    }
    for (int w = 0; w < 8; ++w) {
        threads.emplace_back([&, w] {
            ResultTable t{"data", {"writer", "row"}, {}};
            for (int i = 0; i < 2000; ++i) {
                t.rows.push_back({static_cast<double>(w), static_cast<double>(i)});
            }
            RunManifest man;
            man.kind = "writer" + std::to_string(w);
            for (int rep = 0; rep < 5; ++rep) {
                write_outputs(dirs[static_cast<std::size_t>(w)], {t}, man);
            }
        });
    }
    for (auto& t : threads) {
        t.join();
    }
    for (int w = 0; w < 8; ++w) {
        const CsvTable back = read_csv(dirs[static_cast<std::size_t>(w)] / "data.csv");
        ASSERT_EQ(back.rows.size(), 2000u);
        for (std::size_t i = 0; i < back.rows.size(); ++i) {
            EXPECT_EQ(std::stod(back.rows[i][0]), w);
            EXPECT_EQ(std::stod(back.rows[i][1]), static_cast<double>(i));
        }
        const json m = json::parse(read_file(dirs[static_cast<std::size_t>(w)] / "manifest.json"));
        EXPECT_EQ(m.at("kind"), "writer" + std::to_string(w));
        fs::remove_all(dirs[static_cast<std::size_t>(w)]);
    }
}

TEST(Report, SummarizesRun)
{
    const fs::path out = scratch("report");
    run_experiment(make_config({{"kind", "rate-zero"}, {"params", {{"random_controls", 3}}}}, out));
    const std::string text = experiment_report(out);
    EXPECT_NE(text.find("rate-zero"), std::string::npos);
    EXPECT_NE(text.find("PASS I_ini_at_law"), std::string::npos);
    EXPECT_EQ(code_of([] { experiment_report("/nonexistent_dir"); }), ErrorCode::IoError);
    fs::remove_all(out);
}
