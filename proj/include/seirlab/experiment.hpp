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

#ifndef SEIRLAB_EXPERIMENT_HPP
#define SEIRLAB_EXPERIMENT_HPP

#include "seirlab/parallel.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace seir
{

enum class ExperimentKind
{
    OracleValidation,
    HydroConvergence,
    TiltedLLN,
    TiltingIdentity,
    RateZero,
    CltVariance,
    HittingClt,
    SkeletonAudit
};

const char* to_string(ExperimentKind k);
ExperimentKind parse_kind(const std::string& s);

/**
 * JSON experiment description:
 *   kind, model (INI path, relative to the config file), N (ascending list), replicas, seed, T,
 *   output (directory, relative to the config file), params (kind-specific), thresholds.
 * Missing thresholds take the acceptance defaults for the kind.
 */
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::RateZero;
    std::filesystem::path model_path;
    std::vector<std::size_t> N;
    std::size_t replicas = 0;
    std::uint64_t seed   = 1;
    double T             = 1.0;
    std::filesystem::path output;
    nlohmann::json params     = nlohmann::json::object();
    nlohmann::json thresholds = nlohmann::json::object();

    /// Canonical form (paths as given, defaults filled) used for hashing.
    nlohmann::json canonical() const;
};

ExperimentConfig parse_experiment(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment(const std::filesystem::path& file);

/// Default thresholds of a kind.
nlohmann::json default_thresholds(ExperimentKind kind);

std::string config_hash(const ExperimentConfig& config);

/// Seed of replica r at population N; also the key used to resume partially finished runs.
std::uint64_t replica_seed(std::uint64_t seed, std::size_t N, std::size_t r);

struct RunOptions {
    std::size_t workers = 1;
    bool resume         = true;
};

/// Numeric table written as `<name>.csv` with its header.
struct ResultTable {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

struct RunManifest {
    std::string config_hash;
    std::string version;
    std::string kind;
    std::uint64_t seed = 0;
    nlohmann::json replica_seeds = nlohmann::json::object(); ///< keyed by N
    double wall_clock_seconds    = 0.0;
    std::vector<std::string> files;
    std::size_t resumed_replicas = 0;
    std::size_t failed_replicas  = 0;
    bool passed                  = false;
    nlohmann::json summary       = nlohmann::json::object();

    nlohmann::json to_json() const;
};

/// Runs the experiment and writes replicas.csv, result tables, summary.json and manifest.json.
RunManifest run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

struct RateFit {
    double slope     = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;
};

/// Ordinary least squares of ys on xs.
RateFit fit_rate(const std::vector<double>& xs, const std::vector<double>& ys);

/// Writes the tables, summary.json and manifest.json into dir; returns the file names written.
std::vector<std::string> write_outputs(const std::filesystem::path& dir, const std::vector<ResultTable>& tables,
                                       RunManifest& manifest);

/// Human-readable digest of a finished run directory.
std::string experiment_report(const std::filesystem::path& dir);

} // namespace seir

#endif // SEIRLAB_EXPERIMENT_HPP
