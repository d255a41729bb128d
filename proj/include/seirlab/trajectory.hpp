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

#ifndef SEIRLAB_TRAJECTORY_HPP
#define SEIRLAB_TRAJECTORY_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace seir
{

enum class State : std::uint8_t
{
    S = 0,
    E = 1,
    I = 2,
    R = 3
};

enum class Transition : std::uint8_t
{
    SE = 0,
    EI = 1,
    IR = 2
};

const char* to_string(Transition t);

/// Vertex i sits at position i/N on the torus.
struct Configuration {
    std::vector<std::uint8_t> states;

    std::size_t size() const
    {
        return states.size();
    }
    std::size_t count(State s) const;

    friend bool operator==(const Configuration&, const Configuration&) = default;
};

struct Event {
    double time;
    std::uint32_t vertex;
    Transition kind;

    friend bool operator==(const Event&, const Event&) = default;
};

struct Trajectory {
    Configuration initial;
    std::vector<Event> events;
    double horizon = 0.0;

    std::size_t size() const
    {
        return initial.size();
    }

    /// State after all events with time <= t.
    Configuration state_at(double t) const;
    Configuration final_state() const;

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Checks time ordering, per-vertex S->E->I->R order and the 3N bound. Returns an empty string when valid.
std::string check_trajectory(const Trajectory& traj);

/// CSV `time,vertex,transition` plus a JSON manifest next to it.
void write_trajectory(const Trajectory& traj, const std::filesystem::path& csv, const std::filesystem::path& manifest,
                      std::uint64_t seed, const std::string& model_hash, const std::string& tilt_hash);

} // namespace seir

#endif // SEIRLAB_TRAJECTORY_HPP
