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

#include "seirlab/trajectory.hpp"
#include "seirlab/io.hpp"

#include "json.hpp"

#include <algorithm>
#include <sstream>

namespace seir
{

const char* to_string(Transition t)
{
    switch (t) {
    case Transition::SE:
        return "SE";
    case Transition::EI:
        return "EI";
    case Transition::IR:
        return "IR";
    }
    return "?";
}

std::size_t Configuration::count(State s) const
{
    return static_cast<std::size_t>(std::count(states.begin(), states.end(), static_cast<std::uint8_t>(s)));
}

Configuration Trajectory::state_at(double t) const
{
    Configuration c = initial;
    for (const Event& e : events) {
        if (e.time > t) {
            break;
        }
        c.states[e.vertex] = static_cast<std::uint8_t>(static_cast<int>(e.kind) + 1);
    }
    return c;
}

Configuration Trajectory::final_state() const
{
    Configuration c = initial;
    for (const Event& e : events) {
        c.states[e.vertex] = static_cast<std::uint8_t>(static_cast<int>(e.kind) + 1);
    }
    return c;
}

std::string check_trajectory(const Trajectory& traj)
{
    const std::size_t N = traj.size();
    if (traj.events.size() > 3 * N) {
        return "more than 3N events";
    }
    std::vector<std::uint8_t> s = traj.initial.states;
    for (std::uint8_t v : s) {
        if (v > 3) {
            return "state outside {0,1,2,3}";
        }
    }
    double last = 0.0;
    for (std::size_t n = 0; n < traj.events.size(); ++n) {
        const Event& e = traj.events[n];
        if (!(e.time > last) || e.time > traj.horizon) {
            return "event " + std::to_string(n) + " out of order or beyond horizon";
        }
        last = e.time;
        if (e.vertex >= N) {
            return "event " + std::to_string(n) + " names an unknown vertex";
        }
        if (s[e.vertex] != static_cast<std::uint8_t>(e.kind)) {
            return "event " + std::to_string(n) + " does not follow S->E->I->R";
        }
        s[e.vertex] = static_cast<std::uint8_t>(static_cast<int>(e.kind) + 1);
    }
    return {};
}

void write_trajectory(const Trajectory& traj, const std::filesystem::path& csv, const std::filesystem::path& manifest,
                      std::uint64_t seed, const std::string& model_hash, const std::string& tilt_hash)
{
    std::ostringstream out;
    out << "time,vertex,transition\n";
    for (const Event& e : traj.events) {
        out << format_number(e.time) << ',' << e.vertex << ',' << to_string(e.kind) << '\n';
    }
    write_file_atomic(csv, out.str());

    std::string initial(traj.initial.states.size(), '0');
    for (std::size_t i = 0; i < initial.size(); ++i) {
        initial[i] = static_cast<char>('0' + traj.initial.states[i]);
    }
    nlohmann::json j;
    j["N"]          = traj.size();
    j["T"]          = traj.horizon;
    j["seed"]       = seed;
    j["model_hash"] = model_hash;
    j["tilt_hash"]  = tilt_hash;
    j["events"]     = traj.events.size();
    j["initial"]    = initial;
    write_file_atomic(manifest, j.dump(2) + "\n");
}

} // namespace seir
