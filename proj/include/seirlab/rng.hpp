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

#ifndef SEIRLAB_RNG_HPP
#define SEIRLAB_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace seir
{

using Rng = std::mt19937_64;

/// Generator for stream (seed, stream); distinct pairs give statistically independent sequences.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x5e1a7u};
    return Rng(seq);
}

/// Uniform on [0,1).
inline double uniform01(Rng& rng)
{
    return std::generate_canonical<double, 53>(rng);
}

/// Exponential waiting time with the given total rate.
inline double exponential(Rng& rng, double rate)
{
    return -std::log1p(-uniform01(rng)) / rate;
}

} // namespace seir

#endif // SEIRLAB_RNG_HPP
