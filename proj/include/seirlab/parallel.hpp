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

#ifndef SEIRLAB_PARALLEL_HPP
#define SEIRLAB_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace seir
{

/// Worker count from SEIRLAB_WORKERS, falling back to the hardware concurrency (at least 1).
std::size_t worker_count();

/**
 * Calls body(i) for i in [0, n) on up to `workers` threads, handing out indices dynamically.
 * Callers write results into per-index slots, so the outcome never depends on the worker count.
 * The first exception thrown by any body is rethrown after all threads finish.
 */
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& body);

} // namespace seir

#endif // SEIRLAB_PARALLEL_HPP
