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

#include "seirlab/numerics.hpp"
#include "seirlab/error.hpp"

namespace seir
{

double trapezoid(const std::vector<double>& y, double dt)
{
    if (y.size() < 2) {
        return 0.0;
    }
    double s = 0.5 * (y.front() + y.back());
    for (std::size_t j = 1; j + 1 < y.size(); ++j) {
        s += y[j];
    }
    return s * dt;
}

namespace
{

double simpson_even(const std::vector<double>& y, std::size_t first, std::size_t intervals, double dt)
{
    double s = y[first] + y[first + intervals];
    for (std::size_t j = 1; j < intervals; ++j) {
        s += (j % 2 == 1 ? 4.0 : 2.0) * y[first + j];
    }
    return s * dt / 3.0;
}

} // namespace

double simpson(const std::vector<double>& y, double dt)
{
    const std::size_t n = y.empty() ? 0 : y.size() - 1;
    if (n == 0) {
        return 0.0;
    }
    if (n == 1) {
        return 0.5 * dt * (y[0] + y[1]);
    }
    if (n % 2 == 0) {
        return simpson_even(y, 0, n, dt);
    }
    const std::size_t k = n - 3;
    double s            = k > 0 ? simpson_even(y, 0, k, dt) : 0.0;
    s += 3.0 * dt / 8.0 * (y[k] + 3 * y[k + 1] + 3 * y[k + 2] + y[k + 3]);
    return s;
}

std::vector<double> finite_difference(const std::vector<double>& y, double dt)
{
    const std::size_t n = y.size();
    if (n < 3) {
        throw Error(ErrorCode::InvalidArgument, "finite differences need at least three samples");
    }
    std::vector<double> d(n);
    d[0]     = (-3 * y[0] + 4 * y[1] - y[2]) / (2 * dt);
    d[n - 1] = (3 * y[n - 1] - 4 * y[n - 2] + y[n - 3]) / (2 * dt);
    for (std::size_t j = 1; j + 1 < n; ++j) {
        d[j] = (y[j + 1] - y[j - 1]) / (2 * dt);
    }
    return d;
}

std::vector<double> finite_difference4(const std::vector<double>& y, double dt)
{
    const std::size_t n = y.size();
    if (n < 5) {
        return finite_difference(y, dt);
    }
    std::vector<double> d(n);
    for (std::size_t j = 2; j + 2 < n; ++j) {
        d[j] = (-y[j + 2] + 8 * y[j + 1] - 8 * y[j - 1] + y[j - 2]) / (12 * dt);
    }
    auto forward = [&](std::size_t j) {
        return (-25 * y[j] + 48 * y[j + 1] - 36 * y[j + 2] + 16 * y[j + 3] - 3 * y[j + 4]) / (12 * dt);
    };
    auto skewed = [&](std::size_t j) { // nodes j-1 .. j+3
        return (-3 * y[j - 1] - 10 * y[j] + 18 * y[j + 1] - 6 * y[j + 2] + y[j + 3]) / (12 * dt);
    };
    d[0]     = forward(0);
    d[1]     = skewed(1);
    d[n - 1] = -(-25 * y[n - 1] + 48 * y[n - 2] - 36 * y[n - 3] + 16 * y[n - 4] - 3 * y[n - 5]) / (12 * dt);
    d[n - 2] = -(-3 * y[n - 1] - 10 * y[n - 2] + 18 * y[n - 3] - 6 * y[n - 4] + y[n - 5]) / (12 * dt);
    return d;
}

} // namespace seir
