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

#ifndef SEIRLAB_NUMERICS_HPP
#define SEIRLAB_NUMERICS_HPP

#include <cstddef>
#include <vector>

namespace seir
{

/// Composite trapezoid rule on uniformly spaced samples.
double trapezoid(const std::vector<double>& y, double dt);

/// Composite Simpson rule; an odd number of intervals finishes with the 3/8 rule.
double simpson(const std::vector<double>& y, double dt);

/// Second-order finite differences: central inside, one-sided three-point at the ends.
std::vector<double> finite_difference(const std::vector<double>& y, double dt);

/// Fourth-order finite differences (five-point inside, one-sided near the ends).
std::vector<double> finite_difference4(const std::vector<double>& y, double dt);

/// Cubic Hermite value at fraction s in [0,1] of an interval of length h.
inline double hermite(double y0, double d0, double y1, double d1, double h, double s)
{
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0 + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * d1;
}

/// Derivative of the Hermite interpolant with respect to time.
inline double hermite_slope(double y0, double d0, double y1, double d1, double h, double s)
{
    const double s2 = s * s;
    return ((6 * s2 - 6 * s) * y0 + (3 * s2 - 4 * s + 1) * h * d0 + (-6 * s2 + 6 * s) * y1 + (3 * s2 - 2 * s) * h * d1) /
           h;
}

} // namespace seir

#endif // SEIRLAB_NUMERICS_HPP
