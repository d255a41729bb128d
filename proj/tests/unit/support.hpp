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

#ifndef SEIRLAB_TEST_SUPPORT_HPP
#define SEIRLAB_TEST_SUPPORT_HPP

#include "seirlab/expression.hpp"
#include "seirlab/model.hpp"

#include <string>

namespace seir::testing
{

inline ModelBundle config_model(const std::string& name)
{
    return load_model(std::string(SEIRLAB_CONFIG_DIR) + "/" + name);
}

inline ModelBundle spatial_product()
{
    return config_model("spatial_product.ini");
}

inline ModelBundle spatial_kernel()
{
    return config_model("spatial_kernel.ini");
}

inline ModelBundle homogeneous()
{
    return config_model("homogeneous.ini");
}

inline TorusFunction fn(const std::string& expr, std::size_t M)
{
    const Expression e = Expression::parse(expr);
    return TorusFunction::sample([&](double u) { return e(u); }, M);
}

inline TorusFunction constant(double v, std::size_t M)
{
    return TorusFunction::constant(v, M);
}

/// Product-form model with constant rates.
inline RateModel constant_rates(double l1, double l2, double psi, double phi, std::size_t M)
{
    return RateModel::product(constant(l1, M), constant(l2, M), constant(psi, M), constant(phi, M));
}

inline InitialLaw constant_law(double r0, double r1, double r2, std::size_t M)
{
    return {constant(r0, M), constant(r1, M), constant(r2, M)};
}

} // namespace seir::testing

#endif // SEIRLAB_TEST_SUPPORT_HPP
