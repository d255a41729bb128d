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

#include "seirlab/model.hpp"
#include "seirlab/error.hpp"
#include "seirlab/expression.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace seir
{

RateModel RateModel::product(TorusFunction lambda1, TorusFunction lambda2, TorusFunction psi, TorusFunction phi)
{
    RateModel m;
    m.lambda1      = std::move(lambda1);
    m.lambda2      = std::move(lambda2);
    m.psi          = std::move(psi);
    m.phi          = std::move(phi);
    m.product_form = true;
    return m;
}

RateModel RateModel::general(TorusKernel kernel, TorusFunction psi, TorusFunction phi)
{
    RateModel m;
    m.kernel = std::move(kernel);
    m.psi    = std::move(psi);
    m.phi    = std::move(phi);
    return m;
}

double RateModel::lambda(double u, double v) const
{
    if (product_form) {
        return (*lambda1)(u) * (*lambda2)(v);
    }
    return (*kernel)(u, v);
}

TorusKernel RateModel::kernel_on_grid() const
{
    if (product_form) {
        return TorusKernel::outer(*lambda1, *lambda2);
    }
    return *kernel;
}

double ScalingSchedule::gamma(double N) const
{
    return std::pow(N, a);
}

namespace
{

void require_grid(const TorusFunction& f, std::size_t M, const char* name)
{
    if (f.size() != M) {
        throw Error(ErrorCode::GridMismatch, std::string(name) + " has " + std::to_string(f.size()) +
                                                 " samples, expected " + std::to_string(M));
    }
}

void require_positive(const TorusFunction& f, const char* name)
{
    for (std::size_t m = 0; m < f.size(); ++m) {
        if (!(f[m] > 0.0)) {
            throw Error(ErrorCode::NonPositiveRate, std::string(name) + " is not positive at node " + std::to_string(m));
        }
    }
}

} // namespace

void validate_rates(const RateModel& model)
{
    const std::size_t M = model.psi.size();
    if (M == 0) {
        throw Error(ErrorCode::InvalidArgument, "empty rate model");
    }
    require_grid(model.phi, M, "phi");
    require_positive(model.psi, "psi");
    require_positive(model.phi, "phi");
    if (model.product_form) {
        if (!model.lambda1 || !model.lambda2) {
            throw Error(ErrorCode::InvalidArgument, "product form requires lambda1 and lambda2");
        }
        require_grid(*model.lambda1, M, "lambda1");
        require_grid(*model.lambda2, M, "lambda2");
        require_positive(*model.lambda1, "lambda1");
        require_positive(*model.lambda2, "lambda2");
        if (model.kernel) {
            if (model.kernel->size() != M) {
                throw Error(ErrorCode::GridMismatch, "kernel grid differs from rate grid");
            }
            for (std::size_t m = 0; m < M; ++m) {
                for (std::size_t n = 0; n < M; ++n) {
                    const double expect = (*model.lambda1)[m] * (*model.lambda2)[n];
                    if (std::fabs(model.kernel->at(m, n) - expect) > product_form_tolerance) {
                        throw Error(ErrorCode::ProductFormMismatch,
                                    "kernel differs from lambda1*lambda2 at (" + std::to_string(m) + ", " +
                                        std::to_string(n) + ")");
                    }
                }
            }
        }
    }
    else {
        if (!model.kernel) {
            throw Error(ErrorCode::InvalidArgument, "general model requires a kernel");
        }
        if (model.kernel->size() != M) {
            throw Error(ErrorCode::GridMismatch, "kernel grid differs from rate grid");
        }
        for (double v : model.kernel->values()) {
            if (!(v > 0.0)) {
                throw Error(ErrorCode::NonPositiveRate, "kernel is not positive");
            }
        }
    }
}

void validate_law(const InitialLaw& law)
{
    const std::size_t M = law.rho0.size();
    require_grid(law.rho1, M, "rho1");
    require_grid(law.rho2, M, "rho2");
    for (std::size_t m = 0; m < M; ++m) {
        const double r0 = law.rho0[m], r1 = law.rho1[m], r2 = law.rho2[m];
        if (!(r0 > 0.0 && r1 > 0.0 && r2 > 0.0)) {
            throw Error(ErrorCode::InvalidInitialLaw, "initial probability not positive at node " + std::to_string(m));
        }
        if (!(r0 + r1 + r2 < 1.0)) {
            throw Error(ErrorCode::InvalidInitialLaw, "initial probabilities sum to at least 1 at node " + std::to_string(m));
        }
    }
}

void validate_schedule(const ScalingSchedule& schedule)
{
    if (!(schedule.a > 0.5 && schedule.a < 1.0)) {
        throw Error(ErrorCode::InvalidExponent, "scaling exponent " + std::to_string(schedule.a) + " outside (1/2, 1)");
    }
}

ModelBundle validate_model(const RateModel& model, const InitialLaw& law, const ScalingSchedule& schedule)
{
    validate_rates(model);
    validate_law(law);
    validate_schedule(schedule);
    if (law.rho0.size() != model.grid_size()) {
        throw Error(ErrorCode::GridMismatch, "initial law and rates use different grids");
    }
    return ModelBundle{model, law, schedule};
}

ModelBundle validate_model(const ModelBundle& bundle)
{
    return validate_model(bundle.model, bundle.law, bundle.schedule);
}

namespace
{

namespace pt = boost::property_tree;

std::vector<double> parse_list(const std::string& text)
{
    std::string body = text.substr(1, text.size() - 2);
    for (char& c : body) {
        if (c == ',' || c == ';') {
            c = ' ';
        }
    }
    std::istringstream in(body);
    std::vector<double> out;
    std::string token;
    while (in >> token) {
        try {
            out.push_back(std::stod(token));
        }
        catch (const std::exception&) {
            throw Error(ErrorCode::ParseError, "bad sample '" + token + "'");
        }
    }
    return out;
}

std::string trimmed(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\"");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\"");
    return s.substr(b, e - b + 1);
}

TorusFunction function_value(const std::string& raw, std::size_t M, const std::string& key)
{
    const std::string s = trimmed(raw);
    if (s.empty()) {
        throw Error(ErrorCode::ParseError, "empty value for " + key);
    }
    if (s.front() == '[') {
        auto values = parse_list(s);
        if (values.size() != M) {
            throw Error(ErrorCode::GridMismatch, key + " lists " + std::to_string(values.size()) + " samples, grid has " +
                                                     std::to_string(M));
        }
        return TorusFunction(std::move(values));
    }
    const Expression e = Expression::parse(s);
    return TorusFunction::sample([&](double u) { return e(u); }, M);
}

TorusKernel kernel_value(const std::string& raw, std::size_t M)
{
    const std::string s = trimmed(raw);
    if (!s.empty() && s.front() == '[') {
        auto values = parse_list(s);
        if (values.size() != M * M) {
            throw Error(ErrorCode::GridMismatch, "lambda_kernel needs M*M samples");
        }
        return TorusKernel(M, std::move(values));
    }
    const Expression e = Expression::parse(s);
    return TorusKernel::sample([&](double u, double v) { return e(u, v); }, M);
}

std::string required(const pt::ptree& tree, const std::string& key)
{
    auto v = tree.get_optional<std::string>(key);
    if (!v) {
        throw Error(ErrorCode::ParseError, "missing key " + key);
    }
    return *v;
}

} // namespace

ModelBundle parse_model(const std::string& text)
{
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    }
    catch (const pt::ini_parser_error& e) {
        throw Error(ErrorCode::ParseError, e.what());
    }
    const std::size_t M = tree.get<std::size_t>("grid.M", 64);
    if (M == 0) {
        throw Error(ErrorCode::ParseError, "grid.M must be positive");
    }
    RateModel model;
    model.psi = function_value(required(tree, "model.psi"), M, "psi");
    model.phi = function_value(required(tree, "model.phi"), M, "phi");
    const auto kernel = tree.get_optional<std::string>("model.lambda_kernel");
    const auto l1     = tree.get_optional<std::string>("model.lambda1");
    const auto l2     = tree.get_optional<std::string>("model.lambda2");
    if (l1 || l2) {
        if (!l1 || !l2) {
            throw Error(ErrorCode::ParseError, "lambda1 and lambda2 must be given together");
        }
        model.lambda1      = function_value(*l1, M, "lambda1");
        model.lambda2      = function_value(*l2, M, "lambda2");
        model.product_form = true;
        if (kernel) {
            model.kernel = kernel_value(*kernel, M);
        }
    }
    else if (kernel) {
        model.kernel = kernel_value(*kernel, M);
    }
    else {
        throw Error(ErrorCode::ParseError, "model needs lambda1/lambda2 or lambda_kernel");
    }
    InitialLaw law{function_value(required(tree, "initial.rho0"), M, "rho0"),
                   function_value(required(tree, "initial.rho1"), M, "rho1"),
                   function_value(required(tree, "initial.rho2"), M, "rho2")};
    ScalingSchedule schedule{tree.get<double>("scaling.a", 0.75)};
    return validate_model(model, law, schedule);
}

ModelBundle load_model(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open model file " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_model(buffer.str());
}

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed)
{
    const auto* p   = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

namespace
{

std::uint64_t mix(std::uint64_t h, const std::vector<double>& v)
{
    const std::uint64_t n = v.size();
    h                     = fnv1a(&n, sizeof n, h);
    return fnv1a(v.data(), v.size() * sizeof(double), h);
}

} // namespace

std::uint64_t model_hash(const RateModel& model)
{
    std::uint64_t h = fnv1a("rates", 5);
    h               = mix(h, model.psi.values());
    h               = mix(h, model.phi.values());
    const unsigned char flag = model.product_form ? 1 : 0;
    h                        = fnv1a(&flag, 1, h);
    if (model.lambda1) {
        h = mix(h, model.lambda1->values());
    }
    if (model.lambda2) {
        h = mix(h, model.lambda2->values());
    }
    if (model.kernel) {
        h = mix(h, model.kernel->values());
    }
    return h;
}

std::uint64_t model_hash(const ModelBundle& bundle)
{
    std::uint64_t h = model_hash(bundle.model);
    h               = mix(h, bundle.law.rho0.values());
    h               = mix(h, bundle.law.rho1.values());
    h               = mix(h, bundle.law.rho2.values());
    return fnv1a(&bundle.schedule.a, sizeof(double), h);
}

std::string hex_digest(std::uint64_t h)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace seir
