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

#include "seirlab/density_path.hpp"
#include "seirlab/error.hpp"
#include "seirlab/io.hpp"
#include "seirlab/model.hpp"
#include "seirlab/numerics.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace seir
{

const char* to_string(Provenance p)
{
    switch (p) {
    case Provenance::Hydrodynamic:
        return "hydrodynamic";
    case Provenance::Tilted:
        return "tilted";
    case Provenance::Skeleton:
        return "skeleton";
    case Provenance::User:
        return "user";
    }
    return "user";
}

namespace
{

Provenance provenance_from(const std::string& s)
{
    if (s == "hydrodynamic") {
        return Provenance::Hydrodynamic;
    }
    if (s == "tilted") {
        return Provenance::Tilted;
    }
    if (s == "skeleton") {
        return Provenance::Skeleton;
    }
    return Provenance::User;
}

} // namespace

DensityPath::DensityPath(double T, std::size_t J, std::size_t M, Provenance provenance)
    : m_T(T)
    , m_J(J)
    , m_M(M)
    , m_provenance(provenance)
    , m_w((J + 1) * 3 * M, 0.0)
{
    if (!(T > 0.0) || J == 0 || M == 0) {
        throw Error(ErrorCode::InvalidArgument, "density path needs T > 0, J >= 1, M >= 1");
    }
}

TorusFunction DensityPath::density(std::size_t j, int k) const
{
    const double* p = slice(j, k);
    return TorusFunction(std::vector<double>(p, p + m_M));
}

double DensityPath::at_time(int k, double t, std::size_t m) const
{
    const double s = std::clamp(t / dt(), 0.0, static_cast<double>(m_J));
    std::size_t j  = std::min(static_cast<std::size_t>(s), m_J - 1);
    const double a = s - static_cast<double>(j);
    if (has_derivatives()) {
        return hermite(w(j, k, m), dw(j, k, m), w(j + 1, k, m), dw(j + 1, k, m), dt(), a);
    }
    return (1 - a) * w(j, k, m) + a * w(j + 1, k, m);
}

double DensityPath::eval(int k, double t, double u) const
{
    const double s = wrap_unit(u) * static_cast<double>(m_M);
    std::size_t m  = std::min(static_cast<std::size_t>(s), m_M - 1);
    const double b = s - static_cast<double>(m);
    return (1 - b) * at_time(k, t, m) + b * at_time(k, t, (m + 1) % m_M);
}

double DensityPath::pairing(std::size_t j, int k, const TorusFunction& f) const
{
    const double* p = slice(j, k);
    double s        = 0.0;
    for (std::size_t m = 0; m < m_M; ++m) {
        s += p[m] * f(static_cast<double>(m) / static_cast<double>(m_M));
    }
    return s / static_cast<double>(m_M);
}

void write_density_path(const DensityPath& path, const std::filesystem::path& csv, const std::filesystem::path& json)
{
    std::ostringstream out;
    out << "t,u,w1,w2,w3\n";
    const std::size_t M = path.grid_size();
    for (std::size_t j = 0; j <= path.steps(); ++j) {
        for (std::size_t m = 0; m < M; ++m) {
            out << format_number(path.time(j)) << ',' << format_number(static_cast<double>(m) / M) << ','
                << format_number(path.w(j, 0, m)) << ',' << format_number(path.w(j, 1, m)) << ','
                << format_number(path.w(j, 2, m)) << '\n';
        }
    }
    write_file_atomic(csv, out.str());
    nlohmann::json meta;
    meta["M"]              = M;
    meta["J"]              = path.steps();
    meta["T"]              = path.horizon();
    meta["dt"]             = path.dt();
    meta["provenance"]     = to_string(path.provenance());
    meta["model_hash"]     = hex_digest(path.model_hash);
    meta["error_estimate"] = path.error_estimate;
    write_file_atomic(json, meta.dump(2) + "\n");
}

DensityPath read_density_path(const std::filesystem::path& csv, const std::filesystem::path& json)
{
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_file(json));
    }
    catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, e.what());
    }
    const std::size_t M = meta.at("M").get<std::size_t>();
    const std::size_t J = meta.at("J").get<std::size_t>();
    DensityPath path(meta.at("T").get<double>(), J, M, provenance_from(meta.at("provenance").get<std::string>()));
    path.model_hash     = std::stoull(meta.at("model_hash").get<std::string>(), nullptr, 16);
    path.error_estimate = meta.value("error_estimate", 0.0);
    const CsvTable table = read_csv(csv);
    if (table.rows.size() != (J + 1) * M) {
        throw Error(ErrorCode::ParseError, "density CSV has the wrong number of rows");
    }
    const std::size_t c1 = table.column("w1"), c2 = table.column("w2"), c3 = table.column("w3");
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const std::size_t j = r / M, m = r % M;
        path.w(j, 0, m)     = std::stod(table.rows[r][c1]);
        path.w(j, 1, m)     = std::stod(table.rows[r][c2]);
        path.w(j, 2, m)     = std::stod(table.rows[r][c3]);
    }
    return path;
}

} // namespace seir
