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

#include "seirlab/hydro.hpp"
#include "seirlab/error.hpp"
#include "seirlab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

namespace seir
{

InfectionOperator::InfectionOperator(const RateModel& model)
    : m_M(model.grid_size())
    , m_product(model.product_form)
{
    if (m_product) {
        m_l1 = model.lambda1->values();
        m_l2 = model.lambda2->values();
    }
    else {
        m_kernel = model.kernel->values();
    }
}

void InfectionOperator::apply(const double* w, double* out) const
{
    const double inv_m = 1.0 / static_cast<double>(m_M);
    if (m_product) {
        double s = 0.0;
        for (std::size_t n = 0; n < m_M; ++n) {
            s += m_l2[n] * w[n];
        }
        s *= inv_m;
        for (std::size_t m = 0; m < m_M; ++m) {
            out[m] = m_l1[m] * s;
        }
        return;
    }
    for (std::size_t m = 0; m < m_M; ++m) {
        double s        = 0.0;
        const double* k = &m_kernel[m * m_M];
        for (std::size_t n = 0; n < m_M; ++n) {
            s += k[n] * w[n];
        }
        out[m] = s * inv_m;
    }
}

std::vector<double> InfectionOperator::apply(const std::vector<double>& w) const
{
    std::vector<double> out(m_M);
    apply(w.data(), out.data());
    return out;
}

namespace
{

constexpr std::size_t default_steps = 2000;

using Rhs = std::function<void(double, const std::vector<double>&, std::vector<double>&)>;

/// Node states y(t_j), j = 0..J, concatenated.
std::vector<double> integrate(const Rhs& f, const std::vector<double>& y0, double T, std::size_t J, Integrator method)
{
    const std::size_t n = y0.size();
    const double h      = T / static_cast<double>(J);
    std::vector<double> out((J + 1) * n);
    std::copy(y0.begin(), y0.end(), out.begin());
    std::vector<double> y = y0, k1(n), k2(n), k3(n), k4(n), tmp(n), prev(n);
    for (std::size_t j = 0; j < J; ++j) {
        const double t = h * static_cast<double>(j);
        if (method == Integrator::RungeKutta4) {
            f(t, y, k1);
            for (std::size_t i = 0; i < n; ++i) {
                tmp[i] = y[i] + 0.5 * h * k1[i];
            }
            f(t + 0.5 * h, tmp, k2);
            for (std::size_t i = 0; i < n; ++i) {
                tmp[i] = y[i] + 0.5 * h * k2[i];
            }
            f(t + 0.5 * h, tmp, k3);
            for (std::size_t i = 0; i < n; ++i) {
                tmp[i] = y[i] + h * k3[i];
            }
            f(t + h, tmp, k4);
            for (std::size_t i = 0; i < n; ++i) {
                y[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
            }
        }
        else {
            // Trapezoid rule solved by fixed-point iteration; the contraction factor is h/2 times the Lipschitz constant.
            f(t, y, k1);
            for (std::size_t i = 0; i < n; ++i) {
                tmp[i] = y[i] + h * k1[i];
            }
            for (int iter = 0; iter < 100; ++iter) {
                f(t + h, tmp, k2);
                double change = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double next = y[i] + 0.5 * h * (k1[i] + k2[i]);
                    change            = std::max(change, std::fabs(next - tmp[i]));
                    tmp[i]            = next;
                }
                if (change < 1e-15) {
                    break;
                }
            }
            y = tmp;
        }
        std::copy(y.begin(), y.end(), out.begin() + static_cast<std::ptrdiff_t>((j + 1) * n));
    }
    return out;
}

double halving_error(const std::vector<double>& coarse, const std::vector<double>& fine, std::size_t n, std::size_t J)
{
    double err = 0.0;
    for (std::size_t j = 0; j <= J; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            err = std::max(err, std::fabs(coarse[j * n + i] - fine[2 * j * n + i]));
        }
    }
    return err;
}

struct HydroSystem {
    const RateModel& model;
    InfectionOperator infection;
    std::size_t M;
    mutable std::vector<double> a;

    explicit HydroSystem(const RateModel& m)
        : model(m)
        , infection(m)
        , M(m.grid_size())
        , a(m.grid_size())
    {
    }

    void operator()(double, const std::vector<double>& y, std::vector<double>& dy) const
    {
        const double* S = y.data();
        const double* E = S + M;
        const double* I = E + M;
        infection.apply(I, a.data());
        const auto& psi = model.psi.values();
        const auto& phi = model.phi.values();
        for (std::size_t m = 0; m < M; ++m) {
            const double flow = S[m] * a[m];
            dy[m]             = -flow;
            dy[M + m]         = flow - psi[m] * E[m];
            dy[2 * M + m]     = psi[m] * E[m] - phi[m] * I[m];
        }
    }
};

} // namespace

DensityPath solve_hydrodynamic(const RateModel& model, const std::array<TorusFunction, 3>& init, double T,
                               const SolverSettings& settings)
{
    validate_rates(model);
    const std::size_t M = model.grid_size();
    for (const auto& f : init) {
        if (f.size() != M) {
            throw Error(ErrorCode::GridMismatch, "initial densities and rates use different grids");
        }
    }
    if (!(T > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "horizon must be positive");
    }
    const std::size_t J = settings.steps == 0 ? default_steps : settings.steps;
    std::vector<double> y0(3 * M);
    for (int k = 0; k < 3; ++k) {
        std::copy(init[k].values().begin(), init[k].values().end(), y0.begin() + k * static_cast<std::ptrdiff_t>(M));
    }
    HydroSystem system(model);
    const Rhs rhs       = [&](double t, const std::vector<double>& y, std::vector<double>& dy) { system(t, y, dy); };
    const auto nodes    = integrate(rhs, y0, T, J, settings.integrator);

    DensityPath path(T, J, M, Provenance::Hydrodynamic);
    path.model_hash = model_hash(model);
    path.enable_derivatives();
    std::vector<double> y(3 * M), dy(3 * M);
    for (std::size_t j = 0; j <= J; ++j) {
        std::copy(nodes.begin() + static_cast<std::ptrdiff_t>(j * 3 * M),
                  nodes.begin() + static_cast<std::ptrdiff_t>((j + 1) * 3 * M), y.begin());
        system(path.time(j), y, dy);
        for (int k = 0; k < 3; ++k) {
            for (std::size_t m = 0; m < M; ++m) {
                path.w(j, k, m)  = y[k * M + m];
                path.dw(j, k, m) = dy[k * M + m];
            }
        }
    }
    if (settings.verify) {
        const auto fine     = integrate(rhs, y0, T, 2 * J, settings.integrator);
        path.error_estimate = halving_error(nodes, fine, 3 * M, J);
        if (path.error_estimate > settings.tolerance) {
            throw Error(ErrorCode::StepSizeTooCoarse, "step-halving difference " + std::to_string(path.error_estimate) +
                                                          " exceeds " + std::to_string(settings.tolerance));
        }
    }
    return path;
}

DensityPath solve_hydrodynamic(const RateModel& model, const InitialLaw& law, double T, const SolverSettings& settings)
{
    validate_law(law);
    return solve_hydrodynamic(model, std::array<TorusFunction, 3>{law.rho0, law.rho1, law.rho2}, T, settings);
}

DensityPath solve_hydrodynamic(const ModelBundle& bundle, double T, const SolverSettings& settings)
{
    return solve_hydrodynamic(bundle.model, bundle.law, T, settings);
}

namespace
{

struct TiltedSystem {
    const RateModel& model;
    const ControlPath& control;
    InfectionOperator infection;
    std::size_t M;
    mutable std::vector<double> w3, a;

    TiltedSystem(const RateModel& m, const ControlPath& c)
        : model(m)
        , control(c)
        , infection(m)
        , M(m.grid_size())
        , w3(m.grid_size())
        , a(m.grid_size())
    {
    }

    /// y holds the partial sums; dy receives their derivatives.
    void operator()(double t, const std::vector<double>& y, std::vector<double>& dy) const
    {
        const double* s1 = y.data();
        const double* s2 = s1 + M;
        const double* s3 = s2 + M;
        for (std::size_t m = 0; m < M; ++m) {
            w3[m] = s3[m] - s2[m];
        }
        infection.apply(w3.data(), a.data());
        const auto& psi = model.psi.values();
        const auto& phi = model.phi.values();
        for (std::size_t m = 0; m < M; ++m) {
            const double F = control.at_time(0, t, m);
            const double G = control.at_time(1, t, m);
            const double H = control.at_time(2, t, m);
            dy[m]          = -s1[m] * a[m] * std::exp(-F + G);
            dy[M + m]      = -psi[m] * (s2[m] - s1[m]) * std::exp(-G + H);
            dy[2 * M + m]  = -phi[m] * w3[m] * std::exp(-H);
        }
    }
};

void require_reasonable(const std::array<TorusFunction, 3>& f)
{
    for (std::size_t m = 0; m < f[0].size(); ++m) {
        const double a = f[0][m], b = a + f[1][m], c = b + f[2][m];
        if (!(0.0 < a && a < b && b < c && c < 1.0)) {
            throw Error(ErrorCode::NotReasonable, "initial densities violate 0 < f1 < f1+f2 < f1+f2+f3 < 1 at node " +
                                                      std::to_string(m));
        }
    }
}

} // namespace

DensityPath solve_tilted(const RateModel& model, const std::array<TorusFunction, 3>& init, const ControlPath& control,
                         double T, const SolverSettings& settings, TiltedDiagnostics* diagnostics)
{
    validate_rates(model);
    const std::size_t M = model.grid_size();
    for (const auto& f : init) {
        if (f.size() != M) {
            throw Error(ErrorCode::GridMismatch, "initial densities and rates use different grids");
        }
    }
    if (control.grid_size() != M) {
        throw Error(ErrorCode::GridMismatch, "control and rates use different grids");
    }
    if (control.horizon() < T * (1 - 1e-12)) {
        throw Error(ErrorCode::InvalidArgument, "control does not cover the horizon");
    }
    require_reasonable(init);
    std::size_t J = settings.steps;
    if (J == 0) {
        const std::size_t c = control.steps();
        J                   = c * ((default_steps + c - 1) / c);
    }
    std::vector<double> y0(3 * M);
    for (std::size_t m = 0; m < M; ++m) {
        y0[m]         = init[0][m];
        y0[M + m]     = init[0][m] + init[1][m];
        y0[2 * M + m] = init[0][m] + init[1][m] + init[2][m];
    }
    TiltedSystem system(model, control);
    const Rhs rhs    = [&](double t, const std::vector<double>& y, std::vector<double>& dy) { system(t, y, dy); };
    const auto nodes = integrate(rhs, y0, T, J, settings.integrator);

    DensityPath path(T, J, M, Provenance::Tilted);
    path.model_hash = model_hash(model);
    path.enable_derivatives();
    std::vector<double> y(3 * M), dy(3 * M);
    constexpr double slack = 1e-9;
    double margin          = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j <= J; ++j) {
        std::copy(nodes.begin() + static_cast<std::ptrdiff_t>(j * 3 * M),
                  nodes.begin() + static_cast<std::ptrdiff_t>((j + 1) * 3 * M), y.begin());
        system(path.time(j), y, dy);
        for (std::size_t m = 0; m < M; ++m) {
            const double s1 = y[m], s2 = y[M + m], s3 = y[2 * M + m];
            path.w(j, 0, m)  = s1;
            path.w(j, 1, m)  = s2 - s1;
            path.w(j, 2, m)  = s3 - s2;
            path.dw(j, 0, m) = dy[m];
            path.dw(j, 1, m) = dy[M + m] - dy[m];
            path.dw(j, 2, m) = dy[2 * M + m] - dy[M + m];
            const double local = std::min({s1, s2 - s1, s3 - s2, 1.0 - s3});
            margin             = std::min(margin, local);
            if (local < -slack || !std::isfinite(local)) {
                throw Error(ErrorCode::AdmissibilityLost,
                            "tilted solution leaves the reasonable region at t = " + std::to_string(path.time(j)));
            }
        }
    }
    if (settings.verify) {
        const auto fine     = integrate(rhs, y0, T, 2 * J, settings.integrator);
        path.error_estimate = halving_error(nodes, fine, 3 * M, J);
        if (path.error_estimate > settings.tolerance) {
            throw Error(ErrorCode::StepSizeTooCoarse, "step-halving difference " + std::to_string(path.error_estimate) +
                                                          " exceeds " + std::to_string(settings.tolerance));
        }
    }

    // Integral-equation residual for a few trigonometric test functions, by Simpson's rule per
    // interval with Hermite midpoints (independent of the integrator's stages).
    const std::vector<TorusFunction> tests = {
        TorusFunction::constant(1.0, M),
        TorusFunction::sample([](double u) { return std::cos(2 * std::numbers::pi * u); }, M),
        TorusFunction::sample([](double u) { return std::sin(2 * std::numbers::pi * u); }, M),
        TorusFunction::sample([](double u) { return std::cos(4 * std::numbers::pi * u); }, M)};
    InfectionOperator infection(model);
    std::vector<double> w(3 * M), a(M);
    auto fluxes = [&](double t, const std::vector<double>& wv, std::vector<double>& out) {
        // out[m], out[M+m], out[2M+m]: removal rates out of the three partial sums
        infection.apply(&wv[2 * M], a.data());
        for (std::size_t m = 0; m < M; ++m) {
            const double F = control.at_time(0, t, m), G = control.at_time(1, t, m), H = control.at_time(2, t, m);
            out[m]         = wv[m] * a[m] * std::exp(-F + G);
            out[M + m]     = model.psi[m] * wv[M + m] * std::exp(-G + H);
            out[2 * M + m] = model.phi[m] * wv[2 * M + m] * std::exp(-H);
        }
    };
    auto node_values = [&](std::size_t j) {
        for (int k = 0; k < 3; ++k) {
            for (std::size_t m = 0; m < M; ++m) {
                w[k * M + m] = path.w(j, k, m);
            }
        }
        return w;
    };
    std::vector<double> flux0(3 * M), flux_mid(3 * M), flux1(3 * M), cumulative(3 * M, 0.0), wmid(3 * M);
    fluxes(0.0, node_values(0), flux0);
    double residual = 0.0;
    const double h  = path.dt();
    for (std::size_t j = 0; j < J; ++j) {
        const double t = path.time(j);
        for (int k = 0; k < 3; ++k) {
            for (std::size_t m = 0; m < M; ++m) {
                wmid[k * M + m] = hermite(path.w(j, k, m), path.dw(j, k, m), path.w(j + 1, k, m), path.dw(j + 1, k, m), h, 0.5);
            }
        }
        fluxes(t + 0.5 * h, wmid, flux_mid);
        fluxes(t + h, node_values(j + 1), flux1);
        for (std::size_t i = 0; i < 3 * M; ++i) {
            cumulative[i] += h / 6.0 * (flux0[i] + 4 * flux_mid[i] + flux1[i]);
        }
        flux0 = flux1;
        for (const auto& f : tests) {
            for (int k = 0; k < 3; ++k) {
                double change = 0.0, integral = 0.0;
                for (std::size_t m = 0; m < M; ++m) {
                    double now = 0.0, start = 0.0;
                    for (int r = 0; r <= k; ++r) {
                        now += path.w(j + 1, r, m);
                        start += path.w(0, r, m);
                    }
                    change += (now - start) * f[m];
                    integral += cumulative[k * M + m] * f[m];
                }
                residual = std::max(residual, std::fabs(change + integral) / static_cast<double>(M));
            }
        }
    }
    if (diagnostics != nullptr) {
        diagnostics->integral_residual = residual;
        diagnostics->min_chain_margin  = margin;
    }
    return path;
}

std::vector<double> partial_sum_derivatives(const DensityPath& path)
{
    const std::size_t J = path.steps(), M = path.grid_size();
    std::vector<double> out((J + 1) * 3 * M);
    std::vector<double> series(J + 1);
    for (int k = 0; k < 3; ++k) {
        for (std::size_t m = 0; m < M; ++m) {
            for (std::size_t j = 0; j <= J; ++j) {
                double s = 0.0;
                for (int r = 0; r <= k; ++r) {
                    s += path.w(j, r, m);
                }
                series[j] = s;
            }
            const auto d = finite_difference(series, path.dt());
            for (std::size_t j = 0; j <= J; ++j) {
                out[(j * 3 + static_cast<std::size_t>(k)) * M + m] = d[j];
            }
        }
    }
    return out;
}

AdmissibilityReport is_admissible_D0(const DensityPath& path)
{
    AdmissibilityReport r;
    const std::size_t J = path.steps(), M = path.grid_size();
    r.chain_margin      = std::numeric_limits<double>::infinity();
    r.derivative_margin = std::numeric_limits<double>::infinity();
    for (double v : path.data()) {
        if (!std::isfinite(v)) {
            r.violated_condition = 1;
            r.detail             = "non-finite density value";
            return r;
        }
    }
    for (std::size_t j = 0; j <= J; ++j) {
        for (std::size_t m = 0; m < M; ++m) {
            const double s1 = path.w(j, 0, m);
            const double s2 = s1 + path.w(j, 1, m);
            const double s3 = s2 + path.w(j, 2, m);
            const double margin = std::min({s1, s2 - s1, s3 - s2, 1.0 - s3});
            if (margin < r.chain_margin) {
                r.chain_margin = margin;
                r.node         = j;
            }
        }
    }
    if (!(r.chain_margin > 0.0)) {
        r.violated_condition = 2;
        r.detail             = "strict chain fails at t = " + std::to_string(path.time(r.node));
        return r;
    }
    if (J < 2) {
        r.violated_condition = 3;
        r.detail             = "too few time nodes to estimate derivatives";
        return r;
    }
    const auto d = partial_sum_derivatives(path);
    for (std::size_t n = 0; n < d.size(); ++n) {
        if (-d[n] < r.derivative_margin) {
            r.derivative_margin = -d[n];
            r.node              = n / (3 * M);
        }
    }
    if (!(r.derivative_margin > 0.0)) {
        r.violated_condition = 3;
        r.detail             = "partial sums not strictly decreasing at t = " + std::to_string(path.time(r.node));
        return r;
    }
    r.admissible = true;
    return r;
}

HittingTime hitting_time_limit(const DensityPath& path, const TorusFunction& f1, const TorusFunction& f2,
                               const TorusFunction& f3, double c)
{
    const std::size_t J = path.steps();
    const TorusFunction* f[3] = {&f1, &f2, &f3};
    std::vector<double> v(J + 1, 0.0), dv(J + 1, 0.0);
    const std::size_t M = path.grid_size();
    for (std::size_t j = 0; j <= J; ++j) {
        for (int k = 0; k < 3; ++k) {
            v[j] += path.pairing(j, k, *f[k]);
            if (path.has_derivatives()) {
                double s = 0.0;
                for (std::size_t m = 0; m < M; ++m) {
                    s += path.dw(j, k, m) * (*f[k])(static_cast<double>(m) / M);
                }
                dv[j] += s / static_cast<double>(M);
            }
        }
    }
    if (!path.has_derivatives()) {
        dv = finite_difference(v, path.dt());
    }
    if (!(c > v[0])) {
        throw Error(ErrorCode::OutOfRange, "level at or below the initial value");
    }
    std::size_t j = 1;
    while (j <= J && v[j] < c) {
        ++j;
    }
    if (j > J) {
        throw Error(ErrorCode::OutOfRange, "level not reached within the horizon");
    }
    for (std::size_t n = 0; n <= j; ++n) {
        if (!(dv[n] > 0.0)) {
            throw Error(ErrorCode::NotMonotone,
                        "pairing not strictly increasing at t = " + std::to_string(path.time(n)));
        }
    }
    const double h = path.dt();
    auto value     = [&](double s) {
        return path.has_derivatives() ? hermite(v[j - 1], dv[j - 1], v[j], dv[j], h, s) : v[j - 1] + s * (v[j] - v[j - 1]);
    };
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        (value(mid) < c ? lo : hi) = mid;
    }
    const double s = 0.5 * (lo + hi);
    HittingTime out;
    out.tau        = path.time(j - 1) + s * h;
    out.derivative = path.has_derivatives() ? hermite_slope(v[j - 1], dv[j - 1], v[j], dv[j], h, s) : (v[j] - v[j - 1]) / h;
    return out;
}

} // namespace seir
