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

#include "seirlab/mdp.hpp"
#include "seirlab/error.hpp"
#include "seirlab/io.hpp"
#include "seirlab/ldp.hpp"
#include "seirlab/numerics.hpp"
#include "seirlab/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

namespace seir
{

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace
{

Index idx(std::size_t n)
{
    return static_cast<Index>(n);
}

} // namespace

OperatorSet::OperatorSet(const RateModel& model, const DensityPath& theta)
    : m_model(model)
    , m_theta(theta)
    , m_M(model.grid_size())
    , m_product(model.product_form)
{
    if (theta.grid_size() != m_M) {
        throw Error(ErrorCode::GridMismatch, "hydrodynamic path and rates use different grids");
    }
    if (theta.steps() == 0) {
        throw Error(ErrorCode::InvalidArgument, "hydrodynamic path has no time steps");
    }
    const Index M = idx(m_M);
    m_psi         = Eigen::Map<const VectorXd>(model.psi.values().data(), M);
    m_phi         = Eigen::Map<const VectorXd>(model.phi.values().data(), M);
    if (m_product) {
        m_l1 = Eigen::Map<const VectorXd>(model.lambda1->values().data(), M);
        m_l2 = Eigen::Map<const VectorXd>(model.lambda2->values().data(), M);
    }
    else {
        // Row-major samples lambda(u_m, v_n).
        m_kernel = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            model.kernel->values().data(), M, M);
    }
    const std::size_t J = theta.steps();
    m_nodes.reserve(J + 1);
    m_mid.reserve(J);
    for (std::size_t j = 0; j <= J; ++j) {
        m_nodes.push_back(make_frame(theta.time(j), true, j));
    }
    for (std::size_t j = 0; j < J; ++j) {
        m_mid.push_back(make_frame(theta.time(j) + 0.5 * theta.dt(), false, j));
    }
}

OperatorSet::Frame OperatorSet::make_frame(double t, bool at_node, std::size_t j) const
{
    const Index M = idx(m_M);
    Frame fr;
    fr.S.resize(M);
    fr.E.resize(M);
    fr.I.resize(M);
    for (std::size_t m = 0; m < m_M; ++m) {
        const Index i = idx(m);
        fr.S[i]       = at_node ? m_theta.w(j, 0, m) : m_theta.at_time(0, t, m);
        fr.E[i]       = at_node ? m_theta.w(j, 1, m) : m_theta.at_time(1, t, m);
        fr.I[i]       = at_node ? m_theta.w(j, 2, m) : m_theta.at_time(2, t, m);
    }
    if (m_product) {
        fr.a = m_l1 * (m_l2.dot(fr.I) / static_cast<double>(m_M));
    }
    else {
        fr.a = m_kernel * fr.I / static_cast<double>(m_M);
    }
    return fr;
}

OperatorSet::Frame OperatorSet::frame_at(double t) const
{
    return make_frame(t, false, 0);
}

void OperatorSet::apply_P2(const Frame& fr, const MatrixXd& f, MatrixXd& out) const
{
    const double inv_m = 1.0 / static_cast<double>(m_M);
    if (m_product) {
        const VectorXd w = m_l1.cwiseProduct(fr.S) * inv_m;
        out              = m_l2 * (w.transpose() * f);
    }
    else {
        out = m_kernel.transpose() * (f.array().colwise() * fr.S.array()).matrix() * inv_m;
    }
}

void OperatorSet::apply_P2_transpose(const Frame& fr, const MatrixXd& h, MatrixXd& out) const
{
    const double inv_m = 1.0 / static_cast<double>(m_M);
    if (m_product) {
        const VectorXd w = m_l1.cwiseProduct(fr.S) * inv_m;
        out              = w * (m_l2.transpose() * h);
    }
    else {
        out = ((m_kernel * h).array().colwise() * fr.S.array()).matrix() * inv_m;
    }
}

void OperatorSet::apply_generator(const Frame& fr, const MatrixXd& g, MatrixXd& out) const
{
    const Index M = idx(m_M);
    out.resize(g.rows(), g.cols());
    const MatrixXd d12 = g.middleRows(M, M) - g.topRows(M);
    MatrixXd p2;
    apply_P2(fr, d12, p2);
    out.topRows(M)       = (d12.array().colwise() * fr.a.array()).matrix();
    out.middleRows(M, M) = ((g.bottomRows(M) - g.middleRows(M, M)).array().colwise() * m_psi.array()).matrix();
    out.bottomRows(M)    = p2 - (g.bottomRows(M).array().colwise() * m_phi.array()).matrix();
}

void OperatorSet::apply_transpose(const Frame& fr, const MatrixXd& h, MatrixXd& out) const
{
    const Index M = idx(m_M);
    out.resize(h.rows(), h.cols());
    MatrixXd p2t;
    apply_P2_transpose(fr, h.bottomRows(M), p2t);
    const MatrixXd ah1 = (h.topRows(M).array().colwise() * fr.a.array()).matrix();
    const MatrixXd ph2 = (h.middleRows(M, M).array().colwise() * m_psi.array()).matrix();
    out.topRows(M)       = -ah1 - p2t;
    out.middleRows(M, M) = ah1 - ph2 + p2t;
    out.bottomRows(M)    = ph2 - (h.bottomRows(M).array().colwise() * m_phi.array()).matrix();
}

MatrixXd OperatorSet::P1(std::size_t j) const
{
    return m_nodes.at(j).a.asDiagonal();
}

MatrixXd OperatorSet::P2(std::size_t j) const
{
    MatrixXd out;
    apply_P2(m_nodes.at(j), MatrixXd::Identity(idx(m_M), idx(m_M)), out);
    return out;
}

MatrixXd OperatorSet::P3() const
{
    return m_psi.asDiagonal();
}

MatrixXd OperatorSet::P4() const
{
    return m_phi.asDiagonal();
}

MatrixXd OperatorSet::xi(std::size_t j) const
{
    const Index M = idx(m_M);
    MatrixXd X    = MatrixXd::Zero(3 * M, 3 * M);
    const MatrixXd p1 = P1(j), p2 = P2(j), p3 = P3(), p4 = P4();
    X.block(0, 0, M, M)         = -p1;
    X.block(0, 2 * M, M, M)     = -p2;
    X.block(M, 0, M, M)         = p1;
    X.block(M, M, M, M)         = -p3;
    X.block(M, 2 * M, M, M)     = p2;
    X.block(2 * M, M, M, M)     = p3;
    X.block(2 * M, 2 * M, M, M) = -p4;
    return X;
}

MatrixXd OperatorSet::generator(std::size_t j) const
{
    const Index M     = idx(m_M);
    const MatrixXd X  = xi(j);
    MatrixXd A(3 * M, 3 * M);
    for (Index r = 0; r < 3; ++r) {
        for (Index c = 0; c < 3; ++c) {
            A.block(r * M, c * M, M, M) = X.block(c * M, r * M, M, M);
        }
    }
    return A;
}

Propagator::Propagator(OperatorSet ops)
    : m_ops(std::move(ops))
{
}

Propagator::Propagator(const RateModel& model, const DensityPath& theta, std::size_t max_checkpoints)
    : m_ops(model, theta)
{
    const std::size_t J      = steps();
    const std::size_t slots  = std::max<std::size_t>(max_checkpoints, 2) - 1;
    const std::size_t stride = std::max<std::size_t>(1, (J + slots - 1) / slots);
    MatrixXd phi             = MatrixXd::Identity(idx(dim()), idx(dim()));
    m_checkpoint_nodes.push_back(0);
    m_checkpoints.push_back(phi);
    for (std::size_t j = 0; j < J;) {
        const std::size_t next = std::min(J, j + stride);
        phi                    = sweep(phi, j, next);
        m_checkpoint_nodes.push_back(next);
        m_checkpoints.push_back(phi);
        j = next;
    }
    factorize();
}

void Propagator::factorize()
{
    m_lu.compute(m_checkpoints.back());
    m_rcond = m_lu.rcond();
    if (!(m_rcond >= singular_rcond)) {
        throw Error(ErrorCode::SingularPropagator,
                    "propagator at the horizon is ill-conditioned (rcond " + format_number(m_rcond) + ")");
    }
}

std::size_t Propagator::node(double t) const
{
    const double x = t / m_ops.dt();
    const double j = std::round(x);
    if (!(j >= 0.0) || j > static_cast<double>(steps()) || std::fabs(x - j) > 1e-6) {
        throw Error(ErrorCode::InvalidArgument, "time " + format_number(t) + " is not a node of the propagator grid");
    }
    return static_cast<std::size_t>(j);
}

MatrixXd Propagator::sweep(const MatrixXd& y0, std::size_t from, std::size_t to, std::vector<MatrixXd>* nodes) const
{
    if (from > to || to > steps()) {
        throw Error(ErrorCode::InvalidArgument, "sweep must run forward inside the time grid");
    }
    const double h = m_ops.dt();
    MatrixXd y     = y0, k1, k2, k3, k4;
    if (nodes != nullptr) {
        nodes->clear();
        nodes->push_back(y);
    }
    for (std::size_t j = from; j < to; ++j) {
        const auto& f0 = m_ops.frame(j);
        const auto& fm = m_ops.frame(j, true);
        const auto& f1 = m_ops.frame(j + 1);
        m_ops.apply_generator(f0, y, k1);
        m_ops.apply_generator(fm, y - 0.5 * h * k1, k2);
        m_ops.apply_generator(fm, y - 0.5 * h * k2, k3);
        m_ops.apply_generator(f1, y - h * k3, k4);
        y -= h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (nodes != nullptr) {
            nodes->push_back(y);
        }
    }
    return y;
}

MatrixXd Propagator::matrix(std::size_t j) const
{
    if (j > steps()) {
        throw Error(ErrorCode::InvalidArgument, "node beyond the horizon");
    }
    const auto it      = std::upper_bound(m_checkpoint_nodes.begin(), m_checkpoint_nodes.end(), j);
    const std::size_t c = static_cast<std::size_t>(it - m_checkpoint_nodes.begin()) - 1;
    if (m_checkpoint_nodes[c] == j) {
        return m_checkpoints[c];
    }
    return sweep(m_checkpoints[c], m_checkpoint_nodes[c], j);
}

VectorXd Propagator::apply(double t, const VectorXd& g) const
{
    return matrix(node(t)) * g;
}

VectorXd Propagator::apply_adjoint(double t, const VectorXd& nu) const
{
    return matrix(node(t)).transpose() * nu;
}

VectorXd Propagator::solve_inverse(const VectorXd& g) const
{
    return m_lu.solve(g);
}

VectorXd Propagator::solve_inverse_adjoint(const VectorXd& nu) const
{
    return m_lu.transpose().solve(nu);
}

namespace
{

constexpr char propagator_magic[8] = {'S', 'E', 'I', 'R', 'P', 'H', 'I', '1'};

} // namespace

void Propagator::save(const std::filesystem::path& file) const
{
    std::string buf(propagator_magic, sizeof propagator_magic);
    auto put = [&](const void* p, std::size_t n) { buf.append(static_cast<const char*>(p), n); };
    const std::uint64_t header[4] = {dim(), dim(), m_checkpoints.size(), steps()};
    put(header, sizeof header);
    for (std::size_t c = 0; c < m_checkpoints.size(); ++c) {
        const std::uint64_t node = m_checkpoint_nodes[c];
        put(&node, sizeof node);
        put(m_checkpoints[c].data(), sizeof(double) * static_cast<std::size_t>(m_checkpoints[c].size()));
    }
    write_file_atomic(file, buf);
}

Propagator Propagator::load(const std::filesystem::path& file, const RateModel& model, const DensityPath& theta)
{
    const std::string buf = read_file(file);
    std::size_t pos       = 0;
    auto get              = [&](void* p, std::size_t n) {
        if (pos + n > buf.size()) {
            throw Error(ErrorCode::IoError, "truncated propagator file " + file.string());
        }
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    };
    char magic[8];
    get(magic, sizeof magic);
    if (std::memcmp(magic, propagator_magic, sizeof magic) != 0) {
        throw Error(ErrorCode::IoError, "not a propagator file: " + file.string());
    }
    std::uint64_t header[4];
    get(header, sizeof header);
    Propagator p{OperatorSet(model, theta)};
    if (header[0] != p.dim() || header[1] != p.dim() || header[3] != p.steps()) {
        throw Error(ErrorCode::GridMismatch, "propagator file shape does not match the model and path");
    }
    for (std::uint64_t c = 0; c < header[2]; ++c) {
        std::uint64_t node = 0;
        get(&node, sizeof node);
        MatrixXd m(idx(p.dim()), idx(p.dim()));
        get(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
        p.m_checkpoint_nodes.push_back(node);
        p.m_checkpoints.push_back(std::move(m));
    }
    if (p.m_checkpoint_nodes.empty() || p.m_checkpoint_nodes.front() != 0 || p.m_checkpoint_nodes.back() != p.steps() ||
        !std::is_sorted(p.m_checkpoint_nodes.begin(), p.m_checkpoint_nodes.end())) {
        throw Error(ErrorCode::IoError, "propagator file has inconsistent checkpoints");
    }
    p.factorize();
    return p;
}

VectorXd stack(const Triple& f)
{
    const std::size_t M = f[0].size();
    VectorXd v(idx(3 * M));
    for (int k = 0; k < 3; ++k) {
        if (f[k].size() != M) {
            throw Error(ErrorCode::GridMismatch, "triple components use different grids");
        }
        for (std::size_t m = 0; m < M; ++m) {
            v[idx(static_cast<std::size_t>(k) * M + m)] = f[k][m];
        }
    }
    return v;
}

Triple unstack(const VectorXd& v, std::size_t M)
{
    Triple out;
    for (int k = 0; k < 3; ++k) {
        std::vector<double> x(M);
        for (std::size_t m = 0; m < M; ++m) {
            x[m] = v[idx(static_cast<std::size_t>(k) * M + m)];
        }
        out[k] = TorusFunction(std::move(x));
    }
    return out;
}

FormReport eval_forms(const RateModel& model, const DensityPath& theta, const ControlPath& x, const ControlPath& y,
                      const DensityPath* W)
{
    const std::size_t M = model.grid_size(), J = theta.steps();
    if (theta.grid_size() != M || x.grid_size() != M || y.grid_size() != M) {
        throw Error(ErrorCode::GridMismatch, "forms need one spatial grid");
    }
    const double T = theta.horizon();
    if (x.horizon() < T * (1 - 1e-12) || y.horizon() < T * (1 - 1e-12)) {
        throw Error(ErrorCode::GridMismatch, "controls do not cover the path horizon");
    }
    if (W != nullptr && (W->grid_size() != M || W->steps() != J || std::fabs(W->horizon() - T) > 1e-12 * T)) {
        throw Error(ErrorCode::GridMismatch, "path and hydrodynamic solution use different grids");
    }
    InfectionOperator infection(model);
    const TorusKernel K = model.kernel_on_grid();
    const double inv_m  = 1.0 / static_cast<double>(M);
    std::vector<double> b10(J + 1), b4(J + 1), b5(J + 1), b6(J + 1), b7(J + 1), b8(J + 1), b9(J + 1);
    std::vector<double> a(M), d(M), p2(M);
    for (std::size_t j = 0; j <= J; ++j) {
        const double t = theta.time(j);
        infection.apply(theta.slice(j, 2), a.data());
        double s10 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0, s8 = 0, s9 = 0;
        for (std::size_t m = 0; m < M; ++m) {
            const double S = theta.w(j, 0, m), E = theta.w(j, 1, m), I = theta.w(j, 2, m);
            const double Fx = x.at_time(0, t, m), Gx = x.at_time(1, t, m), Hx = x.at_time(2, t, m);
            const double Fy = y.at_time(0, t, m), Gy = y.at_time(1, t, m), Hy = y.at_time(2, t, m);
            const double q4 = S * a[m], q5 = model.psi[m] * E, q6 = model.phi[m] * I;
            s10 += q4 * (Gx - Fx) * (Gy - Fy) + q5 * (Hx - Gx) * (Hy - Gy) + q6 * Hx * Hy;
            s4 += q4 * (Gx - Fx) * (Gx - Fx);
            s5 += q5 * (Hx - Gx) * (Hx - Gx);
            s6 += q6 * Hx * Hx;
            d[m] = Gx - Fx;
        }
        if (W != nullptr) {
            // (P2 d)(u_m) = (1/M) sum_n theta_S(u_n) lambda(u_n, u_m) d(u_n)
            for (std::size_t m = 0; m < M; ++m) {
                double s = 0.0;
                for (std::size_t n = 0; n < M; ++n) {
                    s += theta.w(j, 0, n) * K.at(n, m) * d[n];
                }
                p2[m] = s * inv_m;
            }
            for (std::size_t m = 0; m < M; ++m) {
                const double Gx = x.at_time(1, t, m), Hx = x.at_time(2, t, m);
                s7 += W->w(j, 0, m) * a[m] * d[m] + W->w(j, 2, m) * p2[m];
                s8 += W->w(j, 1, m) * model.psi[m] * (Hx - Gx);
                s9 -= W->w(j, 2, m) * model.phi[m] * Hx;
            }
        }
        b10[j] = s10 * inv_m;
        b4[j]  = s4 * inv_m;
        b5[j]  = s5 * inv_m;
        b6[j]  = s6 * inv_m;
        b7[j]  = s7 * inv_m;
        b8[j]  = s8 * inv_m;
        b9[j]  = s9 * inv_m;
    }
    const double h = theta.dt();
    FormReport r;
    r.B10 = simpson(b10, h);
    r.B4  = simpson(b4, h);
    r.B5  = simpson(b5, h);
    r.B6  = simpson(b6, h);
    if (W != nullptr) {
        r.has_path = true;
        r.B7       = simpson(b7, h);
        r.B8       = simpson(b8, h);
        r.B9       = simpson(b9, h);
        r.l1       = eval_I1(model, *W, x).l1;
        r.l2       = r.l1 - r.B7 - r.B8 - r.B9;
        r.J1       = r.l2 - 0.5 * (r.B4 + r.B5 + r.B6);
    }
    return r;
}

namespace
{

void check_law_grid(const Triple& g, const InitialLaw& law)
{
    for (const auto& x : g) {
        if (x.size() != law.rho0.size()) {
            throw Error(ErrorCode::GridMismatch, "triple and law use different grids");
        }
    }
}

} // namespace

double B12(const Triple& g, const Triple& h, const InitialLaw& law)
{
    check_law_grid(g, law);
    check_law_grid(h, law);
    const std::size_t M = law.rho0.size();
    double s            = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        double sg = 0.0, sh = 0.0, srho = 0.0, diag = 0.0;
        for (int k = 0; k < 3; ++k) {
            const double rho = law.rho(k)[m];
            diag += g[k][m] * h[k][m] / rho;
            sg += g[k][m];
            sh += h[k][m];
            srho += rho;
        }
        s += diag + sg * sh / (1.0 - srho);
    }
    return s / static_cast<double>(M);
}

Triple R4(const Triple& g, const InitialLaw& law)
{
    check_law_grid(g, law);
    const std::size_t M = law.rho0.size();
    std::array<std::vector<double>, 3> out;
    for (auto& v : out) {
        v.resize(M);
    }
    for (std::size_t m = 0; m < M; ++m) {
        double mean = 0.0;
        for (int k = 0; k < 3; ++k) {
            mean += g[k][m] * law.rho(k)[m];
        }
        for (int k = 0; k < 3; ++k) {
            out[k][m] = law.rho(k)[m] * (g[k][m] - mean);
        }
    }
    return {TorusFunction(std::move(out[0])), TorusFunction(std::move(out[1])), TorusFunction(std::move(out[2]))};
}

double J_ini_closed_mdp(const Triple& h, const InitialLaw& law)
{
    return 0.5 * B12(h, h, law);
}

double J2(const Triple& pi, const Triple& f, const InitialLaw& law)
{
    check_law_grid(pi, law);
    check_law_grid(f, law);
    const std::size_t M = law.rho0.size();
    double s            = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        double linear = 0.0, second = 0.0, first = 0.0;
        for (int k = 0; k < 3; ++k) {
            const double rho = law.rho(k)[m];
            linear += pi[k][m] * f[k][m];
            second += rho * f[k][m] * f[k][m];
            first += rho * f[k][m];
        }
        s += linear - 0.5 * (second - first * first);
    }
    return s / static_cast<double>(M);
}

namespace
{

/// Source density r(t) of the skeleton equation for the tilt at time t.
VectorXd source(const OperatorSet& ops, const OperatorSet::Frame& fr, const ControlPath& tilt, double t)
{
    const std::size_t M = ops.grid_size();
    const auto& model   = ops.model();
    VectorXd r(idx(3 * M));
    for (std::size_t m = 0; m < M; ++m) {
        const Index i  = idx(m);
        const double F = tilt.at_time(0, t, m), G = tilt.at_time(1, t, m), H = tilt.at_time(2, t, m);
        const double infection   = fr.S[i] * fr.a[i] * (G - F);
        const double progression = model.psi[m] * fr.E[i] * (H - G);
        r[i]                     = -infection;
        r[idx(M + m)]            = infection - progression;
        r[idx(2 * M + m)]        = progression + model.phi[m] * fr.I[i] * H;
    }
    return r;
}

MatrixXd test_matrix(const std::vector<Triple>& tests, std::size_t M)
{
    MatrixXd out(idx(3 * M), idx(tests.size()));
    for (std::size_t q = 0; q < tests.size(); ++q) {
        out.col(idx(q)) = stack(tests[q]);
    }
    return out;
}

} // namespace

std::vector<Triple> random_test_triples(std::size_t count, std::size_t M, std::uint64_t seed)
{
    Rng rng = make_rng(seed, 0);
    std::normal_distribution<double> normal;
    std::vector<Triple> out;
    for (std::size_t q = 0; q < count; ++q) {
        Triple t;
        for (int k = 0; k < 3; ++k) {
            double c[7];
            for (double& x : c) {
                x = normal(rng);
            }
            t[k] = TorusFunction::sample(
                [&](double u) {
                    double s = c[0];
                    for (int n = 1; n <= 3; ++n) {
                        const double w = 2 * std::numbers::pi * n * u;
                        s += (c[2 * n - 1] * std::cos(w) + c[2 * n] * std::sin(w)) / n;
                    }
                    return s;
                },
                M);
        }
        out.push_back(std::move(t));
    }
    return out;
}

SkeletonPath solve_skeleton(const Propagator& prop, const ControlPath& tilt, const Triple& h_init,
                            const SkeletonSettings& settings)
{
    const OperatorSet& ops = prop.operators();
    const std::size_t M = ops.grid_size(), J = ops.steps();
    const double T = ops.horizon(), h = ops.dt();
    if (tilt.grid_size() != M) {
        throw Error(ErrorCode::GridMismatch, "tilt and propagator use different grids");
    }
    if (tilt.horizon() < T * (1 - 1e-12)) {
        throw Error(ErrorCode::GridMismatch, "tilt does not cover the horizon");
    }
    SkeletonPath sk;
    sk.tilt    = tilt;
    sk.initial = h_init;
    sk.path    = DensityPath(T, J, M, Provenance::Skeleton);
    sk.path.enable_derivatives();
    sk.path.model_hash = ops.theta().model_hash;

    // (a) direct RK4 on densities: w' = A^T w + r.
    std::vector<VectorXd> r_nodes(J + 1);
    for (std::size_t j = 0; j <= J; ++j) {
        r_nodes[j] = source(ops, ops.frame(j), tilt, ops.theta().time(j));
    }
    auto rhs = [&](const OperatorSet::Frame& fr, const VectorXd& r, const MatrixXd& w) {
        MatrixXd out;
        ops.apply_transpose(fr, w, out);
        return MatrixXd(out + r);
    };
    std::vector<VectorXd> w_nodes(J + 1);
    w_nodes[0] = stack(h_init);
    for (std::size_t j = 0; j < J; ++j) {
        const double t      = ops.theta().time(j);
        const auto& fm      = ops.frame(j, true);
        const VectorXd rm   = source(ops, fm, tilt, t + 0.5 * h);
        const MatrixXd& w   = w_nodes[j];
        const MatrixXd k1   = rhs(ops.frame(j), r_nodes[j], w);
        const MatrixXd k2   = rhs(fm, rm, w + 0.5 * h * k1);
        const MatrixXd k3   = rhs(fm, rm, w + 0.5 * h * k2);
        const MatrixXd k4   = rhs(ops.frame(j + 1), r_nodes[j + 1], w + h * k3);
        w_nodes[j + 1]      = w + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    for (std::size_t j = 0; j <= J; ++j) {
        const MatrixXd d = rhs(ops.frame(j), r_nodes[j], w_nodes[j]);
        for (int k = 0; k < 3; ++k) {
            for (std::size_t m = 0; m < M; ++m) {
                const Index i       = idx(static_cast<std::size_t>(k) * M + m);
                sk.path.w(j, k, m)  = w_nodes[j][i];
                sk.path.dw(j, k, m) = d(i, 0);
            }
        }
    }

    // (b) Duhamel: W_t.f = W_0.(Phi_t^{-1} f) + int_0^t r_s.(Phi_s Phi_t^{-1} f) ds.
    const double inv_m = 1.0 / static_cast<double>(M);
    const MatrixXd F   = test_matrix(random_test_triples(settings.tests, M, settings.test_seed), M);
    const std::size_t checks = std::max<std::size_t>(1, std::min(settings.check_times, J));
    std::vector<MatrixXd> transported;
    for (std::size_t q = 1; q <= checks; ++q) {
        const std::size_t jc = static_cast<std::size_t>(std::llround(static_cast<double>(q * J) / static_cast<double>(checks)));
        if (jc == 0) {
            continue;
        }
        const MatrixXd G = prop.matrix(jc).partialPivLu().solve(F);
        prop.sweep(G, 0, jc, &transported);
        std::vector<double> integrand(jc + 1);
        for (Index c = 0; c < F.cols(); ++c) {
            for (std::size_t j = 0; j <= jc; ++j) {
                integrand[j] = r_nodes[j].dot(transported[j].col(c)) * inv_m;
            }
            const double duhamel = w_nodes[0].dot(G.col(c)) * inv_m + simpson(integrand, h);
            const double direct  = w_nodes[jc].dot(F.col(c)) * inv_m;
            sk.discrepancy       = std::max(sk.discrepancy, std::fabs(duhamel - direct));
        }
    }
    if (!(sk.discrepancy <= 10.0 * settings.tolerance)) {
        throw Error(ErrorCode::MethodsDisagree, "direct and Duhamel solutions differ by " + format_number(sk.discrepancy));
    }
    return sk;
}

double skeleton_residual(const Propagator& prop, const SkeletonPath& sk, const std::vector<Triple>& tests)
{
    const OperatorSet& ops = prop.operators();
    const std::size_t M = ops.grid_size(), J = ops.steps();
    if (sk.path.steps() != J || sk.path.grid_size() != M) {
        throw Error(ErrorCode::GridMismatch, "skeleton and propagator use different grids");
    }
    const double inv_m = 1.0 / static_cast<double>(M);
    const MatrixXd F   = test_matrix(tests, M);
    std::vector<VectorXd> w(J + 1);
    for (std::size_t j = 0; j <= J; ++j) {
        w[j].resize(idx(3 * M));
        for (int k = 0; k < 3; ++k) {
            for (std::size_t m = 0; m < M; ++m) {
                w[j][idx(static_cast<std::size_t>(k) * M + m)] = sk.path.w(j, k, m);
            }
        }
    }
    double worst = 0.0;
    MatrixXd AF;
    for (std::size_t j = 1; j < J; ++j) {
        ops.apply_generator(ops.frame(j), F, AF);
        const VectorXd r = source(ops, ops.frame(j), sk.tilt, ops.theta().time(j));
        for (Index c = 0; c < F.cols(); ++c) {
            const double derivative = (w[j + 1].dot(F.col(c)) - w[j - 1].dot(F.col(c))) * inv_m / (2.0 * ops.dt());
            const double expected   = (w[j].dot(AF.col(c)) + r.dot(F.col(c))) * inv_m;
            worst                   = std::max(worst, std::fabs(derivative - expected));
        }
    }
    return worst;
}

ContraResult J_contra(const Propagator& prop, const InitialLaw& law, const Triple& f, double x)
{
    const OperatorSet& ops = prop.operators();
    const std::size_t M = ops.grid_size(), J = ops.steps();
    if (law.rho0.size() != M) {
        throw Error(ErrorCode::GridMismatch, "law and propagator use different grids");
    }
    const VectorXd g = prop.solve_inverse(stack(f));
    std::vector<MatrixXd> path;
    prop.sweep(g, 0, J, &path);
    ControlPath transported(ops.horizon(), J, M);
    for (std::size_t j = 0; j <= J; ++j) {
        for (int k = 0; k < 3; ++k) {
            for (std::size_t m = 0; m < M; ++m) {
                transported.at(k, j, m) = path[j](idx(static_cast<std::size_t>(k) * M + m), 0);
            }
        }
    }
    const Triple r4g = R4(unstack(g, M), law);
    ContraResult out;
    out.x           = x;
    out.b12_part    = B12(r4g, r4g, law);
    out.b10_part    = eval_forms(ops.model(), ops.theta(), transported, transported).B10;
    out.denominator = out.b12_part + out.b10_part;
    if (!(out.denominator > 1e-300) || !std::isfinite(out.denominator)) {
        throw Error(ErrorCode::DegenerateDenominator, "denominator " + format_number(out.denominator));
    }
    out.value     = x * x / (2.0 * out.denominator);
    const double r = x / out.denominator;
    for (int k = 0; k < 3; ++k) {
        std::vector<double> v(M);
        for (std::size_t m = 0; m < M; ++m) {
            v[m] = r * r4g[k][m];
        }
        out.initial[k] = TorusFunction(std::move(v));
    }
    out.tilt = r * transported;
    return out;
}

namespace
{

double pairing_slope(const DensityPath& theta, const Triple& f, double t)
{
    const std::size_t M = theta.grid_size(), J = theta.steps();
    const double h      = theta.dt();
    const double x      = std::clamp(t / h, 0.0, static_cast<double>(J));
    const std::size_t j = std::min(static_cast<std::size_t>(x), J - 1);
    const double s      = x - static_cast<double>(j);
    double total        = 0.0;
    for (int k = 0; k < 3; ++k) {
        for (std::size_t m = 0; m < M; ++m) {
            double d;
            if (theta.has_derivatives()) {
                d = hermite_slope(theta.w(j, k, m), theta.dw(j, k, m), theta.w(j + 1, k, m), theta.dw(j + 1, k, m), h, s);
            }
            else {
                d = (theta.w(j + 1, k, m) - theta.w(j, k, m)) / h;
            }
            total += d * f[k](static_cast<double>(m) / static_cast<double>(M));
        }
    }
    return total / static_cast<double>(M);
}

HitReport hit_at(double tau, double c, const Triple& f, const RateModel& model, const InitialLaw& law,
                 const DensityPath& theta, const SolverSettings& settings)
{
    HitReport r;
    r.c          = c;
    r.tau        = tau;
    r.derivative = pairing_slope(theta, f, tau);
    if (!(r.derivative > 0.0)) {
        throw Error(ErrorCode::NotMonotone, "pairing derivative at the hitting time is " + format_number(r.derivative));
    }
    const DensityPath upto  = solve_hydrodynamic(model, law, tau, settings);
    const Propagator prop(model, upto);
    const ContraResult one  = J_contra(prop, law, f, 1.0);
    r.J_contra_1            = one.value;
    r.b12_part              = one.b12_part;
    r.b10_part              = one.b10_part;
    r.coefficient           = one.value * r.derivative * r.derivative;
    return r;
}

} // namespace

double J_hit(double x, double tau_c, const Triple& f, const RateModel& model, const InitialLaw& law,
             const DensityPath& theta, const SolverSettings& settings)
{
    if (!(tau_c > 0.0) || tau_c > theta.horizon() * (1 + 1e-12)) {
        throw Error(ErrorCode::OutOfRange, "hitting time outside the path horizon");
    }
    return x * x * hit_at(tau_c, std::numeric_limits<double>::quiet_NaN(), f, model, law, theta, settings).coefficient;
}

HitReport hitting_report(const RateModel& model, const InitialLaw& law, const Triple& f, double c, double T,
                         const SolverSettings& settings)
{
    const DensityPath theta = solve_hydrodynamic(model, law, T, settings);
    const HittingTime ht    = hitting_time_limit(theta, f[0], f[1], f[2], c);
    return hit_at(ht.tau, c, f, model, law, theta, settings);
}

void write_hit_report(const HitReport& report, const std::filesystem::path& json)
{
    nlohmann::json j;
    j["c"]                    = report.c;
    j["tau"]                  = report.tau;
    j["J_contra_1"]           = report.J_contra_1;
    j["derivative_at_tau"]    = report.derivative;
    j["J_hit_coefficient"]    = report.coefficient;
    j["denominator_B12_part"] = report.b12_part;
    j["denominator_B10_part"] = report.b10_part;
    write_file_atomic(json, j.dump(2) + "\n");
}

} // namespace seir
