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

#ifndef SEIRLAB_MDP_HPP
#define SEIRLAB_MDP_HPP

#include "seirlab/control_path.hpp"
#include "seirlab/density_path.hpp"
#include "seirlab/hydro.hpp"
#include "seirlab/model.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace seir
{

using Triple = std::array<TorusFunction, 3>;

/**
 * Linearization of the limit dynamics around a hydrodynamic path theta.
 *
 * Grid vectors of length 3M stack the S, E, I blocks. For a test triple g the backward
 * generator is
 *   (A g)_1 = a (g2 - g1),  (A g)_2 = psi (g3 - g2),  (A g)_3 = P2 (g2 - g1) - phi g3,
 * where a(u) = int lambda(u, v) theta_I(v) dv and (P2 f)(u) = int theta_S(v) lambda(v, u) f(v) dv.
 * Density perturbations evolve by A^T; test triples are transported by the propagator
 * dPhi/dt = -A Phi. Pairings carry the grid weight 1/M, so grid duality is the plain transpose.
 */
class OperatorSet
{
public:
    OperatorSet(const RateModel& model, const DensityPath& theta);

    std::size_t grid_size() const
    {
        return m_M;
    }
    std::size_t dim() const
    {
        return 3 * m_M;
    }
    std::size_t steps() const
    {
        return m_theta.steps();
    }
    double horizon() const
    {
        return m_theta.horizon();
    }
    double dt() const
    {
        return m_theta.dt();
    }
    const DensityPath& theta() const
    {
        return m_theta;
    }
    const RateModel& model() const
    {
        return m_model;
    }

    /// Linearization data at one instant.
    struct Frame {
        Eigen::VectorXd a, S, E, I;
    };
    /// Frame at node j, or at the midpoint of [t_j, t_{j+1}] when `midpoint` is set.
    const Frame& frame(std::size_t j, bool midpoint = false) const
    {
        return midpoint ? m_mid[j] : m_nodes[j];
    }
    Frame frame_at(double t) const;

    /// out = A g for each column of g.
    void apply_generator(const Frame& fr, const Eigen::MatrixXd& g, Eigen::MatrixXd& out) const;
    /// out = A^T h for each column of h.
    void apply_transpose(const Frame& fr, const Eigen::MatrixXd& h, Eigen::MatrixXd& out) const;

    Eigen::MatrixXd P1(std::size_t j) const;
    Eigen::MatrixXd P2(std::size_t j) const;
    Eigen::MatrixXd P3() const;
    Eigen::MatrixXd P4() const;

    /// Block matrix in the printed layout (-P1, 0, -P2; P1, -P3, P2; 0, P3, -P4).
    Eigen::MatrixXd xi(std::size_t j) const;
    /// Backward generator A: the block transpose of xi(j).
    Eigen::MatrixXd generator(std::size_t j) const;

private:
    Frame make_frame(double t, bool at_node, std::size_t j) const;
    void apply_P2(const Frame& fr, const Eigen::MatrixXd& f, Eigen::MatrixXd& out) const;
    void apply_P2_transpose(const Frame& fr, const Eigen::MatrixXd& h, Eigen::MatrixXd& out) const;

    RateModel m_model;
    DensityPath m_theta;
    std::size_t m_M;
    bool m_product;
    Eigen::VectorXd m_l1, m_l2, m_psi, m_phi;
    Eigen::MatrixXd m_kernel; // lambda(u_m, u_n); unused under product form
    std::vector<Frame> m_nodes, m_mid;
};

/**
 * Phi(t_j) for the theta time grid. A bounded number of matrices is stored; others are
 * recomputed from the nearest earlier checkpoint with the same steps, so results agree to rounding.
 */
class Propagator
{
public:
    Propagator(const RateModel& model, const DensityPath& theta, std::size_t max_checkpoints = 64);

    const OperatorSet& operators() const
    {
        return m_ops;
    }
    std::size_t steps() const
    {
        return m_ops.steps();
    }
    double horizon() const
    {
        return m_ops.horizon();
    }
    std::size_t dim() const
    {
        return m_ops.dim();
    }

    /// Index of the time node at t; InvalidArgument unless t is a node.
    std::size_t node(double t) const;

    Eigen::MatrixXd matrix(std::size_t j) const;

    Eigen::VectorXd apply(double t, const Eigen::VectorXd& g) const;
    Eigen::VectorXd apply_adjoint(double t, const Eigen::VectorXd& nu) const;

    /// Phi(T)^{-1} g and Phi(T)^{-T} nu from the cached factorization.
    Eigen::VectorXd solve_inverse(const Eigen::VectorXd& g) const;
    Eigen::VectorXd solve_inverse_adjoint(const Eigen::VectorXd& nu) const;

    /// Reciprocal condition estimate of Phi(T).
    double rcond() const
    {
        return m_rcond;
    }

    /// Transport y' = -A y from node `from` to node `to`; optionally records every node.
    Eigen::MatrixXd sweep(const Eigen::MatrixXd& y0, std::size_t from, std::size_t to,
                          std::vector<Eigen::MatrixXd>* nodes = nullptr) const;

    /// Solution operator from node `from` to node `to`, started at the identity.
    Eigen::MatrixXd transition(std::size_t from, std::size_t to) const
    {
        return sweep(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(dim())),
                     from, to);
    }

    /// Binary dump: magic, then u64 rows, cols, count, steps, then per checkpoint a u64 node and the matrix.
    void save(const std::filesystem::path& file) const;
    static Propagator load(const std::filesystem::path& file, const RateModel& model, const DensityPath& theta);

    static constexpr double singular_rcond = 1e-12;

private:
    explicit Propagator(OperatorSet ops);
    void factorize();

    OperatorSet m_ops;
    std::vector<std::size_t> m_checkpoint_nodes;
    std::vector<Eigen::MatrixXd> m_checkpoints;
    Eigen::PartialPivLU<Eigen::MatrixXd> m_lu;
    double m_rcond = 0.0;
};

Eigen::VectorXd stack(const Triple& f);
Triple unstack(const Eigen::VectorXd& v, std::size_t M);

struct FormReport {
    double B10 = 0.0;              ///< bilinear form of x and y
    double B4 = 0.0, B5 = 0.0, B6 = 0.0; ///< split of the form of x with itself
    bool has_path = false;
    double B7 = 0.0, B8 = 0.0, B9 = 0.0;
    double l1 = 0.0, l2 = 0.0, J1 = 0.0;
};

/// Quadratic forms along theta (Simpson in time). With W given, also the linear pairings of W against x.
FormReport eval_forms(const RateModel& model, const DensityPath& theta, const ControlPath& x, const ControlPath& y,
                      const DensityPath* W = nullptr);

/// Symmetric form of two initial triples weighted by the law.
double B12(const Triple& g, const Triple& h, const InitialLaw& law);
/// (R4 g)_k = rho_k (g_k - sum_l rho_l g_l).
Triple R4(const Triple& g, const InitialLaw& law);

double J_ini_closed_mdp(const Triple& h, const InitialLaw& law);
/// Variational initial functional: sum_k <pi_k, f_k> - 1/2 int (sum rho f^2 - (sum rho f)^2).
double J2(const Triple& pi, const Triple& f, const InitialLaw& law);

struct SkeletonSettings {
    std::size_t tests       = 10;   ///< random test triples for the dual-method comparison
    std::size_t check_times = 4;    ///< comparison nodes spread evenly over (0, T]
    double tolerance        = 1e-6; ///< combined tolerance; disagreement above 10x raises
    std::uint64_t test_seed = 20240917;
};

struct SkeletonPath {
    DensityPath path; ///< signed densities with exact node derivatives
    ControlPath tilt;
    Triple initial;
    double discrepancy = 0.0; ///< sup over tests and check times of |direct - Duhamel|
};

/// Linear skeleton equation solved by RK4 on the theta grid and cross-checked with the Duhamel formula.
SkeletonPath solve_skeleton(const Propagator& prop, const ControlPath& tilt, const Triple& h_init,
                            const SkeletonSettings& settings = {});

/// Sup over interior nodes and tests of |d/ds W.f - (W.(A f) + r.f)| with a central-difference derivative.
double skeleton_residual(const Propagator& prop, const SkeletonPath& sk, const std::vector<Triple>& tests);

/// Smooth random test triples (low-order Fourier sums) on an M-grid.
std::vector<Triple> random_test_triples(std::size_t count, std::size_t M, std::uint64_t seed);

struct ContraResult {
    double x           = 0.0;
    double value       = 0.0;
    double denominator = 0.0;
    double b12_part    = 0.0;
    double b10_part    = 0.0;
    Triple initial;   ///< optimal initial perturbation
    ControlPath tilt; ///< optimal skeleton tilt
};

/// Minimal rate for sum_k W_{T,k}(f_k) = x, with T the propagator horizon.
ContraResult J_contra(const Propagator& prop, const InitialLaw& law, const Triple& f, double x);

struct HitReport {
    double c = 0.0, tau = 0.0;
    double derivative  = 0.0; ///< d/dt sum_k <theta_k, f_k> at tau
    double J_contra_1  = 0.0;
    double coefficient = 0.0; ///< J_hit(x) = coefficient * x^2
    double b12_part = 0.0, b10_part = 0.0;
};

/// J_hit(x) = x^2 * J_contra,tau(1) * derivative^2, with the propagator rebuilt on [0, tau_c].
double J_hit(double x, double tau_c, const Triple& f, const RateModel& model, const InitialLaw& law,
             const DensityPath& theta, const SolverSettings& settings = {});

/// Hydrodynamic hitting time of level c and the quadratic coefficient of its rate.
HitReport hitting_report(const RateModel& model, const InitialLaw& law, const Triple& f, double c, double T,
                         const SolverSettings& settings = {});

/// JSON {J_contra_1, derivative_at_tau, J_hit_coefficient, denominator_B12_part, denominator_B10_part, tau, c}.
void write_hit_report(const HitReport& report, const std::filesystem::path& json);

} // namespace seir

#endif // SEIRLAB_MDP_HPP
