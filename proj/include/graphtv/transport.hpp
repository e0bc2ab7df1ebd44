#pragma once

// Conservative transport on graphs.
//
// The spreading flow f and the potential u evolve by the staggered scheme
//     f <- f + dt * alpha (.) grad u
//     u <- u + dt * div(alpha (.) f)
// where alpha is a symmetric, non-negative, single-channel edge field broadcast
// over channels. Eliminating f gives the leapfrog form of u_tt = div(alpha^2 grad u).

#include "graphtv/graph.hpp"

#include <vector>

namespace graphtv {

/// Throws unless alpha is a single-channel slot field, symmetric and non-negative.
void require_conductivity(const Graph& g, const EdgeField& alpha);

/// q = alpha (.) grad u, so q_ij = alpha_ij w_ij (u_i - u_j).
EdgeField extract_flux(const Graph& g, const EdgeField& alpha, const NodeField& u);

/// div(alpha (.) f).
NodeField weighted_divergence(const Graph& g, const EdgeField& alpha, const EdgeField& f);

/// div(alpha^2 (.) grad u): the alpha-weighted Laplacian driving the wave equation.
NodeField weighted_laplacian(const Graph& g, const EdgeField& alpha, const NodeField& u);

/// CFL-style bound 0.5 / sqrt(max(alpha)^2 * operator_norm(g)); infinite when
/// there is nothing to transport.
double transport_dt_max(const Graph& g, const EdgeField& alpha);

struct TransportState {
    NodeField u;      ///< potential
    EdgeField f;      ///< spreading flow, antisymmetric
    EdgeField alpha;  ///< conductivity, symmetric, one channel
    long t = 0;       ///< step index
};

/// State with f = 0 at t = 0.
TransportState make_transport_state(const Graph& g, const NodeField& u0, const EdgeField& alpha);

struct TransportStepResult {
    TransportState state;
    /// Applied increment: u_new_i = u_i + sum_j increment_ij (net amount moved into i from j).
    EdgeField increment;
};

/// One staggered step. Throws StepSizeError when dt is outside (0, dt_max].
TransportStepResult transport_step_detailed(const Graph& g, const TransportState& s, double dt,
                                            double dt_max);
TransportState transport_step(const Graph& g, const TransportState& s, double dt);

/// Longitudinal observations x(t) at strictly increasing time indices.
struct Trajectory {
    std::vector<double> t;
    std::vector<NodeField> x;
};

/// Throws unless time stamps increase strictly and every observation conforms to g.
void require_trajectory(const Graph& g, const Trajectory& traj, std::size_t min_points = 1);

struct Simulation {
    Trajectory trajectory;            ///< steps + 1 points, t = 0..steps
    std::vector<EdgeField> flows;     ///< per-step applied increments
    std::vector<EdgeField> spreading; ///< f after each step
};

/// Integrates transport_step from (u0, f = 0). Throws DivergenceError naming the
/// step when u becomes non-finite.
Simulation simulate(const Graph& g, const NodeField& u0, const EdgeField& alpha, long steps, double dt);

/// u_next = 2u - u_prev + dt^2 div(alpha^2 grad u).
NodeField wave_step(const Graph& g, const NodeField& u, const NodeField& u_prev, const EdgeField& alpha, double dt);

/// Discrete energy conserved by wave_step:
/// 1/2 ||(u - u_prev)/dt||^2 + 1/2 <alpha grad u, alpha grad u_prev>.
double wave_energy(const Graph& g, const NodeField& u, const NodeField& u_prev, const EdgeField& alpha, double dt);

/// Sum per-step increments over consecutive blocks of `stride` steps.
std::vector<EdgeField> accumulate_intervals(const std::vector<EdgeField>& per_step, long stride);

/// Pearson correlation of two flow sequences over the lo->hi slot of every edge
/// and every interval. NaN when either side has zero variance.
double flow_correlation(const Graph& g, const std::vector<EdgeField>& a, const std::vector<EdgeField>& b);

}  // namespace graphtv
