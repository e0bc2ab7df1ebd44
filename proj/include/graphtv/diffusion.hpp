#pragma once

#include "graphtv/graph.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace graphtv {

// ---------------------------------------------------------------------------
// Heat-kernel diffusion
// ---------------------------------------------------------------------------

/// Largest stable explicit-Euler step for dx/dt = lap x: 0.9 / operator_norm(g).
/// Infinite on an edgeless graph.
double heat_tau_max(const Graph& g);

/// x + tau * lap x. Throws StepSizeError unless 0 < tau <= tau_max; `tau_max`
/// defaults to heat_tau_max(g) and may be passed in to avoid recomputing it.
NodeField heat_step(const Graph& g, const NodeField& x, double tau,
                    std::optional<double> tau_max = std::nullopt);

// ---------------------------------------------------------------------------
// Total-variation diffusion (diffusion-clip iteration)
// ---------------------------------------------------------------------------

/// Sum over undirected edges and channels of |w_ij (x_i - x_j)|.
double total_variation(const Graph& g, const NodeField& x);

/// ||x - x0||^2 + lambda * total_variation(x).
double tv_objective(const Graph& g, const NodeField& x, const NodeField& x0, double lambda);

/// Projection of b onto [-cap, cap].
inline double clip(double b, double cap) { return b > cap ? cap : (b < -cap ? -cap : b); }
EdgeField clip(const EdgeField& b, double cap);

/// Adjoint of the gradient when the edge inner product counts each undirected
/// edge once: half of gradient_transpose. The primal half-step uses it so the
/// fixed point minimizes tv_objective (unordered TV) rather than twice its TV term.
NodeField dc_adjoint(const Graph& g, const EdgeField& z);

/// Safety factor applied to operator_norm when choosing beta.
inline constexpr double kBetaSafety = 1.1;

/// Primal/dual iterate of the unit-cap diffusion-clip iteration.
struct DCState {
    NodeField x;    ///< primal iterate
    EdgeField z;    ///< dual iterate, |z| <= 1
    NodeField x0;   ///< data anchor
    double lambda = 1.0;
    double beta = 0.0;
    int iter = 0;
};

/// Initial state: x = x0, z = 0, beta = kBetaSafety * operator_norm(g) unless given.
DCState dc_init(const Graph& g, const NodeField& x0, double lambda, std::optional<double> beta = std::nullopt);

/// One alternation:
///   x <- x0 - (lambda/2) dc_adjoint(z)
///   z <- clip(z + 2/(beta lambda) grad x, 1)
DCState dc_step(const Graph& g, const DCState& s);

struct TVReport {
    std::vector<double> primal_objective;  ///< tv_objective after each iteration
    double max_abs_z = 0.0;                ///< largest |z| seen over all iterations
    bool converged = false;
    int iterations = 0;
};

struct DCResult {
    NodeField x;
    EdgeField z;
    TVReport report;
};

struct DCSolveOptions {
    int max_iters = 1000;
    double tol = 1e-8;         ///< relative objective change
    int window = 3;            ///< consecutive iterations below tol required
    std::optional<double> beta;
};

/// Iterates dc_step from z = 0 until the relative objective change stays below
/// tol for `window` consecutive iterations, or max_iters. Throws DivergenceError
/// on a non-finite objective.
DCResult dc_solve(const Graph& g, const NodeField& x0, double lambda, const DCSolveOptions& opts = {});

/// Single diffusion-clip alternation anchored at x_prev, as used inside a GNN.
/// Returns (x_new, z_new).
std::pair<NodeField, EdgeField> dc_layer_apply(const Graph& g, const NodeField& x_prev,
                                               const EdgeField& z_prev, double lambda, double beta);

}  // namespace graphtv
