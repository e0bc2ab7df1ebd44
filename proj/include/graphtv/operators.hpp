#pragma once

// Discrete differential operators on a weighted graph.
//
// Conventions:
//   gradient      (grad x)_ij = w_ij (x_i - x_j) on every ordered pair
//   divergence    (div q)_i  = -sum_j w_ij (q_ij - q_ji), the negative adjoint of grad
//   laplacian     lap x = div(grad x) = -2 L_{w^2} x
// Node inner product is the plain sum over nodes and channels; edge inner
// product sums over all ordered slots.

#include "graphtv/graph.hpp"

namespace graphtv {

/// Throws DimensionError unless x has one row per node and at least one column.
void require_node_field(const Graph& g, const NodeField& x, const char* name = "node field");
/// Throws DimensionError unless q has one row per ordered slot and `channels` columns
/// (any positive count when channels == 0).
void require_edge_field(const Graph& g, const EdgeField& q, Eigen::Index channels = 0,
                        const char* name = "edge field");

EdgeField graph_gradient(const Graph& g, const NodeField& x);

NodeField divergence(const Graph& g, const EdgeField& q);

/// Transpose of graph_gradient under the ordered-slot inner product; equals -divergence.
NodeField gradient_transpose(const Graph& g, const EdgeField& q);

NodeField laplacian_apply(const Graph& g, const NodeField& x);

/// Largest eigenvalue of grad^T grad by power iteration with a fixed start vector.
/// Stops once the Rayleigh quotient changes by less than `tol` relative, or after `iters`.
double operator_norm(const Graph& g, int iters = 2000, double tol = 1e-12);

inline double node_inner(const NodeField& x, const NodeField& y) { return (x.array() * y.array()).sum(); }
inline double edge_inner(const EdgeField& p, const EdgeField& q) { return (p.array() * q.array()).sum(); }

/// <grad x, grad x>, summed over channels.
double dirichlet_energy(const Graph& g, const NodeField& x);

/// Max over slots and channels of |q_ij + q_ji|.
double antisymmetry_defect(const Graph& g, const EdgeField& q);

/// Expand one value per undirected edge (in Graph::edges() order) to a symmetric
/// single-channel slot field.
EdgeField symmetric_edge_field(const Graph& g, const Eigen::VectorXd& per_edge);

}  // namespace graphtv
