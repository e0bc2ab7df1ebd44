#include "graphtv/diffusion.hpp"

#include "graphtv/error.hpp"
#include "graphtv/operators.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace graphtv {

double heat_tau_max(const Graph& g) {
    double norm = g.spectral_norm();
    return norm > 0.0 ? 0.9 / norm : std::numeric_limits<double>::infinity();
}

NodeField heat_step(const Graph& g, const NodeField& x, double tau, std::optional<double> tau_max) {
    require_node_field(g, x);
    double bound = tau_max ? *tau_max : heat_tau_max(g);
    if (!(tau > 0.0) || tau > bound) {
        throw StepSizeError("heat step tau=" + std::to_string(tau) + " outside (0, " + std::to_string(bound) + "]");
    }
    return x + tau * laplacian_apply(g, x);
}

double total_variation(const Graph& g, const NodeField& x) {
    require_node_field(g, x);
    double tv = 0.0;
    for (const Edge& ed : g.edges()) tv += ed.w * (x.row(ed.i) - x.row(ed.j)).cwiseAbs().sum();
    return tv;
}

double tv_objective(const Graph& g, const NodeField& x, const NodeField& x0, double lambda) {
    require_node_field(g, x, "x");
    require_node_field(g, x0, "x0");
    if (x.cols() != x0.cols()) throw DimensionError("x and x0 have different channel counts");
    return (x - x0).squaredNorm() + lambda * total_variation(g, x);
}

EdgeField clip(const EdgeField& b, double cap) { return b.cwiseMax(-cap).cwiseMin(cap); }

NodeField dc_adjoint(const Graph& g, const EdgeField& z) { return 0.5 * gradient_transpose(g, z); }

DCState dc_init(const Graph& g, const NodeField& x0, double lambda, std::optional<double> beta) {
    require_node_field(g, x0, "x0");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be finite and > 0");
    DCState s;
    s.x = x0;
    s.x0 = x0;
    s.z = EdgeField::Zero(g.num_slots(), x0.cols());
    s.lambda = lambda;
    s.beta = beta ? *beta : kBetaSafety * g.spectral_norm();
    if (g.num_edges() > 0 && !(s.beta > 0.0)) throw InvalidArgument("beta must be > 0");
    return s;
}

namespace {

void require_valid(const Graph& g, const DCState& s) {
    require_node_field(g, s.x0, "x0");
    require_edge_field(g, s.z, s.x0.cols(), "z");
    if (!(s.lambda > 0.0)) throw InvalidArgument("DC state has lambda <= 0");
    if (g.num_edges() > 0 && !(s.beta > 0.0)) throw InvalidArgument("DC state has beta <= 0");
    if (s.z.size() > 0 && !(s.z.cwiseAbs().maxCoeff() <= 1.0)) {
        throw InvalidArgument("DC state violates |z| <= 1");
    }
}

}  // namespace

DCState dc_step(const Graph& g, const DCState& s) {
    require_valid(g, s);
    DCState next = s;
    next.x = s.x0 - (0.5 * s.lambda) * dc_adjoint(g, s.z);
    if (g.num_edges() > 0) {
        next.z = clip(s.z + (2.0 / (s.beta * s.lambda)) * graph_gradient(g, next.x), 1.0);
    }
    ++next.iter;
    return next;
}

DCResult dc_solve(const Graph& g, const NodeField& x0, double lambda, const DCSolveOptions& opts) {
    if (opts.max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
    DCState s = dc_init(g, x0, lambda, opts.beta);
    DCResult out;
    TVReport& rep = out.report;
    double prev = std::numeric_limits<double>::quiet_NaN();
    int calm = 0;
    for (int k = 0; k < opts.max_iters; ++k) {
        s = dc_step(g, s);
        double obj = tv_objective(g, s.x, x0, lambda);
        if (!std::isfinite(obj)) {
            throw DivergenceError("diffusion-clip objective became non-finite at iteration " + std::to_string(k + 1));
        }
        rep.primal_objective.push_back(obj);
        rep.iterations = k + 1;
        if (s.z.size() > 0) rep.max_abs_z = std::max(rep.max_abs_z, s.z.cwiseAbs().maxCoeff());
        if (g.num_edges() == 0) {
            rep.converged = true;
            break;
        }
        if (k > 0) {
            double scale = std::max(std::abs(obj), std::numeric_limits<double>::min());
            calm = (std::abs(obj - prev) / scale < opts.tol) ? calm + 1 : 0;
            if (calm >= opts.window) {
                rep.converged = true;
                break;
            }
        }
        prev = obj;
    }
    out.x = std::move(s.x);
    out.z = std::move(s.z);
    return out;
}

std::pair<NodeField, EdgeField> dc_layer_apply(const Graph& g, const NodeField& x_prev, const EdgeField& z_prev,
                                               double lambda, double beta) {
    require_node_field(g, x_prev, "x_prev");
    require_edge_field(g, z_prev, x_prev.cols(), "z_prev");
    if (!(lambda > 0.0)) throw InvalidArgument("lambda must be > 0");
    NodeField x_new = x_prev - (0.5 * lambda) * dc_adjoint(g, z_prev);
    if (g.num_edges() == 0) return {std::move(x_new), z_prev};
    if (!(beta > 0.0)) throw InvalidArgument("beta must be > 0");
    EdgeField z_new = clip(z_prev + (2.0 / (beta * lambda)) * graph_gradient(g, x_new), 1.0);
    return {std::move(x_new), std::move(z_new)};
}

}  // namespace graphtv
