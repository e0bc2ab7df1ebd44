#include "graphtv/transport.hpp"

#include "graphtv/error.hpp"
#include "graphtv/operators.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace graphtv {

void require_conductivity(const Graph& g, const EdgeField& alpha) {
    require_edge_field(g, alpha, 1, "alpha");
    for (index_t e = 0; e < g.num_edges(); ++e) {
        double a = alpha(2 * e, 0);
        if (!(a >= 0.0) || !std::isfinite(a)) throw InvalidArgument("alpha must be finite and non-negative");
        if (a != alpha(2 * e + 1, 0)) throw InvalidArgument("alpha must be symmetric");
    }
}

EdgeField extract_flux(const Graph& g, const EdgeField& alpha, const NodeField& u) {
    require_conductivity(g, alpha);
    EdgeField q = graph_gradient(g, u);
    q.array().colwise() *= alpha.col(0).array();
    return q;
}

NodeField weighted_divergence(const Graph& g, const EdgeField& alpha, const EdgeField& f) {
    require_edge_field(g, alpha, 1, "alpha");
    EdgeField af = f;
    af.array().colwise() *= alpha.col(0).array();
    return divergence(g, af);
}

NodeField weighted_laplacian(const Graph& g, const EdgeField& alpha, const NodeField& u) {
    require_edge_field(g, alpha, 1, "alpha");
    EdgeField q = graph_gradient(g, u);
    q.array().colwise() *= alpha.col(0).array().square();
    return divergence(g, q);
}

double transport_dt_max(const Graph& g, const EdgeField& alpha) {
    require_edge_field(g, alpha, 1, "alpha");
    double amax = alpha.size() ? alpha.maxCoeff() : 0.0;
    double norm = g.spectral_norm();
    double denom = std::sqrt(amax * amax * norm);
    return denom > 0.0 ? 0.5 / denom : std::numeric_limits<double>::infinity();
}

TransportState make_transport_state(const Graph& g, const NodeField& u0, const EdgeField& alpha) {
    require_node_field(g, u0, "u0");
    require_conductivity(g, alpha);
    return {u0, EdgeField::Zero(g.num_slots(), u0.cols()), alpha, 0};
}

TransportStepResult transport_step_detailed(const Graph& g, const TransportState& s, double dt, double dt_max) {
    require_node_field(g, s.u, "u");
    require_edge_field(g, s.f, s.u.cols(), "f");
    require_edge_field(g, s.alpha, 1, "alpha");
    if (!(dt > 0.0) || dt > dt_max) {
        throw StepSizeError("transport step dt=" + std::to_string(dt) + " outside (0, " + std::to_string(dt_max) + "]");
    }
    TransportStepResult out;
    TransportState& next = out.state;
    next.alpha = s.alpha;
    next.t = s.t + 1;

    EdgeField push = graph_gradient(g, s.u);
    push.array().colwise() *= s.alpha.col(0).array();
    next.f = s.f + dt * push;
    // Keep f exactly antisymmetric regardless of rounding in the update.
    for (index_t e = 0; e < g.num_edges(); ++e) next.f.row(2 * e + 1) = -next.f.row(2 * e);

    // increment_ij = -dt w_ij alpha_ij (f_ij - f_ji): the slot-wise terms of dt div(alpha f)
    out.increment.resize(g.num_slots(), s.u.cols());
    for (index_t e = 0; e < g.num_edges(); ++e) {
        const Edge& ed = g.edges()[e];
        double a = s.alpha(2 * e, 0);
        out.increment.row(2 * e) = (-dt * ed.w * a) * (next.f.row(2 * e) - next.f.row(2 * e + 1));
        out.increment.row(2 * e + 1) = -out.increment.row(2 * e);
    }
    next.u = s.u;
    for (index_t i = 0; i < g.num_nodes(); ++i) {
        for (const Neighbor& nb : g.neighbors(i)) next.u.row(i) += out.increment.row(nb.out_slot);
    }
    return out;
}

TransportState transport_step(const Graph& g, const TransportState& s, double dt) {
    return transport_step_detailed(g, s, dt, transport_dt_max(g, s.alpha)).state;
}

void require_trajectory(const Graph& g, const Trajectory& traj, std::size_t min_points) {
    if (traj.t.size() != traj.x.size()) throw DimensionError("trajectory has mismatched time and value counts");
    if (traj.t.size() < min_points) {
        throw InvalidArgument("trajectory needs at least " + std::to_string(min_points) + " time points");
    }
    for (std::size_t k = 0; k < traj.t.size(); ++k) {
        require_node_field(g, traj.x[k], "observation");
        if (traj.x[k].cols() != traj.x.front().cols()) throw DimensionError("observations differ in channel count");
        if (k > 0 && !(traj.t[k] > traj.t[k - 1])) throw InvalidArgument("trajectory times must increase strictly");
    }
}

Simulation simulate(const Graph& g, const NodeField& u0, const EdgeField& alpha, long steps, double dt) {
    if (steps < 1) throw InvalidArgument("simulate needs steps >= 1");
    TransportState s = make_transport_state(g, u0, alpha);
    double dt_max = transport_dt_max(g, alpha);
    Simulation sim;
    sim.trajectory.t.push_back(0.0);
    sim.trajectory.x.push_back(u0);
    sim.flows.reserve(steps);
    sim.spreading.reserve(steps);
    for (long k = 0; k < steps; ++k) {
        TransportStepResult r = transport_step_detailed(g, s, dt, dt_max);
        if (!r.state.u.allFinite())
            throw DivergenceError("transport became non-finite at step " + std::to_string(k + 1));
        s = std::move(r.state);
        sim.trajectory.t.push_back(static_cast<double>(s.t));
        sim.trajectory.x.push_back(s.u);
        sim.flows.push_back(std::move(r.increment));
        sim.spreading.push_back(s.f);
    }
    return sim;
}

NodeField wave_step(const Graph& g, const NodeField& u, const NodeField& u_prev, const EdgeField& alpha, double dt) {
    require_node_field(g, u, "u");
    require_node_field(g, u_prev, "u_prev");
    if (u.cols() != u_prev.cols()) throw DimensionError("u and u_prev differ in channel count");
    require_conductivity(g, alpha);
    double bound = transport_dt_max(g, alpha);
    if (!(dt > 0.0) || dt > bound) {
        throw StepSizeError("wave step dt=" + std::to_string(dt) + " outside (0, " + std::to_string(bound) + "]");
    }
    return 2.0 * u - u_prev + (dt * dt) * weighted_laplacian(g, alpha, u);
}

double wave_energy(const Graph& g, const NodeField& u, const NodeField& u_prev, const EdgeField& alpha, double dt) {
    EdgeField a = graph_gradient(g, u);
    EdgeField b = graph_gradient(g, u_prev);
    a.array().colwise() *= alpha.col(0).array();
    b.array().colwise() *= alpha.col(0).array();
    return 0.5 * ((u - u_prev) / dt).squaredNorm() + 0.5 * edge_inner(a, b);
}

std::vector<EdgeField> accumulate_intervals(const std::vector<EdgeField>& per_step, long stride) {
    if (stride < 1) throw InvalidArgument("stride must be >= 1");
    std::vector<EdgeField> out;
    for (std::size_t k = 0; k + stride <= per_step.size(); k += stride) {
        EdgeField acc = per_step[k];
        for (long s = 1; s < stride; ++s) acc += per_step[k + s];
        out.push_back(std::move(acc));
    }
    return out;
}

double flow_correlation(const Graph& g, const std::vector<EdgeField>& a, const std::vector<EdgeField>& b) {
    if (a.size() != b.size()) throw DimensionError("flow sequences differ in length");
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < a.size(); ++k) {
        require_edge_field(g, a[k]);
        require_edge_field(g, b[k], a[k].cols());
        for (index_t e = 0; e < g.num_edges(); ++e) {
            for (Eigen::Index c = 0; c < a[k].cols(); ++c) {
                xs.push_back(a[k](2 * e, c));
                ys.push_back(b[k](2 * e, c));
            }
        }
    }
    if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    Eigen::Map<Eigen::VectorXd> x(xs.data(), xs.size()), y(ys.data(), ys.size());
    Eigen::VectorXd dx = x.array() - x.mean();
    Eigen::VectorXd dy = y.array() - y.mean();
    double den = dx.norm() * dy.norm();
    if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return dx.dot(dy) / den;
}

}  // namespace graphtv
