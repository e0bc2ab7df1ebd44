#include "graphtv/operators.hpp"

#include "graphtv/error.hpp"

#include <cmath>
#include <random>
#include <string>

namespace graphtv {

void require_node_field(const Graph& g, const NodeField& x, const char* name) {
    if (static_cast<index_t>(x.rows()) != g.num_nodes() || x.cols() < 1) {
        throw DimensionError(std::string(name) + " has shape " + std::to_string(x.rows()) + "x" +
                             std::to_string(x.cols()) + ", expected " + std::to_string(g.num_nodes()) +
                             " rows and at least one column");
    }
    if (!x.allFinite()) throw InvalidArgument(std::string(name) + " has non-finite entries");
}

void require_edge_field(const Graph& g, const EdgeField& q, Eigen::Index channels, const char* name) {
    bool ok = static_cast<index_t>(q.rows()) == g.num_slots() &&
              (channels == 0 ? q.cols() >= 1 : q.cols() == channels);
    if (!ok) {
        throw DimensionError(std::string(name) + " has shape " + std::to_string(q.rows()) + "x" +
                             std::to_string(q.cols()) + ", expected " + std::to_string(g.num_slots()) +
                             " slots" + (channels ? " and " + std::to_string(channels) + " channels" : ""));
    }
}

EdgeField graph_gradient(const Graph& g, const NodeField& x) {
    require_node_field(g, x);
    EdgeField q(g.num_slots(), x.cols());
    const auto edges = g.edges();
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double* xc = x.col(c).data();
        double* qc = q.col(c).data();
        for (index_t e = 0; e < edges.size(); ++e) {
            const Edge& ed = edges[e];
            double v = ed.w * (xc[ed.i] - xc[ed.j]);
            qc[2 * e] = v;
            qc[2 * e + 1] = -v;
        }
    }
    return q;
}

NodeField gradient_transpose(const Graph& g, const EdgeField& q) {
    require_edge_field(g, q);
    NodeField out = NodeField::Zero(g.num_nodes(), q.cols());
    const auto edges = g.edges();
    for (Eigen::Index c = 0; c < q.cols(); ++c) {
        const double* qc = q.col(c).data();
        double* oc = out.col(c).data();
        for (index_t e = 0; e < edges.size(); ++e) {
            const Edge& ed = edges[e];
            // node i receives +w (q_ij - q_ji), node j the negation
            double d = ed.w * (qc[2 * e] - qc[2 * e + 1]);
            oc[ed.i] += d;
            oc[ed.j] -= d;
        }
    }
    return out;
}

NodeField divergence(const Graph& g, const EdgeField& q) { return -gradient_transpose(g, q); }

NodeField laplacian_apply(const Graph& g, const NodeField& x) {
    require_node_field(g, x);
    NodeField out = NodeField::Zero(g.num_nodes(), x.cols());
    const auto edges = g.edges();
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double* xc = x.col(c).data();
        double* oc = out.col(c).data();
        for (const Edge& ed : edges) {
            double d = 2.0 * ed.w * ed.w * (xc[ed.i] - xc[ed.j]);
            oc[ed.i] -= d;
            oc[ed.j] += d;
        }
    }
    return out;
}

double operator_norm(const Graph& g, int iters, double tol) {
    if (g.num_edges() == 0) return 0.0;
    if (iters < 1) throw InvalidArgument("operator_norm needs at least one iteration");
    std::mt19937_64 rng(0x5eed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    NodeField v(g.num_nodes(), 1);
    for (Eigen::Index i = 0; i < v.rows(); ++i) v(i, 0) = unif(rng);
    v /= v.norm();
    double rayleigh = 0.0;
    for (int k = 0; k < iters; ++k) {
        NodeField av = -laplacian_apply(g, v);
        double next = node_inner(v, av);
        double nrm = av.norm();
        if (nrm == 0.0) return 0.0;
        v = av / nrm;
        if (k > 0 && std::abs(next - rayleigh) <= tol * std::abs(next)) {
            rayleigh = next;
            break;
        }
        rayleigh = next;
    }
    // Final Rayleigh quotient on the converged vector.
    return node_inner(v, -laplacian_apply(g, v));
}

double dirichlet_energy(const Graph& g, const NodeField& x) {
    require_node_field(g, x);
    double total = 0.0;
    for (const Edge& ed : g.edges()) {
        total += 2.0 * ed.w * ed.w * (x.row(ed.i) - x.row(ed.j)).squaredNorm();
    }
    return total;
}

double antisymmetry_defect(const Graph& g, const EdgeField& q) {
    require_edge_field(g, q);
    double worst = 0.0;
    for (index_t e = 0; e < g.num_edges(); ++e) {
        worst = std::max(worst, (q.row(2 * e) + q.row(2 * e + 1)).cwiseAbs().maxCoeff());
    }
    return worst;
}

EdgeField symmetric_edge_field(const Graph& g, const Eigen::VectorXd& per_edge) {
    if (static_cast<index_t>(per_edge.size()) != g.num_edges()) {
        throw DimensionError("per-edge vector has " + std::to_string(per_edge.size()) + " entries, expected " +
                             std::to_string(g.num_edges()));
    }
    EdgeField out(g.num_slots(), 1);
    for (index_t e = 0; e < g.num_edges(); ++e) {
        out(2 * e, 0) = per_edge(e);
        out(2 * e + 1, 0) = per_edge(e);
    }
    return out;
}

double Graph::spectral_norm() const {
    std::call_once(norm_memo_->once, [this] { norm_memo_->value = operator_norm(*this); });
    return norm_memo_->value;
}

}  // namespace graphtv
