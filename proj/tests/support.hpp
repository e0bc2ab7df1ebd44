#pragma once

// Independent reference implementations used by the tests. Nothing here calls
// the library operator under test; each oracle rebuilds the quantity from the
// edge list with dense linear algebra or exhaustive enumeration.

#include "graphtv/graph.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace graphtv::testing {

/// Dense 2E x n matrix of the ordered-pair gradient: row 2e is w(e_i - e_j), row 2e+1 its negation.
inline Eigen::MatrixXd dense_gradient(const Graph& g) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(g.num_slots(), g.num_nodes());
    for (index_t e = 0; e < g.num_edges(); ++e) {
        const Edge& ed = g.edges()[e];
        d(2 * e, ed.i) = ed.w;
        d(2 * e, ed.j) = -ed.w;
        d(2 * e + 1, ed.j) = ed.w;
        d(2 * e + 1, ed.i) = -ed.w;
    }
    return d;
}

/// Combinatorial Laplacian with weights w^2.
inline Eigen::MatrixXd dense_laplacian_w2(const Graph& g) {
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(g.num_nodes(), g.num_nodes());
    for (const Edge& e : g.edges()) {
        double w2 = e.w * e.w;
        l(e.i, e.i) += w2;
        l(e.j, e.j) += w2;
        l(e.i, e.j) -= w2;
        l(e.j, e.i) -= w2;
    }
    return l;
}

inline double dense_max_eigenvalue(const Eigen::MatrixXd& sym) {
    if (sym.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    return es.eigenvalues().maxCoeff();
}

/// Erdos-Renyi graph with weights uniform in [w_lo, w_hi].
inline Graph random_graph(index_t n, double p, std::mt19937_64& rng, double w_lo = 0.5, double w_hi = 2.0) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<EdgeSpec> edges;
    for (index_t i = 0; i < n; ++i)
        for (index_t j = i + 1; j < n; ++j)
            if (unif(rng) < p) edges.push_back({i, j, w_lo + (w_hi - w_lo) * unif(rng)});
    return Graph::build(n, edges);
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo = -1.0,
                                     double hi = 1.0) {
    std::uniform_real_distribution<double> unif(lo, hi);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = unif(rng);
    return m;
}

/// Every connected unit-weight graph on n labelled nodes.
inline std::vector<Graph> connected_graphs(index_t n) {
    std::vector<std::pair<index_t, index_t>> pairs;
    for (index_t i = 0; i < n; ++i)
        for (index_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    std::vector<Graph> out;
    for (unsigned mask = 0; mask < (1u << pairs.size()); ++mask) {
        std::vector<EdgeSpec> edges;
        for (std::size_t b = 0; b < pairs.size(); ++b)
            if (mask & (1u << b)) edges.push_back({pairs[b].first, pairs[b].second, 1.0});
        Graph g = Graph::build(n, edges);
        if (g.is_connected()) out.push_back(std::move(g));
    }
    return out;
}

/// ||x - x0||^2 + lambda * sum_e w |x_i - x_j| for one channel, from the edge list.
inline double tv_energy(const Graph& g, const Eigen::VectorXd& x, const Eigen::VectorXd& x0, double lambda) {
    double tv = 0.0;
    for (const Edge& e : g.edges()) tv += e.w * std::abs(x(e.i) - x(e.j));
    return (x - x0).squaredNorm() + lambda * tv;
}

/// Exact minimum of tv_energy for small n (up to ~6 nodes).
///
/// The minimizer groups nodes into level sets with a strict order between
/// levels. For a fixed ordered partition the energy is a separable quadratic
/// whose stationary point is c_g = mean(x0_g) - lambda/(2|g|) sum w sign(c_g - c_h)
/// over edges leaving g. The true minimizer is one of these candidates, so the
/// smallest true energy among them is the global minimum.
inline double tv_minimum(const Graph& g, const Eigen::VectorXd& x0, double lambda, Eigen::VectorXd* argmin = nullptr) {
    const index_t n = g.num_nodes();
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> block(n, 0);

    // Enumerate set partitions as restricted growth strings, then every order of the blocks.
    std::function<void(index_t, int)> rec = [&](index_t i, int blocks) {
        if (i == n) {
            std::vector<int> rank(blocks);
            std::iota(rank.begin(), rank.end(), 0);
            do {
                Eigen::VectorXd mean = Eigen::VectorXd::Zero(blocks), size = Eigen::VectorXd::Zero(blocks);
                for (index_t v = 0; v < n; ++v) {
                    mean(block[v]) += x0(v);
                    size(block[v]) += 1.0;
                }
                Eigen::VectorXd push = Eigen::VectorXd::Zero(blocks);
                for (const Edge& e : g.edges()) {
                    int a = block[e.i], b = block[e.j];
                    if (a == b) continue;
                    double s = rank[a] > rank[b] ? 1.0 : -1.0;
                    push(a) += e.w * s;
                    push(b) -= e.w * s;
                }
                Eigen::VectorXd x(n);
                for (index_t v = 0; v < n; ++v) {
                    int b = block[v];
                    x(v) = mean(b) / size(b) - lambda / (2.0 * size(b)) * push(b);
                }
                double val = tv_energy(g, x, x0, lambda);
                if (val < best) {
                    best = val;
                    if (argmin) *argmin = x;
                }
            } while (std::next_permutation(rank.begin(), rank.end()));
            return;
        }
        for (int b = 0; b <= blocks; ++b) {
            block[i] = b;
            rec(i + 1, std::max(blocks, b + 1));
        }
    };
    if (n == 0) return 0.0;
    rec(0, 0);
    return best;
}

/// Central finite difference of f along every entry of p.
inline Eigen::MatrixXd finite_difference(Eigen::MatrixXd& p, const std::function<double()>& f, double h = 1e-6) {
    Eigen::MatrixXd out(p.rows(), p.cols());
    for (Eigen::Index k = 0; k < p.size(); ++k) {
        double keep = p.data()[k];
        p.data()[k] = keep + h;
        double up = f();
        p.data()[k] = keep - h;
        double down = f();
        p.data()[k] = keep;
        out.data()[k] = (up - down) / (2.0 * h);
    }
    return out;
}

/// ||a - b|| / max(||b||, tiny).
inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).norm() / std::max(b.norm(), 1e-300);
}

}  // namespace graphtv::testing
