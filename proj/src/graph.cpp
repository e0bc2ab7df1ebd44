#include "graphtv/graph.hpp"

#include "graphtv/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace graphtv {

namespace {

std::string edge_text(index_t i, index_t j) {
    return "(" + std::to_string(i) + ", " + std::to_string(j) + ")";
}

}  // namespace

Graph Graph::build(index_t n, std::span<const EdgeSpec> input) {
    Graph g;
    g.n_ = n;
    g.edges_.reserve(input.size());
    for (const EdgeSpec& e : input) {
        if (e.i >= n || e.j >= n) {
            throw GraphValidationError(GraphErrorKind::IndexOutOfRange,
                                       "edge " + edge_text(e.i, e.j) + " has an endpoint outside [0, " +
                                           std::to_string(n) + ")");
        }
        if (e.i == e.j) {
            throw GraphValidationError(GraphErrorKind::SelfLoop,
                                       "self-loop at node " + std::to_string(e.i));
        }
        if (!std::isfinite(e.w) || e.w <= 0.0) {
            throw GraphValidationError(GraphErrorKind::NonPositiveWeight,
                                       "edge " + edge_text(e.i, e.j) + " has weight " +
                                           std::to_string(e.w) + "; weights must be finite and > 0");
        }
        g.edges_.push_back({std::min(e.i, e.j), std::max(e.i, e.j), e.w});
    }
    std::sort(g.edges_.begin(), g.edges_.end(),
              [](const Edge& a, const Edge& b) { return a.i != b.i ? a.i < b.i : a.j < b.j; });
    for (std::size_t k = 1; k < g.edges_.size(); ++k) {
        if (g.edges_[k].i == g.edges_[k - 1].i && g.edges_[k].j == g.edges_[k - 1].j) {
            throw GraphValidationError(GraphErrorKind::DuplicateEdge,
                                       "duplicate edge " + edge_text(g.edges_[k].i, g.edges_[k].j));
        }
    }

    std::vector<index_t> deg(n, 0);
    for (const Edge& e : g.edges_) {
        ++deg[e.i];
        ++deg[e.j];
    }
    g.offsets_.assign(n + 1, 0);
    for (index_t i = 0; i < n; ++i) g.offsets_[i + 1] = g.offsets_[i] + deg[i];
    g.adj_.resize(g.offsets_[n]);
    std::vector<index_t> fill(g.offsets_.begin(), g.offsets_.end() - 1);
    for (index_t e = 0; e < g.edges_.size(); ++e) {
        const Edge& ed = g.edges_[e];
        g.adj_[fill[ed.i]++] = {ed.j, ed.w, 2 * e};
        g.adj_[fill[ed.j]++] = {ed.i, ed.w, 2 * e + 1};
    }
    for (index_t i = 0; i < n; ++i) {
        std::sort(g.adj_.begin() + g.offsets_[i], g.adj_.begin() + g.offsets_[i + 1],
                  [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
    }
    return g;
}

std::optional<index_t> Graph::slot(index_t i, index_t j) const {
    if (i >= n_ || j >= n_) return std::nullopt;
    auto nb = neighbors(i);
    auto it = std::lower_bound(nb.begin(), nb.end(), j,
                               [](const Neighbor& a, index_t v) { return a.node < v; });
    if (it == nb.end() || it->node != j) return std::nullopt;
    return it->out_slot;
}

double Graph::weight(index_t i, index_t j) const {
    auto s = slot(i, j);
    return s ? slot_weight(*s) : 0.0;
}

bool Graph::is_connected() const {
    if (n_ <= 1) return true;
    std::vector<char> seen(n_, 0);
    std::vector<index_t> stack{0};
    seen[0] = 1;
    index_t count = 1;
    while (!stack.empty()) {
        index_t v = stack.back();
        stack.pop_back();
        for (const Neighbor& nb : neighbors(v)) {
            if (!seen[nb.node]) {
                seen[nb.node] = 1;
                ++count;
                stack.push_back(nb.node);
            }
        }
    }
    return count == n_;
}

}  // namespace graphtv
