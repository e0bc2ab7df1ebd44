#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

namespace graphtv {

using index_t = std::size_t;

/// Per-node values: one row per node, one column per feature channel.
using NodeField = Eigen::MatrixXd;

/// Per-ordered-edge values, one row per ordered slot (see Graph), one column
/// per channel. Undirected edge `e = (lo, hi)` owns slot `2e` for lo->hi and
/// slot `2e + 1` for hi->lo.
using EdgeField = Eigen::MatrixXd;

struct Edge {
    index_t i;  ///< smaller endpoint
    index_t j;  ///< larger endpoint
    double w;
};

/// Input edge as read from a file or produced by a generator; endpoint order is free.
struct EdgeSpec {
    index_t i;
    index_t j;
    double w;
};

struct Neighbor {
    index_t node;
    double w;
    index_t out_slot;  ///< ordered slot for (self -> node); the reverse slot is out_slot ^ 1
};

/// Undirected graph with strictly positive weights, immutable after build().
class Graph {
public:
    Graph() = default;

    /// Validates and canonicalizes the edge list. Edges are stored sorted by
    /// (min, max) endpoint so that slot numbering does not depend on input order.
    /// Throws GraphValidationError on self-loops, duplicates, non-positive or
    /// non-finite weights, and out-of-range indices.
    static Graph build(index_t n, std::span<const EdgeSpec> edges);
    static Graph build(index_t n, const std::vector<EdgeSpec>& edges) {
        return build(n, std::span<const EdgeSpec>(edges));
    }

    index_t num_nodes() const noexcept { return n_; }
    index_t num_edges() const noexcept { return edges_.size(); }
    index_t num_slots() const noexcept { return 2 * edges_.size(); }

    std::span<const Edge> edges() const noexcept { return edges_; }
    std::span<const Neighbor> neighbors(index_t i) const noexcept {
        return {adj_.data() + offsets_[i], adj_.data() + offsets_[i + 1]};
    }
    index_t degree(index_t i) const noexcept { return offsets_[i + 1] - offsets_[i]; }

    /// Ordered slot of (i -> j), or nullopt when i and j are not adjacent.
    std::optional<index_t> slot(index_t i, index_t j) const;
    /// Weight of edge {i, j}; 0 when absent.
    double weight(index_t i, index_t j) const;

    /// Source node of an ordered slot.
    index_t slot_source(index_t s) const noexcept {
        const Edge& e = edges_[s / 2];
        return (s % 2 == 0) ? e.i : e.j;
    }
    index_t slot_target(index_t s) const noexcept {
        const Edge& e = edges_[s / 2];
        return (s % 2 == 0) ? e.j : e.i;
    }
    double slot_weight(index_t s) const noexcept { return edges_[s / 2].w; }

    bool is_connected() const;

    /// operator_norm(*this) at default accuracy, computed on first use and shared by copies.
    double spectral_norm() const;

private:
    struct NormMemo {
        std::once_flag once;
        double value = 0.0;
    };

    index_t n_ = 0;
    std::vector<Edge> edges_;
    std::vector<index_t> offsets_{0};
    std::vector<Neighbor> adj_;
    std::shared_ptr<NormMemo> norm_memo_ = std::make_shared<NormMemo>();
};

}  // namespace graphtv
