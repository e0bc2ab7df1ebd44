#pragma once

// Text formats shared by the library and the CLI.
//
//   edge list   `i<TAB>j<TAB>w` per line, 0-based, '#' lines ignored. Writers emit a
//               leading `# nodes <n>` comment, which readers use to recover trailing
//               isolated nodes.
//   node field  CSV, one row per node, no header.
//   labels      CSV `node_id,label`.
//   mask        one node id per line.
//   trajectory  CSV with header `t,node_0,...,node_{N-1}`.
//   flows       CSV with header `t,i,j,flow`, i<j, signed flow from i to j.

#include "graphtv/graph.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace graphtv::io {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

struct EdgeList {
    index_t n = 0;
    std::vector<EdgeSpec> edges;
};

EdgeList read_edge_list(std::istream& in);
EdgeList read_edge_list_file(const std::string& path);
/// Writes the graph's edges; when `weights` is non-empty it replaces w (one value per edge).
void write_edge_list(std::ostream& out, const Graph& g, const std::vector<double>& weights = {});

NodeField read_node_field(std::istream& in);
NodeField read_node_field_file(const std::string& path);
void write_node_field(std::ostream& out, const NodeField& x);

std::vector<int> read_labels(std::istream& in, index_t n);
std::vector<int> read_labels_file(const std::string& path, index_t n);
void write_labels(std::ostream& out, const std::vector<int>& labels);

std::vector<index_t> read_mask(std::istream& in, index_t n);
std::vector<index_t> read_mask_file(const std::string& path, index_t n);
void write_mask(std::ostream& out, const std::vector<index_t>& ids);

struct TrajectoryTable {
    std::vector<double> t;
    std::vector<Eigen::VectorXd> x;  ///< one vector of node values per time point
};

TrajectoryTable read_trajectory(std::istream& in);
TrajectoryTable read_trajectory_file(const std::string& path);
void write_trajectory(std::ostream& out, const TrajectoryTable& traj);

struct FlowRow {
    double t;
    index_t i;
    index_t j;
    double flow;
};

std::vector<FlowRow> read_flows(std::istream& in);
std::vector<FlowRow> read_flows_file(const std::string& path);
void write_flows(std::ostream& out, const std::vector<FlowRow>& rows);

}  // namespace graphtv::io
