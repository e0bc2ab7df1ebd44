#include "graphtv/io.hpp"

#include "graphtv/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

namespace graphtv::io {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_double(std::string_view tok, std::size_t line, const char* what) {
    double v = 0.0;
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
        throw ParseError(std::string("invalid ") + what + " '" + std::string(tok) + "'", line);
    }
    return v;
}

long long parse_int(std::string_view tok, std::size_t line, const char* what) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw ParseError(std::string("invalid ") + what + " '" + std::string(tok) + "'", line);
    }
    return v;
}

index_t parse_index(std::string_view tok, std::size_t line, const char* what) {
    long long v = parse_int(tok, line, what);
    if (v < 0) throw ParseError(std::string(what) + " must be non-negative", line);
    return static_cast<index_t>(v);
}

bool skippable(std::string_view s) { return s.empty() || s.front() == '#'; }

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'", 0);
    return in;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw Error("format_double failed");
    return std::string(buf, ptr);
}

// -- edge list ----------------------------------------------------------------

EdgeList read_edge_list(std::istream& in) {
    EdgeList out;
    index_t declared = 0;
    bool has_declared = false;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view s = trim(raw);
        if (s.empty()) continue;
        if (s.front() == '#') {
            std::string_view body = trim(s.substr(1));
            if (body.rfind("nodes", 0) == 0) {
                declared = parse_index(trim(body.substr(5)), line, "node count");
                has_declared = true;
            }
            continue;
        }
        auto cols = split(s, '\t');
        if (cols.size() != 3) throw ParseError("expected 'i<TAB>j<TAB>w'", line);
        EdgeSpec e{parse_index(cols[0], line, "node index"), parse_index(cols[1], line, "node index"),
                   parse_double(cols[2], line, "weight")};
        out.n = std::max(out.n, std::max(e.i, e.j) + 1);
        out.edges.push_back(e);
    }
    if (has_declared) {
        if (declared < out.n) throw ParseError("declared node count is smaller than the largest index", 0);
        out.n = declared;
    }
    return out;
}

EdgeList read_edge_list_file(const std::string& path) {
    auto in = open_or_throw(path);
    return read_edge_list(in);
}

void write_edge_list(std::ostream& out, const Graph& g, const std::vector<double>& weights) {
    if (!weights.empty() && weights.size() != g.num_edges()) throw DimensionError("weight override size mismatch");
    out << "# nodes " << g.num_nodes() << '\n';
    auto edges = g.edges();
    for (index_t e = 0; e < edges.size(); ++e) {
        out << edges[e].i << '\t' << edges[e].j << '\t' << format_double(weights.empty() ? edges[e].w : weights[e])
            << '\n';
    }
}

// -- node field ---------------------------------------------------------------

NodeField read_node_field(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view s = trim(raw);
        if (skippable(s)) continue;
        auto cols = split(s, ',');
        std::vector<double> row;
        row.reserve(cols.size());
        for (auto c : cols) row.push_back(parse_double(c, line, "value"));
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw ParseError("row has " + std::to_string(row.size()) + " columns, expected " +
                                 std::to_string(rows.front().size()),
                             line);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("node field is empty", 0);
    NodeField x(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t c = 0; c < rows[i].size(); ++c) x(i, c) = rows[i][c];
    return x;
}

NodeField read_node_field_file(const std::string& path) {
    auto in = open_or_throw(path);
    return read_node_field(in);
}

void write_node_field(std::ostream& out, const NodeField& x) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            if (c) out << ',';
            out << format_double(x(i, c));
        }
        out << '\n';
    }
}

// -- labels and masks -----------------------------------------------------------

std::vector<int> read_labels(std::istream& in, index_t n) {
    std::vector<int> labels(n, -1);
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view s = trim(raw);
        if (skippable(s) || s.rfind("node_id", 0) == 0) continue;
        auto cols = split(s, ',');
        if (cols.size() != 2) throw ParseError("expected 'node_id,label'", line);
        index_t id = parse_index(cols[0], line, "node id");
        long long lab = parse_int(cols[1], line, "label");
        if (id >= n) throw ParseError("node id " + std::to_string(id) + " out of range", line);
        if (lab < 0) throw ParseError("labels must be non-negative", line);
        labels[id] = static_cast<int>(lab);
    }
    return labels;
}

std::vector<int> read_labels_file(const std::string& path, index_t n) {
    auto in = open_or_throw(path);
    return read_labels(in, n);
}

void write_labels(std::ostream& out, const std::vector<int>& labels) {
    out << "node_id,label\n";
    for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
}

std::vector<index_t> read_mask(std::istream& in, index_t n) {
    std::vector<index_t> ids;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view s = trim(raw);
        if (skippable(s) || s == "node_id") continue;
        index_t id = parse_index(s, line, "node id");
        if (id >= n) throw ParseError("node id " + std::to_string(id) + " out of range", line);
        ids.push_back(id);
    }
    return ids;
}

std::vector<index_t> read_mask_file(const std::string& path, index_t n) {
    auto in = open_or_throw(path);
    return read_mask(in, n);
}

void write_mask(std::ostream& out, const std::vector<index_t>& ids) {
    for (index_t id : ids) out << id << '\n';
}

// -- trajectory ----------------------------------------------------------------

TrajectoryTable read_trajectory(std::istream& in) {
    TrajectoryTable out;
    std::string raw;
    std::size_t line = 0;
    std::size_t width = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view s = trim(raw);
        if (skippable(s)) continue;
        auto cols = split(s, ',');
        if (width == 0) {
            if (cols.size() < 2 || cols[0] != "t") throw ParseError("expected header 't,node_0,...'", line);
            for (std::size_t k = 1; k < cols.size(); ++k) {
                if (cols[k] != "node_" + std::to_string(k - 1)) {
                    throw ParseError("header column " + std::to_string(k) + " should be node_" + std::to_string(k - 1),
                                     line);
                }
            }
            width = cols.size();
            continue;
        }
        if (cols.size() != width) {
            throw ParseError("row has " + std::to_string(cols.size()) + " columns, expected " + std::to_string(width),
                             line);
        }
        double t = parse_double(cols[0], line, "time");
        if (!out.t.empty() && !(t > out.t.back())) throw ParseError("time stamps must be strictly increasing", line);
        Eigen::VectorXd x(width - 1);
        for (std::size_t k = 1; k < width; ++k) x(k - 1) = parse_double(cols[k], line, "value");
        out.t.push_back(t);
        out.x.push_back(std::move(x));
    }
    if (width == 0) throw ParseError("trajectory has no header", 0);
    return out;
}

TrajectoryTable read_trajectory_file(const std::string& path) {
    auto in = open_or_throw(path);
    return read_trajectory(in);
}

void write_trajectory(std::ostream& out, const TrajectoryTable& traj) {
    std::size_t n = traj.x.empty() ? 0 : traj.x.front().size();
    out << 't';
    for (std::size_t i = 0; i < n; ++i) out << ",node_" << i;
    out << '\n';
    for (std::size_t k = 0; k < traj.t.size(); ++k) {
        out << format_double(traj.t[k]);
        for (Eigen::Index i = 0; i < traj.x[k].size(); ++i) out << ',' << format_double(traj.x[k](i));
        out << '\n';
    }
}

// -- flows ---------------------------------------------------------------------

std::vector<FlowRow> read_flows(std::istream& in) {
    std::vector<FlowRow> rows;
    std::string raw;
    std::size_t line = 0;
    bool header = false;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view s = trim(raw);
        if (skippable(s)) continue;
        auto cols = split(s, ',');
        if (!header) {
            if (cols.size() != 4 || cols[0] != "t" || cols[1] != "i" || cols[2] != "j" || cols[3] != "flow") {
                throw ParseError("expected header 't,i,j,flow'", line);
            }
            header = true;
            continue;
        }
        if (cols.size() != 4) throw ParseError("expected 4 columns", line);
        FlowRow r{parse_double(cols[0], line, "time"), parse_index(cols[1], line, "node index"),
                  parse_index(cols[2], line, "node index"), parse_double(cols[3], line, "flow")};
        if (r.i >= r.j) throw ParseError("flow rows must list i < j", line);
        rows.push_back(r);
    }
    if (!header) throw ParseError("flow file has no header", 0);
    return rows;
}

std::vector<FlowRow> read_flows_file(const std::string& path) {
    auto in = open_or_throw(path);
    return read_flows(in);
}

void write_flows(std::ostream& out, const std::vector<FlowRow>& rows) {
    out << "t,i,j,flow\n";
    for (const FlowRow& r : rows) {
        out << format_double(r.t) << ',' << r.i << ',' << r.j << ',' << format_double(r.flow) << '\n';
    }
}

}  // namespace graphtv::io
