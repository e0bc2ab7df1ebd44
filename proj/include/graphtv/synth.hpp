#pragma once

// Seeded generators: stochastic block models with Gaussian node features, and
// transport trajectories with known conductivity and ground-truth flows.

#include "graphtv/graph.hpp"
#include "graphtv/transport.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace graphtv::synth {

struct SBMSpec {
    index_t n = 200;
    int k = 2;                   ///< block count; remainder nodes go to the last block
    double p_in = 0.1;
    double p_out = 0.01;
    int feature_dim = 16;
    double feature_separation = 1.0;  ///< class means on coordinate 0 span [-sep/2, sep/2]
    std::uint64_t seed = 0;
};

struct SBMData {
    Graph graph;
    std::vector<int> labels;
    NodeField features;
    bool connected = false;
};

void validate(const SBMSpec& spec);
SBMData generate_sbm(const SBMSpec& spec);

/// Block of node i under the remainder-to-last-block rule.
int sbm_block(const SBMSpec& spec, index_t i);

struct Split {
    std::vector<index_t> train, val, test;
};

/// Seeded random permutation split by fractions; test receives the rest.
Split random_split(index_t n, double train_frac, double val_frac, std::uint64_t seed);

struct TransportSpec {
    std::optional<Graph> graph;   ///< used as-is when set
    index_t n = 10;               ///< otherwise: random spanning tree plus Bernoulli extra edges
    double extra_edge_p = 0.2;
    double alpha_min = 0.5;       ///< alpha_true ~ U[alpha_min, alpha_max] per edge
    double alpha_max = 1.5;
    double u0_min = 0.0;          ///< u0 ~ U[u0_min, u0_max] per node
    double u0_max = 1.0;
    long steps = 40;
    double dt = 0.0;              ///< 0 selects dt_fraction * transport_dt_max
    double dt_fraction = 0.5;
    long stride = 4;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

struct TransportData {
    Graph graph;
    EdgeField alpha_true;
    double dt = 0.0;
    long stride = 1;
    Trajectory observed;                 ///< subsampled, noisy
    Trajectory clean;                    ///< subsampled simulator output
    std::vector<EdgeField> true_flows;   ///< increments accumulated per observation interval
};

void validate(const TransportSpec& spec);
TransportData generate_transport_data(const TransportSpec& spec);

}  // namespace graphtv::synth
