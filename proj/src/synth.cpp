#include "graphtv/synth.hpp"

#include "graphtv/error.hpp"
#include "graphtv/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace graphtv::synth {

void validate(const SBMSpec& spec) {
    if (spec.n < 1) throw InvalidArgument("SBM needs n >= 1");
    if (spec.k < 1 || static_cast<index_t>(spec.k) > spec.n) throw InvalidArgument("SBM needs 1 <= k <= n");
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(spec.p_in) || !prob(spec.p_out)) throw InvalidArgument("SBM probabilities must lie in [0, 1]");
    if (spec.feature_dim < 1) throw InvalidArgument("SBM needs feature_dim >= 1");
    if (!std::isfinite(spec.feature_separation)) throw InvalidArgument("feature separation must be finite");
}

int sbm_block(const SBMSpec& spec, index_t i) {
    index_t size = spec.n / static_cast<index_t>(spec.k);
    return static_cast<int>(std::min<index_t>(i / size, spec.k - 1));
}

SBMData generate_sbm(const SBMSpec& spec) {
    validate(spec);
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    SBMData out;
    out.labels.resize(spec.n);
    for (index_t i = 0; i < spec.n; ++i) out.labels[i] = sbm_block(spec, i);

    std::vector<EdgeSpec> edges;
    for (index_t i = 0; i < spec.n; ++i) {
        for (index_t j = i + 1; j < spec.n; ++j) {
            double p = out.labels[i] == out.labels[j] ? spec.p_in : spec.p_out;
            if (unif(rng) < p) edges.push_back({i, j, 1.0});
        }
    }
    out.graph = Graph::build(spec.n, edges);
    out.connected = out.graph.is_connected();

    out.features.resize(spec.n, spec.feature_dim);
    for (index_t i = 0; i < spec.n; ++i) {
        for (int c = 0; c < spec.feature_dim; ++c) out.features(i, c) = normal(rng);
        if (spec.k > 1) {
            double frac = static_cast<double>(out.labels[i]) / (spec.k - 1);
            out.features(i, 0) += spec.feature_separation * (frac - 0.5);
        }
    }
    return out;
}

Split random_split(index_t n, double train_frac, double val_frac, std::uint64_t seed) {
    if (train_frac < 0.0 || val_frac < 0.0 || train_frac + val_frac > 1.0) {
        throw InvalidArgument("split fractions must be non-negative and sum to at most 1");
    }
    std::vector<index_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto n_train = static_cast<index_t>(std::llround(train_frac * n));
    auto n_val = std::min(n - n_train, static_cast<index_t>(std::llround(val_frac * n)));
    Split s;
    s.train.assign(perm.begin(), perm.begin() + n_train);
    s.val.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
    s.test.assign(perm.begin() + n_train + n_val, perm.end());
    for (auto* v : {&s.train, &s.val, &s.test}) std::sort(v->begin(), v->end());
    return s;
}

void validate(const TransportSpec& spec) {
    if (!spec.graph && spec.n < 1) throw InvalidArgument("transport spec needs n >= 1");
    if (spec.extra_edge_p < 0.0 || spec.extra_edge_p > 1.0) throw InvalidArgument("extra_edge_p must lie in [0, 1]");
    if (!(spec.alpha_min >= 0.0) || !(spec.alpha_max >= spec.alpha_min)) {
        throw InvalidArgument("need 0 <= alpha_min <= alpha_max");
    }
    if (!(spec.u0_max >= spec.u0_min)) throw InvalidArgument("need u0_min <= u0_max");
    if (spec.steps < 1) throw InvalidArgument("steps must be >= 1");
    if (spec.stride < 1) throw InvalidArgument("stride must be >= 1");
    if (spec.steps % spec.stride != 0) throw InvalidArgument("steps must be a multiple of stride");
    if (!(spec.noise_sigma >= 0.0)) throw InvalidArgument("noise_sigma must be >= 0");
    if (spec.dt < 0.0) throw InvalidArgument("dt must be >= 0");
    if (!(spec.dt_fraction > 0.0) || spec.dt_fraction > 1.0) throw InvalidArgument("dt_fraction must lie in (0, 1]");
}

TransportData generate_transport_data(const TransportSpec& spec) {
    validate(spec);
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    TransportData out;
    if (spec.graph) {
        out.graph = *spec.graph;
    } else {
        std::vector<EdgeSpec> edges;
        for (index_t i = 1; i < spec.n; ++i) {
            auto parent = static_cast<index_t>(unif(rng) * static_cast<double>(i));
            edges.push_back({std::min(parent, i - 1), i, 1.0});
        }
        for (index_t i = 0; i < spec.n; ++i) {
            for (index_t j = i + 1; j < spec.n; ++j) {
                double r = unif(rng);
                bool present = std::any_of(edges.begin(), edges.end(),
                                           [&](const EdgeSpec& e) { return e.i == i && e.j == j; });
                if (!present && r < spec.extra_edge_p) edges.push_back({i, j, 1.0});
            }
        }
        out.graph = Graph::build(spec.n, edges);
    }
    const Graph& g = out.graph;

    Eigen::VectorXd alpha(g.num_edges());
    for (index_t e = 0; e < g.num_edges(); ++e) {
        alpha(e) = spec.alpha_min + (spec.alpha_max - spec.alpha_min) * unif(rng);
    }
    out.alpha_true = symmetric_edge_field(g, alpha);

    NodeField u0(g.num_nodes(), 1);
    for (index_t i = 0; i < g.num_nodes(); ++i) u0(i, 0) = spec.u0_min + (spec.u0_max - spec.u0_min) * unif(rng);

    double dt = spec.dt;
    if (dt == 0.0) {
        double bound = transport_dt_max(g, out.alpha_true);
        dt = std::isfinite(bound) ? spec.dt_fraction * bound : 1.0;
    }
    out.dt = dt;
    out.stride = spec.stride;

    Simulation sim = simulate(g, u0, out.alpha_true, spec.steps, dt);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t k = 0; k < sim.trajectory.t.size(); k += spec.stride) {
        out.clean.t.push_back(sim.trajectory.t[k]);
        out.clean.x.push_back(sim.trajectory.x[k]);
        NodeField obs = sim.trajectory.x[k];
        if (spec.noise_sigma > 0.0) {
            for (Eigen::Index i = 0; i < obs.rows(); ++i) obs(i, 0) += spec.noise_sigma * noise(rng);
        }
        out.observed.t.push_back(sim.trajectory.t[k]);
        out.observed.x.push_back(std::move(obs));
    }
    out.true_flows = accumulate_intervals(sim.flows, spec.stride);
    return out;
}

}  // namespace graphtv::synth
