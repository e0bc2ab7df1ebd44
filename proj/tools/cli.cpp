#include "cli.hpp"

#include "graphtv/diffusion.hpp"
#include "graphtv/error.hpp"
#include "graphtv/flownet.hpp"
#include "graphtv/gnn.hpp"
#include "graphtv/io.hpp"
#include "graphtv/operators.hpp"
#include "graphtv/synth.hpp"
#include "graphtv/transport.hpp"

#include "CLI11.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <unistd.h>

namespace graphtv::cli {

namespace fs = std::filesystem;

namespace {

using Outputs = std::map<std::string, std::string>;

struct FlagSpec {
    std::string flag;
    std::string pointer;
    std::string help;
};

const char* const kPathKeys[] = {"graph",     "features",   "labels",     "train_mask", "val_mask",
                                 "test_mask", "u0",         "alpha_file", "trajectory", "true_flows"};

Json sbm_defaults() {
    synth::SBMSpec s;
    return {{"n", s.n},
            {"k", s.k},
            {"p_in", s.p_in},
            {"p_out", s.p_out},
            {"feature_dim", s.feature_dim},
            {"feature_separation", 2.0}};
}

Json split_defaults() { return {{"train", 0.5}, {"val", 0.2}}; }

Json transport_defaults() {
    synth::TransportSpec s;
    return {{"n", s.n},
            {"extra_edge_p", s.extra_edge_p},
            {"alpha_min", s.alpha_min},
            {"alpha_max", s.alpha_max},
            {"u0_min", s.u0_min},
            {"u0_max", s.u0_max},
            {"steps", s.steps},
            {"dt", s.dt},
            {"dt_fraction", s.dt_fraction},
            {"stride", s.stride},
            {"noise_sigma", s.noise_sigma}};
}

std::vector<FlagSpec> sbm_flags() {
    return {{"--n", "/sbm/n", "node count"},
            {"--k", "/sbm/k", "block count"},
            {"--p-in", "/sbm/p_in", "intra-block edge probability"},
            {"--p-out", "/sbm/p_out", "inter-block edge probability"},
            {"--feature-dim", "/sbm/feature_dim", "feature dimension"},
            {"--separation", "/sbm/feature_separation", "class-mean separation on feature 0"},
            {"--train-frac", "/split/train", "training fraction"},
            {"--val-frac", "/split/val", "validation fraction"}};
}

std::vector<FlagSpec> transport_flags() {
    return {{"--n", "/transport/n", "node count"},
            {"--extra-edge-p", "/transport/extra_edge_p", "probability of each non-tree edge"},
            {"--alpha-min", "/transport/alpha_min", "lower bound of true conductivity"},
            {"--alpha-max", "/transport/alpha_max", "upper bound of true conductivity"},
            {"--u0-min", "/transport/u0_min", "lower bound of initial potential"},
            {"--u0-max", "/transport/u0_max", "upper bound of initial potential"},
            {"--steps", "/transport/steps", "simulator steps"},
            {"--sim-dt", "/transport/dt", "simulator step (0 selects dt-fraction of the bound)"},
            {"--dt-fraction", "/transport/dt_fraction", "fraction of the stability bound"},
            {"--stride", "/transport/stride", "steps per observation"},
            {"--noise-sigma", "/transport/noise_sigma", "observation noise standard deviation"}};
}

std::vector<FlagSpec> flags_for(const std::string& command, const std::string& action) {
    if (command == "diffuse") {
        return {{"--graph", "/graph", "edge list"},
                {"--features", "/features", "node field CSV"},
                {"--mode", "/mode", "tv or heat"},
                {"--lambda", "/lambda", "TV regularization weight"},
                {"--tau", "/tau", "heat step (0 selects half the bound)"},
                {"--steps", "/steps", "heat steps"},
                {"--max-iters", "/max_iters", "DC iteration cap"},
                {"--tol", "/tol", "DC relative objective tolerance"}};
    }
    if (command == "classify") {
        std::vector<FlagSpec> f = {{"--synthetic", "/synthetic", "sbm, or none to read files"},
                                   {"--graph", "/graph", "edge list"},
                                   {"--features", "/features", "node field CSV"},
                                   {"--labels", "/labels", "labels CSV"},
                                   {"--train-mask", "/train_mask", "training node ids"},
                                   {"--val-mask", "/val_mask", "validation node ids"},
                                   {"--test-mask", "/test_mask", "test node ids"},
                                   {"--depth", "/depth", "FC layer count"},
                                   {"--hidden", "/hidden", "hidden width"},
                                   {"--lambda", "/lambda", "DC layer weight"},
                                   {"--epochs", "/epochs", "training epochs"},
                                   {"--lr", "/learning_rate", "learning rate"},
                                   {"--weight-decay", "/weight_decay", "L2 weight decay"},
                                   {"--optimizer", "/optimizer", "adam or gd"},
                                   {"--bins", "/bins", "similarity histogram bins"}};
        auto s = sbm_flags();
        f.insert(f.end(), s.begin(), s.end());
        return f;
    }
    if (command == "flow" && action == "simulate") {
        return {{"--graph", "/graph", "edge list"},
                {"--u0", "/u0", "initial potential CSV (one column)"},
                {"--alpha", "/alpha", "uniform conductivity"},
                {"--alpha-file", "/alpha_file", "per-edge conductivity as an edge list"},
                {"--steps", "/steps", "steps"},
                {"--dt", "/dt", "step (0 selects half the bound)"}};
    }
    if (command == "flow" && action == "fit") {
        std::vector<FlagSpec> f = {{"--method", "/method", "gan or two-step"},
                                   {"--synthetic", "/synthetic", "transport, or none to read files"},
                                   {"--graph", "/graph", "edge list"},
                                   {"--trajectory", "/trajectory", "observations CSV"},
                                   {"--true-flows", "/true_flows", "optional ground-truth transfers CSV"},
                                   {"--dt", "/dt", "simulator step of the observations"},
                                   {"--epochs", "/epochs", "training epochs"},
                                   {"--lr-generator", "/lr_generator", "generator learning rate"},
                                   {"--lr-discriminator", "/lr_discriminator", "discriminator learning rate"},
                                   {"--xi", "/xi", "discriminator margin"},
                                   {"--gan-weight", "/gan_weight", "weight of the adversarial term"},
                                   {"--alpha-init", "/alpha_init", "initial conductivity"},
                                   {"--learn-readout", "/learn_readout", "train the affine readout"},
                                   {"--learn-initial-state", "/learn_initial_state", "train the initial potential"},
                                   {"--ridge", "/ridge", "two-step ridge for rank-deficient fits"}};
        auto t = transport_flags();
        f.insert(f.end(), t.begin(), t.end());
        return f;
    }
    if (command == "synth" && action == "sbm") return sbm_flags();
    if (command == "synth" && action == "transport") return transport_flags();
    throw InvalidArgument("unknown command '" + command + (action.empty() ? "" : " " + action) + "'");
}

// -- configuration ---------------------------------------------------------------

bool is_integer_type(const Json& j) { return j.is_number_integer(); }

Json parse_flag_value(const Json& like, const std::string& text, const std::string& flag) {
    auto fail = [&] { return InvalidArgument("invalid value '" + text + "' for " + flag); };
    if (like.is_string()) return text;
    if (like.is_boolean()) {
        if (text == "true" || text == "1") return true;
        if (text == "false" || text == "0") return false;
        throw fail();
    }
    const char* b = text.data();
    const char* e = text.data() + text.size();
    if (like.is_number_float()) {
        double v = 0;
        auto [p, ec] = std::from_chars(b, e, v);
        if (ec != std::errc() || p != e) throw fail();
        return v;
    }
    if (like.is_number_unsigned()) {
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(b, e, v);
        if (ec != std::errc() || p != e) throw fail();
        return v;
    }
    if (is_integer_type(like)) {
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(b, e, v);
        if (ec != std::errc() || p != e) throw fail();
        return v;
    }
    if (like.is_array()) {
        Json arr = Json::array();
        std::stringstream ss(text);
        std::string tok;
        while (std::getline(ss, tok, ',')) arr.push_back(parse_flag_value(Json(std::int64_t{0}), tok, flag));
        return arr;
    }
    throw fail();
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open '" + p.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string absolute_path(const std::string& p) {
    if (p.empty()) return p;
    return fs::absolute(fs::path(p)).lexically_normal().string();
}

// -- typed access ----------------------------------------------------------------

double num(const Json& c, const char* key) { return c.at(key).get<double>(); }
long integer(const Json& c, const char* key) { return c.at(key).get<long>(); }
std::string str(const Json& c, const char* key) { return c.at(key).get<std::string>(); }

index_t count(const Json& c, const char* key) {
    long v = integer(c, key);
    if (v < 0) throw InvalidArgument(std::string(key) + " must be non-negative");
    return static_cast<index_t>(v);
}

std::uint64_t seed_of(const Json& c) { return c.at("seed").get<std::uint64_t>(); }

Graph load_graph(const Json& c) {
    std::string path = str(c, "graph");
    if (path.empty()) throw InvalidArgument("a graph file is required (--graph)");
    io::EdgeList el = io::read_edge_list_file(path);
    return Graph::build(el.n, el.edges);
}

NodeField load_field(const Json& c, const char* key, const Graph& g) {
    std::string path = str(c, key);
    if (path.empty()) throw InvalidArgument(std::string("missing input '") + key + "'");
    NodeField x = io::read_node_field_file(path);
    if (static_cast<index_t>(x.rows()) != g.num_nodes()) {
        throw DimensionError(std::string(key) + " has " + std::to_string(x.rows()) + " rows but the graph has " +
                             std::to_string(g.num_nodes()) + " nodes");
    }
    return x;
}

template <class F>
std::string render(F&& f) {
    std::ostringstream os;
    f(os);
    return os.str();
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

synth::SBMSpec sbm_spec(const Json& c, std::uint64_t seed) {
    const Json& s = c.at("sbm");
    synth::SBMSpec spec;
    spec.n = count(s, "n");
    spec.k = static_cast<int>(integer(s, "k"));
    spec.p_in = num(s, "p_in");
    spec.p_out = num(s, "p_out");
    spec.feature_dim = static_cast<int>(integer(s, "feature_dim"));
    spec.feature_separation = num(s, "feature_separation");
    spec.seed = seed;
    return spec;
}

synth::TransportSpec transport_spec(const Json& c, std::uint64_t seed) {
    const Json& t = c.at("transport");
    synth::TransportSpec spec;
    spec.n = count(t, "n");
    spec.extra_edge_p = num(t, "extra_edge_p");
    spec.alpha_min = num(t, "alpha_min");
    spec.alpha_max = num(t, "alpha_max");
    spec.u0_min = num(t, "u0_min");
    spec.u0_max = num(t, "u0_max");
    spec.steps = integer(t, "steps");
    spec.dt = num(t, "dt");
    spec.dt_fraction = num(t, "dt_fraction");
    spec.stride = integer(t, "stride");
    spec.noise_sigma = num(t, "noise_sigma");
    spec.seed = seed;
    return spec;
}

// Mass moved from i to j (i < j) during each interval, from increments whose
// lo->hi slot holds the mass gained by lo.
std::vector<io::FlowRow> transfer_rows(const Graph& g, const std::vector<EdgeField>& increments,
                                       const std::vector<double>& t_end) {
    std::vector<io::FlowRow> rows;
    for (std::size_t m = 0; m < increments.size(); ++m) {
        for (index_t e = 0; e < g.num_edges(); ++e) {
            const Edge& ed = g.edges()[e];
            rows.push_back({t_end[m], ed.i, ed.j, -increments[m](2 * e, 0)});
        }
    }
    return rows;
}

std::vector<double> interval_ends(const Trajectory& t) { return {t.t.begin() + 1, t.t.end()}; }

std::vector<double> edge_values(const Graph& g, const EdgeField& f) {
    std::vector<double> out(g.num_edges());
    for (index_t e = 0; e < g.num_edges(); ++e) out[e] = f(2 * e, 0);
    return out;
}

// -- commands --------------------------------------------------------------------

Outputs cmd_diffuse(const Json& c) {
    Graph g = load_graph(c);
    NodeField x0 = load_field(c, "features", g);
    std::string mode = str(c, "mode");
    Outputs out;
    Json report;
    if (mode == "tv") {
        DCSolveOptions opts;
        opts.max_iters = static_cast<int>(integer(c, "max_iters"));
        opts.tol = num(c, "tol");
        DCResult r = dc_solve(g, x0, num(c, "lambda"), opts);
        std::ostringstream obj;
        obj << "iter,objective\n";
        for (std::size_t k = 0; k < r.report.primal_objective.size(); ++k) {
            obj << k + 1 << ',' << io::format_double(r.report.primal_objective[k]) << '\n';
        }
        out["objective.csv"] = obj.str();
        out["final.csv"] = render([&](std::ostream& os) { io::write_node_field(os, r.x); });
        report = {{"mode", mode},
                  {"iterations", r.report.iterations},
                  {"converged", r.report.converged},
                  {"max_abs_z", r.report.max_abs_z},
                  {"final_objective", r.report.primal_objective.empty() ? 0.0 : r.report.primal_objective.back()}};
    } else if (mode == "heat") {
        long steps = integer(c, "steps");
        if (steps < 0) throw InvalidArgument("steps must be non-negative");
        double bound = heat_tau_max(g);
        double tau = num(c, "tau");
        if (tau == 0.0) tau = std::isfinite(bound) ? 0.5 * bound : 1.0;
        NodeField x = x0;
        std::ostringstream obj;
        obj << "iter,dirichlet_energy\n";
        obj << 0 << ',' << io::format_double(dirichlet_energy(g, x)) << '\n';
        for (long k = 1; k <= steps; ++k) {
            x = heat_step(g, x, tau, bound);
            obj << k << ',' << io::format_double(dirichlet_energy(g, x)) << '\n';
        }
        out["objective.csv"] = obj.str();
        out["final.csv"] = render([&](std::ostream& os) { io::write_node_field(os, x); });
        report = {{"mode", mode}, {"steps", steps}, {"tau", tau}};
    } else {
        throw InvalidArgument("mode must be 'tv' or 'heat', got '" + mode + "'");
    }
    out["report.json"] = dump(report);
    return out;
}

Outputs cmd_classify(const Json& c) {
    std::uint64_t seed = seed_of(c);
    std::string synthetic = str(c, "synthetic");
    Graph g;
    NodeField x;
    std::vector<int> labels;
    synth::Split split;
    if (synthetic == "sbm") {
        synth::SBMData d = synth::generate_sbm(sbm_spec(c, seed));
        g = std::move(d.graph);
        x = std::move(d.features);
        labels = std::move(d.labels);
    } else if (synthetic == "none") {
        g = load_graph(c);
        x = load_field(c, "features", g);
        if (str(c, "labels").empty()) throw InvalidArgument("a labels file is required (--labels)");
        labels = io::read_labels_file(str(c, "labels"), g.num_nodes());
    } else {
        throw InvalidArgument("synthetic must be 'sbm' or 'none', got '" + synthetic + "'");
    }
    if (!str(c, "train_mask").empty()) {
        split.train = io::read_mask_file(str(c, "train_mask"), g.num_nodes());
        if (!str(c, "val_mask").empty()) split.val = io::read_mask_file(str(c, "val_mask"), g.num_nodes());
        if (!str(c, "test_mask").empty()) split.test = io::read_mask_file(str(c, "test_mask"), g.num_nodes());
    } else {
        const Json& s = c.at("split");
        split = synth::random_split(g.num_nodes(), num(s, "train"), num(s, "val"), seed);
    }
    for (const auto* mask : {&split.train, &split.val, &split.test}) {
        for (index_t i : *mask) {
            if (labels[i] < 0) throw InvalidArgument("node " + std::to_string(i) + " is in a mask but has no label");
        }
    }

    gnn::Architecture arch;
    arch.input_dim = static_cast<int>(x.cols());
    arch.hidden_dim = static_cast<int>(integer(c, "hidden"));
    arch.output_dim = std::max(2, *std::max_element(labels.begin(), labels.end()) + 1);
    arch.depth = static_cast<int>(integer(c, "depth"));
    arch.dc_after = c.at("dc_after").get<std::vector<int>>();
    arch.dc_lambda = num(c, "lambda");
    gnn::validate(arch);

    gnn::TrainConfig cfg;
    cfg.epochs = static_cast<int>(integer(c, "epochs"));
    cfg.learning_rate = num(c, "learning_rate");
    cfg.weight_decay = num(c, "weight_decay");
    cfg.dc_placement = arch.dc_after;
    cfg.seed = seed;
    cfg.train_mask = split.train;
    cfg.val_mask = split.val;
    cfg.test_mask = split.test;
    std::string opt = str(c, "optimizer");
    if (opt == "adam") {
        cfg.optimizer = gnn::Optimizer::Adam;
    } else if (opt == "gd") {
        cfg.optimizer = gnn::Optimizer::GradientDescent;
    } else {
        throw InvalidArgument("optimizer must be 'adam' or 'gd', got '" + opt + "'");
    }
    if (cfg.epochs < 0) throw InvalidArgument("epochs must be non-negative");
    int bins = static_cast<int>(integer(c, "bins"));
    if (bins < 1) throw InvalidArgument("bins must be >= 1");

    // Train with a mask-free label vector: unlabeled nodes are never read.
    std::vector<int> train_labels = labels;
    for (int& l : train_labels) l = std::max(l, 0);
    gnn::TrainResult r = gnn::train(gnn::make_gcn(arch, seed), g, x, train_labels, cfg);
    gnn::ForwardResult fwd = gnn::gcn_forward(r.model, g, x);
    gnn::OversmoothReport rep =
        gnn::oversmoothing_metrics(g, gnn::hidden_embeddings(r.model, fwd), train_labels, bins);

    Json report = {{"accuracy", r.report.scores.accuracy},
                   {"precision", r.report.scores.precision},
                   {"recall", r.report.scores.recall},
                   {"f1", r.report.scores.f1},
                   {"averaging", "macro"},
                   {"depth", arch.depth},
                   {"dc_after", arch.dc_after},
                   {"per_layer_dirichlet", rep.per_layer_dirichlet},
                   {"interclass_hist", {{"bin_edges", rep.hist_edges}, {"counts", rep.interclass_hist}}},
                   {"interclass_mean", finite_or_null(rep.interclass_mean)},
                   {"interclass_edges", rep.interclass_edges},
                   {"zero_variance_pairs", rep.zero_variance_pairs},
                   {"loss_history", r.report.loss_history}};
    Outputs out;
    out["report.json"] = dump(report);
    out["predictions.csv"] = render([&](std::ostream& os) { io::write_labels(os, gnn::predict(fwd.logits)); });
    return out;
}

EdgeField load_alpha(const Json& c, const Graph& g) {
    std::string path = str(c, "alpha_file");
    if (path.empty()) return EdgeField::Constant(g.num_slots(), 1, num(c, "alpha"));
    io::EdgeList el = io::read_edge_list_file(path);
    EdgeField alpha = EdgeField::Constant(g.num_slots(), 1, std::nan(""));
    for (const EdgeSpec& e : el.edges) {
        auto s = g.slot(e.i, e.j);
        if (!s) throw InvalidArgument("alpha file lists " + std::to_string(e.i) + "-" + std::to_string(e.j) +
                                      ", which is not a graph edge");
        alpha(*s, 0) = alpha(*s ^ 1, 0) = e.w;
    }
    if (alpha.hasNaN()) throw InvalidArgument("alpha file must list every graph edge");
    return alpha;
}

Outputs cmd_flow_simulate(const Json& c) {
    Graph g = load_graph(c);
    NodeField u0 = load_field(c, "u0", g);
    if (u0.cols() != 1) throw DimensionError("u0 must have exactly one column");
    EdgeField alpha = load_alpha(c, g);
    require_conductivity(g, alpha);
    double dt = num(c, "dt");
    if (dt == 0.0) {
        double bound = transport_dt_max(g, alpha);
        dt = std::isfinite(bound) ? 0.5 * bound : 1.0;
    }
    Simulation sim = simulate(g, u0, alpha, integer(c, "steps"), dt);

    io::TrajectoryTable table;
    for (std::size_t k = 0; k < sim.trajectory.t.size(); ++k) {
        table.t.push_back(sim.trajectory.t[k]);
        table.x.push_back(sim.trajectory.x[k].col(0));
    }
    std::vector<io::FlowRow> spreading;
    for (std::size_t k = 0; k < sim.spreading.size(); ++k) {
        for (index_t e = 0; e < g.num_edges(); ++e) {
            const Edge& ed = g.edges()[e];
            spreading.push_back({sim.trajectory.t[k + 1], ed.i, ed.j, sim.spreading[k](2 * e, 0)});
        }
    }
    Outputs out;
    out["trajectory.csv"] = render([&](std::ostream& os) { io::write_trajectory(os, table); });
    out["flows.csv"] = render([&](std::ostream& os) { io::write_flows(os, spreading); });
    out["transfers.csv"] = render(
        [&](std::ostream& os) { io::write_flows(os, transfer_rows(g, sim.flows, interval_ends(sim.trajectory))); });
    out["report.json"] = dump({{"dt", dt}, {"steps", sim.flows.size()}, {"mass", sim.trajectory.x.back().sum()}});
    return out;
}

std::vector<EdgeField> load_true_flows(const std::string& path, const Graph& g, const Trajectory& traj) {
    std::vector<EdgeField> truth(traj.t.size() - 1, EdgeField::Zero(g.num_slots(), 1));
    for (const io::FlowRow& r : io::read_flows_file(path)) {
        auto it = std::find(traj.t.begin() + 1, traj.t.end(), r.t);
        if (it == traj.t.end())
            throw InvalidArgument("true flow time " + io::format_double(r.t) + " is not an interval end");
        auto s = g.slot(r.i, r.j);
        if (!s) throw InvalidArgument("true flow row " + std::to_string(r.i) + "-" + std::to_string(r.j) +
                                      " is not a graph edge");
        auto m = static_cast<std::size_t>(it - traj.t.begin() - 1);
        truth[m](*s, 0) = -r.flow;
        truth[m](*s ^ 1, 0) = r.flow;
    }
    return truth;
}

Outputs cmd_flow_fit(const Json& c) {
    std::uint64_t seed = seed_of(c);
    std::string method = str(c, "method");
    if (method != "gan" && method != "two-step") throw InvalidArgument("method must be 'gan' or 'two-step'");
    std::string synthetic = str(c, "synthetic");

    Graph g;
    Trajectory obs;
    double dt = 0.0;
    std::optional<std::vector<EdgeField>> truth;
    if (synthetic == "transport") {
        synth::TransportData d = synth::generate_transport_data(transport_spec(c, seed));
        g = std::move(d.graph);
        obs = std::move(d.observed);
        dt = d.dt;
        truth = std::move(d.true_flows);
    } else if (synthetic == "none") {
        g = load_graph(c);
        if (str(c, "trajectory").empty()) throw InvalidArgument("a trajectory file is required (--trajectory)");
        io::TrajectoryTable table = io::read_trajectory_file(str(c, "trajectory"));
        obs.t = table.t;
        for (auto& x : table.x) obs.x.emplace_back(x);
        require_trajectory(g, obs, 2);
        dt = num(c, "dt");
        if (!(dt > 0.0)) throw InvalidArgument("dt must be positive when fitting observations from files");
        if (!str(c, "true_flows").empty()) truth = load_true_flows(str(c, "true_flows"), g, obs);
    } else {
        throw InvalidArgument("synthetic must be 'transport' or 'none', got '" + synthetic + "'");
    }

    flow::FlowNetConfig fc;
    fc.dt = dt;
    fc.epochs = static_cast<int>(integer(c, "epochs"));
    fc.lr_generator = num(c, "lr_generator");
    fc.lr_discriminator = num(c, "lr_discriminator");
    fc.xi = num(c, "xi");
    fc.gan_weight = num(c, "gan_weight");
    fc.alpha_init = num(c, "alpha_init");
    fc.learn_readout = c.at("learn_readout").get<bool>();
    fc.learn_initial_state = c.at("learn_initial_state").get<bool>();
    fc.seed = seed;
    flow::TwoStepConfig tc{dt, num(c, "ridge")};

    flow::FlowNetFit gan = flow::flownet_train(g, obs, fc);
    flow::TwoStepFit two = flow::two_step_baseline(g, obs, tc);

    auto scores = [&](const std::vector<EdgeField>& flows) {
        if (!truth) return Json{{"correlation", nullptr}, {"recovery_error", nullptr}};
        double r = flow_correlation(g, flows, *truth);
        return Json{{"correlation", finite_or_null(r)}, {"recovery_error", finite_or_null(1.0 - r)}};
    };
    Json gan_json = scores(gan.flows_hat);
    gan_json["final_mse"] = gan.report.mse.back();
    gan_json["final_l_g"] = gan.report.l_g.back();
    gan_json["final_l_d"] = gan.report.l_d.back();
    Json two_json = scores(two.flows_hat);
    two_json["residual_rms"] = two.residual_rms;
    two_json["rank_deficient"] = two.rank_deficient;
    Json comparison = {{"method", method}, {"dt", dt}, {"flownet", gan_json}, {"two_step", two_json}};

    const bool use_gan = method == "gan";
    const EdgeField& alpha = use_gan ? gan.alpha_hat : two.alpha_hat;
    const std::vector<EdgeField>& flows = use_gan ? gan.flows_hat : two.flows_hat;

    Outputs out;
    out["comparison.json"] = dump(comparison);
    out["alpha.tsv"] = render([&](std::ostream& os) { io::write_edge_list(os, g, edge_values(g, alpha)); });
    out["transfers.csv"] =
        render([&](std::ostream& os) { io::write_flows(os, transfer_rows(g, flows, interval_ends(obs))); });
    std::ostringstream losses;
    losses << "epoch,mse,l_g,l_d\n";
    for (std::size_t k = 0; k < gan.report.mse.size(); ++k) {
        losses << k + 1 << ',' << io::format_double(gan.report.mse[k]) << ',' << io::format_double(gan.report.l_g[k])
               << ',' << io::format_double(gan.report.l_d[k]) << '\n';
    }
    out["losses.csv"] = losses.str();
    return out;
}

Outputs cmd_synth_sbm(const Json& c) {
    std::uint64_t seed = seed_of(c);
    synth::SBMData d = synth::generate_sbm(sbm_spec(c, seed));
    const Json& s = c.at("split");
    synth::Split split = synth::random_split(d.graph.num_nodes(), num(s, "train"), num(s, "val"), seed);
    Outputs out;
    out["graph.tsv"] = render([&](std::ostream& os) { io::write_edge_list(os, d.graph); });
    out["features.csv"] = render([&](std::ostream& os) { io::write_node_field(os, d.features); });
    out["labels.csv"] = render([&](std::ostream& os) { io::write_labels(os, d.labels); });
    out["train_mask.txt"] = render([&](std::ostream& os) { io::write_mask(os, split.train); });
    out["val_mask.txt"] = render([&](std::ostream& os) { io::write_mask(os, split.val); });
    out["test_mask.txt"] = render([&](std::ostream& os) { io::write_mask(os, split.test); });
    out["summary.json"] =
        dump({{"nodes", d.graph.num_nodes()}, {"edges", d.graph.num_edges()}, {"connected", d.connected}});
    return out;
}

Outputs cmd_synth_transport(const Json& c) {
    synth::TransportData d = synth::generate_transport_data(transport_spec(c, seed_of(c)));
    auto table = [](const Trajectory& t) {
        io::TrajectoryTable out;
        out.t = t.t;
        for (const auto& x : t.x) out.x.push_back(x.col(0));
        return out;
    };
    Outputs out;
    out["graph.tsv"] = render([&](std::ostream& os) { io::write_edge_list(os, d.graph); });
    out["alpha.tsv"] =
        render([&](std::ostream& os) { io::write_edge_list(os, d.graph, edge_values(d.graph, d.alpha_true)); });
    out["trajectory.csv"] = render([&](std::ostream& os) { io::write_trajectory(os, table(d.observed)); });
    out["clean.csv"] = render([&](std::ostream& os) { io::write_trajectory(os, table(d.clean)); });
    out["true_transfers.csv"] = render(
        [&](std::ostream& os) { io::write_flows(os, transfer_rows(d.graph, d.true_flows, interval_ends(d.clean))); });
    out["summary.json"] = dump({{"dt", d.dt}, {"stride", d.stride}, {"edges", d.graph.num_edges()}});
    return out;
}

Outputs execute(const Json& c) {
    std::string command = str(c, "command"), action = str(c, "action");
    if (command == "diffuse") return cmd_diffuse(c);
    if (command == "classify") return cmd_classify(c);
    if (command == "flow" && action == "simulate") return cmd_flow_simulate(c);
    if (command == "flow" && action == "fit") return cmd_flow_fit(c);
    if (command == "synth" && action == "sbm") return cmd_synth_sbm(c);
    if (command == "synth" && action == "transport") return cmd_synth_transport(c);
    throw InvalidArgument("unknown command '" + command + " " + action + "'");
}

// Writes every file into a staging directory and renames it into place, so a
// failed run leaves nothing behind and a rerun replaces the previous outputs.
fs::path publish(const fs::path& root, const std::string& command, const std::string& run_id, const Outputs& files) {
    fs::path parent = root / command;
    fs::create_directories(parent);
    fs::path staging = parent / ("." + run_id + ".tmp-" + std::to_string(::getpid()));
    fs::remove_all(staging);
    fs::create_directories(staging);
    try {
        for (const auto& [name, text] : files) {
            std::ofstream f(staging / name, std::ios::binary);
            f << text;
            if (!f) throw Error("cannot write '" + (staging / name).string() + "'");
        }
        fs::path target = parent / run_id;
        fs::remove_all(target);
        fs::rename(staging, target);
        return target;
    } catch (...) {
        std::error_code ec;
        fs::remove_all(staging, ec);
        throw;
    }
}

}  // namespace

Json default_config(const std::string& command, const std::string& action) {
    Json c = {{"command", command}, {"action", action}, {"seed", std::uint64_t{0}}};
    if (command == "diffuse" && action.empty()) {
        DCSolveOptions d;
        c.update({{"graph", ""},
                  {"features", ""},
                  {"mode", "tv"},
                  {"lambda", 1.0},
                  {"tau", 0.0},
                  {"steps", 50},
                  {"max_iters", d.max_iters},
                  {"tol", d.tol}});
    } else if (command == "classify" && action.empty()) {
        c.update({{"synthetic", "sbm"},
                  {"sbm", sbm_defaults()},
                  {"split", split_defaults()},
                  {"graph", ""},
                  {"features", ""},
                  {"labels", ""},
                  {"train_mask", ""},
                  {"val_mask", ""},
                  {"test_mask", ""},
                  {"depth", 2},
                  {"hidden", 16},
                  {"dc_after", Json::array()},
                  {"lambda", 1.0},
                  {"epochs", 400},
                  {"learning_rate", 0.01},
                  {"weight_decay", 5e-4},
                  {"optimizer", "adam"},
                  {"bins", 20}});
    } else if (command == "flow" && action == "simulate") {
        c.update({{"graph", ""}, {"u0", ""}, {"alpha", 1.0}, {"alpha_file", ""}, {"steps", 40}, {"dt", 0.0}});
    } else if (command == "flow" && action == "fit") {
        flow::FlowNetConfig f;
        c.update({{"method", "gan"},
                  {"synthetic", "transport"},
                  {"transport", transport_defaults()},
                  {"graph", ""},
                  {"trajectory", ""},
                  {"true_flows", ""},
                  {"dt", 0.0},
                  {"epochs", f.epochs},
                  {"lr_generator", f.lr_generator},
                  {"lr_discriminator", f.lr_discriminator},
                  {"xi", f.xi},
                  {"gan_weight", f.gan_weight},
                  {"alpha_init", f.alpha_init},
                  {"learn_readout", f.learn_readout},
                  {"learn_initial_state", f.learn_initial_state},
                  {"ridge", flow::TwoStepConfig{}.ridge}});
    } else if (command == "synth" && action == "sbm") {
        c.update({{"sbm", sbm_defaults()}, {"split", split_defaults()}});
    } else if (command == "synth" && action == "transport") {
        c.update({{"transport", transport_defaults()}});
    } else {
        throw InvalidArgument("unknown command '" + command + (action.empty() ? "" : " " + action) + "'");
    }
    return c;
}

void merge_config(Json& base, const Json& overlay) {
    if (!overlay.is_object()) throw InvalidArgument("configuration must be a JSON object");
    for (auto it = overlay.begin(); it != overlay.end(); ++it) {
        if (!base.contains(it.key())) throw InvalidArgument("unknown configuration key '" + it.key() + "'");
        Json& slot = base[it.key()];
        const Json& v = it.value();
        auto mismatch = [&] { return InvalidArgument("configuration key '" + it.key() + "' has the wrong type"); };
        if (slot.is_object()) {
            if (!v.is_object()) throw mismatch();
            merge_config(slot, v);
        } else if (slot.is_number_float()) {
            if (!v.is_number()) throw mismatch();
            slot = v.get<double>();
        } else if (slot.is_number_unsigned()) {
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) throw mismatch();
            slot = v.get<std::uint64_t>();
        } else if (slot.is_number_integer()) {
            if (!v.is_number_integer()) throw mismatch();
            slot = v.get<std::int64_t>();
        } else if (slot.is_array()) {
            if (!v.is_array()) throw mismatch();
            for (const Json& e : v)
                if (!e.is_number_integer()) throw mismatch();
            slot = v;
        } else {
            if (slot.type() != v.type()) throw mismatch();
            slot = v;
        }
    }
}

std::string fnv1a_hex(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string canonical(const Json& config) { return config.dump(2) + "\n"; }

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Graph diffusion, total-variation diffusion, GCN classification and flow recovery"};
    app.require_subcommand(0, 1);
    app.fallthrough();
    std::string seed_text, out_root = "out", config_path;
    app.add_option("--seed", seed_text, "random seed");
    app.add_option("--out", out_root, "output root directory")->capture_default_str();
    app.add_option("--config", config_path, "configuration JSON (for example a previous run's config.json)");

    struct Bound {
        CLI::App* app;
        std::string command, action;
        std::vector<FlagSpec> flags;
        std::vector<std::string> values;
        std::vector<CLI::Option*> options;
        std::string dc_after;
        CLI::Option* dc_option = nullptr;
    };
    std::vector<std::unique_ptr<Bound>> bound;
    auto bind = [&](CLI::App* sub, const std::string& command, const std::string& action) {
        auto b = std::make_unique<Bound>();
        b->app = sub;
        b->command = command;
        b->action = action;
        b->flags = flags_for(command, action);
        b->values.resize(b->flags.size());
        for (std::size_t k = 0; k < b->flags.size(); ++k) {
            b->options.push_back(sub->add_option(b->flags[k].flag, b->values[k], b->flags[k].help));
        }
        if (command == "classify") {
            b->dc_option = sub->add_option("--dc-after", b->dc_after,
                                           "comma-separated FC indices followed by DC layers, 'default' or 'none'");
        }
        bound.push_back(std::move(b));
    };
    bind(app.add_subcommand("diffuse", "heat or total-variation diffusion of a node field"), "diffuse", "");
    bind(app.add_subcommand("classify", "train a GCN, optionally with DC layers"), "classify", "");
    CLI::App* flow_app = app.add_subcommand("flow", "transport simulation and flow recovery");
    flow_app->require_subcommand(1);
    bind(flow_app->add_subcommand("simulate", "integrate the transport equations"), "flow", "simulate");
    bind(flow_app->add_subcommand("fit", "recover flows with FlowNet and the two-step baseline"), "flow", "fit");
    CLI::App* synth_app = app.add_subcommand("synth", "synthetic datasets");
    synth_app->require_subcommand(1);
    bind(synth_app->add_subcommand("sbm", "stochastic block model with features and split"), "synth", "sbm");
    bind(synth_app->add_subcommand("transport", "transport trajectory with ground-truth flows"), "synth", "transport");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kValidation;
    }

    try {
        Bound* chosen = nullptr;
        for (auto& b : bound)
            if (b->app->parsed()) chosen = b.get();

        std::optional<Json> file_config;
        if (!config_path.empty()) {
            try {
                file_config = Json::parse(read_text(config_path));
            } catch (const Json::parse_error& e) {
                throw InvalidArgument("cannot parse '" + config_path + "': " + e.what());
            }
            if (!file_config->is_object()) throw InvalidArgument("configuration must be a JSON object");
        }

        std::string command, action;
        if (chosen) {
            command = chosen->command;
            action = chosen->action;
        } else if (file_config && file_config->contains("command")) {
            command = file_config->value("command", "");
            action = file_config->value("action", "");
        } else {
            err << app.help();
            return kValidation;
        }
        Json config = default_config(command, action);
        if (file_config) {
            if (file_config->value("command", command) != command || file_config->value("action", action) != action) {
                throw InvalidArgument("configuration file is for a different command");
            }
            merge_config(config, *file_config);
        }
        if (chosen) {
            for (std::size_t k = 0; k < chosen->flags.size(); ++k) {
                if (chosen->options[k]->count() == 0) continue;
                Json::json_pointer ptr(chosen->flags[k].pointer);
                config[ptr] = parse_flag_value(config[ptr], chosen->values[k], chosen->flags[k].flag);
            }
            if (chosen->dc_option && chosen->dc_option->count() > 0) {
                if (chosen->dc_after == "default") {
                    config["dc_after"] = gnn::default_dc_placement(static_cast<int>(config["depth"].get<long>()));
                } else if (chosen->dc_after == "none") {
                    config["dc_after"] = Json::array();
                } else {
                    config["dc_after"] = parse_flag_value(Json::array(), chosen->dc_after, "--dc-after");
                }
            }
        }
        if (!seed_text.empty()) config["seed"] = parse_flag_value(Json(std::uint64_t{0}), seed_text, "--seed");
        for (const char* key : kPathKeys) {
            if (config.contains(key)) config[key] = absolute_path(config[key].get<std::string>());
        }

        Outputs files = execute(config);
        std::string text = canonical(config);
        files["config.json"] = text;
        fs::path dir = publish(out_root, command, fnv1a_hex(text), files);
        out << dir.string() << '\n';
        return kSuccess;
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << '\n';
        return kDivergence;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const Json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
}

}  // namespace graphtv::cli
