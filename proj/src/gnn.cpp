#include "graphtv/gnn.hpp"

#include "graphtv/diffusion.hpp"
#include "graphtv/error.hpp"
#include "graphtv/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

namespace graphtv::gnn {

PropagationMatrix normalize_adjacency(const Graph& g) {
    const index_t n = g.num_nodes();
    Eigen::VectorXd deg = Eigen::VectorXd::Ones(n);
    for (const Edge& e : g.edges()) {
        deg(e.i) += e.w;
        deg(e.j) += e.w;
    }
    Eigen::VectorXd inv_sqrt = deg.cwiseSqrt().cwiseInverse();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(n + 2 * g.num_edges());
    for (index_t i = 0; i < n; ++i) trip.emplace_back(i, i, inv_sqrt(i) * inv_sqrt(i));
    for (const Edge& e : g.edges()) {
        double v = e.w * inv_sqrt(e.i) * inv_sqrt(e.j);
        trip.emplace_back(e.i, e.j, v);
        trip.emplace_back(e.j, e.i, v);
    }
    PropagationMatrix a(n, n);
    a.setFromTriplets(trip.begin(), trip.end());
    return a;
}

// -- model ---------------------------------------------------------------------

int GCNModel::input_dim() const {
    for (const Layer& l : layers)
        if (l.kind == LayerKind::FC) return static_cast<int>(l.weight.rows());
    return 0;
}

int GCNModel::output_dim() const {
    for (auto it = layers.rbegin(); it != layers.rend(); ++it)
        if (it->kind == LayerKind::FC) return static_cast<int>(it->weight.cols());
    return 0;
}

int GCNModel::depth() const {
    return static_cast<int>(std::count_if(layers.begin(), layers.end(),
                                          [](const Layer& l) { return l.kind == LayerKind::FC; }));
}

std::vector<int> GCNModel::dc_positions() const {
    std::vector<int> out;
    int fc = 0;
    for (const Layer& l : layers) {
        if (l.kind == LayerKind::FC) ++fc;
        else out.push_back(fc);
    }
    return out;
}

void validate(const Architecture& arch) {
    if (arch.depth < 1) throw InvalidArgument("depth must be >= 1");
    if (arch.input_dim < 1 || arch.output_dim < 1 || (arch.depth > 1 && arch.hidden_dim < 1)) {
        throw InvalidArgument("layer widths must be >= 1");
    }
    if (!(arch.dc_lambda > 0.0)) throw InvalidArgument("DC lambda must be > 0");
    std::set<int> seen;
    for (int p : arch.dc_after) {
        if (p < 1 || p >= arch.depth) {
            throw InvalidArgument("DC position " + std::to_string(p) + " outside [1, " +
                                  std::to_string(arch.depth - 1) + "]");
        }
        if (!seen.insert(p).second) throw InvalidArgument("duplicate DC position " + std::to_string(p));
    }
}

GCNModel make_gcn(const Architecture& arch, std::uint64_t seed) {
    validate(arch);
    std::set<int> dc(arch.dc_after.begin(), arch.dc_after.end());
    std::mt19937_64 rng(seed);
    GCNModel model;
    model.seed = seed;
    for (int l = 1; l <= arch.depth; ++l) {
        int d_in = l == 1 ? arch.input_dim : arch.hidden_dim;
        int d_out = l == arch.depth ? arch.output_dim : arch.hidden_dim;
        double limit = std::sqrt(6.0 / (d_in + d_out));
        std::uniform_real_distribution<double> unif(-limit, limit);
        Layer fc;
        fc.kind = LayerKind::FC;
        fc.relu = l < arch.depth;
        fc.weight.resize(d_in, d_out);
        for (int r = 0; r < d_in; ++r)
            for (int c = 0; c < d_out; ++c) fc.weight(r, c) = unif(rng);
        model.layers.push_back(std::move(fc));
        if (dc.count(l)) {
            Layer d;
            d.kind = LayerKind::DC;
            d.lambda = arch.dc_lambda;
            model.layers.push_back(std::move(d));
        }
    }
    return model;
}

std::vector<int> default_dc_placement(int depth) {
    int start = depth <= 8 ? (depth + 2) / 3 : (depth <= 16 ? 5 : 8);
    std::vector<int> out;
    for (int l = start; l < depth; ++l) out.push_back(l);
    return out;
}

GraphContext make_context(const Graph& g) {
    GraphContext ctx;
    ctx.graph = &g;
    ctx.propagation = normalize_adjacency(g);
    ctx.beta = kBetaSafety * g.spectral_norm();
    return ctx;
}

// -- forward -------------------------------------------------------------------

ForwardResult gcn_forward(const GCNModel& model, const GraphContext& ctx, const NodeField& x) {
    const Graph& g = *ctx.graph;
    require_node_field(g, x, "input features");
    if (x.cols() != model.input_dim()) {
        throw DimensionError("input has " + std::to_string(x.cols()) + " features, model expects " +
                             std::to_string(model.input_dim()));
    }
    ForwardResult out;
    ForwardCache& cache = out.cache;
    NodeField h = x;
    EdgeField z;
    for (const Layer& layer : model.layers) {
        cache.inputs.push_back(h);
        if (layer.kind == LayerKind::FC) {
            if (h.cols() != layer.weight.rows()) throw DimensionError("FC layer input width mismatch");
            NodeField ah = ctx.propagation * h;
            NodeField pre = ah * layer.weight;
            h = layer.relu ? NodeField(pre.cwiseMax(0.0)) : pre;
            cache.propagated.push_back(std::move(ah));
            cache.preact.push_back(std::move(pre));
            cache.dc_in.emplace_back();
            cache.dc_out.emplace_back();
        } else {
            if (z.size() == 0 && z.rows() == 0) z = EdgeField::Zero(g.num_slots(), h.cols());
            if (z.cols() != h.cols()) throw DimensionError("DC layers must see a constant embedding width");
            cache.dc_in.push_back(z);
            auto [xn, zn] = dc_layer_apply(g, h, z, layer.lambda, ctx.beta);
            h = std::move(xn);
            z = std::move(zn);
            cache.dc_out.push_back(z);
            out.dc_duals.push_back(z);
            cache.propagated.emplace_back();
            cache.preact.emplace_back();
        }
        out.layer_outputs.push_back(h);
    }
    out.logits = h;
    return out;
}

ForwardResult gcn_forward(const GCNModel& model, const Graph& g, const NodeField& x) {
    return gcn_forward(model, make_context(g), x);
}

namespace {

// Position of the output FC layer in model.layers.
std::size_t output_layer(const GCNModel& model) {
    for (std::size_t l = model.layers.size(); l-- > 0;)
        if (model.layers[l].kind == LayerKind::FC) return l;
    return 0;
}

}  // namespace

const NodeField& final_embedding(const GCNModel& model, const ForwardResult& fwd) {
    std::size_t last = output_layer(model);
    return last == 0 ? fwd.logits : fwd.layer_outputs[last - 1];
}

std::vector<NodeField> hidden_embeddings(const GCNModel& model, const ForwardResult& fwd) {
    std::size_t last = output_layer(model);
    if (last == 0) return {fwd.logits};
    return {fwd.layer_outputs.begin(), fwd.layer_outputs.begin() + static_cast<std::ptrdiff_t>(last)};
}

// -- training ------------------------------------------------------------------

void validate(const TrainConfig& cfg, const GCNModel& model, index_t n) {
    if (cfg.epochs < 0) throw InvalidArgument("epochs must be >= 0");
    if (!(cfg.learning_rate > 0.0)) throw InvalidArgument("learning rate must be > 0");
    if (!(cfg.weight_decay >= 0.0)) throw InvalidArgument("weight decay must be >= 0");
    if (cfg.train_mask.empty()) throw InvalidArgument("training mask is empty");
    std::vector<char> owner(n, 0);
    char tag = 1;
    for (const auto* mask : {&cfg.train_mask, &cfg.val_mask, &cfg.test_mask}) {
        for (index_t i : *mask) {
            if (i >= n) throw InvalidArgument("mask node " + std::to_string(i) + " out of range");
            if (owner[i]) throw InvalidArgument("masks overlap at node " + std::to_string(i));
            owner[i] = tag;
        }
        ++tag;
    }
    for (int p : cfg.dc_placement) {
        if (p < 1 || p >= model.depth()) throw InvalidArgument("DC placement index outside the network depth");
    }
    if (cfg.dc_placement != model.dc_positions()) {
        throw InvalidArgument("DC placement in the training config does not match the model");
    }
}

LossAndGrad loss_and_gradient(const GCNModel& model, const GraphContext& ctx, const NodeField& x,
                              const std::vector<int>& labels, const std::vector<index_t>& mask, double weight_decay) {
    const Graph& g = *ctx.graph;
    ForwardResult fwd = gcn_forward(model, ctx, x);
    const int classes = static_cast<int>(fwd.logits.cols());
    LossAndGrad out;

    NodeField grad = NodeField::Zero(fwd.logits.rows(), classes);
    const double scale = 1.0 / static_cast<double>(mask.size());
    for (index_t i : mask) {
        int y = labels.at(i);
        if (y < 0 || y >= classes) throw InvalidArgument("label of node " + std::to_string(i) + " outside the classes");
        Eigen::RowVectorXd row = fwd.logits.row(i);
        double mx = row.maxCoeff();
        Eigen::RowVectorXd p = (row.array() - mx).exp();
        double sum = p.sum();
        out.loss += -(row(y) - mx - std::log(sum)) * scale;
        p /= sum;
        p(y) -= 1.0;
        grad.row(i) = p * scale;
    }

    out.grads.resize(model.layers.size());
    EdgeField grad_z;
    for (std::size_t l = model.layers.size(); l-- > 0;) {
        const Layer& layer = model.layers[l];
        if (layer.kind == LayerKind::FC) {
            out.loss += 0.5 * weight_decay * layer.weight.squaredNorm();
            NodeField gp = grad;
            if (layer.relu) gp.array() *= (fwd.cache.preact[l].array() > 0.0).cast<double>();
            out.grads[l] = fwd.cache.propagated[l].transpose() * gp + weight_decay * layer.weight;
            grad = ctx.propagation * (gp * layer.weight.transpose());
        } else {
            if (g.num_edges() == 0) continue;
            const EdgeField& z_in = fwd.cache.dc_in[l];
            const NodeField& x_new = fwd.layer_outputs[l];
            const double c = 2.0 / (ctx.beta * layer.lambda);
            if (grad_z.size() == 0) grad_z = EdgeField::Zero(z_in.rows(), z_in.cols());
            EdgeField pre = z_in + c * graph_gradient(g, x_new);
            EdgeField gpre = grad_z.array() * (pre.array().abs() <= 1.0).cast<double>();
            NodeField gx = grad + c * gradient_transpose(g, gpre);
            grad_z = gpre - (0.25 * layer.lambda) * graph_gradient(g, gx);
            grad = std::move(gx);
        }
    }
    return out;
}

std::vector<int> predict(const NodeField& logits) {
    std::vector<int> out(logits.rows());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index best = 0;
        logits.row(i).maxCoeff(&best);
        out[i] = static_cast<int>(best);
    }
    return out;
}

ClassificationScores score_predictions(const std::vector<int>& predicted, const std::vector<int>& truth,
                                       const std::vector<index_t>& mask) {
    ClassificationScores s;
    if (mask.empty()) return s;
    std::set<int> classes;
    long correct = 0;
    for (index_t i : mask) {
        classes.insert(truth.at(i));
        classes.insert(predicted.at(i));
        if (truth[i] == predicted[i]) ++correct;
    }
    s.accuracy = static_cast<double>(correct) / mask.size();
    for (int c : classes) {
        long tp = 0, fp = 0, fn = 0;
        for (index_t i : mask) {
            bool p = predicted[i] == c, t = truth[i] == c;
            tp += p && t;
            fp += p && !t;
            fn += !p && t;
        }
        double prec = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
        double rec = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
        double f1 = prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
        s.precision += prec;
        s.recall += rec;
        s.f1 += f1;
    }
    auto k = static_cast<double>(classes.size());
    s.precision /= k;
    s.recall /= k;
    s.f1 /= k;
    return s;
}

double pearson(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
    Eigen::RowVectorXd da = a.array() - a.mean();
    Eigen::RowVectorXd db = b.array() - b.mean();
    double na = da.norm(), nb = db.norm();
    if (na == 0.0 || nb == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return std::clamp(da.dot(db) / (na * nb), -1.0, 1.0);
}

OversmoothReport oversmoothing_metrics(const Graph& g, const std::vector<NodeField>& embeddings,
                                       const std::vector<int>& labels, int bins) {
    if (embeddings.empty()) throw InvalidArgument("need at least one embedding layer");
    if (bins < 1) throw InvalidArgument("need at least one histogram bin");
    if (labels.size() != g.num_nodes()) throw DimensionError("labels do not match the graph");
    OversmoothReport r;
    for (const NodeField& h : embeddings) r.per_layer_dirichlet.push_back(dirichlet_energy(g, h));

    r.hist_edges.resize(bins + 1);
    for (int b = 0; b <= bins; ++b) r.hist_edges[b] = -1.0 + 2.0 * b / bins;
    r.interclass_hist.assign(bins, 0);
    const NodeField& h = embeddings.back();
    double sum = 0.0;
    long defined = 0;
    for (const Edge& e : g.edges()) {
        if (labels[e.i] == labels[e.j]) continue;
        ++r.interclass_edges;
        double c = pearson(h.row(e.i), h.row(e.j));
        if (std::isnan(c)) {
            ++r.zero_variance_pairs;
            continue;
        }
        int b = std::min(bins - 1, static_cast<int>((c + 1.0) / 2.0 * bins));
        ++r.interclass_hist[b];
        sum += c;
        ++defined;
    }
    r.interclass_mean = defined ? sum / defined : std::numeric_limits<double>::quiet_NaN();
    return r;
}

namespace {

struct AdamState {
    std::vector<Eigen::MatrixXd> m, v;
    long step = 0;
};

}  // namespace

TrainResult train(const GCNModel& model, const Graph& g, const NodeField& x, const std::vector<int>& labels,
                  const TrainConfig& cfg) {
    validate(cfg, model, g.num_nodes());
    if (labels.size() != g.num_nodes()) throw DimensionError("labels do not match the graph");
    GraphContext ctx = make_context(g);
    TrainResult out{model, {}};
    GCNModel& m = out.model;
    std::vector<double> history;

    AdamState adam;
    if (cfg.optimizer == Optimizer::Adam) {
        for (const Layer& l : m.layers) {
            adam.m.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
            adam.v.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
        }
    }
    // Keep the weights with the best validation accuracy (earliest on ties).
    GCNModel best = m;
    double best_val = -1.0;
    auto track_validation = [&] {
        if (cfg.val_mask.empty()) return;
        ForwardResult f = gcn_forward(m, ctx, x);
        double acc = score_predictions(predict(f.logits), labels, cfg.val_mask).accuracy;
        if (acc > best_val) {
            best_val = acc;
            best = m;
        }
    };
    track_validation();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        LossAndGrad lg = loss_and_gradient(m, ctx, x, labels, cfg.train_mask, cfg.weight_decay);
        if (!std::isfinite(lg.loss))
            throw DivergenceError("training loss became non-finite at epoch " + std::to_string(epoch));
        history.push_back(lg.loss);
        if (cfg.optimizer == Optimizer::Adam) ++adam.step;
        for (std::size_t l = 0; l < m.layers.size(); ++l) {
            if (m.layers[l].kind != LayerKind::FC) continue;
            if (cfg.optimizer == Optimizer::GradientDescent) {
                m.layers[l].weight -= cfg.learning_rate * lg.grads[l];
            } else {
                constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
                adam.m[l] = b1 * adam.m[l] + (1.0 - b1) * lg.grads[l];
                adam.v[l] = b2 * adam.v[l] + (1.0 - b2) * lg.grads[l].cwiseAbs2();
                double c1 = 1.0 - std::pow(b1, adam.step), c2 = 1.0 - std::pow(b2, adam.step);
                m.layers[l].weight.array() -=
                    cfg.learning_rate * (adam.m[l].array() / c1) / ((adam.v[l].array() / c2).sqrt() + eps);
            }
        }
        for (const Layer& l : m.layers) {
            if (!l.weight.allFinite()) {
                throw DivergenceError("weights became non-finite at epoch " + std::to_string(epoch));
            }
        }
        track_validation();
    }
    if (!cfg.val_mask.empty()) m = best;

    ForwardResult fwd = gcn_forward(m, ctx, x);
    if (!fwd.logits.allFinite()) throw DivergenceError("trained model produced non-finite logits");
    out.report = oversmoothing_metrics(g, hidden_embeddings(m, fwd), labels);
    out.report.scores = score_predictions(predict(fwd.logits), labels, cfg.test_mask);
    out.report.loss_history = std::move(history);
    return out;
}

}  // namespace graphtv::gnn
