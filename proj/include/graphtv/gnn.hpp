#pragma once

// Desk-scale graph convolutional network with optional diffusion-clip (DC)
// layers, a full-batch trainer with hand-written backpropagation, and
// over-smoothing diagnostics.

#include "graphtv/graph.hpp"

#include <Eigen/SparseCore>

#include <cstdint>
#include <string>
#include <vector>

namespace graphtv::gnn {

using PropagationMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// D^{-1/2} (W + I) D^{-1/2} with D the row sums of W + I.
PropagationMatrix normalize_adjacency(const Graph& g);

enum class LayerKind { FC, DC };

struct Layer {
    LayerKind kind = LayerKind::FC;
    Eigen::MatrixXd weight;  ///< FC only: d_in x d_out
    bool relu = false;       ///< FC only
    double lambda = 1.0;     ///< DC only
};

struct GCNModel {
    std::vector<Layer> layers;
    std::uint64_t seed = 0;

    int input_dim() const;
    int output_dim() const;
    int depth() const;  ///< number of FC layers
    /// 1-based FC indices that are followed by a DC layer.
    std::vector<int> dc_positions() const;
};

struct Architecture {
    int input_dim = 0;
    int hidden_dim = 16;
    int output_dim = 2;
    int depth = 2;              ///< FC layers; ReLU on all but the last
    std::vector<int> dc_after;  ///< 1-based FC indices, each < depth
    double dc_lambda = 1.0;
};

/// Throws InvalidArgument on depth < 1, non-positive widths, or DC positions outside [1, depth-1].
void validate(const Architecture& arch);

/// Glorot-uniform weights in +-sqrt(6 / (d_in + d_out)) from a seeded generator.
GCNModel make_gcn(const Architecture& arch, std::uint64_t seed);

/// Default DC schedule: one DC layer after every hidden FC layer starting at
/// ceil(depth/3) for depth <= 8, at 5 for depth <= 16, and at 8 beyond.
std::vector<int> default_dc_placement(int depth);

/// Graph-derived quantities shared by every forward pass on one graph.
struct GraphContext {
    const Graph* graph = nullptr;
    PropagationMatrix propagation;
    double beta = 0.0;  ///< kBetaSafety * operator_norm for DC layers
};

GraphContext make_context(const Graph& g);

struct ForwardCache {
    std::vector<NodeField> inputs;     ///< input of each layer
    std::vector<NodeField> propagated; ///< FC: A_hat * input (empty for DC)
    std::vector<NodeField> preact;     ///< FC: A_hat * input * W (empty for DC)
    std::vector<EdgeField> dc_in;      ///< DC: dual entering the layer (empty for FC)
    std::vector<EdgeField> dc_out;     ///< DC: dual leaving the layer (empty for FC)
};

struct ForwardResult {
    NodeField logits;
    /// Output of every layer, in order; the last entry equals logits.
    std::vector<NodeField> layer_outputs;
    std::vector<EdgeField> dc_duals;
    ForwardCache cache;
};

/// FC: h <- act(A_hat h W). DC: (h, z) <- dc_layer_apply(h, z); z starts at 0 each pass.
ForwardResult gcn_forward(const GCNModel& model, const GraphContext& ctx, const NodeField& x);
ForwardResult gcn_forward(const GCNModel& model, const Graph& g, const NodeField& x);

/// Representation fed to the output layer (the logits when depth == 1).
const NodeField& final_embedding(const GCNModel& model, const ForwardResult& fwd);

/// Outputs of every layer before the output FC layer (just the logits when depth == 1).
std::vector<NodeField> hidden_embeddings(const GCNModel& model, const ForwardResult& fwd);

enum class Optimizer { GradientDescent, Adam };

struct TrainConfig {
    int epochs = 200;
    double learning_rate = 0.05;
    double weight_decay = 5e-4;
    std::vector<int> dc_placement;  ///< must match the model's DC layers
    std::uint64_t seed = 0;
    std::vector<index_t> train_mask, val_mask, test_mask;
    Optimizer optimizer = Optimizer::GradientDescent;
};

/// Throws InvalidArgument for overlapping or out-of-range masks, an empty
/// training mask, or a placement that does not match the model.
void validate(const TrainConfig& cfg, const GCNModel& model, index_t n);

/// Mean softmax cross-entropy over `mask` plus (weight_decay / 2) * sum ||W||^2,
/// and its gradient with respect to every FC weight (empty matrices for DC layers).
struct LossAndGrad {
    double loss = 0.0;
    std::vector<Eigen::MatrixXd> grads;
};
LossAndGrad loss_and_gradient(const GCNModel& model, const GraphContext& ctx, const NodeField& x,
                              const std::vector<int>& labels, const std::vector<index_t>& mask, double weight_decay);

struct ClassificationScores {
    double accuracy = 0.0;
    double precision = 0.0;  ///< macro average
    double recall = 0.0;     ///< macro average
    double f1 = 0.0;         ///< macro average
};

ClassificationScores score_predictions(const std::vector<int>& predicted, const std::vector<int>& truth,
                                       const std::vector<index_t>& mask);

std::vector<int> predict(const NodeField& logits);

struct OversmoothReport {
    std::vector<double> per_layer_dirichlet;
    std::vector<double> hist_edges;     ///< bins + 1 edges over [-1, 1]
    std::vector<long> interclass_hist;  ///< counts of Pearson correlations per bin
    double interclass_mean = 0.0;       ///< NaN when no pair is defined
    long interclass_edges = 0;          ///< inter-class edges considered
    long zero_variance_pairs = 0;       ///< excluded because an embedding is constant
    ClassificationScores scores;        ///< test-mask scores (filled by train)
    std::vector<double> loss_history;   ///< training loss per epoch (filled by train)
};

/// Pearson correlation of two vectors; NaN when either has zero variance.
double pearson(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b);

/// Dirichlet energy of every embedding, and a histogram of Pearson correlations
/// across inter-class edges on the last embedding.
OversmoothReport oversmoothing_metrics(const Graph& g, const std::vector<NodeField>& embeddings,
                                       const std::vector<int>& labels, int bins = 20);

struct TrainResult {
    GCNModel model;
    OversmoothReport report;
};

/// Full-batch training on the train mask; DC layers backpropagate straight-through
/// (identity inside the cap, zero where clipped). With a non-empty validation mask
/// the returned model is the one with the best validation accuracy over all epochs.
/// Throws DivergenceError naming the epoch when the loss becomes non-finite.
TrainResult train(const GCNModel& model, const Graph& g, const NodeField& x, const std::vector<int>& labels,
                  const TrainConfig& cfg);

}  // namespace graphtv::gnn
