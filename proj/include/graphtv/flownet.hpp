#pragma once

// Flow recovery from longitudinal node observations.
//
// FlowNet is an energy-based GAN. The generator rolls the observed initial state
// forward with the staggered transport scheme under a learned conductivity and
// maps potentials to observations through a monotone affine readout. The
// discriminator synthesizes its own conductivity, builds a one-interval flow
// prediction from each observed state, and scores a candidate next state by its
// mean squared distance to that prediction.
//
// Flows are reported as per-interval increments: flow_ij is the net amount moved
// into node i from node j over the interval.

#include "graphtv/graph.hpp"
#include "graphtv/transport.hpp"

#include <cstdint>
#include <vector>

namespace graphtv::flow {

struct GanLosses {
    double l_d = 0.0;
    double l_g = 0.0;
};

/// l_d = d_real + max(0, xi - d_fake), l_g = d_fake. Throws InvalidArgument when xi <= 0.
GanLosses gan_losses(double d_real, double d_fake, double xi);

double softplus(double r);
double softplus_inverse(double a);

struct FlowNetConfig {
    double dt = 0.0;  ///< integrator step; trajectory times count steps of this size
    int epochs = 1500;
    double lr_generator = 0.02;
    double lr_discriminator = 0.02;
    double xi = 1.0;
    double gan_weight = 1.0;  ///< weight of L_G in the generator objective
    double alpha_init = 1.0;
    bool learn_readout = false;  ///< identity readout unless enabled
    bool learn_initial_state = true;
    std::uint64_t seed = 0;
};

void validate(const FlowNetConfig& cfg);

struct FlowNet {
    Eigen::VectorXd generator_raw;      ///< per edge, alpha = softplus(raw)
    Eigen::VectorXd initial_state;      ///< generator potential at the first observation
    double readout_slope_raw = 0.0;     ///< slope = softplus(raw)
    double readout_bias = 0.0;
    Eigen::VectorXd discriminator_raw;  ///< per edge
    double xi = 1.0;
    std::uint64_t seed = 0;

    EdgeField generator_alpha(const Graph& g) const;
    EdgeField discriminator_alpha(const Graph& g) const;
    double readout_slope() const { return softplus(readout_slope_raw); }
};

/// Generator initialized from the first observation, alpha = cfg.alpha_init
/// jittered by a seeded +-5% so edges are not tied, identity readout.
FlowNet init_flownet(const Graph& g, const Trajectory& traj, const FlowNetConfig& cfg);

/// Integrator steps per observation interval; throws unless every gap is a positive integer.
std::vector<long> interval_steps(const Trajectory& traj);

struct Rollout {
    std::vector<Eigen::VectorXd> x_hat;         ///< readout at every observation time
    std::vector<Eigen::VectorXd> u_obs;         ///< potential at every observation time
    std::vector<EdgeField> interval_flows;      ///< accumulated increments per interval
};

Rollout generator_rollout(const Graph& g, const FlowNet& net, const std::vector<long>& steps, double dt);

/// Discriminator energy D(y) = mean_i (x_tilde_i - y_i)^2 with
/// x_tilde = x_prev + sum_j flow_ij, flow_ij = -h alpha_ij w_ij (x_prev_i - x_prev_j).
double discriminator_energy(const Graph& g, const FlowNet& net, const Eigen::VectorXd& x_prev,
                            const Eigen::VectorXd& y, double h);

struct GeneratorGradient {
    double loss = 0.0;  ///< mse + gan_weight * l_g
    double mse = 0.0;
    double l_g = 0.0;
    Eigen::VectorXd d_raw;
    Eigen::VectorXd d_initial_state;
    double d_slope_raw = 0.0;
    double d_bias = 0.0;
};

/// Generator objective and its exact gradient (adjoint through the rollout), with
/// the discriminator held fixed.
GeneratorGradient generator_loss_and_gradient(const Graph& g, const FlowNet& net, const Trajectory& traj,
                                              const FlowNetConfig& cfg);

struct DiscriminatorGradient {
    double loss = 0.0;    ///< mean over intervals of l_d
    double d_real = 0.0;  ///< mean energy of observed next states
    double d_fake = 0.0;  ///< mean energy of generated next states
    Eigen::VectorXd d_raw;
};

DiscriminatorGradient discriminator_loss_and_gradient(const Graph& g, const FlowNet& net, const Trajectory& traj,
                                                      const std::vector<Eigen::VectorXd>& x_hat,
                                                      const FlowNetConfig& cfg);

struct FlowNetReport {
    std::vector<double> mse;
    std::vector<double> l_g;
    std::vector<double> l_d;
    int epochs = 0;
};

struct FlowNetFit {
    FlowNet net;
    EdgeField alpha_hat;
    std::vector<EdgeField> flows_hat;
    Trajectory predicted;
    FlowNetReport report;
};

/// Alternating Adam updates: discriminator on l_d, then generator on mse + l_g.
/// Throws DivergenceError naming the phase (G or D) and epoch on a non-finite loss.
FlowNetFit flownet_train(const Graph& g, const Trajectory& traj, const FlowNetConfig& cfg);

struct TwoStepConfig {
    double dt = 0.0;
    double ridge = 1e-10;  ///< relative Tikhonov weight used when the fit is rank deficient
};

struct TwoStepFit {
    EdgeField alpha_hat;
    std::vector<EdgeField> flows_hat;
    double residual_rms = 0.0;
    bool rank_deficient = false;
};

/// Least-squares fit of theta = alpha^2 in (x_{m+1} - x_m) / h = div(theta grad x_m),
/// followed by flows from extract_flux on the observations.
TwoStepFit two_step_baseline(const Graph& g, const Trajectory& traj, const TwoStepConfig& cfg);

}  // namespace graphtv::flow
