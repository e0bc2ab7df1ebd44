#include "graphtv/flownet.hpp"

#include "graphtv/error.hpp"
#include "graphtv/operators.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace graphtv::flow {

GanLosses gan_losses(double d_real, double d_fake, double xi) {
    if (!(xi > 0.0)) throw InvalidArgument("GAN margin xi must be positive");
    return {d_real + std::max(0.0, xi - d_fake), d_fake};
}

double softplus(double r) { return r > 30.0 ? r : std::log1p(std::exp(r)); }

double softplus_inverse(double a) {
    if (!(a > 0.0)) throw InvalidArgument("softplus_inverse needs a > 0");
    return a > 30.0 ? a : std::log(std::expm1(a));
}

namespace {

double sigmoid(double r) { return 1.0 / (1.0 + std::exp(-r)); }

// Everything below works on lo->hi edge values: with symmetric alpha and
// antisymmetric f, slot 2e determines slot 2e+1.
// (B u)_e = w_e (u_lo - u_hi), and B^T y scatters +w y to lo and -w y to hi.
Eigen::VectorXd edge_diff(const Graph& g, const Eigen::VectorXd& u) {
    Eigen::VectorXd d(g.num_edges());
    for (index_t e = 0; e < g.num_edges(); ++e) {
        const Edge& ed = g.edges()[e];
        d(e) = ed.w * (u(ed.i) - u(ed.j));
    }
    return d;
}

Eigen::VectorXd edge_scatter(const Graph& g, const Eigen::VectorXd& y) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(g.num_nodes());
    for (index_t e = 0; e < g.num_edges(); ++e) {
        const Edge& ed = g.edges()[e];
        out(ed.i) += ed.w * y(e);
        out(ed.j) -= ed.w * y(e);
    }
    return out;
}

EdgeField to_slots(const Eigen::VectorXd& per_edge, bool antisymmetric) {
    EdgeField out(2 * per_edge.size(), 1);
    for (Eigen::Index e = 0; e < per_edge.size(); ++e) {
        out(2 * e, 0) = per_edge(e);
        out(2 * e + 1, 0) = antisymmetric ? -per_edge(e) : per_edge(e);
    }
    return out;
}

Eigen::VectorXd softplus(const Eigen::VectorXd& raw) {
    return raw.unaryExpr([](double r) { return flow::softplus(r); });
}

Eigen::VectorXd single_channel(const Graph& g, const NodeField& x) {
    require_node_field(g, x, "observation");
    if (x.cols() != 1) throw DimensionError("flow recovery expects single-channel observations");
    return x.col(0);
}

std::vector<Eigen::VectorXd> observations(const Graph& g, const Trajectory& traj) {
    require_trajectory(g, traj, 2);
    std::vector<Eigen::VectorXd> xs;
    xs.reserve(traj.x.size());
    for (const auto& x : traj.x) xs.push_back(single_channel(g, x));
    return xs;
}

// Largest alpha allowed by the transport step bound at the given dt.
double alpha_cap(const Graph& g, double dt) {
    double norm = g.spectral_norm();
    return norm > 0.0 ? 0.999 * 0.5 / (dt * std::sqrt(norm)) : std::numeric_limits<double>::infinity();
}

struct FullRollout {
    std::vector<Eigen::VectorXd> u;  // steps + 1 states
    std::vector<Eigen::VectorXd> f;  // lo->hi spreading flow, f[0] = 0
    std::vector<long> obs_step;      // step index of every observation
};

FullRollout run_generator(const Graph& g, const Eigen::VectorXd& alpha, const Eigen::VectorXd& u0,
                          const std::vector<long>& steps, double dt) {
    FullRollout r;
    long total = 0;
    r.obs_step.push_back(0);
    for (long s : steps) r.obs_step.push_back(total += s);
    r.u.reserve(total + 1);
    r.f.reserve(total + 1);
    r.u.push_back(u0);
    r.f.push_back(Eigen::VectorXd::Zero(g.num_edges()));
    for (long k = 0; k < total; ++k) {
        Eigen::VectorXd f = r.f.back() + dt * alpha.cwiseProduct(edge_diff(g, r.u.back()));
        Eigen::VectorXd u = r.u.back() - 2.0 * dt * edge_scatter(g, alpha.cwiseProduct(f));
        r.f.push_back(std::move(f));
        r.u.push_back(std::move(u));
    }
    return r;
}

struct Adam {
    Eigen::VectorXd m, v;
    long t = 0;
    void step(Eigen::VectorXd& p, const Eigen::VectorXd& grad, double lr) {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        if (m.size() != p.size()) {
            m = Eigen::VectorXd::Zero(p.size());
            v = Eigen::VectorXd::Zero(p.size());
        }
        ++t;
        m = b1 * m + (1 - b1) * grad;
        v = b2 * v + (1 - b2) * grad.cwiseAbs2();
        double c1 = 1 - std::pow(b1, t), c2 = 1 - std::pow(b2, t);
        p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
};

// Discriminator prediction x_prev - h L_alpha x_prev.
Eigen::VectorXd discriminator_prediction(const Graph& g, const Eigen::VectorXd& alpha_d, const Eigen::VectorXd& x_prev,
                                         double h) {
    Eigen::VectorXd d = edge_diff(g, x_prev);
    return x_prev - h * edge_scatter(g, alpha_d.cwiseProduct(d));
}

}  // namespace

void validate(const FlowNetConfig& cfg) {
    if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw InvalidArgument("FlowNet needs dt > 0");
    if (cfg.epochs < 0) throw InvalidArgument("FlowNet needs epochs >= 0");
    if (!(cfg.lr_generator > 0.0) || !(cfg.lr_discriminator > 0.0)) {
        throw InvalidArgument("FlowNet learning rates must be positive");
    }
    if (!(cfg.xi > 0.0)) throw InvalidArgument("GAN margin xi must be positive");
    if (!(cfg.gan_weight >= 0.0)) throw InvalidArgument("gan_weight must be >= 0");
    if (!(cfg.alpha_init > 0.0)) throw InvalidArgument("alpha_init must be positive");
}

EdgeField FlowNet::generator_alpha(const Graph& g) const {
    if (generator_raw.size() != static_cast<Eigen::Index>(g.num_edges()))
        throw DimensionError("generator parameters do not match graph");
    return to_slots(softplus(generator_raw), false);
}

EdgeField FlowNet::discriminator_alpha(const Graph& g) const {
    if (discriminator_raw.size() != static_cast<Eigen::Index>(g.num_edges()))
        throw DimensionError("discriminator parameters do not match graph");
    return to_slots(softplus(discriminator_raw), false);
}

std::vector<long> interval_steps(const Trajectory& traj) {
    std::vector<long> steps;
    for (std::size_t m = 0; m + 1 < traj.t.size(); ++m) {
        double gap = traj.t[m + 1] - traj.t[m];
        long s = std::lround(gap);
        if (s < 1 || std::abs(gap - static_cast<double>(s)) > 1e-9) {
            throw InvalidArgument("trajectory times must be integer step indices, increasing");
        }
        steps.push_back(s);
    }
    return steps;
}

FlowNet init_flownet(const Graph& g, const Trajectory& traj, const FlowNetConfig& cfg) {
    validate(cfg);
    auto xs = observations(g, traj);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    double a0 = std::min(cfg.alpha_init, 0.5 * alpha_cap(g, cfg.dt));

    FlowNet net;
    net.xi = cfg.xi;
    net.seed = cfg.seed;
    net.generator_raw.resize(g.num_edges());
    net.discriminator_raw.resize(g.num_edges());
    for (index_t e = 0; e < g.num_edges(); ++e) {
        net.generator_raw(e) = softplus_inverse(a0 * (1.0 + jitter(rng)));
        net.discriminator_raw(e) = softplus_inverse(cfg.alpha_init * (1.0 + jitter(rng)));
    }
    net.initial_state = xs.front();
    net.readout_slope_raw = softplus_inverse(1.0);
    net.readout_bias = 0.0;
    return net;
}

Rollout generator_rollout(const Graph& g, const FlowNet& net, const std::vector<long>& steps, double dt) {
    if (net.initial_state.size() != static_cast<Eigen::Index>(g.num_nodes()))
        throw DimensionError("initial state does not match graph");
    Eigen::VectorXd alpha = softplus(net.generator_raw);
    FullRollout full = run_generator(g, alpha, net.initial_state, steps, dt);
    double a = net.readout_slope();

    Rollout out;
    for (long k : full.obs_step) {
        out.u_obs.push_back(full.u[k]);
        out.x_hat.push_back((a * full.u[k]).array() + net.readout_bias);
    }
    for (std::size_t m = 0; m + 1 < full.obs_step.size(); ++m) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(g.num_edges());
        for (long k = full.obs_step[m] + 1; k <= full.obs_step[m + 1]; ++k) {
            for (index_t e = 0; e < g.num_edges(); ++e) acc(e) -= 2.0 * dt * g.edges()[e].w * alpha(e) * full.f[k](e);
        }
        out.interval_flows.push_back(to_slots(acc, true));
    }
    return out;
}

double discriminator_energy(const Graph& g, const FlowNet& net, const Eigen::VectorXd& x_prev,
                            const Eigen::VectorXd& y, double h) {
    Eigen::VectorXd pred = discriminator_prediction(g, softplus(net.discriminator_raw), x_prev, h);
    return (pred - y).squaredNorm() / static_cast<double>(g.num_nodes());
}

GeneratorGradient generator_loss_and_gradient(const Graph& g, const FlowNet& net, const Trajectory& traj,
                                              const FlowNetConfig& cfg) {
    validate(cfg);
    auto xs = observations(g, traj);
    auto steps = interval_steps(traj);
    const double n = static_cast<double>(g.num_nodes());
    const std::size_t M = steps.size();

    Eigen::VectorXd alpha = softplus(net.generator_raw);
    Eigen::VectorXd alpha_d = softplus(net.discriminator_raw);
    FullRollout r = run_generator(g, alpha, net.initial_state, steps, cfg.dt);
    const double a = net.readout_slope();

    GeneratorGradient out;
    // Gradient of the objective with respect to every readout x_hat_m.
    std::vector<Eigen::VectorXd> gx(M + 1);
    for (std::size_t m = 0; m <= M; ++m) {
        Eigen::VectorXd xh = (a * r.u[r.obs_step[m]]).array() + net.readout_bias;
        Eigen::VectorXd res = xh - xs[m];
        out.mse += res.squaredNorm() / (n * static_cast<double>(M + 1));
        gx[m] = (2.0 / (n * static_cast<double>(M + 1))) * res;
        if (m == 0) continue;
        double h = static_cast<double>(steps[m - 1]) * cfg.dt;
        Eigen::VectorXd diff = discriminator_prediction(g, alpha_d, xs[m - 1], h) - xh;
        out.l_g += diff.squaredNorm() / (n * static_cast<double>(M));
        gx[m] -= cfg.gan_weight * (2.0 / (n * static_cast<double>(M))) * diff;
    }
    out.loss = out.mse + cfg.gan_weight * out.l_g;

    out.d_slope_raw = 0.0;
    out.d_bias = 0.0;
    for (std::size_t m = 0; m <= M; ++m) {
        out.d_slope_raw += gx[m].dot(r.u[r.obs_step[m]]);
        out.d_bias += gx[m].sum();
    }
    out.d_slope_raw *= sigmoid(net.readout_slope_raw);

    // Reverse sweep through the staggered scheme:
    //   f_k = f_{k-1} + dt alpha B u_{k-1},  u_k = u_{k-1} - 2 dt B^T (alpha f_k).
    Eigen::VectorXd ubar = Eigen::VectorXd::Zero(g.num_nodes());
    Eigen::VectorXd fbar = Eigen::VectorXd::Zero(g.num_edges());
    Eigen::VectorXd abar = Eigen::VectorXd::Zero(g.num_edges());
    std::size_t next_obs = M;
    for (long k = r.obs_step.back(); k >= 0; --k) {
        if (static_cast<long>(r.obs_step[next_obs]) == k) {
            ubar += a * gx[next_obs];
            if (next_obs > 0) --next_obs;
        }
        if (k == 0) break;
        Eigen::VectorXd bu = edge_diff(g, ubar);
        fbar -= 2.0 * cfg.dt * alpha.cwiseProduct(bu);
        abar -= 2.0 * cfg.dt * bu.cwiseProduct(r.f[k]);
        ubar += cfg.dt * edge_scatter(g, alpha.cwiseProduct(fbar));
        abar += cfg.dt * fbar.cwiseProduct(edge_diff(g, r.u[k - 1]));
    }
    out.d_raw = abar.cwiseProduct(net.generator_raw.unaryExpr([](double v) { return sigmoid(v); }));
    out.d_initial_state = ubar;
    return out;
}

DiscriminatorGradient discriminator_loss_and_gradient(const Graph& g, const FlowNet& net, const Trajectory& traj,
                                                      const std::vector<Eigen::VectorXd>& x_hat,
                                                      const FlowNetConfig& cfg) {
    validate(cfg);
    auto xs = observations(g, traj);
    auto steps = interval_steps(traj);
    if (x_hat.size() != xs.size()) throw DimensionError("generated trajectory length does not match observations");
    const double n = static_cast<double>(g.num_nodes());
    const std::size_t M = steps.size();
    Eigen::VectorXd alpha_d = softplus(net.discriminator_raw);

    DiscriminatorGradient out;
    out.d_raw = Eigen::VectorXd::Zero(g.num_edges());
    for (std::size_t m = 1; m <= M; ++m) {
        double h = static_cast<double>(steps[m - 1]) * cfg.dt;
        Eigen::VectorXd d = edge_diff(g, xs[m - 1]);
        Eigen::VectorXd pred = xs[m - 1] - h * edge_scatter(g, alpha_d.cwiseProduct(d));
        Eigen::VectorXd r_real = pred - xs[m];
        Eigen::VectorXd r_fake = pred - x_hat[m];
        double d_real = r_real.squaredNorm() / n;
        double d_fake = r_fake.squaredNorm() / n;
        GanLosses l = gan_losses(d_real, d_fake, cfg.xi);
        out.loss += l.l_d / static_cast<double>(M);
        out.d_real += d_real / static_cast<double>(M);
        out.d_fake += d_fake / static_cast<double>(M);

        // dD(y)/dalpha_e = -(2h/n) d_e (B r)_e with r = pred - y.
        Eigen::VectorXd g_real = edge_diff(g, r_real);
        Eigen::VectorXd grad = g_real;
        if (cfg.xi - d_fake > 0.0) grad -= edge_diff(g, r_fake);
        out.d_raw += (-2.0 * h / (n * static_cast<double>(M))) * d.cwiseProduct(grad);
    }
    out.d_raw = out.d_raw.cwiseProduct(net.discriminator_raw.unaryExpr([](double v) { return sigmoid(v); }));
    return out;
}

FlowNetFit flownet_train(const Graph& g, const Trajectory& traj, const FlowNetConfig& cfg) {
    validate(cfg);
    auto steps = interval_steps(traj);
    FlowNetFit fit;
    fit.net = init_flownet(g, traj, cfg);
    FlowNet& net = fit.net;
    const double raw_cap = softplus_inverse(alpha_cap(g, cfg.dt) > 30.0 ? 30.0 : alpha_cap(g, cfg.dt));

    Adam adam_d, adam_alpha, adam_u0, adam_readout;
    auto fail = [](const char* phase, int epoch) {
        throw DivergenceError(std::string("FlowNet diverged in phase ") + phase + " at epoch " + std::to_string(epoch));
    };
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rollout r = generator_rollout(g, net, steps, cfg.dt);
        DiscriminatorGradient dg = discriminator_loss_and_gradient(g, net, traj, r.x_hat, cfg);
        if (!std::isfinite(dg.loss) || !dg.d_raw.allFinite()) fail("D", epoch);
        adam_d.step(net.discriminator_raw, dg.d_raw, cfg.lr_discriminator);

        GeneratorGradient gg = generator_loss_and_gradient(g, net, traj, cfg);
        if (!std::isfinite(gg.loss) || !gg.d_raw.allFinite()) fail("G", epoch);
        adam_alpha.step(net.generator_raw, gg.d_raw, cfg.lr_generator);
        net.generator_raw = net.generator_raw.cwiseMin(raw_cap);
        if (cfg.learn_initial_state) adam_u0.step(net.initial_state, gg.d_initial_state, cfg.lr_generator);
        if (cfg.learn_readout) {
            Eigen::VectorXd p(2), grad(2);
            p << net.readout_slope_raw, net.readout_bias;
            grad << gg.d_slope_raw, gg.d_bias;
            adam_readout.step(p, grad, cfg.lr_generator);
            net.readout_slope_raw = p(0);
            net.readout_bias = p(1);
        }
        fit.report.mse.push_back(gg.mse);
        fit.report.l_g.push_back(gg.l_g);
        fit.report.l_d.push_back(dg.loss);
    }
    fit.report.epochs = cfg.epochs;

    Rollout r = generator_rollout(g, net, steps, cfg.dt);
    fit.alpha_hat = net.generator_alpha(g);
    fit.flows_hat = std::move(r.interval_flows);
    fit.predicted.t = traj.t;
    for (const auto& x : r.x_hat) fit.predicted.x.push_back(x);
    return fit;
}

TwoStepFit two_step_baseline(const Graph& g, const Trajectory& traj, const TwoStepConfig& cfg) {
    if (!(cfg.dt > 0.0)) throw InvalidArgument("two-step baseline needs dt > 0");
    if (!(cfg.ridge > 0.0)) throw InvalidArgument("two-step baseline needs ridge > 0");
    auto xs = observations(g, traj);
    auto steps = interval_steps(traj);
    const index_t n = g.num_nodes(), E = g.num_edges();
    const std::size_t M = steps.size();

    TwoStepFit out;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(E);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(M) * n, E);
    Eigen::VectorXd y(static_cast<Eigen::Index>(M) * n);
    for (std::size_t m = 0; m < M; ++m) {
        double h = static_cast<double>(steps[m]) * cfg.dt;
        Eigen::Index row0 = static_cast<Eigen::Index>(m) * n;
        y.segment(row0, n) = (xs[m + 1] - xs[m]) / h;
        // div(theta grad x)_i = -2 sum_j theta_ij w_ij^2 (x_i - x_j)
        for (index_t e = 0; e < E; ++e) {
            const Edge& ed = g.edges()[e];
            double c = -2.0 * ed.w * ed.w * (xs[m](ed.i) - xs[m](ed.j));
            A(row0 + ed.i, e) = c;
            A(row0 + ed.j, e) = -c;
        }
    }
    if (E > 0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
        if (qr.rank() == static_cast<Eigen::Index>(E)) {
            theta = qr.solve(y);
        } else {
            out.rank_deficient = true;
            Eigen::MatrixXd normal = A.transpose() * A;
            double scale = std::max(1.0, normal.diagonal().maxCoeff());
            normal.diagonal().array() += cfg.ridge * scale;
            theta = normal.ldlt().solve(A.transpose() * y);
        }
    }
    theta = theta.cwiseMax(0.0);
    out.residual_rms = y.size() ? std::sqrt((A * theta - y).squaredNorm() / static_cast<double>(y.size())) : 0.0;

    Eigen::VectorXd alpha = theta.cwiseSqrt();
    out.alpha_hat = to_slots(alpha, false);
    for (std::size_t m = 0; m < M; ++m) {
        double h = static_cast<double>(steps[m]) * cfg.dt;
        EdgeField q = extract_flux(g, out.alpha_hat, traj.x[m]);
        EdgeField f(g.num_slots(), 1);
        for (index_t e = 0; e < E; ++e) {
            const Edge& ed = g.edges()[e];
            f(2 * e, 0) = -2.0 * h * ed.w * alpha(e) * q(2 * e, 0);
            f(2 * e + 1, 0) = -f(2 * e, 0);
        }
        out.flows_hat.push_back(std::move(f));
    }
    return out;
}

}  // namespace graphtv::flow
