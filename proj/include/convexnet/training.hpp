#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "convexnet/net.hpp"
#include "convexnet/parallel.hpp"

namespace convexnet {

/// Learning-rate schedule: flat for the first warm_iters iterations, then a
/// geometric decay clipped at a floor.
struct LRSchedule {
    double gamma0 = 1e-3;
    double floor = 1e-5;
    double decay = 0.95;
    std::size_t warm_iters = 100;

    static LRSchedule constant(double rate) { return LRSchedule{rate, rate, 1.0, 0}; }
};

/// Rate for iteration i (1-based) given the previous iteration's rate.
inline double schedule_rate(const LRSchedule& s, std::size_t i, double prev) {
    require(i >= 1, "schedule_rate: iterations are 1-based");
    if (i <= s.warm_iters) return s.gamma0;
    return std::max(s.floor, s.decay * prev);
}

/// Adam moment accumulators, one slot per trainable parameter in the
/// canonical for_each_parameter order.
struct AdamState {
    Vec m;
    Vec v;
    std::size_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState zeros_like(const ConvexNet& net) {
        AdamState s;
        s.m.assign(net.parameter_count(), 0.0);
        s.v.assign(net.parameter_count(), 0.0);
        return s;
    }
};

/// Smallest admissible lambda_tilde. Early in training the optimizer can ride
/// the log(n)/lambda offset toward lambda = 0; the clamp keeps the effective
/// smoothing parameter positive, and the gradient turns it back up once the
/// offset overshoots.
inline constexpr double lambda_tilde_floor = 1e-2;

/// One bias-corrected Adam update of every trainable parameter (including
/// lambda_tilde for LogSumExp nets).
inline void adam_step(AdamState& state, ConvexNet& net, const NetGradients& grads, double rate) {
    require(state.m.size() == net.parameter_count(), "adam_step: state/net shape mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    std::size_t idx = 0;
    bool finite = true;
    for_each_parameter(net, grads, [&](double& p, double g) {
        if (!std::isfinite(g)) {
            finite = false;
            return;
        }
        double& m = state.m[idx];
        double& v = state.v[idx];
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g * g;
        const double m_hat = m / bc1;
        const double v_hat = v / bc2;
        p -= rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
        ++idx;
    });
    if (!finite) throw numeric_error("adam_step: non-finite gradient");
    if (net.activation.kind == ActivationKind::LogSumExp &&
        net.activation.lambda_tilde < lambda_tilde_floor)
        net.activation.lambda_tilde = lambda_tilde_floor;
}

struct TrainConfig {
    std::size_t batch_size = 64;
    std::size_t iterations = 1000;
    LRSchedule schedule;
    std::uint64_t seed = 0;
};

struct LossTracePoint {
    std::size_t iteration;
    double loss;
    double rate;
};

using LossTrace = std::vector<LossTracePoint>;

struct RegressionBatch {
    std::vector<Vec> inputs;
    Vec targets;
};

/// Produces a batch of (input, target) pairs. Fresh-sampling problems derive
/// the batch from the seed; fixed-pool problems cycle through a precomputed
/// dataset and may ignore it.
using BatchSampler = std::function<RegressionBatch(std::uint64_t seed, std::size_t batch_size)>;

namespace detail {

/// Mean-squared-error gradient over one batch, accumulated in parallel over
/// samples with a fixed-order reduction. Returns the batch loss.
inline double mse_gradient(const ConvexNet& net, const RegressionBatch& batch, NetGradients& out,
                           std::vector<NetGradients>& partials, std::vector<NetWorkspace>& spaces,
                           std::vector<double>& losses) {
    const std::size_t count = batch.inputs.size();
    require(count > 0 && batch.targets.size() == count, "mse_gradient: bad batch");
    const unsigned workers = worker_count();
    if (partials.size() < workers) partials.resize(workers, NetGradients::zeros_like(net));
    if (spaces.size() < workers) spaces.resize(workers);
    losses.assign(workers, 0.0);
    for (unsigned w = 0; w < workers; ++w) partials[w].set_zero();
    const double inv_count = 1.0 / static_cast<double>(count);

    parallel_for(count, [&](std::size_t lo, std::size_t hi, unsigned w) {
        NetGradients& g = partials[w];
        NetWorkspace& ws = spaces[w];
        double loss = 0.0;
        for (std::size_t b = lo; b < hi; ++b) {
            const double value = forward(net, batch.inputs[b], ws);
            const double residual = value - batch.targets[b];
            loss += residual * residual;
            backward(net, ws, 2.0 * residual * inv_count, g);
        }
        losses[w] = loss;
    }, workers);

    out.set_zero();
    double loss = 0.0;
    for (unsigned w = 0; w < workers; ++w) {
        out.add(partials[w]);
        loss += losses[w];
    }
    return loss * inv_count;
}

} // namespace detail

/// Runs cfg.iterations Adam steps on the mean-squared error of the net
/// against sampled targets. Deterministic given (net, cfg.seed). On numeric
/// failure the trace written so far is kept and a numeric_error is thrown.
inline ConvexNet train_regression(ConvexNet net, const BatchSampler& sampler,
                                  const TrainConfig& cfg, LossTrace* trace = nullptr) {
    require(cfg.batch_size >= 1, "train_regression: batch_size must be >= 1");
    AdamState adam = AdamState::zeros_like(net);
    NetGradients grads = NetGradients::zeros_like(net);
    std::vector<NetGradients> partials;
    std::vector<NetWorkspace> spaces;
    std::vector<double> losses;
    double rate = cfg.schedule.gamma0;
    for (std::size_t i = 1; i <= cfg.iterations; ++i) {
        const std::uint64_t batch_seed = Rng(cfg.seed, rng_stream::train_batch, i).next_u64();
        const RegressionBatch batch = sampler(batch_seed, cfg.batch_size);
        const double loss = detail::mse_gradient(net, batch, grads, partials, spaces, losses);
        if (!std::isfinite(loss)) throw numeric_error("train_regression: non-finite loss");
        rate = schedule_rate(cfg.schedule, i, rate);
        adam_step(adam, net, grads, rate);
        if (trace) trace->push_back({i, loss, rate});
    }
    return net;
}

} // namespace convexnet
