#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "convexnet/market.hpp"
#include "convexnet/scaling.hpp"
#include "convexnet/training.hpp"

namespace convexnet {

struct BermudanSpec {
    double strike = 0.0;
    PathGrid grid; // t_k = k T / N, exercise allowed at every grid date

    void validate() const {
        require(strike > 0.0, "BermudanSpec: strike must be positive");
        grid.validate();
    }
    std::size_t dates() const { return grid.steps(); } // N
};

/// Discounted best-of call payoff g_k(s) = e^{-r t_k} (max_i s_i - K)_+.
inline double bermudan_payoff(const BermudanSpec& spec, double rate, std::size_t k,
                              std::span<const double> s) {
    double best = s[0];
    for (double v : s) best = std::max(best, v);
    const double intrinsic = best - spec.strike;
    return intrinsic > 0.0 ? std::exp(-rate * spec.grid.times[k]) * intrinsic : 0.0;
}

/// Continuation-value approximations per date. The date-0 state is
/// deterministic, so its continuation value is a plain Monte Carlo mean
/// rather than a net; nets cover dates 1..N-1.
struct StoppingPolicy {
    BermudanSpec spec;
    double rate = 0.0;                // model short rate, snapshotted for payoffs
    std::vector<ConvexNet> nets;      // nets[k-1] approximates the continuation at date k
    std::vector<InputScaler> scalers; // per-date input maps, frozen after a pilot run
    double c0 = 0.0;                  // continuation value estimate at date 0

    std::size_t dates() const { return spec.dates(); }

    double continuation(std::size_t k, std::span<const double> s, NetWorkspace& ws) const {
        Vec scaled = scalers[k - 1].apply(s);
        return forward(nets[k - 1], scaled, ws);
    }
};

struct PolicyTrainConfig {
    NetConfig net{64, 2, ActivationKind::LogSumExp, 40.0};
    std::size_t batch_paths = 8192;
    std::size_t iterations = 5000;
    LRSchedule schedule = LRSchedule::constant(1e-4);
    std::uint64_t seed = 0;
    std::size_t pilot_paths = 4096;
};

struct PolicyTrainResult {
    StoppingPolicy policy;
    double in_sample_value = 0.0; // batch average of the final iteration
    Vec value_trace;              // per-iteration in-sample value estimates
};

namespace detail {

/// Componentwise 1% / 99% quantile box of the simulated states at one date.
inline InputScaler quantile_scaler(const PathTensor& paths, std::size_t k) {
    const std::size_t count = paths.paths;
    const std::size_t d = paths.dim;
    Vec lo(d), hi(d), column(count);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t p = 0; p < count; ++p) column[p] = paths.at(p, k, i);
        std::sort(column.begin(), column.end());
        lo[i] = column[static_cast<std::size_t>(0.01 * (count - 1))];
        hi[i] = column[static_cast<std::size_t>(0.99 * (count - 1))];
    }
    return InputScaler::from_bounds(std::move(lo), std::move(hi));
}

} // namespace detail

/// Trains the continuation nets backward in time. Each outer iteration
/// simulates a fresh batch of paths, initializes the pathwise value with the
/// terminal payoff, and walks dates backward: one Adam step fits the date-k
/// net to the realized downstream values, then the exercise decision
/// G_k >= C_k rolls the pathwise value back. Warm start across iterations.
inline PolicyTrainResult train_policy(const BlackScholesModel& m, const BermudanSpec& spec,
                                      std::span<const double> x0, const PolicyTrainConfig& cfg) {
    m.validate();
    spec.validate();
    require(x0.size() == m.d, "train_policy: x0 dimension mismatch");
    const std::size_t n_dates = spec.dates();
    require(n_dates >= 1, "train_policy: need at least one exercise date");

    PolicyTrainResult result;
    StoppingPolicy& policy = result.policy;
    policy.spec = spec;
    policy.rate = m.r;

    // per-date input scalers from a pilot run
    if (n_dates > 1) {
        const std::uint64_t pilot_seed = Rng(cfg.seed, rng_stream::pilot).next_u64();
        const PathTensor pilot = simulate_paths(m, x0, spec.grid, cfg.pilot_paths, pilot_seed);
        policy.scalers.reserve(n_dates - 1);
        policy.nets.reserve(n_dates - 1);
        for (std::size_t k = 1; k < n_dates; ++k) {
            policy.scalers.push_back(detail::quantile_scaler(pilot, k));
            Rng init(cfg.seed, rng_stream::net_init, k);
            policy.nets.push_back(make_convex_net(m.d, cfg.net, init));
        }
    }

    std::vector<AdamState> adam;
    adam.reserve(policy.nets.size());
    for (const auto& net : policy.nets) adam.push_back(AdamState::zeros_like(net));

    const std::size_t batch = cfg.batch_paths;
    const unsigned workers = worker_count();
    std::vector<NetGradients> partials;
    std::vector<NetWorkspace> spaces(workers);
    Vec values(batch), payoffs(batch), continuations(batch);
    const double g0 = bermudan_payoff(spec, m.r, 0, x0);

    double rate = cfg.schedule.gamma0;
    double c0_accum = 0.0;
    result.value_trace.reserve(cfg.iterations);

    for (std::size_t iter = 1; iter <= cfg.iterations; ++iter) {
        const std::uint64_t path_seed = Rng(cfg.seed, rng_stream::train_batch, iter).next_u64();
        const PathTensor paths = simulate_paths(m, x0, spec.grid, batch, path_seed);

        for (std::size_t b = 0; b < batch; ++b)
            values[b] = bermudan_payoff(spec, m.r, n_dates, paths.node(b, n_dates));

        rate = schedule_rate(cfg.schedule, iter, rate);

        for (std::size_t k = n_dates; k-- > 1;) {
            ConvexNet& net = policy.nets[k - 1];
            const InputScaler& scaler = policy.scalers[k - 1];
            if (partials.size() < workers) partials.resize(workers, NetGradients::zeros_like(net));
            for (unsigned w = 0; w < workers; ++w) partials[w].set_zero();
            const double inv_batch = 1.0 / static_cast<double>(batch);

            parallel_for(batch, [&](std::size_t lo, std::size_t hi, unsigned w) {
                NetWorkspace& ws = spaces[w];
                Vec scaled(m.d);
                for (std::size_t b = lo; b < hi; ++b) {
                    const auto state = paths.node(b, k);
                    scaler.apply(state, scaled);
                    const double c = forward(net, scaled, ws);
                    backward(net, ws, 2.0 * (c - values[b]) * inv_batch, partials[w]);
                    continuations[b] = c;
                    payoffs[b] = bermudan_payoff(spec, m.r, k, state);
                }
            }, workers);

            NetGradients& total = partials[0];
            for (unsigned w = 1; w < workers; ++w) total.add(partials[w]);
            adam_step(adam[k - 1], net, total, rate);

            for (std::size_t b = 0; b < batch; ++b)
                if (payoffs[b] >= continuations[b]) values[b] = payoffs[b];
        }

        double v1_mean = 0.0;
        for (std::size_t b = 0; b < batch; ++b) v1_mean += values[b];
        v1_mean /= static_cast<double>(batch);
        c0_accum += v1_mean;
        result.value_trace.push_back(g0 >= v1_mean ? g0 : v1_mean);
    }

    policy.c0 = cfg.iterations > 0 ? c0_accum / static_cast<double>(cfg.iterations) : 0.0;
    result.in_sample_value = result.value_trace.empty() ? g0 : result.value_trace.back();
    return result;
}

/// Out-of-sample value of the stopping rule induced by the trained policy:
/// stop at the first date whose payoff reaches the estimated continuation
/// value. Any such rule is an admissible stopping time, so the estimate is a
/// lower bound of the option value in expectation.
inline McEstimate lower_bound_price(const StoppingPolicy& policy, const BlackScholesModel& m,
                                    std::span<const double> x0, std::size_t count,
                                    std::uint64_t seed) {
    m.validate();
    policy.spec.validate();
    require(x0.size() == m.d, "lower_bound_price: x0 dimension mismatch");
    const std::size_t n_dates = policy.dates();

    const double g0 = bermudan_payoff(policy.spec, policy.rate, 0, x0);
    if (g0 >= policy.c0) return {g0, 0.0}; // immediate exercise, deterministic value

    const std::uint64_t path_seed = Rng(seed, rng_stream::evaluation).next_u64();
    const unsigned workers = worker_count();
    std::vector<double> sums(workers, 0.0), sums_sq(workers, 0.0);

    parallel_for(count, [&](std::size_t lo, std::size_t hi, unsigned w) {
        NetWorkspace ws;
        double sum = 0.0, sum_sq = 0.0;
        // chunked on-demand simulation keeps memory flat; per-path substreams
        // make the result identical to one monolithic run
        const std::size_t chunk = 4096;
        for (std::size_t start = lo; start < hi; start += chunk) {
            const std::size_t stop = std::min(start + chunk, hi);
            const PathTensor paths =
                simulate_paths(m, x0, policy.spec.grid, stop - start, path_seed, start, 1);
            for (std::size_t b = 0; b < stop - start; ++b) {
                double value = bermudan_payoff(policy.spec, policy.rate, n_dates,
                                               paths.node(b, n_dates));
                for (std::size_t k = 1; k < n_dates; ++k) {
                    const auto state = paths.node(b, k);
                    const double g = bermudan_payoff(policy.spec, policy.rate, k, state);
                    if (g >= policy.continuation(k, state, ws)) {
                        value = g;
                        break;
                    }
                }
                sum += value;
                sum_sq += value * value;
            }
        }
        sums[w] = sum;
        sums_sq[w] = sum_sq;
    }, workers);

    double sum = 0.0, sum_sq = 0.0;
    for (unsigned w = 0; w < workers; ++w) {
        sum += sums[w];
        sum_sq += sums_sq[w];
    }
    const double n = static_cast<double>(count);
    const double mean = sum / n;
    const double var = std::max(sum_sq / n - mean * mean, 0.0);
    return {mean, std::sqrt(var / (n - 1.0))};
}

} // namespace convexnet
