#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "convexnet/market.hpp"
#include "convexnet/scaling.hpp"
#include "convexnet/training.hpp"

namespace convexnet {

struct SwingSpec {
    std::size_t n_dates = 0; // N exercise dates
    double strike = 0.0;
    double q_min = 0.0, q_max = 0.0;             // per-date volume bounds
    double q_total_min = 0.0, q_total_max = 0.0; // cumulative volume band

    void validate() const {
        require(n_dates >= 1, "SwingSpec: need at least one exercise date");
        require(strike > 0.0, "SwingSpec: strike must be positive");
        require(0.0 <= q_min && q_min <= q_max, "SwingSpec: need 0 <= q_min <= q_max");
        require(q_total_min <= q_total_max, "SwingSpec: need q_total_min <= q_total_max");
        require(q_total_min >= 0.0, "SwingSpec: q_total_min must be non-negative");
        const double n = static_cast<double>(n_dates);
        require(n * q_min <= q_total_max && q_total_min <= n * q_max,
                "SwingSpec: cumulative band unreachable with the per-date bounds");
        require(q_total_max > 0.0 || q_total_min != q_total_max,
                "SwingSpec: degenerate zero volume band");
    }
};

/// Normalized cumulative volume fed to the adjustment term.
inline double volume_transform(const SwingSpec& spec, double q_cum) {
    if (spec.q_total_min != spec.q_total_max)
        return (q_cum - spec.q_total_min) / (spec.q_total_max - spec.q_total_min);
    return (q_cum - spec.q_total_min) / spec.q_total_max;
}

struct ActionInterval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Admissible purchase interval at date k given cumulative volume Q. The
/// bounds keep every continuation able to satisfy the terminal band: the
/// remaining dates can add at most (N-1-k) q_max and at least (N-1-k) q_min.
inline ActionInterval admissible_interval(const SwingSpec& spec, std::size_t k, double q_cum) {
    require(k < spec.n_dates, "admissible_interval: date out of range");
    const double remaining = static_cast<double>(spec.n_dates - 1 - k);
    ActionInterval g;
    g.lo = std::max(spec.q_min, spec.q_total_min - q_cum - remaining * spec.q_max);
    g.hi = std::min(spec.q_max, spec.q_total_max - q_cum - remaining * spec.q_min);
    require(g.lo <= g.hi + 1e-12, "admissible_interval: infeasible state");
    return g;
}

/// Reachable cumulative volumes per date under endpoint (bang-bang)
/// controls. levels[k] holds the volumes attainable just before date k;
/// levels[0] = {0} and levels[N] lies inside the terminal band.
struct VolumeGrid {
    std::vector<Vec> levels;

    std::size_t index_of(std::size_t k, double q_cum) const {
        const Vec& level = levels[k];
        const auto it = std::lower_bound(level.begin(), level.end(), q_cum - 1e-9);
        require(it != level.end() && std::abs(*it - q_cum) <= 1e-9,
                "VolumeGrid: volume not on the grid");
        return static_cast<std::size_t>(it - level.begin());
    }
};

inline VolumeGrid reachable_volumes(const SwingSpec& spec) {
    spec.validate();
    require(std::abs(spec.q_min - std::round(spec.q_min)) < 1e-12 &&
                std::abs(spec.q_max - std::round(spec.q_max)) < 1e-12,
            "reachable_volumes: integer per-date bounds required");
    VolumeGrid grid;
    grid.levels.resize(spec.n_dates + 1);
    grid.levels[0] = {0.0};
    for (std::size_t k = 0; k < spec.n_dates; ++k) {
        Vec next;
        next.reserve(2 * grid.levels[k].size());
        for (const double q_cum : grid.levels[k]) {
            const ActionInterval g = admissible_interval(spec, k, q_cum);
            next.push_back(q_cum + g.lo);
            if (g.hi > g.lo) next.push_back(q_cum + g.hi);
        }
        std::sort(next.begin(), next.end());
        next.erase(std::unique(next.begin(), next.end(),
                               [](double a, double b) { return std::abs(a - b) < 1e-9; }),
                   next.end());
        grid.levels[k + 1] = std::move(next);
    }
    for (const double q : grid.levels[spec.n_dates])
        require(q >= spec.q_total_min - 1e-9 && q <= spec.q_total_max + 1e-9,
                "reachable_volumes: terminal volume escaped the band");
    return grid;
}

enum class SwingNetMode {
    SharedAdjusted, // one net per date, all volumes through kappa * L(Q)
    PerVolume       // one net per (date, reachable volume)
};

/// Continuation-value approximations for the swing contract. Net k estimates
/// the expected next-date value as a convex function of the forward price,
/// shifted by the volume adjustment kappa_k * L(Q) (shared mode) or selected
/// per volume level (per-volume mode).
struct SwingPolicy {
    SwingSpec spec;
    PathGrid grid;
    VolumeGrid volumes;
    SwingNetMode mode = SwingNetMode::SharedAdjusted;
    std::vector<InputScaler> scalers;            // per date k = 0..N-2
    std::vector<ConvexNet> nets;                 // shared mode, k = 0..N-2
    Vec kappas;                                  // shared mode
    std::vector<std::vector<ConvexNet>> q_nets;  // per-volume mode, aligned with levels[k+1]

    /// Estimate of E[v_{k+1}(X_{k+1}, q_next) | X_{t_k} = x].
    double continuation(std::size_t k, double x, double q_next, NetWorkspace& ws) const {
        const InputScaler& sc = scalers[k];
        const double scaled[1] = {sc.width[0] > 0.0 ? (x - sc.lo[0]) / sc.width[0] : 0.5};
        const std::span<const double> input(scaled, 1);
        if (mode == SwingNetMode::SharedAdjusted)
            return forward(nets[k], input, ws) + kappas[k] * volume_transform(spec, q_next);
        return forward(q_nets[k][volumes.index_of(k + 1, q_next)], input, ws);
    }
};

struct SwingTrainConfig {
    NetConfig net{32, 2, ActivationKind::LogSumExp, 20.0};
    std::size_t path_batches = 5;    // pre-simulated pool = path_batches * batch_size paths
    std::size_t batch_size = 4096;
    std::size_t iterations = 2000;
    LRSchedule schedule = LRSchedule::constant(1e-3);
    std::uint64_t seed = 0;
    SwingNetMode mode = SwingNetMode::SharedAdjusted;
    bool fresh_paths = false;        // resample the batch every iteration instead of cycling
};

struct SwingTrainResult {
    SwingPolicy policy;
    double value_estimate = 0.0; // in-sample dynamic-programming value at date 0
    Vec value_trace;             // per-iteration estimates
};

namespace detail {

/// Adam moments for a single scalar parameter (the adjustment slope).
struct AdamScalar {
    double m = 0.0, v = 0.0;
    std::size_t step = 0;

    void update(double& p, double g, double rate) {
        constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
        step += 1;
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g * g;
        const double m_hat = m / (1.0 - std::pow(beta1, static_cast<double>(step)));
        const double v_hat = v / (1.0 - std::pow(beta2, static_cast<double>(step)));
        p -= rate * m_hat / (std::sqrt(v_hat) + eps);
    }
};

/// Terminal-date value: the objective is affine in q, so an endpoint of the
/// admissible interval attains the supremum.
inline double last_date_value(const SwingSpec& spec, double forward_price, double q_cum) {
    const ActionInterval g = admissible_interval(spec, spec.n_dates - 1, q_cum);
    const double margin = forward_price - spec.strike;
    return std::max(g.lo * margin, g.hi * margin);
}

} // namespace detail

/// Backward training of the swing continuation nets on a pre-simulated pool
/// of forward-price paths. One outer iteration walks the dates backward
/// carrying pathwise realized values v[b][Q] for every reachable volume Q:
/// one Adam step fits the date-k net(s) to the realized next-date values over
/// the full (path, volume) grid, then the endpoint decision taken with the
/// current net rolls each (path, volume) value back. Nets steer decisions
/// only, so their approximation errors do not compound through the values.
inline SwingTrainResult train_swing(const GasForwardModel& m, const SwingSpec& spec,
                                    const PathGrid& grid, const SwingTrainConfig& cfg) {
    m.validate();
    spec.validate();
    grid.validate();
    require(grid.steps() + 1 >= spec.n_dates, "train_swing: grid shorter than the date count");

    SwingTrainResult result;
    SwingPolicy& policy = result.policy;
    policy.spec = spec;
    policy.grid = grid;
    policy.volumes = reachable_volumes(spec);
    policy.mode = cfg.mode;

    const std::size_t n_dates = spec.n_dates;
    const std::size_t pool_size =
        cfg.fresh_paths ? cfg.batch_size : cfg.path_batches * cfg.batch_size;
    const std::uint64_t pool_seed = Rng(cfg.seed, rng_stream::path_sim).next_u64();
    Matrix pool = simulate_gas_paths(m, grid, pool_size, pool_seed);

    // per-date input scalers spanning the distribution (lognormal quantiles
    // wide enough that evaluation paths essentially never extrapolate)
    for (std::size_t k = 0; k + 1 < n_dates; ++k) {
        const double lam = std::sqrt(m.lambda_sq(grid.times[k]));
        const double lo = m.f0 * std::exp(-0.5 * m.lambda_sq(grid.times[k]) - 6.0 * lam);
        const double hi = m.f0 * std::exp(-0.5 * m.lambda_sq(grid.times[k]) + 6.0 * lam);
        policy.scalers.push_back(InputScaler::from_bounds({lo}, {hi}));
    }

    const std::size_t n_nets = n_dates >= 2 ? n_dates - 1 : 0;
    std::vector<AdamState> adam;
    std::vector<detail::AdamScalar> kappa_adam(n_nets);
    std::vector<std::vector<AdamState>> q_adam(n_nets);
    for (std::size_t k = 0; k < n_nets; ++k) {
        Rng init(cfg.seed, rng_stream::net_init, k);
        if (cfg.mode == SwingNetMode::SharedAdjusted) {
            policy.nets.push_back(make_convex_net(1, cfg.net, init));
            adam.push_back(AdamState::zeros_like(policy.nets.back()));
        } else {
            // identical initial weights per date: the continuation differences
            // across adjacent volumes start at zero instead of init noise
            const std::size_t n_levels = policy.volumes.levels[k + 1].size();
            std::vector<ConvexNet> nets(n_levels, make_convex_net(1, cfg.net, init));
            for (const auto& net : nets) q_adam[k].push_back(AdamState::zeros_like(net));
            policy.q_nets.push_back(std::move(nets));
        }
    }
    policy.kappas.assign(n_nets, 0.0);

    const std::size_t batch = cfg.batch_size;
    // the per-date batches of tiny nets are too fine-grained for threads to
    // pay off; callers parallelize across contracts instead
    const unsigned workers = 1;
    std::vector<NetWorkspace> spaces(workers);
    double rate = cfg.schedule.gamma0;
    result.value_trace.reserve(cfg.iterations);

    // scaled net inputs for the whole pool, one column per date with a net
    Matrix scaled_pool(pool_size, n_nets);
    const auto rescale_pool = [&] {
        for (std::size_t k = 0; k < n_nets; ++k)
            for (std::size_t p = 0; p < pool_size; ++p) {
                const InputScaler& sc = policy.scalers[k];
                scaled_pool(p, k) = sc.width[0] > 0.0 ? (pool(p, k) - sc.lo[0]) / sc.width[0] : 0.5;
            }
    };
    rescale_pool();

    // gradient accumulators reused across iterations
    std::vector<std::vector<NetGradients>> shared_partials; // [worker]
    std::vector<std::vector<std::vector<NetGradients>>> pv_partials; // [date][worker][level]
    if (cfg.mode == SwingNetMode::SharedAdjusted) {
        shared_partials.resize(workers);
        for (unsigned w = 0; w < workers; ++w)
            for (std::size_t k = 0; k < n_nets; ++k)
                shared_partials[w].push_back(NetGradients::zeros_like(policy.nets[k]));
    } else {
        pv_partials.resize(n_nets);
        for (std::size_t k = 0; k < n_nets; ++k) {
            pv_partials[k].resize(workers);
            for (unsigned w = 0; w < workers; ++w)
                for (const auto& net : policy.q_nets[k])
                    pv_partials[k][w].push_back(NetGradients::zeros_like(net));
        }
    }

    Matrix values; // pathwise realized v[b][index into levels[k+1]]
    Matrix rolled; // v[b][index into levels[k]] after the date-k decision
    Matrix cont;   // per-path continuation estimates at the next-date levels

    for (std::size_t iter = 1; iter <= cfg.iterations; ++iter) {
        if (cfg.fresh_paths && iter > 1) {
            pool = simulate_gas_paths(m, grid, pool_size, pool_seed, (iter - 1) * pool_size);
            rescale_pool();
        }
        const std::size_t offset = ((iter - 1) * batch) % pool_size;
        rate = schedule_rate(cfg.schedule, iter, rate);

        // terminal date: endpoint action on an affine objective, no net
        {
            const Vec& levels = policy.volumes.levels[n_dates - 1];
            values = Matrix(batch, levels.size());
            for (std::size_t b = 0; b < batch; ++b) {
                const double f = pool((offset + b) % pool_size, n_dates - 1);
                double* row = values.row(b);
                for (std::size_t j = 0; j < levels.size(); ++j)
                    row[j] = detail::last_date_value(spec, f, levels[j]);
            }
        }

        for (std::size_t k = n_dates - 1; k-- > 0;) {
            const Vec& levels = policy.volumes.levels[k];
            const Vec& next_levels = policy.volumes.levels[k + 1];
            const std::size_t n_levels = levels.size();
            const std::size_t n_next = next_levels.size();
            rolled = Matrix(batch, n_levels);
            cont = Matrix(batch, n_next);

            if (cfg.mode == SwingNetMode::SharedAdjusted) {
                ConvexNet& net = policy.nets[k];
                std::vector<double> kappa_grads(workers, 0.0);
                const double inv_count = 1.0 / static_cast<double>(batch * n_next);
                parallel_for(batch, [&](std::size_t lo, std::size_t hi, unsigned w) {
                    NetWorkspace& ws = spaces[w];
                    NetGradients& partial = shared_partials[w][k];
                    partial.set_zero();
                    double kg = 0.0;
                    double scaled[1];
                    for (std::size_t b = lo; b < hi; ++b) {
                        const std::size_t path = (offset + b) % pool_size;
                        scaled[0] = scaled_pool(path, k);
                        const double conv_part = forward(net, std::span<const double>(scaled, 1), ws);
                        double upstream = 0.0;
                        for (std::size_t j = 0; j < n_next; ++j) {
                            const double transform = volume_transform(spec, next_levels[j]);
                            const double estimate = conv_part + policy.kappas[k] * transform;
                            cont(b, j) = estimate;
                            const double residual = estimate - values(b, j);
                            upstream += 2.0 * residual * inv_count;
                            kg += 2.0 * residual * transform * inv_count;
                        }
                        backward(net, ws, upstream, partial);
                    }
                    kappa_grads[w] = kg;
                }, workers);
                NetGradients& total = shared_partials[0][k];
                double kappa_grad = kappa_grads[0];
                for (unsigned w = 1; w < workers; ++w) {
                    total.add(shared_partials[w][k]);
                    kappa_grad += kappa_grads[w];
                }
                adam_step(adam[k], net, total, rate);
                kappa_adam[k].update(policy.kappas[k], kappa_grad, rate);
            } else {
                // fused pass: every net is both trained on and used for the
                // current batch; per-worker partial gradients per net
                const double inv_count = 1.0 / static_cast<double>(batch);
                parallel_for(batch, [&](std::size_t lo, std::size_t hi, unsigned w) {
                    NetWorkspace& ws = spaces[w];
                    for (std::size_t j = 0; j < n_next; ++j) pv_partials[k][w][j].set_zero();
                    double scaled[1];
                    for (std::size_t b = lo; b < hi; ++b) {
                        const std::size_t path = (offset + b) % pool_size;
                        scaled[0] = scaled_pool(path, k);
                        const std::span<const double> input(scaled, 1);
                        for (std::size_t j = 0; j < n_next; ++j) {
                            const double pred = forward(policy.q_nets[k][j], input, ws);
                            cont(b, j) = pred;
                            backward(policy.q_nets[k][j], ws,
                                     2.0 * (pred - values(b, j)) * inv_count, pv_partials[k][w][j]);
                        }
                    }
                }, workers);
                for (std::size_t j = 0; j < n_next; ++j) {
                    NetGradients& total = pv_partials[k][0][j];
                    for (unsigned w = 1; w < workers; ++w) total.add(pv_partials[k][w][j]);
                    adam_step(q_adam[k][j], policy.q_nets[k][j], total, rate);
                }
            }

            // endpoint decision with the pre-update continuation estimates,
            // then roll the realized values back
            parallel_for(batch, [&](std::size_t lo, std::size_t hi, unsigned) {
                for (std::size_t b = lo; b < hi; ++b) {
                    const double f = pool((offset + b) % pool_size, k);
                    const double margin = f - spec.strike;
                    for (std::size_t j = 0; j < n_levels; ++j) {
                        const ActionInterval g = admissible_interval(spec, k, levels[j]);
                        double best_q = g.lo;
                        if (g.hi > g.lo) {
                            const std::size_t jlo = policy.volumes.index_of(k + 1, levels[j] + g.lo);
                            const std::size_t jhi = policy.volumes.index_of(k + 1, levels[j] + g.hi);
                            const double score_lo = g.lo * margin + cont(b, jlo);
                            const double score_hi = g.hi * margin + cont(b, jhi);
                            if (score_hi > score_lo) best_q = g.hi;
                        }
                        const std::size_t jq = policy.volumes.index_of(k + 1, levels[j] + best_q);
                        rolled(b, j) = best_q * margin + values(b, jq);
                    }
                }
            }, workers);
            std::swap(values, rolled);
        }

        // pathwise values at date 0 average to the in-sample estimate
        double v0 = 0.0;
        for (std::size_t b = 0; b < batch; ++b) v0 += values(b, 0);
        result.value_trace.push_back(v0 / static_cast<double>(batch));
    }

    result.value_estimate = result.value_trace.empty() ? 0.0 : result.value_trace.back();
    return result;
}

/// Out-of-sample evaluation: along fresh paths, at every date compare the
/// endpoint actions of the admissible interval using the trained
/// continuation and take the better one. Any admissible strategy values a
/// lower bound, and the realized controls are checked against the
/// constraints pathwise.
inline McEstimate evaluate_swing(const SwingPolicy& policy, const GasForwardModel& m,
                                 std::size_t count, std::uint64_t seed) {
    m.validate();
    policy.spec.validate();
    const SwingSpec& spec = policy.spec;
    const std::size_t n_dates = spec.n_dates;
    const std::uint64_t path_seed = Rng(seed, rng_stream::evaluation).next_u64();

    const unsigned workers = worker_count();
    std::vector<double> sums(workers, 0.0), sums_sq(workers, 0.0);
    std::vector<int> violations(workers, 0);

    parallel_for(count, [&](std::size_t lo, std::size_t hi, unsigned w) {
        NetWorkspace ws;
        double sum = 0.0, sum_sq = 0.0;
        const std::size_t chunk = 8192;
        for (std::size_t start = lo; start < hi; start += chunk) {
            const std::size_t stop = std::min(start + chunk, hi);
            // chunked per-path substreams are identical to one monolithic run
            const Matrix paths = simulate_gas_paths(m, policy.grid, stop - start, path_seed, start, 1);
            for (std::size_t p = 0; p < stop - start; ++p) {
                double q_cum = 0.0;
                double payoff = 0.0;
                for (std::size_t k = 0; k < n_dates; ++k) {
                    const double f = paths(p, k);
                    const ActionInterval g = admissible_interval(spec, k, q_cum);
                    if (g.lo < spec.q_min - 1e-9 || g.hi > spec.q_max + 1e-9) violations[w] += 1;
                    double q = g.lo;
                    if (g.hi > g.lo) {
                        const double margin = f - spec.strike;
                        double best = -1e300;
                        for (const double cand : {g.lo, g.hi}) {
                            double score = cand * margin;
                            if (k + 1 < n_dates)
                                score += policy.continuation(k, f, q_cum + cand, ws);
                            if (score > best + 1e-14) {
                                best = score;
                                q = cand;
                            }
                        }
                    }
                    payoff += q * (f - spec.strike);
                    q_cum += q;
                }
                if (q_cum < spec.q_total_min - 1e-9 || q_cum > spec.q_total_max + 1e-9)
                    violations[w] += 1;
                sum += payoff;
                sum_sq += payoff * payoff;
            }
        }
        sums[w] = sum;
        sums_sq[w] = sum_sq;
    }, workers);

    int total_violations = 0;
    double sum = 0.0, sum_sq = 0.0;
    for (unsigned w = 0; w < workers; ++w) {
        total_violations += violations[w];
        sum += sums[w];
        sum_sq += sums_sq[w];
    }
    if (total_violations > 0)
        throw std::logic_error("evaluate_swing: strategy violated the volume constraints");

    const double n = static_cast<double>(count);
    const double mean = sum / n;
    const double var = std::max(sum_sq / n - mean * mean, 0.0);
    return {mean, std::sqrt(var / (n - 1.0))};
}

} // namespace convexnet
