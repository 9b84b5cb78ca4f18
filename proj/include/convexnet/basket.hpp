#pragma once

#include <cmath>
#include <memory>
#include <utility>

#include "convexnet/market.hpp"
#include "convexnet/scaling.hpp"
#include "convexnet/training.hpp"

namespace convexnet {

struct BasketSpec {
    Vec alpha;       // positive weights summing to one
    double strike;   // K > 0
    double maturity; // years

    void validate() const {
        require(!alpha.empty(), "BasketSpec: alpha must be non-empty");
        double sum = 0.0;
        for (double a : alpha) {
            require(a > 0.0, "BasketSpec: alpha entries must be positive");
            sum += a;
        }
        require(std::abs(sum - 1.0) <= 1e-12, "BasketSpec: alpha must sum to 1");
        require(strike > 0.0, "BasketSpec: strike must be positive");
        require(maturity > 0.0, "BasketSpec: maturity must be positive");
    }
};

/// Hypercube of initial prices the surface is trained on.
struct InputBox {
    Vec center;
    double radius = 0.0;

    void validate() const {
        require(!center.empty(), "InputBox: empty center");
        require(radius >= 0.0, "InputBox: radius must be non-negative");
        for (double c : center)
            require(c - radius > 0.0, "InputBox: box must stay inside positive prices");
    }

    Vec lower() const {
        Vec lo = center;
        for (double& v : lo) v -= radius;
        return lo;
    }
    Vec upper() const {
        Vec hi = center;
        for (double& v : hi) v += radius;
        return hi;
    }
    bool contains(std::span<const double> x) const {
        for (std::size_t i = 0; i < center.size(); ++i)
            if (x[i] < center[i] - radius || x[i] > center[i] + radius) return false;
        return true;
    }
};

/// Closed-form price of the geometric-mean basket call used as control
/// variate. The geometric mean of lognormals is lognormal, so the price is a
/// one-dimensional Black-Scholes-type formula. Assumes zero dividends.
inline double geometric_basket_price(const BlackScholesModel& m, const BasketSpec& spec,
                                     std::span<const double> s0) {
    m.validate();
    spec.validate();
    require(spec.alpha.size() == m.d && s0.size() == m.d, "geometric_basket_price: dimension mismatch");
    for (double d : m.delta) require(d == 0.0, "geometric_basket_price: requires zero dividends");
    for (double s : s0) require(s > 0.0, "geometric_basket_price: s0 must be positive");

    const double t = spec.maturity;
    double var = 0.0; // alpha' Sigma alpha * T
    for (std::size_t i = 0; i < m.d; ++i)
        for (std::size_t j = 0; j < m.d; ++j)
            var += spec.alpha[i] * spec.alpha[j] * m.sigma[i] * m.rho(i, j) * m.sigma[j];
    var *= t;
    double a = 0.0; // mean of log geometric mean at maturity
    for (std::size_t i = 0; i < m.d; ++i)
        a += spec.alpha[i] * (std::log(s0[i]) + (m.r - 0.5 * m.sigma[i] * m.sigma[i]) * t);

    const double discount = std::exp(-m.r * t);
    const double sigma = std::sqrt(var);
    if (sigma < 1e-14) {
        const double intrinsic = std::exp(a) - spec.strike;
        return discount * (intrinsic > 0.0 ? intrinsic : 0.0);
    }
    const double kappa = (a - std::log(spec.strike)) / sigma;
    return discount *
           (std::exp(a + 0.5 * var) * norm_cdf(kappa + sigma) - spec.strike * norm_cdf(kappa));
}

/// Controlled Monte Carlo estimate of the arithmetic basket call: the
/// geometric basket payoff is subtracted pathwise (same draws feed both
/// legs) and its closed-form price added back. The reported standard error
/// is that of the controlled term.
inline McEstimate mc_cv_estimate(const BlackScholesModel& m, const BasketSpec& spec,
                                 std::span<const double> s0, std::size_t count, std::uint64_t seed,
                                 unsigned workers = worker_count()) {
    require(count >= 2, "mc_cv_estimate: need at least two samples");
    m.validate();
    spec.validate();
    require(spec.alpha.size() == m.d && s0.size() == m.d, "mc_cv_estimate: dimension mismatch");
    const Matrix chol = m.correlation_factor();
    const double t = spec.maturity;
    const double sqrt_t = std::sqrt(t);
    Vec drift(m.d), log_s0(m.d);
    for (std::size_t i = 0; i < m.d; ++i) {
        drift[i] = (m.r - m.delta[i] - 0.5 * m.sigma[i] * m.sigma[i]) * t;
        log_s0[i] = std::log(s0[i]);
    }

    std::vector<double> sums(workers, 0.0), sums_sq(workers, 0.0);
    parallel_for(count, [&](std::size_t lo, std::size_t hi, unsigned w) {
        Vec z(m.d), corr(m.d);
        double sum = 0.0, sum_sq = 0.0;
        for (std::size_t p = lo; p < hi; ++p) {
            Rng rng(seed, rng_stream::mc_target, p);
            for (std::size_t i = 0; i < m.d; ++i) z[i] = rng.normal();
            matvec(chol, z, corr);
            double arith = 0.0, log_geo = 0.0;
            for (std::size_t i = 0; i < m.d; ++i) {
                const double log_st = log_s0[i] + drift[i] + m.sigma[i] * sqrt_t * corr[i];
                arith += spec.alpha[i] * std::exp(log_st);
                log_geo += spec.alpha[i] * log_st;
            }
            const double arith_payoff = std::max(arith - spec.strike, 0.0);
            const double geo_payoff = std::max(std::exp(log_geo) - spec.strike, 0.0);
            const double controlled = arith_payoff - geo_payoff;
            sum += controlled;
            sum_sq += controlled * controlled;
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
    const double discount = std::exp(-m.r * t);

    McEstimate est;
    est.price = discount * mean + geometric_basket_price(m, spec, s0);
    est.std_error = discount * std::sqrt(var / (n - 1.0));
    return est;
}

/// Componentwise uniform draws on the box.
inline Matrix sample_initial_prices(const InputBox& box, std::size_t count, std::uint64_t seed) {
    box.validate();
    const std::size_t d = box.center.size();
    Matrix out(count, d);
    Rng rng(seed, rng_stream::train_batch);
    for (std::size_t p = 0; p < count; ++p) {
        double* row = out.row(p);
        for (std::size_t i = 0; i < d; ++i)
            row[i] = box.center[i] - box.radius + 2.0 * box.radius * rng.uniform01();
    }
    return out;
}

struct PriceSurface {
    ConvexNet net;
    InputScaler scaler;
    BasketSpec spec;
    BlackScholesModel model;
    InputBox box;
    LossTrace trace;
};

struct SurfaceTrainConfig {
    NetConfig net;
    TrainConfig train;
    std::size_t mc_samples_per_input = 4096; // M for each training target
    std::size_t pool_size = 38400;           // 0 switches to fresh sampling per batch
};

/// Fits the basket price surface on the box: draws initial prices, computes
/// the controlled Monte Carlo estimate for each, and trains the net on the
/// squared error. With pool_size > 0 the (input, target) pool is precomputed
/// once and cycled in batches; with pool_size = 0 every batch is fresh.
inline PriceSurface train_price_surface(const BlackScholesModel& m, const BasketSpec& spec,
                                        const InputBox& box, const SurfaceTrainConfig& cfg) {
    m.validate();
    spec.validate();
    box.validate();
    require(m.d == box.center.size(), "train_price_surface: model/box dimension mismatch");

    PriceSurface surface;
    surface.spec = spec;
    surface.model = m;
    surface.box = box;
    surface.scaler = InputScaler::from_bounds(box.lower(), box.upper());

    Rng init_rng(cfg.train.seed, rng_stream::net_init);
    ConvexNet net = make_convex_net(m.d, cfg.net, init_rng);

    const auto target_for = [&](std::span<const double> s0, std::uint64_t target_seed) {
        // single worker: calls run inside an outer parallel loop
        return mc_cv_estimate(m, spec, s0, cfg.mc_samples_per_input, target_seed, 1).price;
    };

    BatchSampler sampler;
    if (cfg.pool_size > 0) {
        // precompute the full pool, then cycle through it batch by batch
        auto pool = std::make_shared<RegressionBatch>();
        const Matrix inputs = sample_initial_prices(box, cfg.pool_size, cfg.train.seed);
        pool->inputs.resize(cfg.pool_size);
        pool->targets.resize(cfg.pool_size);
        parallel_for(cfg.pool_size, [&](std::size_t lo, std::size_t hi, unsigned) {
            for (std::size_t p = lo; p < hi; ++p) {
                const std::span<const double> s0{inputs.row(p), m.d};
                pool->targets[p] = target_for(s0, Rng(cfg.train.seed, rng_stream::mc_target, p).next_u64());
                pool->inputs[p] = surface.scaler.apply(s0);
            }
        });
        auto cursor = std::make_shared<std::size_t>(0);
        sampler = [pool, cursor](std::uint64_t, std::size_t batch_size) {
            RegressionBatch batch;
            batch.inputs.reserve(batch_size);
            batch.targets.reserve(batch_size);
            for (std::size_t i = 0; i < batch_size; ++i) {
                const std::size_t idx = (*cursor)++ % pool->inputs.size();
                batch.inputs.push_back(pool->inputs[idx]);
                batch.targets.push_back(pool->targets[idx]);
            }
            return batch;
        };
    } else {
        const InputScaler scaler = surface.scaler;
        sampler = [m, spec, box, scaler, target_for](std::uint64_t batch_seed, std::size_t batch_size) {
            RegressionBatch batch;
            batch.inputs.resize(batch_size);
            batch.targets.resize(batch_size);
            const Matrix inputs = sample_initial_prices(box, batch_size, batch_seed);
            parallel_for(batch_size, [&](std::size_t lo, std::size_t hi, unsigned) {
                for (std::size_t p = lo; p < hi; ++p) {
                    const std::span<const double> s0{inputs.row(p), spec.alpha.size()};
                    batch.targets[p] = target_for(s0, Rng(batch_seed, rng_stream::mc_target, p).next_u64());
                    batch.inputs[p] = scaler.apply(s0);
                }
            });
            return batch;
        };
    }

    surface.net = train_regression(std::move(net), sampler, cfg.train, &surface.trace);
    return surface;
}

/// Scaled forward pass. The net is globally convex, so evaluation outside the
/// training box is well defined (extrapolation); callers may warn on it via
/// surface.box.contains().
inline double price_at(const PriceSurface& surface, std::span<const double> s0) {
    return forward(surface.net, surface.scaler.apply(s0));
}

} // namespace convexnet
