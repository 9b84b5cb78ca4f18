#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <vector>

#include "convexnet/mat.hpp"
#include "convexnet/parallel.hpp"
#include "convexnet/rng.hpp"

namespace convexnet {

/// Point estimate with its Monte Carlo standard error.
struct McEstimate {
    double price = 0.0;
    double std_error = 0.0;
};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
/// Throws std::invalid_argument when the matrix is not positive definite.
inline Matrix cholesky(const Matrix& m) {
    require(m.rows == m.cols, "cholesky: matrix must be square");
    const std::size_t n = m.rows;
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = m(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                require(s > 0.0, "cholesky: matrix is not positive definite");
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return l;
}

/// Correlated multi-asset Black-Scholes diffusion with constant rate,
/// per-asset volatilities and dividend yields.
struct BlackScholesModel {
    std::size_t d = 1;
    double r = 0.0;
    Vec sigma;
    Vec delta;
    Matrix rho; // d x d correlation matrix

    static BlackScholesModel equicorrelated(std::size_t d, double r, Vec sigma, Vec delta,
                                            double rho_off_diagonal) {
        BlackScholesModel m;
        m.d = d;
        m.r = r;
        m.sigma = std::move(sigma);
        m.delta = std::move(delta);
        m.rho = Matrix(d, d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) m.rho(i, j) = (i == j) ? 1.0 : rho_off_diagonal;
        m.validate();
        return m;
    }

    void validate() const {
        require(d >= 1, "BlackScholesModel: d must be >= 1");
        require(sigma.size() == d && delta.size() == d, "BlackScholesModel: parameter size mismatch");
        for (double s : sigma) require(s >= 0.0, "BlackScholesModel: sigma must be non-negative");
        require(rho.rows == d && rho.cols == d, "BlackScholesModel: rho size mismatch");
        for (std::size_t i = 0; i < d; ++i) {
            require(std::abs(rho(i, i) - 1.0) < 1e-12, "BlackScholesModel: rho diagonal must be 1");
            for (std::size_t j = 0; j < d; ++j)
                require(std::abs(rho(i, j) - rho(j, i)) < 1e-12, "BlackScholesModel: rho not symmetric");
        }
    }

    Matrix correlation_factor() const { return cholesky(rho); }
};

/// One-factor forward curve model for gas: the forward volatility decays
/// exponentially with time to delivery, and the initial curve is flat at f0.
struct GasForwardModel {
    double alpha = 1.0; // mean reversion / yr
    double sigma = 0.1; // vol / sqrt(yr)
    double f0 = 1.0;    // flat initial forward value

    void validate() const {
        require(alpha > 0.0, "GasForwardModel: alpha must be positive");
        require(sigma > 0.0, "GasForwardModel: sigma must be positive");
        require(f0 > 0.0, "GasForwardModel: f0 must be positive");
    }

    /// Variance of sigma * X_{t}, X_t = int_0^t e^{-alpha (t-s)} dW_s.
    double lambda_sq(double t) const {
        return sigma * sigma * (1.0 - std::exp(-2.0 * alpha * t)) / (2.0 * alpha);
    }
};

struct PathGrid {
    Vec times; // t_0 < t_1 < ... < t_N with t_0 = 0

    static PathGrid uniform(double maturity, std::size_t steps) {
        require(steps >= 1 && maturity > 0.0, "PathGrid: bad grid");
        PathGrid g;
        g.times.resize(steps + 1);
        for (std::size_t k = 0; k <= steps; ++k)
            g.times[k] = maturity * static_cast<double>(k) / static_cast<double>(steps);
        return g;
    }

    void validate() const {
        require(!times.empty() && times[0] == 0.0, "PathGrid: grid must start at 0");
        for (std::size_t k = 1; k < times.size(); ++k)
            require(times[k] > times[k - 1], "PathGrid: times must be strictly increasing");
    }

    std::size_t steps() const { return times.size() - 1; }
};

/// Terminal asset prices, exact lognormal sampling. Row m of the result is
/// the m-th draw of (S_T^1, ..., S_T^d). Path m depends only on (seed, m).
inline Matrix simulate_terminal(const BlackScholesModel& m, std::span<const double> s0, double maturity,
                                std::size_t count, std::uint64_t seed) {
    m.validate();
    require(s0.size() == m.d, "simulate_terminal: s0 dimension mismatch");
    for (double s : s0) require(s > 0.0, "simulate_terminal: s0 must be positive");
    require(maturity > 0.0, "simulate_terminal: maturity must be positive");
    const Matrix chol = m.correlation_factor();
    const double sqrt_t = std::sqrt(maturity);
    Vec drift(m.d);
    for (std::size_t i = 0; i < m.d; ++i)
        drift[i] = (m.r - m.delta[i] - 0.5 * m.sigma[i] * m.sigma[i]) * maturity;

    Matrix out(count, m.d);
    parallel_for(count, [&](std::size_t lo, std::size_t hi, unsigned) {
        Vec z(m.d), w(m.d);
        for (std::size_t p = lo; p < hi; ++p) {
            Rng rng(seed, rng_stream::path_sim, p);
            for (std::size_t i = 0; i < m.d; ++i) z[i] = rng.normal();
            matvec(chol, z, w);
            double* row = out.row(p);
            for (std::size_t i = 0; i < m.d; ++i)
                row[i] = s0[i] * std::exp(drift[i] + m.sigma[i] * sqrt_t * w[i]);
        }
    });
    return out;
}

/// count x (N+1) x d tensor of exact path draws, flattened row-major as
/// paths[p][k][i] = data[(p * (N+1) + k) * d + i]. The path at t_0 equals s0.
struct PathTensor {
    std::size_t paths = 0;
    std::size_t nodes = 0; // N + 1
    std::size_t dim = 0;
    Vec data;

    double at(std::size_t p, std::size_t k, std::size_t i) const {
        return data[(p * nodes + k) * dim + i];
    }
    std::span<const double> node(std::size_t p, std::size_t k) const {
        return {data.data() + (p * nodes + k) * dim, dim};
    }
};

/// Paths p in [0, count) use the substream (path_offset + p), so chunked
/// generation concatenates to exactly the same draws as one big run.
inline PathTensor simulate_paths(const BlackScholesModel& m, std::span<const double> s0,
                                 const PathGrid& grid, std::size_t count, std::uint64_t seed,
                                 std::size_t path_offset = 0, unsigned workers = worker_count()) {
    m.validate();
    grid.validate();
    require(s0.size() == m.d, "simulate_paths: s0 dimension mismatch");
    for (double s : s0) require(s > 0.0, "simulate_paths: s0 must be positive");
    const Matrix chol = m.correlation_factor();
    const std::size_t steps = grid.steps();

    PathTensor out;
    out.paths = count;
    out.nodes = steps + 1;
    out.dim = m.d;
    out.data.resize(count * out.nodes * m.d);

    parallel_for(count, [&](std::size_t lo, std::size_t hi, unsigned) {
        Vec z(m.d), w(m.d);
        for (std::size_t p = lo; p < hi; ++p) {
            Rng rng(seed, rng_stream::path_sim, path_offset + p);
            double* path = out.data.data() + p * out.nodes * m.d;
            for (std::size_t i = 0; i < m.d; ++i) path[i] = s0[i];
            for (std::size_t k = 0; k < steps; ++k) {
                const double dt = grid.times[k + 1] - grid.times[k];
                const double sqrt_dt = std::sqrt(dt);
                for (std::size_t i = 0; i < m.d; ++i) z[i] = rng.normal();
                matvec(chol, z, w);
                const double* prev = path + k * m.d;
                double* next = path + (k + 1) * m.d;
                for (std::size_t i = 0; i < m.d; ++i) {
                    const double drift = (m.r - m.delta[i] - 0.5 * m.sigma[i] * m.sigma[i]) * dt;
                    next[i] = prev[i] * std::exp(drift + m.sigma[i] * sqrt_dt * w[i]);
                }
            }
        }
    }, workers);
    return out;
}

/// count x (N+1) matrix of forward prices F_{t_k} = f0 exp(sigma X_{t_k} -
/// lambda_k^2 / 2), where X follows its exact Gaussian AR(1) recursion. The
/// deflation by lambda_k^2 / 2 makes each F_{t_k} a martingale in k.
inline Matrix simulate_gas_paths(const GasForwardModel& m, const PathGrid& grid, std::size_t count,
                                 std::uint64_t seed, std::size_t path_offset = 0,
                                 unsigned workers = worker_count()) {
    m.validate();
    grid.validate();
    const std::size_t steps = grid.steps();
    Vec decay(steps), innovation_sd(steps), half_lambda_sq(steps + 1);
    for (std::size_t k = 0; k < steps; ++k) {
        const double dt = grid.times[k + 1] - grid.times[k];
        decay[k] = std::exp(-m.alpha * dt);
        innovation_sd[k] = std::sqrt((1.0 - std::exp(-2.0 * m.alpha * dt)) / (2.0 * m.alpha));
    }
    for (std::size_t k = 0; k <= steps; ++k) half_lambda_sq[k] = 0.5 * m.lambda_sq(grid.times[k]);

    Matrix out(count, steps + 1);
    parallel_for(count, [&](std::size_t lo, std::size_t hi, unsigned) {
        for (std::size_t p = lo; p < hi; ++p) {
            Rng rng(seed, rng_stream::path_sim, path_offset + p);
            double x = 0.0;
            double* row = out.row(p);
            row[0] = m.f0;
            for (std::size_t k = 0; k < steps; ++k) {
                x = decay[k] * x + innovation_sd[k] * rng.normal();
                row[k + 1] = m.f0 * std::exp(m.sigma * x - half_lambda_sq[k + 1]);
            }
        }
    }, workers);
    return out;
}

/// Debug dump: one row per (path, node, asset) as `path_id,t_index,asset,value`.
inline void write_paths_csv(const PathTensor& paths, std::ostream& os) {
    os << "path_id,t_index,asset,value\n";
    char buf[64];
    for (std::size_t p = 0; p < paths.paths; ++p)
        for (std::size_t k = 0; k < paths.nodes; ++k)
            for (std::size_t i = 0; i < paths.dim; ++i) {
                std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.10g\n", p, k, i, paths.at(p, k, i));
                os << buf;
            }
}

} // namespace convexnet
