#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "convexnet/net.hpp"

namespace convexnet {

/// Max-affine underestimator built from tangents of a convex function:
/// x -> max_i [ f(x_i) + <grad f(x_i), x - x_i> ]. Returns a one-layer Max
/// net whose hyperplane i is the tangent at x_i; by convexity the result
/// never exceeds f.
inline ConvexNet tangent_construction(const std::function<double(std::span<const double>)>& f,
                                      const std::function<Vec(std::span<const double>)>& gradient,
                                      const std::vector<Vec>& points) {
    require(!points.empty(), "tangent_construction: need at least one point");
    const std::size_t d = points.front().size();
    ConvexNet net;
    net.input_dim = d;
    net.activation = {ActivationKind::Max, 1.0, 1.0};
    AffineLayer layer;
    layer.weights = Matrix(points.size(), d);
    layer.bias.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        require(points[i].size() == d, "tangent_construction: inconsistent point dimension");
        const Vec g = gradient(points[i]);
        require(g.size() == d, "tangent_construction: gradient dimension mismatch");
        double offset = f(points[i]);
        for (std::size_t j = 0; j < d; ++j) {
            layer.weights(i, j) = g[j];
            offset -= g[j] * points[i][j];
        }
        layer.bias[i] = offset;
    }
    net.layers.push_back(std::move(layer));
    return net;
}

/// One-dimensional convenience overload.
inline ConvexNet tangent_construction_1d(const std::function<double(double)>& f,
                                         const std::function<double(double)>& derivative,
                                         const Vec& points) {
    std::vector<Vec> pts;
    pts.reserve(points.size());
    for (double x : points) pts.push_back({x});
    return tangent_construction([&](std::span<const double> x) { return f(x[0]); },
                                [&](std::span<const double> x) { return Vec{derivative(x[0])}; },
                                pts);
}

struct SupErrorRow {
    std::size_t n;
    double sup_error;
};

/// Sup error of the tangent construction with n tangency points placed at
/// interval midpoints of an equispaced partition of [lo, hi], measured on a
/// dense grid. Doubling n should divide the error by about four when the
/// integrand has a bounded second derivative.
inline std::vector<SupErrorRow> sup_rate_check(const std::function<double(double)>& f,
                                               const std::function<double(double)>& derivative,
                                               double lo, double hi,
                                               const std::vector<std::size_t>& n_list,
                                               std::size_t dense_grid = 4001) {
    require(hi > lo, "sup_rate_check: empty interval");
    std::vector<SupErrorRow> rows;
    rows.reserve(n_list.size());
    NetWorkspace ws;
    for (const std::size_t n : n_list) {
        require(n >= 1, "sup_rate_check: n must be >= 1");
        Vec points(n);
        for (std::size_t i = 0; i < n; ++i)
            points[i] = lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        const ConvexNet net = tangent_construction_1d(f, derivative, points);
        double sup = 0.0;
        for (std::size_t g = 0; g < dense_grid; ++g) {
            const double x = lo + (hi - lo) * static_cast<double>(g) / (dense_grid - 1.0);
            const Vec xv{x};
            sup = std::max(sup, std::abs(f(x) - forward(net, xv, ws)));
        }
        rows.push_back({n, sup});
    }
    return rows;
}

struct Quantizer {
    Vec points;                // sorted centroids
    double distortion = 0.0;   // e2 = sqrt(mean squared distance to nearest point)
};

/// Empirical L2 quantization error of a scalar distribution by Lloyd's
/// algorithm on a sample: nearest-centroid assignment alternating with
/// centroid recomputation until the distortion is stationary. Centroids start
/// at the (i + 1/2)/n sample quantiles; empty cells reseed at the sample
/// point farthest from its centroid.
inline Quantizer quantization_error(const std::function<double(Rng&)>& sampler, std::size_t n,
                                    std::size_t sample_size, std::uint64_t seed,
                                    std::size_t max_iterations = 200, double rel_tol = 1e-10) {
    require(n >= 1 && sample_size >= n, "quantization_error: need sample_size >= n >= 1");
    Rng rng(seed, rng_stream::mc_target);
    Vec sample(sample_size);
    for (double& x : sample) x = sampler(rng);
    std::sort(sample.begin(), sample.end());

    Vec prefix(sample_size + 1, 0.0), prefix_sq(sample_size + 1, 0.0);
    for (std::size_t i = 0; i < sample_size; ++i) {
        prefix[i + 1] = prefix[i] + sample[i];
        prefix_sq[i + 1] = prefix_sq[i] + sample[i] * sample[i];
    }

    Quantizer q;
    q.points.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double level = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        q.points[i] = sample[static_cast<std::size_t>(level * (sample_size - 1))];
    }

    double prev_distortion = -1.0;
    for (std::size_t iter = 0; iter < max_iterations; ++iter) {
        std::sort(q.points.begin(), q.points.end());
        // cell boundaries are midpoints between consecutive sorted centroids
        std::vector<std::size_t> cut(n + 1, 0);
        cut[n] = sample_size;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double boundary = 0.5 * (q.points[i] + q.points[i + 1]);
            cut[i + 1] = std::upper_bound(sample.begin(), sample.end(), boundary) - sample.begin();
        }
        double sse = 0.0;
        std::size_t worst_cell = n;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t lo = cut[i], hi = cut[i + 1];
            if (hi == lo) {
                worst_cell = i;
                continue;
            }
            const double count = static_cast<double>(hi - lo);
            const double mean = (prefix[hi] - prefix[lo]) / count;
            sse += (prefix_sq[hi] - prefix_sq[lo]) - count * mean * mean +
                   count * (mean - q.points[i]) * (mean - q.points[i]);
        }
        if (worst_cell < n) {
            // reseed the empty cell at the sample point farthest from its centroid
            double far_dist = -1.0;
            double far_point = sample[0];
            for (std::size_t i = 0; i < n; ++i) {
                if (i == worst_cell || cut[i + 1] == cut[i]) continue;
                for (const std::size_t edge : {cut[i], cut[i + 1] - 1}) {
                    const double dist = std::abs(sample[edge] - q.points[i]);
                    if (dist > far_dist) {
                        far_dist = dist;
                        far_point = sample[edge];
                    }
                }
            }
            q.points[worst_cell] = far_point;
            prev_distortion = -1.0;
            continue;
        }
        // centroid update
        for (std::size_t i = 0; i < n; ++i) {
            const double count = static_cast<double>(cut[i + 1] - cut[i]);
            q.points[i] = (prefix[cut[i + 1]] - prefix[cut[i]]) / count;
        }
        const double distortion = sse / static_cast<double>(sample_size);
        if (prev_distortion >= 0.0 &&
            std::abs(prev_distortion - distortion) <= rel_tol * (1.0 + distortion))
            break;
        prev_distortion = distortion;
    }

    // final distortion at the settled centroids
    std::sort(q.points.begin(), q.points.end());
    double sse = 0.0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < sample_size; ++i) {
        while (j + 1 < n && std::abs(sample[i] - q.points[j + 1]) < std::abs(sample[i] - q.points[j]))
            ++j;
        const double dist = sample[i] - q.points[j];
        sse += dist * dist;
    }
    q.distortion = std::sqrt(sse / static_cast<double>(sample_size));
    return q;
}

struct LrBoundResult {
    double lhs = 0.0;     // empirical L^r error of the tangent construction
    double lhs_se = 0.0;  // standard error of the lhs mean (before the 1/r power)
    double rhs = 0.0;     // holder_constant * e2^(alpha + 1)
};

/// Checks the quantization-driven L^r error bound: the tangent construction
/// at the n quantizer points of mu has L^r(mu) error at most
/// holder_constant * e2(mu)^(alpha + 1).
inline LrBoundResult lr_bound_check(const std::function<double(double)>& f,
                                    const std::function<double(double)>& derivative,
                                    double holder_alpha, double holder_constant,
                                    const std::function<double(Rng&)>& sampler, std::size_t n,
                                    double r, std::size_t sample_size, std::uint64_t seed) {
    require(r > 0.0, "lr_bound_check: r must be positive");
    const Quantizer q = quantization_error(sampler, n, sample_size, seed);
    const ConvexNet net = tangent_construction_1d(f, derivative, q.points);

    Rng rng(seed, rng_stream::evaluation);
    NetWorkspace ws;
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < sample_size; ++i) {
        const double x = sampler(rng);
        const Vec xv{x};
        const double err = std::pow(std::abs(f(x) - forward(net, xv, ws)), r);
        sum += err;
        sum_sq += err * err;
    }
    const double mean = sum / static_cast<double>(sample_size);
    const double var = sum_sq / static_cast<double>(sample_size) - mean * mean;

    LrBoundResult out;
    out.lhs = std::pow(mean, 1.0 / r);
    out.lhs_se = std::sqrt(std::max(var, 0.0) / static_cast<double>(sample_size));
    out.rhs = holder_constant * std::pow(q.distortion, holder_alpha + 1.0);
    return out;
}

} // namespace convexnet
