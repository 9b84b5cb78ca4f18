#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "convexnet/mat.hpp"
#include "convexnet/math.hpp"
#include "convexnet/rng.hpp"

namespace convexnet {

enum class ActivationKind { Max, LogSumExp };

/// Output activation. For LogSumExp the effective smoothing parameter is
/// lambda = c * lambda_tilde, with c a fixed scale constant and lambda_tilde
/// trained together with the weights.
struct Activation {
    ActivationKind kind = ActivationKind::Max;
    double c = 1.0;
    double lambda_tilde = 1.0;

    double lambda() const { return c * lambda_tilde; }
};

struct AffineLayer {
    Matrix weights; // q_l x q_{l-1}
    Vec bias;       // q_l
};

/// A stack of affine layers (no inner activations) finished by a max or
/// LogSumExp over the n last-layer units. Because composed affine maps stay
/// affine and max/LogSumExp are convex and non-decreasing, the output is a
/// convex function of the input for any parameter values.
struct ConvexNet {
    std::size_t input_dim = 0;
    std::vector<AffineLayer> layers;
    Activation activation;

    std::size_t depth() const { return layers.size(); }
    std::size_t width() const { return layers.empty() ? 0 : layers.back().bias.size(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weights.a.size() + l.bias.size();
        if (activation.kind == ActivationKind::LogSumExp) n += 1;
        return n;
    }
};

/// Relative tolerance under which pre-activations are treated as tied when
/// selecting the maximizing hyperplane. Ties resolve to the lowest index.
inline constexpr double max_tie_rel_tol = 1e-12;

struct NetGradients {
    std::vector<Matrix> weights;
    std::vector<Vec> biases;
    double lambda_tilde = 0.0;
    Vec input;

    static NetGradients zeros_like(const ConvexNet& net) {
        NetGradients g;
        g.weights.reserve(net.layers.size());
        g.biases.reserve(net.layers.size());
        for (const auto& l : net.layers) {
            g.weights.emplace_back(l.weights.rows, l.weights.cols);
            g.biases.emplace_back(l.bias.size(), 0.0);
        }
        g.input.assign(net.input_dim, 0.0);
        return g;
    }

    void set_zero() {
        for (auto& w : weights) w.fill(0.0);
        for (auto& b : biases) b.assign(b.size(), 0.0);
        lambda_tilde = 0.0;
        input.assign(input.size(), 0.0);
    }

    void add(const NetGradients& o) {
        for (std::size_t l = 0; l < weights.size(); ++l) {
            for (std::size_t i = 0; i < weights[l].a.size(); ++i) weights[l].a[i] += o.weights[l].a[i];
            for (std::size_t i = 0; i < biases[l].size(); ++i) biases[l][i] += o.biases[l][i];
        }
        lambda_tilde += o.lambda_tilde;
        for (std::size_t i = 0; i < input.size(); ++i) input[i] += o.input[i];
    }

    void scale(double s) {
        for (auto& w : weights)
            for (double& v : w.a) v *= s;
        for (auto& b : biases)
            for (double& v : b) v *= s;
        lambda_tilde *= s;
        for (double& v : input) v *= s;
    }
};

/// Per-evaluation scratch. Forward fills the layer outputs and the activation
/// weights; backward consumes them. One workspace per thread.
struct NetWorkspace {
    std::vector<Vec> z;       // z[0] = x, z[l] output of layer l
    Vec act_weights;          // softmax weights (LogSumExp) or one-hot (Max)
    Vec delta_hi, delta_lo;   // backprop scratch
    double value = 0.0;
    double dvalue_dlambda = 0.0;

    void resize(const ConvexNet& net) {
        // fast path: repeated evaluation of same-shaped nets
        if (z.size() == net.depth() + 1 && z[0].size() == net.input_dim &&
            z[1].size() == net.layers[0].bias.size() && z.back().size() == net.width() &&
            act_weights.size() == net.width())
            return;
        z.resize(net.depth() + 1);
        z[0].resize(net.input_dim);
        for (std::size_t l = 0; l < net.depth(); ++l) z[l + 1].resize(net.layers[l].bias.size());
        act_weights.resize(net.width());
        delta_hi.resize(net.width());
        delta_lo.resize(net.width());
    }
};

namespace detail {

/// Lowest index whose value is within a relative tolerance of the maximum.
inline std::size_t argmax_with_ties(std::span<const double> y, double max_value) {
    const double cutoff = max_value - max_tie_rel_tol * (1.0 + std::abs(max_value));
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] >= cutoff) return i;
    return y.size() - 1; // unreachable for finite input
}

inline void apply_activation(const Activation& act, std::span<const double> y, NetWorkspace& ws) {
    double m = y[0];
    for (double v : y)
        if (v > m) m = v;
    if (!std::isfinite(m)) throw numeric_error("convex net: non-finite pre-activation");

    if (act.kind == ActivationKind::Max) {
        const std::size_t idx = argmax_with_ties(y, m);
        std::fill(ws.act_weights.begin(), ws.act_weights.end(), 0.0);
        ws.act_weights[idx] = 1.0;
        ws.value = m;
        ws.dvalue_dlambda = 0.0;
        return;
    }

    const double lambda = act.lambda();
    require(lambda > 0.0, "convex net: LogSumExp lambda must be positive");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ws.act_weights[i] = std::exp(lambda * (y[i] - m));
        s += ws.act_weights[i];
    }
    const double log_s = std::log(s);
    double weighted_shift = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ws.act_weights[i] /= s;
        weighted_shift += ws.act_weights[i] * (y[i] - m);
    }
    ws.value = m + log_s / lambda;
    ws.dvalue_dlambda = -log_s / (lambda * lambda) + weighted_shift / lambda;
}

} // namespace detail

/// Evaluates the net at x, caching intermediates in ws for a later backward.
inline double forward(const ConvexNet& net, std::span<const double> x, NetWorkspace& ws) {
    require(x.size() == net.input_dim, "forward: input dimension mismatch");
    require(!net.layers.empty(), "forward: net has no layers");
    ws.resize(net);
    std::copy(x.begin(), x.end(), ws.z[0].begin());
    for (std::size_t l = 0; l < net.depth(); ++l) {
        matvec(net.layers[l].weights, ws.z[l], ws.z[l + 1]);
        const Vec& b = net.layers[l].bias;
        for (std::size_t i = 0; i < b.size(); ++i) ws.z[l + 1][i] += b[i];
    }
    detail::apply_activation(net.activation, ws.z[net.depth()], ws);
    return ws.value;
}

inline double forward(const ConvexNet& net, std::span<const double> x) {
    NetWorkspace ws;
    return forward(net, x, ws);
}

/// Accumulates parameter and input gradients scaled by `upstream` into `out`,
/// reusing the intermediates of the last forward() call on `ws`.
inline void backward(const ConvexNet& net, NetWorkspace& ws, double upstream, NetGradients& out) {
    const std::size_t depth = net.depth();
    Vec& delta = ws.delta_hi;
    Vec& delta_next = ws.delta_lo;
    delta.resize(net.width());
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = upstream * ws.act_weights[i];
    out.lambda_tilde += upstream * net.activation.c * ws.dvalue_dlambda;

    for (std::size_t l = depth; l-- > 0;) {
        const AffineLayer& layer = net.layers[l];
        Matrix& gw = out.weights[l];
        Vec& gb = out.biases[l];
        const Vec& z_prev = ws.z[l];
        for (std::size_t i = 0; i < layer.weights.rows; ++i) {
            const double di = delta[i];
            gb[i] += di;
            if (di == 0.0) continue;
            double* grow = gw.row(i);
            for (std::size_t j = 0; j < layer.weights.cols; ++j) grow[j] += di * z_prev[j];
        }
        delta_next.resize(layer.weights.cols);
        matvec_transposed(layer.weights, delta, delta_next);
        std::swap(delta, delta_next);
    }
    for (std::size_t j = 0; j < net.input_dim; ++j) out.input[j] += upstream * delta[j];
}

/// Full gradient of the output with respect to every trainable parameter and
/// the input, scaled by `upstream`.
inline NetGradients backward(const ConvexNet& net, std::span<const double> x, double upstream) {
    NetWorkspace ws;
    forward(net, x, ws);
    NetGradients g = NetGradients::zeros_like(net);
    backward(net, ws, upstream, g);
    return g;
}

/// Folds the layer stack into a single affine map (W_eff, b_eff) with
/// forward(net, x) == activation(W_eff x + b_eff). The rows of W_eff are the
/// n hyperplane slopes.
inline std::pair<Matrix, Vec> collapse_to_affine(const ConvexNet& net) {
    require(!net.layers.empty(), "collapse_to_affine: net has no layers");
    Matrix w = net.layers[0].weights;
    Vec b = net.layers[0].bias;
    for (std::size_t l = 1; l < net.depth(); ++l) {
        const AffineLayer& layer = net.layers[l];
        w = matmul(layer.weights, w);
        Vec nb(layer.bias.size());
        matvec(layer.weights, b, nb);
        for (std::size_t i = 0; i < nb.size(); ++i) nb[i] += layer.bias[i];
        b = std::move(nb);
    }
    return {std::move(w), std::move(b)};
}

/// Subgradient of the net output in the input. For Max this is the slope of
/// the maximizing hyperplane (lowest index on ties); for LogSumExp it is the
/// exact gradient, a softmax-weighted mix of the hyperplane slopes.
inline Vec input_subgradient(const ConvexNet& net, std::span<const double> x) {
    return backward(net, x, 1.0).input;
}

/// Indices of hyperplanes that attain the maximum (within tol) for at least
/// one input of the batch. A diagnostic for how many of the n planes a
/// trained net actually uses.
inline std::set<std::size_t> activated_hyperplanes(const ConvexNet& net,
                                                   const std::vector<Vec>& batch, double tol) {
    const auto [w_eff, b_eff] = collapse_to_affine(net);
    std::set<std::size_t> active;
    Vec y(w_eff.rows);
    for (const Vec& x : batch) {
        matvec(w_eff, x, y);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += b_eff[i];
        double m = y[0];
        for (double v : y)
            if (v > m) m = v;
        const double cutoff = m - tol * (1.0 + std::abs(m));
        for (std::size_t i = 0; i < y.size(); ++i)
            if (y[i] >= cutoff) active.insert(i);
    }
    return active;
}

struct MidpointCheckResult {
    bool pass = true;
    double worst_violation = 0.0; // normalized; <= 0 when the check passes
};

/// Samples (x, y, t) in the box and verifies
/// f(t x + (1-t) y) <= t f(x) + (1-t) f(y) + rel_tol * (1 + |rhs|).
inline MidpointCheckResult convexity_midpoint_check(const ConvexNet& net, std::size_t trials,
                                                    std::span<const double> box_lo,
                                                    std::span<const double> box_hi, double rel_tol,
                                                    std::uint64_t seed = 20240001) {
    require(trials >= 1, "convexity_midpoint_check: trials must be >= 1");
    require(box_lo.size() == net.input_dim && box_hi.size() == net.input_dim,
            "convexity_midpoint_check: box dimension mismatch");
    Rng rng(seed, rng_stream::test_points);
    NetWorkspace ws;
    const std::size_t d = net.input_dim;
    Vec x(d), y(d), mid(d);
    MidpointCheckResult result;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        for (std::size_t j = 0; j < d; ++j) {
            x[j] = rng.uniform(box_lo[j], box_hi[j]);
            y[j] = rng.uniform(box_lo[j], box_hi[j]);
        }
        const double t = rng.uniform01();
        for (std::size_t j = 0; j < d; ++j) mid[j] = t * x[j] + (1.0 - t) * y[j];
        const double fx = forward(net, x, ws);
        const double fy = forward(net, y, ws);
        const double fmid = forward(net, mid, ws);
        const double rhs = t * fx + (1.0 - t) * fy;
        const double violation = (fmid - rhs - rel_tol * (1.0 + std::abs(rhs))) / (1.0 + std::abs(rhs));
        if (violation > result.worst_violation) result.worst_violation = violation;
        if (violation > 0.0) result.pass = false;
    }
    return result;
}

/// Architecture knobs shared by the pricing pipelines.
struct NetConfig {
    std::size_t width = 32;  // units per layer (n)
    std::size_t depth = 2;   // number of affine layers (L)
    ActivationKind kind = ActivationKind::LogSumExp;
    double c = 20.0;         // LogSumExp scale constant
};

/// Glorot-uniform weights, zero biases, lambda_tilde = 1.
inline ConvexNet make_convex_net(std::size_t input_dim, std::size_t width, std::size_t depth,
                                 Activation activation, Rng& rng) {
    require(input_dim >= 1 && width >= 1 && depth >= 1, "make_convex_net: bad dimensions");
    ConvexNet net;
    net.input_dim = input_dim;
    net.activation = activation;
    net.layers.resize(depth);
    for (std::size_t l = 0; l < depth; ++l) {
        const std::size_t fan_in = (l == 0) ? input_dim : width;
        const std::size_t fan_out = width;
        AffineLayer& layer = net.layers[l];
        layer.weights = Matrix(fan_out, fan_in);
        layer.bias.assign(fan_out, 0.0);
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& w : layer.weights.a) w = rng.uniform(-limit, limit);
    }
    return net;
}

inline ConvexNet make_convex_net(std::size_t input_dim, const NetConfig& cfg, Rng& rng) {
    return make_convex_net(input_dim, cfg.width, cfg.depth, Activation{cfg.kind, cfg.c, 1.0}, rng);
}

// --- serialization ----------------------------------------------------------
//
// Self-describing text format. Doubles are written as C99 hex-floats, so a
// save/load round trip is bit-exact.

namespace detail {

inline std::string double_to_hex(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

inline double hex_to_double(const std::string& s) {
    return std::strtod(s.c_str(), nullptr);
}

} // namespace detail

inline void save_net(const ConvexNet& net, std::ostream& os) {
    os << "convexnet-v1\n";
    os << "depth " << net.depth() << "\n";
    os << "width " << net.width() << "\n";
    os << "input_dim " << net.input_dim << "\n";
    os << "activation " << (net.activation.kind == ActivationKind::Max ? "max" : "logsumexp")
       << "\n";
    os << "c " << detail::double_to_hex(net.activation.c) << "\n";
    os << "lambda_tilde " << detail::double_to_hex(net.activation.lambda_tilde) << "\n";
    for (std::size_t l = 0; l < net.depth(); ++l) {
        const AffineLayer& layer = net.layers[l];
        os << "layer " << l << " " << layer.weights.rows << " " << layer.weights.cols << "\n";
        for (std::size_t i = 0; i < layer.weights.rows; ++i) {
            const double* row = layer.weights.row(i);
            for (std::size_t j = 0; j < layer.weights.cols; ++j)
                os << detail::double_to_hex(row[j]) << (j + 1 < layer.weights.cols ? " " : "\n");
        }
        os << "bias";
        for (double b : layer.bias) os << " " << detail::double_to_hex(b);
        os << "\n";
    }
    os << "end\n";
}

inline void save_net(const ConvexNet& net, const std::string& path) {
    std::ofstream os(path);
    require(os.good(), "save_net: cannot open file");
    save_net(net, os);
}

inline ConvexNet load_net(std::istream& is) {
    auto fail = [](const char* msg) -> ConvexNet { throw std::invalid_argument(msg); };
    std::string tok;
    is >> tok;
    if (tok != "convexnet-v1") return fail("load_net: bad magic");
    ConvexNet net;
    std::size_t depth = 0, width = 0;
    is >> tok >> depth;
    if (tok != "depth") return fail("load_net: expected depth");
    is >> tok >> width;
    if (tok != "width") return fail("load_net: expected width");
    is >> tok >> net.input_dim;
    if (tok != "input_dim") return fail("load_net: expected input_dim");
    std::string kind;
    is >> tok >> kind;
    if (tok != "activation") return fail("load_net: expected activation");
    if (kind == "max")
        net.activation.kind = ActivationKind::Max;
    else if (kind == "logsumexp")
        net.activation.kind = ActivationKind::LogSumExp;
    else
        return fail("load_net: unknown activation");
    std::string value;
    is >> tok >> value;
    if (tok != "c") return fail("load_net: expected c");
    net.activation.c = detail::hex_to_double(value);
    is >> tok >> value;
    if (tok != "lambda_tilde") return fail("load_net: expected lambda_tilde");
    net.activation.lambda_tilde = detail::hex_to_double(value);

    net.layers.resize(depth);
    for (std::size_t l = 0; l < depth; ++l) {
        std::size_t idx = 0, rows = 0, cols = 0;
        is >> tok >> idx >> rows >> cols;
        if (tok != "layer" || idx != l) return fail("load_net: bad layer header");
        AffineLayer& layer = net.layers[l];
        layer.weights = Matrix(rows, cols);
        for (std::size_t i = 0; i < rows * cols; ++i) {
            is >> value;
            layer.weights.a[i] = detail::hex_to_double(value);
        }
        is >> tok;
        if (tok != "bias") return fail("load_net: expected bias");
        layer.bias.resize(rows);
        for (std::size_t i = 0; i < rows; ++i) {
            is >> value;
            layer.bias[i] = detail::hex_to_double(value);
        }
    }
    is >> tok;
    if (tok != "end" || !is.good()) return fail("load_net: truncated file");
    if (net.width() != width) return fail("load_net: width mismatch");
    return net;
}

inline ConvexNet load_net(const std::string& path) {
    std::ifstream is(path);
    require(is.good(), "load_net: cannot open file");
    return load_net(is);
}

/// Canonical walk over every trainable parameter, paired with its gradient.
template <class Fn>
void for_each_parameter(ConvexNet& net, const NetGradients& grads, Fn&& fn) {
    for (std::size_t l = 0; l < net.depth(); ++l) {
        AffineLayer& layer = net.layers[l];
        for (std::size_t i = 0; i < layer.weights.a.size(); ++i)
            fn(layer.weights.a[i], grads.weights[l].a[i]);
        for (std::size_t i = 0; i < layer.bias.size(); ++i) fn(layer.bias[i], grads.biases[l][i]);
    }
    if (net.activation.kind == ActivationKind::LogSumExp)
        fn(net.activation.lambda_tilde, grads.lambda_tilde);
}

} // namespace convexnet
