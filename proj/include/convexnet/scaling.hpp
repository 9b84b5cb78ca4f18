#pragma once

#include <span>

#include "convexnet/mat.hpp"

namespace convexnet {

/// Componentwise affine map onto [0,1]^d, stored next to the net it feeds.
/// Degenerate components (zero width) map to the midpoint 0.5.
struct InputScaler {
    Vec lo;
    Vec width;

    static InputScaler identity(std::size_t d) {
        InputScaler s;
        s.lo.assign(d, 0.0);
        s.width.assign(d, 1.0);
        return s;
    }

    static InputScaler from_bounds(Vec lower, Vec upper) {
        require(lower.size() == upper.size(), "InputScaler: bound size mismatch");
        InputScaler s;
        s.lo = std::move(lower);
        s.width.resize(s.lo.size());
        for (std::size_t i = 0; i < s.lo.size(); ++i) {
            require(upper[i] >= s.lo[i], "InputScaler: upper < lower");
            s.width[i] = upper[i] - s.lo[i];
        }
        return s;
    }

    std::size_t dim() const { return lo.size(); }

    void apply(std::span<const double> x, std::span<double> out) const {
        require(x.size() == lo.size() && out.size() == lo.size(), "InputScaler: dimension mismatch");
        for (std::size_t i = 0; i < lo.size(); ++i)
            out[i] = width[i] > 0.0 ? (x[i] - lo[i]) / width[i] : 0.5;
    }

    Vec apply(std::span<const double> x) const {
        Vec out(lo.size());
        apply(x, out);
        return out;
    }
};

} // namespace convexnet
