#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "convexnet/common.hpp"

namespace convexnet {

using Vec = std::vector<double>;

/// Dense row-major matrix. Small and allocation-friendly; the networks in
/// this library are tiny (widths of a few dozen), so no BLAS is needed.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    double* row(std::size_t i) { return a.data() + i * cols; }
    const double* row(std::size_t i) const { return a.data() + i * cols; }

    void fill(double v) { a.assign(a.size(), v); }
};

/// out = M x
inline void matvec(const Matrix& m, std::span<const double> x, std::span<double> out) {
    require(x.size() == m.cols && out.size() == m.rows, "matvec: dimension mismatch");
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* r = m.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) s += r[j] * x[j];
        out[i] = s;
    }
}

/// out = M^T x
inline void matvec_transposed(const Matrix& m, std::span<const double> x, std::span<double> out) {
    require(x.size() == m.rows && out.size() == m.cols, "matvec_transposed: dimension mismatch");
    for (std::size_t j = 0; j < m.cols; ++j) out[j] = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* r = m.row(i);
        const double xi = x[i];
        for (std::size_t j = 0; j < m.cols; ++j) out[j] += r[j] * xi;
    }
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    require(a.cols == b.rows, "matmul: dimension mismatch");
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* br = b.row(k);
            double* cr = c.row(i);
            for (std::size_t j = 0; j < b.cols; ++j) cr[j] += aik * br[j];
        }
    }
    return c;
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace convexnet
