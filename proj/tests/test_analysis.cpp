#include <doctest.h>

#include <cmath>

#include "convexnet/analysis.hpp"

using namespace convexnet;

namespace {

const std::function<double(double)> square = [](double x) { return x * x; };
const std::function<double(double)> square_deriv = [](double x) { return 2.0 * x; };

} // namespace

TEST_SUITE_BEGIN("analysis");

TEST_CASE("tangents of x^2 at {0, 0.5, 1}") {
    const ConvexNet net = tangent_construction_1d(square, square_deriv, {0.0, 0.5, 1.0});
    // worst gap sits midway between tangency points: ((b - a)/2)^2 = 0.0625
    double sup = 0.0;
    double arg = 0.0;
    for (int g = 0; g <= 4000; ++g) {
        const double x = g / 4000.0;
        const double err = square(x) - forward(net, Vec{x});
        if (err > sup) {
            sup = err;
            arg = x;
        }
    }
    CHECK(sup == doctest::Approx(0.0625).epsilon(1e-6));
    CHECK((std::abs(arg - 0.25) < 1e-3 || std::abs(arg - 0.75) < 1e-3));
}

TEST_CASE("an affine function is reproduced exactly by one tangent") {
    const std::function<double(double)> f = [](double x) { return 3.0 * x - 1.5; };
    const std::function<double(double)> df = [](double) { return 3.0; };
    const ConvexNet net = tangent_construction_1d(f, df, {0.37});
    for (const double x : {-5.0, -0.1, 0.0, 2.0, 40.0})
        CHECK(forward(net, Vec{x}) == doctest::Approx(f(x)).epsilon(1e-14));
}

TEST_CASE("tangent construction never exceeds the function") {
    // several convex functions, random evaluation points
    struct Case {
        std::function<double(double)> f, df;
    };
    const Case cases[] = {
        {square, square_deriv},
        {[](double x) { return std::exp(x); }, [](double x) { return std::exp(x); }},
        {[](double x) { return std::abs(x); }, [](double x) { return x >= 0.0 ? 1.0 : -1.0; }},
    };
    Rng rng(5, 1);
    for (const auto& c : cases) {
        Vec points(7);
        for (double& p : points) p = rng.uniform(-2.0, 2.0);
        const ConvexNet net = tangent_construction_1d(c.f, c.df, points);
        for (int i = 0; i < 10000; ++i) {
            const double x = rng.uniform(-3.0, 3.0);
            CHECK(forward(net, Vec{x}) <= c.f(x) + 1e-12 * (1.0 + std::abs(c.f(x))));
        }
    }
}

TEST_CASE("sup error of the tangent construction decays like n^-2") {
    const auto rows = sup_rate_check(square, square_deriv, 0.0, 1.0, {4, 8, 16, 32, 64});
    REQUIRE(rows.size() == 5);
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        const double ratio = rows[i].sup_error / rows[i + 1].sup_error;
        CHECK(ratio > 3.5);
        CHECK(ratio < 4.5);
    }
    // midpoint placement gives exactly 1/(4 n^2) for x^2
    CHECK(rows[0].sup_error == doctest::Approx(1.0 / 64.0).epsilon(1e-3));
}

TEST_CASE("refinement strictly improves the sup error") {
    const auto rows = sup_rate_check(square, square_deriv, 0.0, 1.0, {1, 2});
    CHECK(rows[1].sup_error < rows[0].sup_error);
}

TEST_CASE("subgradient tangents of |x| stay below the function") {
    const std::function<double(double)> f = [](double x) { return std::abs(x); };
    const std::function<double(double)> df = [](double x) { return x >= 0.0 ? 1.0 : -1.0; };
    const ConvexNet net = tangent_construction_1d(f, df, {-1.0, 0.0, 1.0});
    for (int g = 0; g <= 2000; ++g) {
        const double x = -2.0 + 4.0 * g / 2000.0;
        CHECK(forward(net, Vec{x}) <= f(x) + 1e-14);
    }
}

TEST_CASE("LogSumExp variant stays within log(n)/lambda of the max variant") {
    const std::vector<std::size_t> ns{4, 16};
    for (const std::size_t n : ns) {
        Vec points(n);
        for (std::size_t i = 0; i < n; ++i) points[i] = (i + 0.5) / static_cast<double>(n);
        ConvexNet max_net = tangent_construction_1d(square, square_deriv, points);
        for (const double lambda : {5.0, 50.0}) {
            ConvexNet lse_net = max_net;
            lse_net.activation = {ActivationKind::LogSumExp, lambda, 1.0};
            double sup_max = 0.0, sup_lse = 0.0;
            for (int g = 0; g <= 2000; ++g) {
                const double x = g / 2000.0;
                sup_max = std::max(sup_max, std::abs(square(x) - forward(max_net, Vec{x})));
                sup_lse = std::max(sup_lse, std::abs(square(x) - forward(lse_net, Vec{x})));
            }
            CHECK(sup_lse <= sup_max + std::log(static_cast<double>(n)) / lambda + 1e-12);
        }
    }
}

TEST_CASE("quantization error of U[0,1] with two points") {
    const auto uniform_sampler = [](Rng& rng) { return rng.uniform01(); };
    const Quantizer q = quantization_error(uniform_sampler, 2, 1000000, 42);
    // optimal centroids {1/4, 3/4}, e2 = 1/(4 sqrt(3))
    CHECK(q.distortion == doctest::Approx(1.0 / (4.0 * std::sqrt(3.0))).epsilon(0.02));
    CHECK(q.points[0] == doctest::Approx(0.25).epsilon(0.02));
    CHECK(q.points[1] == doctest::Approx(0.75).epsilon(0.02));
}

TEST_CASE("quantizer with as many points as samples has zero distortion") {
    const auto sampler = [](Rng& rng) { return rng.uniform01(); };
    const Quantizer q = quantization_error(sampler, 64, 64, 3);
    CHECK(q.distortion == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("distortion is non-increasing in the number of points") {
    const auto sampler = [](Rng& rng) { return rng.uniform01(); };
    double prev = 1e300;
    for (const std::size_t n : {1, 2, 4, 8, 16}) {
        const Quantizer q = quantization_error(sampler, n, 200000, 9);
        CHECK(q.distortion <= prev + 1e-12);
        prev = q.distortion;
    }
}

TEST_CASE("quantization bound holds for the tangent witness on x^2") {
    const auto sampler = [](Rng& rng) { return rng.uniform01(); };
    for (const std::size_t n : {2, 4, 8}) {
        const auto result = lr_bound_check(square, square_deriv, 1.0, 2.0, sampler, n, 1.0,
                                           1000000, 7);
        CHECK(result.lhs <= result.rhs + 3.0 * result.lhs_se);
        CHECK(result.lhs > 0.0);
    }
}

TEST_CASE("quantization bound is trivial for affine functions") {
    const std::function<double(double)> f = [](double x) { return 2.0 * x + 5.0; };
    const std::function<double(double)> df = [](double) { return 2.0; };
    const auto sampler = [](Rng& rng) { return rng.uniform01(); };
    const auto result = lr_bound_check(f, df, 1.0, 0.0, sampler, 3, 1.0, 100000, 5);
    CHECK(result.lhs <= 1e-12);
}

TEST_CASE("bound right-hand side shrinks as n grows") {
    const auto sampler = [](Rng& rng) { return rng.uniform01(); };
    double prev = 1e300;
    for (const std::size_t n : {2, 4, 8}) {
        const auto result = lr_bound_check(square, square_deriv, 1.0, 2.0, sampler, n, 1.0,
                                           200000, 11);
        CHECK(result.rhs < prev);
        prev = result.rhs;
    }
}

TEST_SUITE_END();
