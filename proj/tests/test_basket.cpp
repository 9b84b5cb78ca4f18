#include <doctest.h>

#include <cmath>

#include "convexnet/basket.hpp"
#include "test_util.hpp"

using namespace convexnet;

namespace {

BasketSpec spec_of(Vec alpha, double k, double t) { return BasketSpec{std::move(alpha), k, t}; }

// paper-style parameterization used across the suite
BlackScholesModel table_model(std::size_t d, double rho) {
    Vec sigma(d), delta(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) sigma[i] = 0.2 + 0.008 * static_cast<double>(i + 1);
    return BlackScholesModel::equicorrelated(d, 0.06, std::move(sigma), std::move(delta), rho);
}

} // namespace

TEST_SUITE_BEGIN("basket");

TEST_CASE("geometric basket price reduces to Black-Scholes for one asset") {
    const auto m = BlackScholesModel::equicorrelated(1, 0.06, {0.2}, {0.0}, 0.0);
    const auto spec = spec_of({1.0}, 80.0, 0.5);
    const Vec s0{100.0};
    CHECK(geometric_basket_price(m, spec, s0) ==
          doctest::Approx(black_scholes_call(100.0, 80.0, 0.06, 0.0, 0.2, 0.5)).epsilon(1e-12));
}

TEST_CASE("vanishing strike tends to the discounted geometric forward") {
    const auto m = table_model(2, 0.0);
    const Vec s0{95.0, 105.0};
    const double t = 0.5;
    double a = 0.0, var = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
        a += 0.5 * (std::log(s0[i]) + (m.r - 0.5 * m.sigma[i] * m.sigma[i]) * t);
        var += 0.25 * m.sigma[i] * m.sigma[i] * t;
    }
    const double limit = std::exp(-m.r * t) * std::exp(a + 0.5 * var);
    const auto spec = spec_of({0.5, 0.5}, 1e-9, t);
    CHECK(geometric_basket_price(m, spec, s0) == doctest::Approx(limit).epsilon(1e-9));
}

TEST_CASE("two independent assets match brute-force quadrature") {
    const auto m = table_model(2, 0.0);
    const auto spec = spec_of({0.3, 0.7}, 90.0, 0.75);
    const Vec s0{88.0, 107.0};

    // direct 2-d integration of the payoff against the Gaussian density; the
    // inner integral is split at the payoff kink so both pieces are smooth
    const double t = spec.maturity;
    const double b1 = 0.3 * m.sigma[0] * std::sqrt(t);
    const double b2 = 0.7 * m.sigma[1] * std::sqrt(t);
    const double c0 = 0.3 * (std::log(s0[0]) + (m.r - 0.5 * m.sigma[0] * m.sigma[0]) * t) +
                      0.7 * (std::log(s0[1]) + (m.r - 0.5 * m.sigma[1] * m.sigma[1]) * t);
    std::vector<double> nodes, weights;
    testutil::gauss_legendre(48, nodes, weights);
    const double lim = 8.5;
    const auto inner = [&](double z1) {
        const std::function<double(double)> g = [&](double z2) {
            const double geo = std::exp(c0 + b1 * z1 + b2 * z2);
            return std::max(geo - spec.strike, 0.0) * std::exp(-0.5 * z2 * z2);
        };
        const double kink = (std::log(spec.strike) - c0 - b1 * z1) / b2;
        if (kink <= -lim) return testutil::integrate_gl(g, -lim, lim, nodes, weights);
        if (kink >= lim) return 0.0;
        return testutil::integrate_gl(g, kink, lim, nodes, weights);
    };
    const std::function<double(double)> outer = [&](double z1) {
        return inner(z1) * std::exp(-0.5 * z1 * z1);
    };
    const double integral = testutil::integrate_gl(outer, -lim, lim, nodes, weights);
    const double price = std::exp(-m.r * t) * integral / (2.0 * pi_v);
    CHECK(geometric_basket_price(m, spec, s0) == doctest::Approx(price).epsilon(1e-6));
}

TEST_CASE("single asset control variate collapses the variance") {
    const auto m = BlackScholesModel::equicorrelated(1, 0.06, {0.25}, {0.0}, 0.0);
    const auto spec = spec_of({1.0}, 90.0, 1.0);
    const Vec s0{100.0};
    const McEstimate est = mc_cv_estimate(m, spec, s0, 1000, 5);
    CHECK(est.std_error == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(est.price == doctest::Approx(geometric_basket_price(m, spec, s0)).epsilon(1e-12));
}

TEST_CASE("controlled estimator reproduces the published d=2 reference point") {
    const auto m = table_model(2, 0.0);
    const auto spec = spec_of({0.5, 0.5}, 80.0, 0.5);
    const Vec s0{90.0, 89.0}; // first test point of the reference grid
    const McEstimate est = mc_cv_estimate(m, spec, s0, 200000, 11);
    CHECK(std::abs(est.price - 12.236) <= 3.0 * est.std_error + 2e-3);
}

TEST_CASE("control variate beats plain Monte Carlo variance") {
    const auto m = table_model(5, 0.0);
    const auto spec = spec_of(Vec(5, 0.2), 80.0, 0.5);
    Vec s0(5);
    for (std::size_t i = 0; i < 5; ++i) s0[i] = 100.0 - static_cast<double>(i + 1);

    const std::size_t count = 100000;
    const McEstimate cv = mc_cv_estimate(m, spec, s0, count, 17);

    // plain estimator from the same model, no control variate
    const Matrix st = simulate_terminal(m, s0, spec.maturity, count, 17);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t p = 0; p < count; ++p) {
        double basket = 0.0;
        for (std::size_t i = 0; i < 5; ++i) basket += 0.2 * st(p, i);
        const double payoff = std::max(basket - spec.strike, 0.0);
        sum += payoff;
        sum_sq += payoff * payoff;
    }
    const double mean = sum / count;
    const double plain_se =
        std::exp(-m.r * spec.maturity) * std::sqrt((sum_sq / count - mean * mean) / (count - 1.0));
    CHECK(cv.std_error < 0.5 * plain_se);
    // both agree within combined confidence bands
    const double plain_price = std::exp(-m.r * spec.maturity) * mean;
    CHECK(std::abs(cv.price - plain_price) <= 3.0 * std::sqrt(cv.std_error * cv.std_error + plain_se * plain_se));
}

TEST_CASE("controlled estimator stabilizes across disjoint seeds") {
    const auto m = table_model(3, 0.4);
    const auto spec = spec_of(Vec(3, 1.0 / 3.0), 80.0, 0.5);
    const Vec s0{97.0, 101.0, 95.0};
    const McEstimate a = mc_cv_estimate(m, spec, s0, 400000, 100);
    const McEstimate b = mc_cv_estimate(m, spec, s0, 400000, 200);
    CHECK(std::abs(a.price - b.price) <=
          3.0 * std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error));
}

TEST_CASE("initial price sampler respects its box") {
    InputBox box;
    box.center = {100.0, 90.0};
    box.radius = 0.0;
    const Matrix degenerate = sample_initial_prices(box, 50, 1);
    for (std::size_t p = 0; p < 50; ++p) {
        CHECK(degenerate(p, 0) == doctest::Approx(100.0));
        CHECK(degenerate(p, 1) == doctest::Approx(90.0));
    }

    box.radius = 20.0;
    const std::size_t count = 100000;
    const Matrix draws = sample_initial_prices(box, count, 2);
    Vec mins(2, 1e300), maxs(2, -1e300), means(2, 0.0);
    for (std::size_t p = 0; p < count; ++p)
        for (std::size_t i = 0; i < 2; ++i) {
            mins[i] = std::min(mins[i], draws(p, i));
            maxs[i] = std::max(maxs[i], draws(p, i));
            means[i] += draws(p, i);
        }
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(mins[i] >= box.center[i] - box.radius);
        CHECK(maxs[i] <= box.center[i] + box.radius);
        // uniform mean has sd = 2R/sqrt(12 count)
        const double se = 2.0 * box.radius / std::sqrt(12.0 * count);
        CHECK(std::abs(means[i] / count - box.center[i]) <= 3.0 * se);
    }
}

TEST_CASE("box must keep prices positive") {
    InputBox box;
    box.center = {10.0};
    box.radius = 10.0;
    CHECK_THROWS_AS(box.validate(), std::invalid_argument);
}

TEST_CASE("zero volatility surface learns the deterministic payoff") {
    const std::size_t d = 2;
    const auto m = BlackScholesModel::equicorrelated(d, 0.06, Vec(d, 0.0), Vec(d, 0.0), 0.0);
    const auto spec = spec_of(Vec(d, 0.5), 80.0, 0.5);
    InputBox box;
    box.center = {100.0, 100.0};
    box.radius = 10.0;

    SurfaceTrainConfig cfg;
    cfg.net = NetConfig{16, 2, ActivationKind::LogSumExp, 20.0};
    cfg.train.batch_size = 64;
    cfg.train.iterations = 1600;
    cfg.train.schedule = LRSchedule{5e-2, 1e-6, 0.97, 900};
    cfg.train.seed = 33;
    cfg.mc_samples_per_input = 2; // targets are deterministic here
    cfg.pool_size = 4000;
    const PriceSurface surface = train_price_surface(m, spec, box, cfg);

    Rng rng(4, rng_stream::test_points);
    const double discount = std::exp(-m.r * spec.maturity);
    const double growth = std::exp(m.r * spec.maturity);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const Vec s0{rng.uniform(90.0, 110.0), rng.uniform(90.0, 110.0)};
        const double truth = discount * std::max(0.5 * (s0[0] + s0[1]) * growth - spec.strike, 0.0);
        worst = std::max(worst, std::abs(price_at(surface, s0) - truth));
    }
    CHECK(worst < 1e-2);

    // structural checks on the trained surface
    const auto convexity =
        convexity_midpoint_check(surface.net, 10000, Vec(d, 0.0), Vec(d, 1.0), 1e-9);
    CHECK(convexity.pass);

    // bumping every spot up never drops the call surface noticeably
    for (int i = 0; i < 100; ++i) {
        const Vec lo{rng.uniform(90.0, 104.0), rng.uniform(90.0, 104.0)};
        const Vec hi{lo[0] + 5.0, lo[1] + 5.0};
        CHECK(price_at(surface, hi) >= price_at(surface, lo) - 1e-2);
    }
}

TEST_SUITE_END();
