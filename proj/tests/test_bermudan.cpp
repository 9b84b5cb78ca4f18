#include <doctest.h>

#include <cmath>

#include "convexnet/bermudan.hpp"
#include "convexnet/math.hpp"

using namespace convexnet;

namespace {

BermudanSpec spec_of(double strike, double maturity, std::size_t dates) {
    return BermudanSpec{strike, PathGrid::uniform(maturity, dates)};
}

ConvexNet constant_net(double value) {
    ConvexNet net;
    net.input_dim = 1;
    net.layers.push_back({Matrix(1, 1), {value}});
    net.activation = {ActivationKind::Max, 1.0, 1.0};
    return net;
}

StoppingPolicy constant_policy(const BermudanSpec& spec, double rate, double continuation) {
    StoppingPolicy policy;
    policy.spec = spec;
    policy.rate = rate;
    policy.c0 = continuation;
    for (std::size_t k = 1; k < spec.dates(); ++k) {
        policy.nets.push_back(constant_net(continuation));
        policy.scalers.push_back(InputScaler::identity(1));
    }
    return policy;
}

} // namespace

TEST_SUITE_BEGIN("bermudan");

TEST_CASE("discounted best-of payoff") {
    const auto spec = spec_of(100.0, 3.0, 3);
    const Vec s{90.0, 110.0};
    // t_1 = 1
    CHECK(bermudan_payoff(spec, 0.05, 1, s) == doctest::Approx(std::exp(-0.05) * 10.0).epsilon(1e-12));
    const Vec otm{80.0, 99.0};
    CHECK(bermudan_payoff(spec, 0.05, 2, otm) == doctest::Approx(0.0));
    // one asset reduces to the vanilla call payoff
    const Vec single{123.0};
    CHECK(bermudan_payoff(spec, 0.05, 3, single) ==
          doctest::Approx(std::exp(-0.15) * 23.0).epsilon(1e-12));
}

TEST_CASE("always-exercise policy pays the immediate payoff exactly") {
    const auto spec = spec_of(100.0, 2.0, 4);
    const auto m = BlackScholesModel::equicorrelated(1, 0.05, {0.2}, {0.1}, 0.0);
    const auto policy = constant_policy(spec, m.r, -1e300);
    const Vec x0{130.0};
    const McEstimate est = lower_bound_price(policy, m, x0, 1000, 1);
    CHECK(est.price == doctest::Approx(30.0).epsilon(1e-12));
    CHECK(est.std_error == doctest::Approx(0.0));
}

TEST_CASE("never-exercise policy prices the European option") {
    const auto spec = spec_of(100.0, 2.0, 4);
    const auto m = BlackScholesModel::equicorrelated(1, 0.05, {0.2}, {0.1}, 0.0);
    const auto policy = constant_policy(spec, m.r, 1e300);
    const Vec x0{105.0};
    const McEstimate est = lower_bound_price(policy, m, x0, 400000, 7);
    const double european = black_scholes_call(105.0, 100.0, 0.05, 0.1, 0.2, 2.0);
    CHECK(std::abs(est.price - european) <= 3.0 * est.std_error);
}

TEST_CASE("single-date contract reduces to the European closed form") {
    const auto spec = spec_of(100.0, 1.0, 1);
    const auto m = BlackScholesModel::equicorrelated(1, 0.06, {0.25}, {0.04}, 0.0);
    const Vec x0{100.0};
    PolicyTrainConfig cfg;
    cfg.batch_paths = 4096;
    cfg.iterations = 50; // no nets to train, only the scalar continuation
    cfg.seed = 3;
    const PolicyTrainResult trained = train_policy(m, spec, x0, cfg);
    CHECK(trained.policy.nets.empty());
    const McEstimate est = lower_bound_price(trained.policy, m, x0, 400000, 12);
    const double european = black_scholes_call(100.0, 100.0, 0.06, 0.04, 0.25, 1.0);
    CHECK(std::abs(est.price - european) <= 3.0 * est.std_error + 1e-3);
}

TEST_CASE("degenerate payoff is never worth anything") {
    // strike far above any reachable price: payoff 0 at every date
    const auto spec = spec_of(1e7, 1.0, 3);
    const auto m = BlackScholesModel::equicorrelated(1, 0.05, {0.2}, {0.0}, 0.0);
    const Vec x0{100.0};
    PolicyTrainConfig cfg;
    cfg.net = NetConfig{8, 2, ActivationKind::LogSumExp, 10.0};
    cfg.batch_paths = 512;
    cfg.iterations = 30;
    cfg.seed = 5;
    const PolicyTrainResult trained = train_policy(m, spec, x0, cfg);
    const McEstimate est = lower_bound_price(trained.policy, m, x0, 20000, 9);
    CHECK(est.price == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("trained continuation matches the one-step closed form" * doctest::timeout(120)) {
    // with two dates the last continuation value has a closed form:
    // C_1(x) = e^{-r t_1} * call(x, K, r, delta, sigma, t_2 - t_1)
    const auto m = BlackScholesModel::equicorrelated(1, 0.05, {0.2}, {0.1}, 0.0);
    const auto spec = spec_of(100.0, 3.0, 2);
    const Vec x0{100.0};
    PolicyTrainConfig cfg;
    cfg.net = NetConfig{32, 2, ActivationKind::LogSumExp, 20.0};
    cfg.batch_paths = 4096;
    cfg.iterations = 6000;
    cfg.schedule = LRSchedule{1e-2, 1e-5, 0.95, 3000};
    cfg.seed = 21;
    const PolicyTrainResult trained = train_policy(m, spec, x0, cfg);
    REQUIRE(trained.policy.nets.size() == 1);

    // states sampled from the date-1 distribution, kept inside the scaler box
    const PathTensor sample = simulate_paths(m, x0, spec.grid, 4000, 123);
    NetWorkspace ws;
    double mae = 0.0;
    std::size_t used = 0;
    const double t1 = spec.grid.times[1];
    for (std::size_t p = 0; p < sample.paths; ++p) {
        const double x = sample.at(p, 1, 0);
        const auto& scaler = trained.policy.scalers[0];
        if (x < scaler.lo[0] || x > scaler.lo[0] + scaler.width[0]) continue;
        const double truth =
            std::exp(-m.r * t1) * black_scholes_call(x, 100.0, 0.05, 0.1, 0.2, t1);
        const Vec state{x};
        mae += std::abs(trained.policy.continuation(1, state, ws) - truth);
        ++used;
    }
    mae /= static_cast<double>(used);
    const double scale = black_scholes_call(100.0, 100.0, 0.05, 0.1, 0.2, 3.0);
    CHECK(mae < 0.01 * scale);

    // the trained continuation net must stay convex
    const auto convexity = convexity_midpoint_check(trained.policy.nets[0], 10000, Vec{0.0},
                                                    Vec{1.0}, 1e-9);
    CHECK(convexity.pass);

    // lower bound dominates both immediate exercise and the European value
    const McEstimate bound = lower_bound_price(trained.policy, m, x0, 200000, 44);
    const double european = black_scholes_call(100.0, 100.0, 0.05, 0.1, 0.2, 3.0);
    CHECK(bound.price >= bermudan_payoff(spec, m.r, 0, x0) - 3.0 * bound.std_error);
    CHECK(bound.price >= european - 3.0 * bound.std_error);
}

TEST_SUITE_END();
