#pragma once

#include <cmath>
#include <string>

#include "convexnet/analysis.hpp"
#include "convexnet/basket.hpp"
#include "convexnet/bermudan.hpp"
#include "convexnet/config.hpp"
#include "convexnet/csv.hpp"
#include "convexnet/swing.hpp"

namespace convexnet {

/// Architecture naming: LM / L2SE are single-layer nets with a hard or smooth
/// maximum; k-SLM / k-SL2SE stack k affine layers before the activation.
struct Architecture {
    ActivationKind kind = ActivationKind::LogSumExp;
    std::size_t depth = 1;
};

inline Architecture parse_architecture(const std::string& name) {
    std::string base = name;
    std::size_t depth = 1;
    const auto dash = name.find("-S");
    if (dash != std::string::npos) {
        try {
            std::size_t used = 0;
            const long k = std::stol(name.substr(0, dash), &used);
            if (used != dash || k < 2) throw std::invalid_argument(name);
            depth = static_cast<std::size_t>(k);
        } catch (const std::exception&) {
            throw config_error("bad architecture name: " + name);
        }
        base = name.substr(dash + 2); // strip "<k>-S"
    }
    if (base == "LM") return {ActivationKind::Max, depth};
    if (base == "L2SE") return {ActivationKind::LogSumExp, depth};
    throw config_error("bad architecture name: " + name);
}

inline std::string architecture_name(const Architecture& a) {
    const std::string base = a.kind == ActivationKind::Max ? "LM" : "L2SE";
    if (a.depth == 1) return base;
    return std::to_string(a.depth) + "-S" + base;
}

// --- shared config plumbing --------------------------------------------------

inline LRSchedule schedule_from_config(const Config& cfg, const std::string& section,
                                       const LRSchedule& fallback) {
    const std::string lr = cfg.get_or(section, "lr", "schedule");
    if (lr != "schedule") {
        try {
            return LRSchedule::constant(std::stod(lr));
        } catch (const std::exception&) {
            throw config_error("key [" + section + "] lr: expected a rate or 'schedule'");
        }
    }
    LRSchedule s = fallback;
    s.gamma0 = cfg.get_double_or(section, "lr_gamma0", s.gamma0);
    s.floor = cfg.get_double_or(section, "lr_floor", s.floor);
    s.decay = cfg.get_double_or(section, "lr_decay", s.decay);
    s.warm_iters = static_cast<std::size_t>(cfg.get_int_or(section, "lr_warm", static_cast<std::int64_t>(s.warm_iters)));
    if (s.gamma0 <= 0.0 || s.floor <= 0.0 || s.decay <= 0.0 || s.decay > 1.0)
        throw config_error("[" + section + "]: invalid learning-rate schedule");
    return s;
}

inline NetConfig net_from_config(const Config& cfg, const NetConfig& fallback) {
    NetConfig net = fallback;
    if (cfg.has("experiment", "arch")) {
        const Architecture a = parse_architecture(cfg.get("experiment", "arch"));
        net.kind = a.kind;
        net.depth = a.depth;
        if (cfg.has("experiment", "L") &&
            static_cast<std::size_t>(cfg.get_int("experiment", "L")) != a.depth)
            throw config_error("[experiment] L contradicts the architecture name");
    } else if (cfg.has("experiment", "L")) {
        net.depth = static_cast<std::size_t>(cfg.get_int("experiment", "L"));
    }
    net.width = static_cast<std::size_t>(cfg.get_int_or("experiment", "n", static_cast<std::int64_t>(net.width)));
    net.c = cfg.get_double_or("experiment", "c", net.c);
    if (net.width < 1 || net.depth < 1 || net.c <= 0.0)
        throw config_error("[experiment]: invalid net shape");
    return net;
}

inline std::uint64_t seed_from_config(const Config& cfg) {
    return static_cast<std::uint64_t>(cfg.get_int_or("experiment", "seed", 0));
}

// --- toy experiment ----------------------------------------------------------

/// 1-d noisy convex regression target used by the fit-toy driver.
struct ToySpec {
    double noise_sd = 2.0;
    static constexpr double lo = -7.0;
    static constexpr double hi = 7.0;

    static double f(double x) {
        return x * x + 10.0 * ((x < 0.0 ? std::exp(x) - 1.0 : 0.0) + (x > 0.0 ? x : 0.0));
    }
    static double scale(double x) { return (x + 7.0) / 14.0; }
};

struct ToyResult {
    ConvexNet net;
    LossTrace trace;
    double median_rel_err = 0.0; // over test points with |f| > 1
};

inline ToyResult run_toy(const Config& cfg, const std::string& out_dir) {
    ToySpec toy;
    toy.noise_sd = cfg.get_double_or("toy", "sigma_noise", 2.0);
    require(toy.noise_sd >= 0.0, "toy: sigma_noise must be non-negative");

    const NetConfig net_cfg = net_from_config(cfg, NetConfig{32, 2, ActivationKind::LogSumExp, 10.0});
    TrainConfig train;
    train.seed = seed_from_config(cfg);
    train.batch_size = static_cast<std::size_t>(cfg.get_int_or("train", "batch", 4096));
    train.iterations = static_cast<std::size_t>(cfg.get_int_or("train", "iterations", 3000));
    train.schedule = schedule_from_config(cfg, "train", LRSchedule{2e-2, 1e-5, 0.95, 1500});

    const BatchSampler sampler = [&toy](std::uint64_t seed, std::size_t count) {
        RegressionBatch batch;
        batch.inputs.reserve(count);
        batch.targets.reserve(count);
        Rng rng(seed, 0);
        for (std::size_t i = 0; i < count; ++i) {
            const double x = rng.uniform(ToySpec::lo, ToySpec::hi);
            batch.inputs.push_back({ToySpec::scale(x)});
            batch.targets.push_back(ToySpec::f(x) + toy.noise_sd * rng.normal());
        }
        return batch;
    };

    Rng init(train.seed, rng_stream::net_init);
    ToyResult result;
    result.net = train_regression(make_convex_net(1, net_cfg, init), sampler, train, &result.trace);

    write_loss_trace_csv(result.trace, out_dir + "/loss.csv");
    save_net(result.net, out_dir + "/net.cnet");

    // test on fresh points never seen in training
    const std::size_t test_points =
        static_cast<std::size_t>(cfg.get_int_or("toy", "test_points", 100));
    std::ofstream fit = open_csv(out_dir + "/fit.csv", "x,f,f_hat,rel_err");
    Rng test_rng(train.seed, rng_stream::test_points);
    NetWorkspace ws;
    Vec errs;
    for (std::size_t i = 0; i < test_points; ++i) {
        const double x = test_rng.uniform(ToySpec::lo, ToySpec::hi);
        const double truth = ToySpec::f(x);
        const Vec scaled{ToySpec::scale(x)};
        const double fitted = forward(result.net, scaled, ws);
        const double rel = std::abs(fitted - truth) / std::abs(truth);
        fit << csv_number(x) << "," << csv_number(truth) << "," << csv_number(fitted) << ","
            << csv_number(rel) << "\n";
        if (std::abs(truth) > 1.0) errs.push_back(rel);
    }
    std::sort(errs.begin(), errs.end());
    result.median_rel_err = errs.empty() ? 0.0 : errs[errs.size() / 2];
    return result;
}

// --- basket experiment ---------------------------------------------------------

struct BasketRunResult {
    PriceSurface surface;
    struct Row {
        int j;
        double net_price;
        double mc_price;
        double mc_lo;
        double mc_hi;
    };
    std::vector<Row> rows;
};

inline BlackScholesModel basket_model_from_config(const Config& cfg) {
    const std::size_t d = static_cast<std::size_t>(cfg.get_int("model", "d"));
    const double r = cfg.get_double_or("model", "r", 0.06);
    const double rho = cfg.get_double_or("model", "rho", 0.0);
    Vec sigma;
    if (cfg.has("model", "sigma")) {
        sigma = cfg.get_doubles("model", "sigma");
        if (sigma.size() == 1) sigma.assign(d, sigma[0]);
    } else {
        sigma.resize(d);
        for (std::size_t i = 0; i < d; ++i) sigma[i] = 0.2 + 0.008 * static_cast<double>(i + 1);
    }
    if (sigma.size() != d) throw config_error("[model] sigma: expected d entries");
    return BlackScholesModel::equicorrelated(d, r, std::move(sigma), Vec(d, 0.0), rho);
}

inline BasketRunResult run_basket(const Config& cfg, const std::string& out_dir) {
    const BlackScholesModel model = basket_model_from_config(cfg);
    const std::size_t d = model.d;

    BasketSpec spec;
    spec.strike = cfg.get_double_or("basket", "strike", 80.0);
    spec.maturity = cfg.get_double_or("basket", "maturity", 0.5);
    if (cfg.has("basket", "alpha")) {
        spec.alpha = cfg.get_doubles("basket", "alpha");
        if (spec.alpha.size() == 1) spec.alpha.assign(d, spec.alpha[0]);
    } else {
        spec.alpha.assign(d, 1.0 / static_cast<double>(d));
    }

    InputBox box;
    if (cfg.has("basket", "x0")) {
        box.center = cfg.get_doubles("basket", "x0");
        if (box.center.size() == 1) box.center.assign(d, box.center[0]);
    } else {
        box.center.resize(d);
        for (std::size_t i = 0; i < d; ++i) box.center[i] = 100.0 - static_cast<double>(i + 1);
    }
    box.radius = cfg.get_double_or("basket", "box_radius", 20.0);

    SurfaceTrainConfig train;
    train.net = net_from_config(cfg, NetConfig{32, 2, ActivationKind::LogSumExp, d <= 2 ? 20.0 : 40.0});
    train.train.seed = seed_from_config(cfg);
    train.train.batch_size = static_cast<std::size_t>(cfg.get_int_or("train", "batch", 64));
    train.train.iterations = static_cast<std::size_t>(cfg.get_int_or("train", "iterations", 1500));
    train.train.schedule = schedule_from_config(cfg, "train", LRSchedule{1e-2, 1e-5, 0.95, 700});
    train.mc_samples_per_input =
        static_cast<std::size_t>(cfg.get_int_or("basket", "m_train", 4096));
    train.pool_size = static_cast<std::size_t>(cfg.get_int_or("train", "pool", 38400));

    BasketRunResult result;
    result.surface = train_price_surface(model, spec, box, train);
    write_loss_trace_csv(result.surface.trace, out_dir + "/loss.csv");

    // benchmark table at the published test points s0_i = 85 - i + 6 j
    const std::size_t mc_m = static_cast<std::size_t>(cfg.get_int_or("basket", "mc_m", 1000000));
    std::vector<double> js{1, 2, 3, 4, 5};
    if (cfg.has("basket", "test_j")) js = cfg.get_doubles("basket", "test_j");
    const double rho = d > 1 ? model.rho(0, 1) : 0.0;

    std::ofstream report = open_csv(out_dir + "/report.csv",
                                    "d,rho,j,net_price,mc_price,mc_ci_lo,mc_ci_hi");
    const std::uint64_t mc_seed = Rng(train.train.seed, rng_stream::evaluation).next_u64();
    for (const double jd : js) {
        const int j = static_cast<int>(jd);
        Vec s0(d);
        for (std::size_t i = 0; i < d; ++i)
            s0[i] = 85.0 - static_cast<double>(i + 1) + 6.0 * jd;
        const McEstimate mc = mc_cv_estimate(model, spec, s0, mc_m, mc_seed + j);
        BasketRunResult::Row row;
        row.j = j;
        row.net_price = price_at(result.surface, s0);
        row.mc_price = mc.price;
        row.mc_lo = mc.price - 1.96 * mc.std_error;
        row.mc_hi = mc.price + 1.96 * mc.std_error;
        result.rows.push_back(row);
        report << d << "," << csv_number(rho) << "," << j << "," << csv_number(row.net_price)
               << "," << csv_number(row.mc_price) << "," << csv_number(row.mc_lo) << ","
               << csv_number(row.mc_hi) << "\n";
    }
    return result;
}

// --- bermudan experiment -------------------------------------------------------

struct BermudanRunResult {
    PolicyTrainResult trained;
    McEstimate lower_bound;
};

inline BermudanRunResult run_bermudan(const Config& cfg, const std::string& out_dir) {
    const std::size_t d = static_cast<std::size_t>(cfg.get_int("model", "d"));
    const double r = cfg.get_double_or("model", "r", 0.05);
    const double delta = cfg.get_double_or("model", "delta", 0.1);
    Vec sigma;
    if (cfg.has("model", "sigma")) {
        sigma = cfg.get_doubles("model", "sigma");
        if (sigma.size() == 1) sigma.assign(d, sigma[0]);
    } else {
        sigma.assign(d, 0.2);
    }
    const double rho = cfg.get_double_or("model", "rho", 0.0);
    const BlackScholesModel model =
        BlackScholesModel::equicorrelated(d, r, std::move(sigma), Vec(d, delta), rho);

    BermudanSpec spec;
    spec.strike = cfg.get_double_or("bermudan", "strike", 100.0);
    spec.grid = PathGrid::uniform(cfg.get_double_or("bermudan", "maturity", 3.0),
                                  static_cast<std::size_t>(cfg.get_int_or("bermudan", "dates", 9)));

    const double s0 = cfg.get_double_or("bermudan", "s0", 100.0);
    const Vec x0(d, s0);

    PolicyTrainConfig train;
    train.net = net_from_config(cfg, NetConfig{64, 2, ActivationKind::LogSumExp, 40.0});
    train.seed = seed_from_config(cfg);
    train.batch_paths = static_cast<std::size_t>(cfg.get_int_or("train", "batch", 8192));
    train.iterations = static_cast<std::size_t>(cfg.get_int_or("train", "iterations", 5000));
    train.schedule = schedule_from_config(cfg, "train", LRSchedule::constant(1e-4));

    BermudanRunResult result;
    result.trained = train_policy(model, spec, x0, train);

    const std::size_t eval_paths =
        static_cast<std::size_t>(cfg.get_int_or("bermudan", "eval_paths", 1000000));
    result.lower_bound =
        lower_bound_price(result.trained.policy, model, x0, eval_paths, train.seed);

    std::ofstream trace = open_csv(out_dir + "/v0_trace.csv", "iter,v0_in_sample");
    for (std::size_t i = 0; i < result.trained.value_trace.size(); ++i)
        trace << (i + 1) << "," << csv_number(result.trained.value_trace[i]) << "\n";

    std::ofstream report = open_csv(out_dir + "/report.csv",
                                    "d,s0,case,price,std_error,paper_dos_lower,paper_dos_upper");
    report << d << "," << csv_number(s0) << "," << cfg.get_or("bermudan", "case", "symmetric")
           << "," << csv_number(result.lower_bound.price) << ","
           << csv_number(result.lower_bound.std_error) << ","
           << cfg.get_or("bermudan", "dos_lower", "") << ","
           << cfg.get_or("bermudan", "dos_upper", "") << "\n";
    return result;
}

// --- swing experiment ----------------------------------------------------------

struct SwingRunResult {
    SwingTrainResult trained;
    McEstimate price;
};

inline SwingRunResult run_swing(const Config& cfg, const std::string& out_dir) {
    GasForwardModel model;
    model.alpha = cfg.get_double_or("gas", "alpha", 4.0);
    model.sigma = cfg.get_double_or("gas", "sigma", 0.7);
    model.f0 = cfg.get_double_or("gas", "f0", 20.0);

    SwingSpec spec;
    spec.n_dates = static_cast<std::size_t>(cfg.get_int_or("swing", "dates", 31));
    spec.strike = cfg.get_double_or("swing", "strike", 20.0);
    spec.q_min = cfg.get_double_or("swing", "q_min", 0.0);
    spec.q_max = cfg.get_double_or("swing", "q_max", 1.0);
    spec.q_total_min = cfg.get_double("swing", "q_total_min");
    spec.q_total_max = cfg.get_double("swing", "q_total_max");

    // daily exercise on a 30/360 day count unless overridden
    const double dt = cfg.get_double_or("swing", "dt", 1.0 / 360.0);
    require(dt > 0.0, "swing: dt must be positive");
    PathGrid grid;
    grid.times.resize(spec.n_dates);
    for (std::size_t k = 0; k < spec.n_dates; ++k) grid.times[k] = dt * static_cast<double>(k);

    SwingTrainConfig train;
    train.net = net_from_config(cfg, NetConfig{8, 2, ActivationKind::LogSumExp, 20.0});
    train.seed = seed_from_config(cfg);
    train.path_batches = static_cast<std::size_t>(cfg.get_int_or("train", "path_batches", 5));
    train.batch_size = static_cast<std::size_t>(cfg.get_int_or("train", "batch", 4096));
    train.iterations = static_cast<std::size_t>(cfg.get_int_or("train", "iterations", 2000));
    train.schedule = schedule_from_config(cfg, "train", LRSchedule::constant(1e-3));
    const std::string mode = cfg.get_or("swing", "mode", "per_volume");
    if (mode == "per_volume")
        train.mode = SwingNetMode::PerVolume;
    else if (mode == "shared")
        train.mode = SwingNetMode::SharedAdjusted;
    else
        throw config_error("[swing] mode: expected per_volume or shared");

    SwingRunResult result;
    result.trained = train_swing(model, spec, grid, train);

    const std::size_t eval_paths =
        static_cast<std::size_t>(cfg.get_int_or("swing", "eval_paths", 2000000));
    result.price = evaluate_swing(result.trained.policy, model, eval_paths, train.seed);

    std::ofstream trace = open_csv(out_dir + "/value_trace.csv", "iter,v0_in_sample");
    for (std::size_t i = 0; i < result.trained.value_trace.size(); ++i)
        trace << (i + 1) << "," << csv_number(result.trained.value_trace[i]) << "\n";

    std::ofstream report = open_csv(out_dir + "/report.csv",
                                    "Q_lo,Q_hi,price,std_error,benchmark");
    report << csv_number(spec.q_total_min) << "," << csv_number(spec.q_total_max) << ","
           << csv_number(result.price.price) << "," << csv_number(result.price.std_error) << ","
           << cfg.get_or("swing", "benchmark", "") << "\n";
    return result;
}

// --- approximation-rate experiment ----------------------------------------------

struct RatesRunResult {
    std::vector<SupErrorRow> sup_rows;
    struct BoundRow {
        std::size_t n;
        double lhs;
        double rhs;
    };
    std::vector<BoundRow> bound_rows;
};

inline RatesRunResult run_rates(const Config& cfg, const std::string& out_dir) {
    const std::function<double(double)> f = [](double x) { return x * x; };
    const std::function<double(double)> df = [](double x) { return 2.0 * x; };

    std::vector<std::size_t> n_list{4, 8, 16, 32, 64};
    if (cfg.has("rates", "n_list")) {
        n_list.clear();
        for (const double v : cfg.get_doubles("rates", "n_list"))
            n_list.push_back(static_cast<std::size_t>(v));
    }
    RatesRunResult result;
    result.sup_rows = sup_rate_check(f, df, 0.0, 1.0, n_list);
    std::ofstream sup = open_csv(out_dir + "/rates_sup.csv", "n,sup_error");
    for (const auto& row : result.sup_rows)
        sup << row.n << "," << csv_number(row.sup_error) << "\n";

    std::vector<std::size_t> q_list{2, 4, 8};
    if (cfg.has("rates", "quant_n_list")) {
        q_list.clear();
        for (const double v : cfg.get_doubles("rates", "quant_n_list"))
            q_list.push_back(static_cast<std::size_t>(v));
    }
    const std::size_t samples =
        static_cast<std::size_t>(cfg.get_int_or("rates", "samples", 1000000));
    const std::uint64_t seed = seed_from_config(cfg);
    const auto uniform_sampler = [](Rng& rng) { return rng.uniform01(); };

    std::ofstream bound = open_csv(out_dir + "/rates_bound.csv", "n,lhs,rhs");
    for (const std::size_t n : q_list) {
        const LrBoundResult b = lr_bound_check(f, df, 1.0, 2.0, uniform_sampler, n, 1.0, samples, seed);
        result.bound_rows.push_back({n, b.lhs, b.rhs});
        bound << n << "," << csv_number(b.lhs) << "," << csv_number(b.rhs) << "\n";
    }
    return result;
}

} // namespace convexnet
