// Command-line driver for the convex-network pricing experiments.
//
// Subcommands: fit-toy, price-basket, price-bermudan, price-swing,
// check-rates. Each run reads a key-value config file, writes a manifest
// first (so crashed runs stay attributable), then emits its CSV reports into
// the output directory. Exit codes: 0 success, 2 config error, 3 numeric
// failure.

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "convexnet/experiments.hpp"

namespace {

using namespace convexnet;

struct CommonOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::string arch;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("--config", opt.config_path, "run configuration file")->required();
    cmd->add_option("--out", opt.out_dir, "output directory");
    cmd->add_option("--arch", opt.arch, "architecture override (LM, L2SE, k-SLM, k-SL2SE)");
    cmd->add_option("--seed", opt.seed, "seed override")->each([&opt](const std::string&) {
        opt.seed_set = true;
    });
}

Config load_run_config(const CommonOptions& opt, const std::string& kind) {
    Config cfg = load_config(opt.config_path);
    if (opt.seed_set) cfg.set("experiment", "seed", std::to_string(opt.seed));
    if (!opt.arch.empty()) cfg.set("experiment", "arch", opt.arch);
    if (cfg.has("experiment", "kind") && cfg.get("experiment", "kind") != kind)
        throw config_error("config kind '" + cfg.get("experiment", "kind") +
                           "' does not match subcommand '" + kind + "'");
    if (cfg.has("experiment", "arch")) parse_architecture(cfg.get("experiment", "arch"));
    return cfg;
}

std::string manifest_path(const std::string& out_dir) { return out_dir + "/manifest.txt"; }

void write_manifest_start(const std::string& out_dir, const Config& cfg) {
    std::ofstream os(manifest_path(out_dir));
    if (!os.good()) throw config_error("cannot write manifest in: " + out_dir);
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    os << "seed=" << seed_from_config(cfg) << "\n";
    os << "config_hash=" << hash << "\n";
    os << "status=running\n";
}

void write_manifest_done(const std::string& out_dir, const Config& cfg, double wall_seconds) {
    std::ofstream os(manifest_path(out_dir));
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    os << "seed=" << seed_from_config(cfg) << "\n";
    os << "config_hash=" << hash << "\n";
    os << "status=ok\n";
    os << "wall_seconds=" << csv_number(wall_seconds) << "\n";
}

template <class Run>
int drive(const CommonOptions& opt, const std::string& kind, Run&& run) {
    const Config cfg = load_run_config(opt, kind);
    std::filesystem::create_directories(opt.out_dir);
    write_manifest_start(opt.out_dir, cfg);
    const auto started = std::chrono::steady_clock::now();
    run(cfg, opt.out_dir);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_manifest_done(opt.out_dir, cfg, wall);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"convex-network option pricing experiments"};
    app.require_subcommand(1);

    CommonOptions toy_opt, basket_opt, bermudan_opt, swing_opt, rates_opt;
    CLI::App* toy = app.add_subcommand("fit-toy", "fit the 1-d noisy convex toy function");
    add_common(toy, toy_opt);
    CLI::App* basket = app.add_subcommand("price-basket", "learn a basket-call price surface");
    add_common(basket, basket_opt);
    CLI::App* bermudan = app.add_subcommand("price-bermudan", "price a best-of Bermudan call");
    add_common(bermudan, bermudan_opt);
    CLI::App* swing = app.add_subcommand("price-swing", "price a take-or-pay contract");
    add_common(swing, swing_opt);
    CLI::App* rates = app.add_subcommand("check-rates", "approximation-rate and bound tables");
    add_common(rates, rates_opt);

    CLI11_PARSE(app, argc, argv);

    try {
        if (toy->parsed())
            return drive(toy_opt, "toy", [](const Config& cfg, const std::string& out) {
                const auto result = convexnet::run_toy(cfg, out);
                std::printf("fit-toy: final loss %.6g, median rel err %.4g\n",
                            result.trace.empty() ? 0.0 : result.trace.back().loss,
                            result.median_rel_err);
            });
        if (basket->parsed())
            return drive(basket_opt, "basket", [](const Config& cfg, const std::string& out) {
                const auto result = convexnet::run_basket(cfg, out);
                for (const auto& row : result.rows)
                    std::printf("price-basket: j=%d net %.4f vs mc %.4f [%.4f, %.4f]\n", row.j,
                                row.net_price, row.mc_price, row.mc_lo, row.mc_hi);
            });
        if (bermudan->parsed())
            return drive(bermudan_opt, "bermudan", [](const Config& cfg, const std::string& out) {
                const auto result = convexnet::run_bermudan(cfg, out);
                std::printf("price-bermudan: lower bound %.4f (se %.4f), in-sample %.4f\n",
                            result.lower_bound.price, result.lower_bound.std_error,
                            result.trained.in_sample_value);
            });
        if (swing->parsed())
            return drive(swing_opt, "swing", [](const Config& cfg, const std::string& out) {
                const auto result = convexnet::run_swing(cfg, out);
                std::printf("price-swing: %.4f (se %.4f), in-sample %.4f\n", result.price.price,
                            result.price.std_error, result.trained.value_estimate);
            });
        if (rates->parsed())
            return drive(rates_opt, "rates", [](const Config& cfg, const std::string& out) {
                const auto result = convexnet::run_rates(cfg, out);
                for (const auto& row : result.sup_rows)
                    std::printf("check-rates: n=%zu sup_error %.6g\n", row.n, row.sup_error);
            });
    } catch (const convexnet::config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const convexnet::numeric_error& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
