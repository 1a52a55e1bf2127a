#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "admf/commands.hpp"

namespace {

std::string effective_out_dir(const std::string& flag_out, const std::string& cfg_out) {
    if (!flag_out.empty()) return flag_out;
    if (!cfg_out.empty()) return cfg_out;
    if (const char* env = std::getenv("ADMF_OUT"); env && *env) return env;
    return "out";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ADM forecasting pipeline"};
    app.require_subcommand(1);

    std::string config_path, out_dir, checkpoint;
    std::uint64_t seed = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "run config file")->required();
    app.add_option("--out", out_dir, "output directory (overrides config)");
    app.add_option("--seed", seed, "override train/scenario seeds")
        ->each([&](const std::string&) { seed_set = true; });

    auto* build = app.add_subcommand("build", "ingest or simulate prices, build the ADM archive and sample index");
    auto* train = app.add_subcommand("train", "train the configured variant");
    auto* eval = app.add_subcommand("eval", "score test predictions (checkpoint or external archive)");
    auto* simulate = app.add_subcommand("simulate", "generate a synthetic market scenario");
    auto* usage = app.add_subcommand("expert-usage", "per-phase MoE expert importance profile");
    auto* portfolio = app.add_subcommand("portfolio", "minimum-variance portfolio backtest");
    auto* pairs = app.add_subcommand("pairs", "correlation-gated pair-trading backtest");
    for (auto* sub : {eval, usage, portfolio, pairs}) {
        sub->add_option("--checkpoint", checkpoint, "model checkpoint path");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        admf::RunConfig cfg = admf::RunConfig::from_file(config_path);
        cfg.out_dir = effective_out_dir(out_dir, cfg.out_dir);
        if (seed_set) {
            cfg.train.seed = seed;
            cfg.scenario.seed = seed;
        }
        const std::string default_ckpt = cfg.out_dir + "/checkpoint.bin";
        const std::string ckpt = checkpoint.empty() ? default_ckpt : checkpoint;

        if (build->parsed()) {
            admf::cmd_build(cfg, std::cout);
        } else if (train->parsed()) {
            admf::cmd_train(cfg, std::cout);
        } else if (eval->parsed()) {
            admf::cmd_eval(cfg, ckpt, std::cout);
        } else if (simulate->parsed()) {
            admf::cmd_simulate(cfg, std::cout);
        } else if (usage->parsed()) {
            admf::cmd_expert_usage(cfg, ckpt, std::cout);
        } else if (portfolio->parsed()) {
            admf::cmd_portfolio(cfg, ckpt, std::cout);
        } else if (pairs->parsed()) {
            admf::cmd_pairs(cfg, ckpt, std::cout);
        }
        return 0;
    } catch (const admf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const admf::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const admf::NumericError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
