#pragma once

#include <map>
#include <optional>
#include <string>

#include "admf/market_data.hpp"
#include "admf/model.hpp"
#include "admf/training.hpp"

namespace admf {

struct DataConfig {
    std::string prices;  // long-format CSV; empty -> use the scenario generator
    CalendarPolicy calendar_policy = CalendarPolicy::strict;
};

struct AdmConfig {
    int n_lag = 42;
    Measure measure = Measure::correlation;
    int k = 10;
    int u = 21;
    int h = 21;
    SplitFractions split;
    DegeneratePolicy degenerate_policy = DegeneratePolicy::error;
};

struct ScenarioConfig {
    int id = 0;  // 0 = none, 1..3 per the scenario catalogue
    int n_assets = 8;
    int regimes = 5;
    int phases_per_regime = 3;
    int days_per_phase = 300;
    std::uint64_t seed = 11;
};

struct PortfolioConfig {
    int rebalance_every = 21;
};

struct PairsConfig {
    double theta_c = 0.7;
    double capital = 1'000'000;
    int period = 21;
    std::string asset_alpha;
    std::string asset_beta;
};

struct EvalConfig {
    std::string predictions_dir;  // optional externally produced archive
};

/// Flat sectioned key=value file; CLI flags override file values.
struct RunConfig {
    DataConfig data;
    AdmConfig adm;
    ModelConfig model;
    TrainConfig train;
    ScenarioConfig scenario;
    PortfolioConfig portfolio;
    PairsConfig pairs;
    EvalConfig eval;
    std::string out_dir;

    void validate() const;
    static RunConfig from_file(const std::string& path);
};

/// Raw `[section] key = value` parser (keys addressed as "section.key").
std::map<std::string, std::string> parse_ini(const std::string& path);

}  // namespace admf
