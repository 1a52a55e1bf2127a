#pragma once

#include <iosfwd>
#include <string>

#include "admf/run_config.hpp"

namespace admf {

/// Pipeline subcommands behind the `admf` CLI. Every command validates the
/// config before touching the output directory and throws ConfigError /
/// DataError / NumericError on failure (mapped to exit codes 1/2/3).
void cmd_build(const RunConfig& cfg, std::ostream& log);
void cmd_train(const RunConfig& cfg, std::ostream& log);
void cmd_eval(const RunConfig& cfg, const std::string& checkpoint, std::ostream& log);
void cmd_simulate(const RunConfig& cfg, std::ostream& log);
void cmd_expert_usage(const RunConfig& cfg, const std::string& checkpoint,
                      std::ostream& log);
void cmd_portfolio(const RunConfig& cfg, const std::string& checkpoint,
                   std::ostream& log);
void cmd_pairs(const RunConfig& cfg, const std::string& checkpoint, std::ostream& log);

/// Long-format `date,asset,close` writer (the ingest format).
void write_prices_csv(const std::string& path, const PriceTable& pt);

/// Phase labels sidecar: `return_day,phase,regime` rows.
void write_phase_labels(const std::string& path, const std::vector<int>& phase_of_return,
                        const std::vector<int>& regime_of_phase);
void read_phase_labels(const std::string& path, std::vector<int>* phase_of_return,
                       std::vector<int>* regime_of_phase);

}  // namespace admf
