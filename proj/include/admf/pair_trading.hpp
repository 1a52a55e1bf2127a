#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace admf {

struct PairTradeConfig {
    double theta_c = 0.7;        // correlation gate
    double capital = 1'000'000;  // initial capital (currency)
    int period = 21;             // decision cadence in trading days
    int spread_window = 252;     // trailing mean window for the spread
};

struct TradeRecord {
    long entry_day = 0;
    long exit_day = 0;
    int direction = 0;  // +1 long alpha / short beta, -1 the reverse
    double pnl = 0.0;
};

struct PairBacktestReport {
    double profit_rate = 0.0;
    double max_drawdown = 0.0;   // fraction of the running peak
    double sharpe_ratio = 0.0;   // annualized by sqrt(252); 0 when undefined
    bool sharpe_defined = true;
    double win_loss_rate = 0.0;  // winning round-trips / total round-trips
    std::vector<TradeRecord> trades;
    std::vector<double> equity;  // daily curve from the first decision day
    long first_day = 0;
};

/// Correlation-gated pair trading: on each decision day, if the predicted
/// next-period correlation exceeds theta_c and no position is open, short the
/// rich leg of the spread against its trailing mean (50/50 capital split);
/// positions are held until the correlation gate closes. Mark-to-market is
/// daily at the close; no transaction costs.
PairBacktestReport pair_trade_backtest(const Eigen::VectorXd& price_alpha,
                                       const Eigen::VectorXd& price_beta,
                                       const std::vector<double>& predicted_corr,
                                       const PairTradeConfig& cfg);

void write_pair_report(const std::string& report_path, const std::string& trades_path,
                       const PairBacktestReport& report);

}  // namespace admf
