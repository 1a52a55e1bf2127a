#include "admf/pair_trading.hpp"

#include <cmath>
#include <fstream>

#include "admf/common.hpp"
#include "admf/csv.hpp"

namespace admf {

PairBacktestReport pair_trade_backtest(const Eigen::VectorXd& price_alpha,
                                       const Eigen::VectorXd& price_beta,
                                       const std::vector<double>& predicted_corr,
                                       const PairTradeConfig& cfg) {
    if (price_alpha.size() != price_beta.size()) {
        throw DataError("pair legs have different lengths");
    }
    if (!(cfg.capital > 0.0)) throw DataError("capital must be positive");
    const long n_days = price_alpha.size();
    const long first_decision = cfg.spread_window;
    if (n_days <= first_decision) {
        throw DataError("need more than " + std::to_string(cfg.spread_window) +
                        " days of history before the first decision");
    }

    PairBacktestReport report;
    report.first_day = first_decision;

    // Position state.
    int direction = 0;  // 0 flat
    double entry_alpha = 0.0, entry_beta = 0.0;
    double leg = 0.0;           // currency per leg at entry
    double entry_capital = 0.0; // equity when the position opened
    long entry_day = 0;

    double capital = cfg.capital;  // realized (flat) value
    std::size_t next_period = 0;

    auto mark = [&](long day) {
        if (direction == 0) return capital;
        const double long_px = direction > 0 ? price_alpha(day) : price_beta(day);
        const double short_px = direction > 0 ? price_beta(day) : price_alpha(day);
        const double long_entry = direction > 0 ? entry_alpha : entry_beta;
        const double short_entry = direction > 0 ? entry_beta : entry_alpha;
        const double long_pnl = leg * (long_px / long_entry - 1.0);
        const double short_pnl = -leg * (short_px / short_entry - 1.0);
        return entry_capital + long_pnl + short_pnl;
    };

    for (long day = first_decision; day < n_days; ++day) {
        const bool is_decision = (day - first_decision) % cfg.period == 0;
        if (is_decision && next_period < predicted_corr.size()) {
            const double corr = predicted_corr[next_period];
            ++next_period;
            if (corr > cfg.theta_c) {
                if (direction == 0) {
                    // Trailing mean of the spread over the past year.
                    double sp = 0.0;
                    for (int i = 1; i <= cfg.spread_window; ++i) {
                        sp += price_alpha(day - i) - price_beta(day - i);
                    }
                    sp /= static_cast<double>(cfg.spread_window);
                    const double spread = price_alpha(day) - price_beta(day);
                    // Rich leg gets shorted against the spread mean.
                    direction = spread > sp ? -1 : +1;
                    entry_alpha = price_alpha(day);
                    entry_beta = price_beta(day);
                    entry_capital = capital;
                    leg = 0.5 * capital;
                    entry_day = day;
                }
            } else if (direction != 0) {
                const double equity_now = mark(day);
                report.trades.push_back(
                    {entry_day, day, direction, equity_now - entry_capital});
                capital = equity_now;
                direction = 0;
            }
        }
        report.equity.push_back(mark(day));
    }

    // Metrics over the daily curve; an open position stays marked to market.
    const double initial = cfg.capital;
    const double final_equity = report.equity.back();
    report.profit_rate = final_equity / initial - 1.0;

    double peak = report.equity.front();
    for (double e : report.equity) {
        peak = std::max(peak, e);
        if (peak > 0.0) {
            report.max_drawdown = std::max(report.max_drawdown, (peak - e) / peak);
        }
    }

    std::vector<double> daily;
    for (std::size_t i = 1; i < report.equity.size(); ++i) {
        if (report.equity[i - 1] != 0.0) {
            daily.push_back(report.equity[i] / report.equity[i - 1] - 1.0);
        }
    }
    double mean = 0.0, var = 0.0;
    for (double r : daily) mean += r;
    if (!daily.empty()) mean /= static_cast<double>(daily.size());
    for (double r : daily) var += (r - mean) * (r - mean);
    if (daily.size() > 1) var /= static_cast<double>(daily.size() - 1);
    const double sd = std::sqrt(var);
    if (sd > 0.0) {
        report.sharpe_ratio = mean / sd * std::sqrt(252.0);
    } else {
        report.sharpe_ratio = 0.0;
        report.sharpe_defined = false;
    }

    if (!report.trades.empty()) {
        long wins = 0;
        for (const auto& t : report.trades) {
            if (t.pnl > 0.0) ++wins;
        }
        report.win_loss_rate =
            static_cast<double>(wins) / static_cast<double>(report.trades.size());
    }
    return report;
}

void write_pair_report(const std::string& report_path, const std::string& trades_path,
                       const PairBacktestReport& report) {
    {
        std::ofstream out(report_path);
        if (!out) throw DataError("cannot open for writing: " + report_path);
        out << "profit_rate=" << csv::format(report.profit_rate) << '\n';
        out << "max_drawdown=" << csv::format(report.max_drawdown) << '\n';
        out << "sharpe_ratio=" << csv::format(report.sharpe_ratio)
            << (report.sharpe_defined ? "" : " (undefined: zero-variance equity)")
            << '\n';
        out << "win_loss_rate=" << csv::format(report.win_loss_rate) << '\n';
        out << "n_trades=" << report.trades.size() << '\n';
    }
    std::ofstream out(trades_path);
    if (!out) throw DataError("cannot open for writing: " + trades_path);
    out << "entry_date,exit_date,direction,pnl\n";
    for (const auto& t : report.trades) {
        out << t.entry_day << ',' << t.exit_day << ','
            << (t.direction > 0 ? "long_alpha_short_beta" : "long_beta_short_alpha")
            << ',' << csv::format(t.pnl) << '\n';
    }
}

}  // namespace admf
