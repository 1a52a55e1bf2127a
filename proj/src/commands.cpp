#include "admf/commands.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "admf/adm_archive.hpp"
#include "admf/baselines.hpp"
#include "admf/checkpoint.hpp"
#include "admf/csv.hpp"
#include "admf/expert_usage.hpp"
#include "admf/metrics.hpp"
#include "admf/pair_trading.hpp"
#include "admf/portfolio.hpp"
#include "admf/rearrange.hpp"
#include "admf/synth_market.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace admf {

void write_prices_csv(const std::string& path, const PriceTable& pt) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "date,asset,close\n";
    for (std::size_t i = 0; i < pt.dates.size(); ++i) {
        for (std::size_t j = 0; j < pt.assets.size(); ++j) {
            out << pt.dates[i] << ',' << pt.assets[j] << ','
                << csv::format(pt.prices(static_cast<Eigen::Index>(i),
                                         static_cast<Eigen::Index>(j)))
                << '\n';
        }
    }
}

void write_phase_labels(const std::string& path, const std::vector<int>& phase_of_return,
                        const std::vector<int>& regime_of_phase) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "return_day,phase,regime\n";
    for (std::size_t t = 0; t < phase_of_return.size(); ++t) {
        const int p = phase_of_return[t];
        out << t << ',' << p << ',' << regime_of_phase.at(p) << '\n';
    }
}

void read_phase_labels(const std::string& path, std::vector<int>* phase_of_return,
                       std::vector<int>* regime_of_phase) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open: " + path);
    phase_of_return->clear();
    regime_of_phase->clear();
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (csv::trim(line).empty()) continue;
        const auto f = csv::split(line);
        if (f.size() != 3) throw DataError(path + ": bad phase row");
        const int phase = std::stoi(f[1]);
        const int regime = std::stoi(f[2]);
        phase_of_return->push_back(phase);
        if (phase >= static_cast<int>(regime_of_phase->size())) {
            regime_of_phase->resize(phase + 1, 0);
        }
        (*regime_of_phase)[phase] = regime;
    }
}

namespace {

struct SourceData {
    PriceTable prices;
    bool has_phases = false;
    std::vector<int> phase_of_return;
    std::vector<int> regime_of_phase;
};

SourceData materialize_prices(const RunConfig& cfg, std::ostream& log) {
    SourceData src;
    if (!cfg.data.prices.empty() && cfg.scenario.id != 3) {
        std::vector<std::string> warnings;
        src.prices = ingest_prices(cfg.data.prices, cfg.data.calendar_policy, &warnings);
        for (const auto& w : warnings) log << "warning: " << w << '\n';
        return src;
    }
    Rng rng(cfg.scenario.seed);
    switch (cfg.scenario.id) {
        case 1: {
            const ScenarioSpec spec =
                scenario1_spec(cfg.scenario.n_assets, cfg.scenario.regimes,
                               cfg.scenario.phases_per_regime,
                               cfg.scenario.days_per_phase, rng);
            const ScenarioData data = build_scenario(spec, rng);
            src.prices = data.prices;
            src.has_phases = true;
            src.phase_of_return = data.phase_of_return;
            src.regime_of_phase = data.regime_of_phase;
            return src;
        }
        case 2: {
            const ScenarioSpec spec =
                scenario2_spec(cfg.scenario.n_assets, cfg.scenario.days_per_phase, rng);
            const ScenarioData data = build_scenario(spec, rng);
            src.prices = data.prices;
            src.has_phases = true;
            src.phase_of_return = data.phase_of_return;
            src.regime_of_phase = data.regime_of_phase;
            return src;
        }
        case 3: {
            if (cfg.data.prices.empty()) {
                throw ConfigError("scenario 3 needs data.prices");
            }
            std::vector<std::string> warnings;
            const PriceTable pt =
                ingest_prices(cfg.data.prices, cfg.data.calendar_policy, &warnings);
            for (const auto& w : warnings) log << "warning: " << w << '\n';
            const ScenarioData data = scenario3_partition(pt, 252);
            src.prices = data.prices;
            src.has_phases = true;
            src.phase_of_return = data.phase_of_return;
            src.regime_of_phase = data.regime_of_phase;
            return src;
        }
        default:
            throw ConfigError("no data source: set data.prices or scenario.id");
    }
}

fs::path out_root(const RunConfig& cfg) {
    if (cfg.out_dir.empty()) throw ConfigError("output directory not set");
    fs::create_directories(cfg.out_dir);
    return {cfg.out_dir};
}

std::string model_echo(const RunConfig& cfg, int k, int n) {
    json j;
    j["variant"] = cfg.model.variant;
    j["k"] = k;
    j["n"] = n;
    j["baseline_hidden"] = cfg.model.baseline_hidden;
    j["transform"] = {{"n_exp", cfg.model.transform.n_exp},
                      {"top_k", cfg.model.transform.top_k},
                      {"expert_hidden", cfg.model.transform.expert_hidden},
                      {"conv_channels_1", cfg.model.transform.conv_channels_1},
                      {"conv_channels_2", cfg.model.transform.conv_channels_2},
                      {"noise_enabled", cfg.model.transform.noise_enabled}};
    j["forecaster"] = {{"layers", cfg.model.forecaster.layers},
                       {"hidden_channels", cfg.model.forecaster.hidden_channels},
                       {"kernel_size", cfg.model.forecaster.kernel_size},
                       {"use_psd", cfg.model.forecaster.use_psd},
                       {"renormalize_correlation",
                        cfg.model.forecaster.renormalize_correlation}};
    j["seed"] = cfg.train.seed;
    return j.dump();
}

struct EchoedModel {
    ModelConfig model;
    int k = 0;
    int n = 0;
    std::uint64_t seed = 0;
};

EchoedModel parse_echo(const std::string& echo) {
    EchoedModel out;
    json j;
    try {
        j = json::parse(echo);
        out.model.variant = j.at("variant").get<std::string>();
        out.k = j.at("k").get<int>();
        out.n = j.at("n").get<int>();
        out.model.baseline_hidden = j.at("baseline_hidden").get<int>();
        const auto& t = j.at("transform");
        out.model.transform.n_exp = t.at("n_exp").get<int>();
        out.model.transform.top_k = t.at("top_k").get<int>();
        out.model.transform.expert_hidden = t.at("expert_hidden").get<int>();
        out.model.transform.conv_channels_1 = t.at("conv_channels_1").get<int>();
        out.model.transform.conv_channels_2 = t.at("conv_channels_2").get<int>();
        out.model.transform.noise_enabled = t.at("noise_enabled").get<bool>();
        const auto& f = j.at("forecaster");
        out.model.forecaster.layers = f.at("layers").get<int>();
        out.model.forecaster.hidden_channels = f.at("hidden_channels").get<int>();
        out.model.forecaster.kernel_size = f.at("kernel_size").get<int>();
        out.model.forecaster.use_psd = f.at("use_psd").get<bool>();
        out.model.forecaster.renormalize_correlation =
            f.at("renormalize_correlation").get<bool>();
        out.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw DataError(std::string("bad checkpoint config echo: ") + e.what());
    }
    return out;
}

struct LoadedRun {
    AdmSequence seq;  // rearranged when the variant asks for it
    DatasetSplit split;
    AssetOrdering ordering;
    bool rearranged = false;
};

LoadedRun load_built(const RunConfig& cfg, bool use_rearrangement) {
    const fs::path root = out_root(cfg);
    LoadedRun run;
    run.seq = read_adm_archive((root / "adm_archive").string());
    run.split = read_sample_index((root / "samples.json").string());
    if (use_rearrangement) {
        run.ordering = read_ordering((root / "ordering.txt").string());
        run.seq = apply_ordering(run.seq, run.ordering);
        run.rearranged = true;
    }
    return run;
}

std::unique_ptr<ForecastModel> model_from_checkpoint(const RunConfig& cfg,
                                                     const std::string& checkpoint,
                                                     EchoedModel* echoed_out) {
    const EchoedModel echoed = parse_echo(read_checkpoint_config(checkpoint));
    auto model = make_model(echoed.model, echoed.k, echoed.n, /*init_seed=*/echoed.seed);
    load_checkpoint(checkpoint, model->params());
    if (echoed_out) *echoed_out = echoed;
    (void)cfg;
    return model;
}

}  // namespace

void cmd_build(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const fs::path root = out_root(cfg);
    const SourceData src = materialize_prices(cfg, log);
    write_prices_csv((root / "prices.csv").string(), src.prices);
    if (src.has_phases) {
        write_phase_labels((root / "phases.csv").string(), src.phase_of_return,
                           src.regime_of_phase);
    }

    const ReturnTable rt = log_returns(src.prices);
    if (rt.returns.rows() < cfg.adm.n_lag) {
        log << "warning: only " << rt.returns.rows() << " returns for n_lag="
            << cfg.adm.n_lag << "; writing an empty sample index\n";
        DatasetSplit empty;
        empty.k = cfg.adm.k;
        empty.u = cfg.adm.u;
        empty.h = cfg.adm.h;
        write_sample_index((root / "samples.json").string(), empty);
        return;
    }
    const AdmSequence seq = build_adm_sequence(rt, cfg.adm.n_lag, cfg.adm.measure,
                                               cfg.adm.degenerate_policy);
    write_adm_archive((root / "adm_archive").string(), seq, /*predicted=*/false);
    log << "built " << seq.size() << " ADMs (" << to_string(seq.measure)
        << ", n_lag=" << cfg.adm.n_lag << ")\n";

    const SampleSet samples = window_samples(seq.size(), cfg.adm.k, cfg.adm.u, cfg.adm.h);
    if (samples.samples.empty()) {
        log << "warning: no samples fit the window geometry; writing an empty index\n";
        DatasetSplit empty;
        empty.k = cfg.adm.k;
        empty.u = cfg.adm.u;
        empty.h = cfg.adm.h;
        write_sample_index((root / "samples.json").string(), empty);
        return;
    }
    const DatasetSplit split = split_samples(samples, cfg.adm.split);
    write_sample_index((root / "samples.json").string(), split);
    log << "indexed " << samples.samples.size() << " samples (train "
        << split.train.size() << ", validation " << split.validation.size() << ", test "
        << split.test.size() << ")\n";

    // Ordering is fit on the training period only and frozen.
    const long train_rows = seq.timestamps[split.train.back().anchor] + 1;
    const AssetOrdering ordering = fit_dtw_ordering(rt, train_rows);
    write_ordering((root / "ordering.txt").string(), ordering);
    log << "wrote DTW ordering over " << ordering.order.size() << " assets\n";
}

void cmd_train(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const fs::path root = out_root(cfg);
    const VariantFlags flags = variant_flags(cfg.model.variant);
    LoadedRun run = load_built(cfg, flags.use_rearrangement);
    if (run.split.train.empty()) throw DataError("sample index is empty; run build");

    auto model = make_model(cfg.model, run.split.k, run.seq.n_assets(), cfg.train.seed);
    const TrainResult result = train_model(*model, run.seq, run.split, cfg.train);
    write_training_log((root / "training_log.csv").string(), result.log);
    save_checkpoint((root / "checkpoint.bin").string(),
                    model_echo(cfg, run.split.k, run.seq.n_assets()), model->params());
    log << "trained " << cfg.model.variant << " for " << result.log.size()
        << " epochs; best validation loss " << result.best_val << " at epoch "
        << result.best_epoch << '\n';
}

void cmd_eval(const RunConfig& cfg, const std::string& checkpoint, std::ostream& log) {
    cfg.validate();
    const fs::path root = out_root(cfg);

    std::vector<Eigen::MatrixXd> predictions, targets, previous;
    if (!cfg.eval.predictions_dir.empty()) {
        LoadedRun run = load_built(cfg, /*use_rearrangement=*/false);
        const AdmSequence pred = read_adm_archive(cfg.eval.predictions_dir);
        if (pred.assets != run.seq.assets) {
            throw DataError("prediction archive universe does not match the build");
        }
        for (const auto& s : run.split.test) {
            const long target_ts = run.seq.timestamps[s.target];
            const auto it = std::find(pred.timestamps.begin(), pred.timestamps.end(),
                                      target_ts);
            if (it == pred.timestamps.end()) {
                throw DataError("prediction archive misses timestamp " +
                                std::to_string(target_ts));
            }
            predictions.push_back(pred.mats[it - pred.timestamps.begin()]);
            targets.push_back(run.seq.mats[s.target]);
            previous.push_back(baseline_previous(run.seq, s));
        }
    } else {
        EchoedModel echoed;
        auto model = model_from_checkpoint(cfg, checkpoint, &echoed);
        const VariantFlags flags = variant_flags(echoed.model.variant);
        LoadedRun run = load_built(cfg, flags.use_rearrangement);
        if (echoed.n != run.seq.n_assets() || echoed.k != run.split.k) {
            throw DataError("checkpoint geometry does not match the built archive");
        }
        AdmSequence pred_seq;
        pred_seq.assets = run.seq.assets;
        pred_seq.measure = run.seq.measure;
        pred_seq.n_lag = run.seq.n_lag;
        for (const auto& s : run.split.test) {
            predictions.push_back(
                predict_adm(*model, sample_frames(run.seq, s), echoed.model.forecaster));
            targets.push_back(run.seq.mats[s.target]);
            previous.push_back(baseline_previous(run.seq, s));
            pred_seq.timestamps.push_back(run.seq.timestamps[s.target]);
            pred_seq.mats.push_back(predictions.back());
        }
        write_adm_archive((root / "predictions").string(), pred_seq, /*predicted=*/true);
    }

    const ForecastReport report = evaluate(predictions, targets, previous);
    write_report((root / "report.txt").string(), (root / "per_sample.csv").string(),
                 report);
    log << "test mse=" << report.mse << " gain=" << report.gain << " over "
        << report.per_sample_mse.size() << " samples\n";
}

void cmd_simulate(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    if (cfg.scenario.id == 0) throw ConfigError("cmd_simulate needs scenario.id");
    const fs::path root = out_root(cfg);
    const SourceData src = materialize_prices(cfg, log);
    write_prices_csv((root / "prices.csv").string(), src.prices);
    if (src.has_phases) {
        write_phase_labels((root / "phases.csv").string(), src.phase_of_return,
                           src.regime_of_phase);
        log << "simulated scenario " << cfg.scenario.id << ": "
            << src.regime_of_phase.size() << " phases, "
            << src.phase_of_return.size() << " return days\n";
    }
}

void cmd_expert_usage(const RunConfig& cfg, const std::string& checkpoint,
                      std::ostream& log) {
    cfg.validate();
    const fs::path root = out_root(cfg);
    EchoedModel echoed;
    auto model = model_from_checkpoint(cfg, checkpoint, &echoed);
    const VariantFlags flags = variant_flags(echoed.model.variant);
    if (!flags.use_transform) {
        throw ConfigError("expert usage requires a variant with the MoE transform");
    }
    LoadedRun run = load_built(cfg, flags.use_rearrangement);

    std::vector<int> phase_of_return, regime_of_phase;
    read_phase_labels((root / "phases.csv").string(), &phase_of_return,
                      &regime_of_phase);

    std::vector<AdmSample> all = run.split.train;
    all.insert(all.end(), run.split.validation.begin(), run.split.validation.end());
    all.insert(all.end(), run.split.test.begin(), run.split.test.end());
    const ExpertUsageProfile profile =
        expert_usage(*model, run.seq, all, phase_of_return,
                     static_cast<int>(regime_of_phase.size()));
    write_expert_usage((root / "expert_usage.csv").string(),
                       (root / "expert_usage_long.csv").string(), profile);
    log << "expert usage over " << profile.weights.rows() << " phases x "
        << profile.n_exp << " experts\n";
}

void cmd_portfolio(const RunConfig& cfg, const std::string& checkpoint,
                   std::ostream& log) {
    cfg.validate();
    const fs::path root = out_root(cfg);
    EchoedModel echoed;
    auto model = model_from_checkpoint(cfg, checkpoint, &echoed);
    const VariantFlags flags = variant_flags(echoed.model.variant);
    LoadedRun run = load_built(cfg, flags.use_rearrangement);
    if (run.seq.measure != Measure::correlation) {
        throw DataError("portfolio evaluation expects a correlation archive");
    }

    PriceTable prices = ingest_prices((root / "prices.csv").string(),
                                      CalendarPolicy::strict, nullptr);
    ReturnTable rt = log_returns(prices);
    if (run.rearranged) {
        // Keep the realized covariances in the model's asset order.
        std::vector<int> perm;
        for (const auto& a : run.ordering.order) {
            const auto it = std::find(rt.assets.begin(), rt.assets.end(), a);
            if (it == rt.assets.end()) throw DataError("ordering asset missing in prices");
            perm.push_back(static_cast<int>(it - rt.assets.begin()));
        }
        Eigen::MatrixXd reordered(rt.returns.rows(), rt.returns.cols());
        for (std::size_t j = 0; j < perm.size(); ++j) {
            reordered.col(static_cast<Eigen::Index>(j)) = rt.returns.col(perm[j]);
        }
        rt.returns = std::move(reordered);
        rt.assets = run.ordering.order;
    }

    const int h = run.split.h;
    std::vector<long> dates;
    std::vector<Eigen::MatrixXd> true_cov, true_corr, model_pred, prev_pred, ccm_pred;
    for (std::size_t i = 0; i < run.split.test.size();
         i += static_cast<std::size_t>(cfg.portfolio.rebalance_every)) {
        const AdmSample& s = run.split.test[i];
        const long target_ts = run.seq.timestamps[s.target];
        true_cov.push_back(compute_adm(rt, target_ts, h, Measure::covariance));
        true_corr.push_back(compute_adm(rt, target_ts, h, Measure::correlation,
                                        cfg.adm.degenerate_policy));
        model_pred.push_back(
            predict_adm(*model, sample_frames(run.seq, s), echoed.model.forecaster));
        prev_pred.push_back(baseline_previous(run.seq, s));
        ccm_pred.push_back(baseline_ccm(run.seq, s.anchor));
        dates.push_back(target_ts);
    }
    if (dates.empty()) throw DataError("no rebalance dates in the test split");

    std::vector<std::pair<std::string, std::vector<PortfolioResult>>> runs;
    runs.emplace_back(echoed.model.variant,
                      portfolio_backtest(model_pred, true_cov, dates));
    runs.emplace_back("Previous", portfolio_backtest(prev_pred, true_cov, dates));
    runs.emplace_back("CCM", portfolio_backtest(ccm_pred, true_cov, dates));
    runs.emplace_back("Optimal", portfolio_backtest(true_corr, true_cov, dates));
    write_portfolio_summary((root / "portfolio_summary.csv").string(), runs);
    for (const auto& [method, results] : runs) {
        log << method << ": mean realized risk " << mean_realized_risk(results) << '\n';
    }
}

void cmd_pairs(const RunConfig& cfg, const std::string& checkpoint, std::ostream& log) {
    cfg.validate();
    const fs::path root = out_root(cfg);
    EchoedModel echoed;
    auto model = model_from_checkpoint(cfg, checkpoint, &echoed);
    const VariantFlags flags = variant_flags(echoed.model.variant);
    LoadedRun run = load_built(cfg, flags.use_rearrangement);

    const PriceTable prices = ingest_prices((root / "prices.csv").string(),
                                            CalendarPolicy::strict, nullptr);
    auto col_of = [&](const std::string& asset) {
        const auto it = std::find(prices.assets.begin(), prices.assets.end(), asset);
        if (it == prices.assets.end()) throw DataError("unknown pair asset: " + asset);
        return static_cast<Eigen::Index>(it - prices.assets.begin());
    };
    const std::string alpha = cfg.pairs.asset_alpha.empty() ? prices.assets.at(0)
                                                            : cfg.pairs.asset_alpha;
    const std::string beta =
        cfg.pairs.asset_beta.empty() ? prices.assets.at(1) : cfg.pairs.asset_beta;
    auto row_of = [&](const std::string& asset) {
        const auto it = std::find(run.seq.assets.begin(), run.seq.assets.end(), asset);
        if (it == run.seq.assets.end()) throw DataError("pair asset not in archive");
        return static_cast<Eigen::Index>(it - run.seq.assets.begin());
    };
    const Eigen::Index ia = row_of(alpha), ib = row_of(beta);

    // Decision days follow the test anchors at the configured cadence.
    PairTradeConfig ptc;
    ptc.theta_c = cfg.pairs.theta_c;
    ptc.capital = cfg.pairs.capital;
    ptc.period = cfg.pairs.period;
    std::vector<double> predicted;
    long first_anchor_ts = -1;
    for (std::size_t i = 0; i < run.split.test.size();
         i += static_cast<std::size_t>(cfg.pairs.period)) {
        const AdmSample& s = run.split.test[i];
        if (first_anchor_ts < 0) first_anchor_ts = run.seq.timestamps[s.anchor];
        const Eigen::MatrixXd pred =
            predict_adm(*model, sample_frames(run.seq, s), echoed.model.forecaster);
        predicted.push_back(pred(ia, ib));
    }
    if (predicted.empty()) throw DataError("no pair-trading decisions in test split");

    // Price-row index of a return day t is t + 1.
    const long first_decision_row = first_anchor_ts + 1;
    const long start_row = first_decision_row - ptc.spread_window;
    if (start_row < 0) {
        throw DataError("insufficient price history before the first decision");
    }
    const long n_rows = static_cast<long>(prices.dates.size()) - start_row;
    const Eigen::VectorXd pa = prices.prices.col(col_of(alpha)).segment(start_row, n_rows);
    const Eigen::VectorXd pb = prices.prices.col(col_of(beta)).segment(start_row, n_rows);

    const PairBacktestReport report = pair_trade_backtest(pa, pb, predicted, ptc);
    write_pair_report((root / "pair_report.txt").string(),
                      (root / "trades.csv").string(), report);
    log << "pair " << alpha << '/' << beta << ": profit_rate=" << report.profit_rate
        << " max_drawdown=" << report.max_drawdown << " sharpe=" << report.sharpe_ratio
        << " win_loss=" << report.win_loss_rate << " trades=" << report.trades.size()
        << '\n';
}

}  // namespace admf
