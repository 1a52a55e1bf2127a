#include "admf/run_config.hpp"

#include <fstream>

#include "admf/csv.hpp"

namespace admf {

std::map<std::string, std::string> parse_ini(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    std::map<std::string, std::string> kv;
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = csv::trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(path + ":" + std::to_string(line_no) +
                                  ": unterminated section header");
            }
            section = csv::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected key = value");
        }
        const std::string key = csv::trim(line.substr(0, eq));
        const std::string value = csv::trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
        }
        kv[section.empty() ? key : section + "." + key] = value;
    }
    return kv;
}

namespace {

class KeyReader {
public:
    explicit KeyReader(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

    std::string str(const std::string& key, const std::string& fallback) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? fallback : it->second;
    }

    int integer(const std::string& key, int fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        try {
            return std::stoi(it->second);
        } catch (const std::exception&) {
            throw ConfigError(key + ": not an integer: '" + it->second + "'");
        }
    }

    std::uint64_t uinteger(const std::string& key, std::uint64_t fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        try {
            return std::stoull(it->second);
        } catch (const std::exception&) {
            throw ConfigError(key + ": not an unsigned integer: '" + it->second + "'");
        }
    }

    double real(const std::string& key, double fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        try {
            return std::stod(it->second);
        } catch (const std::exception&) {
            throw ConfigError(key + ": not a number: '" + it->second + "'");
        }
    }

    bool boolean(const std::string& key, bool fallback) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw ConfigError(key + ": expected true/false: '" + it->second + "'");
    }

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
    const KeyReader r(parse_ini(path));
    RunConfig cfg;

    cfg.data.prices = r.str("data.prices", "");
    const std::string policy = r.str("data.calendar_policy", "strict");
    if (policy == "strict") {
        cfg.data.calendar_policy = CalendarPolicy::strict;
    } else if (policy == "intersect") {
        cfg.data.calendar_policy = CalendarPolicy::intersect;
    } else {
        throw ConfigError("data.calendar_policy must be strict or intersect");
    }

    cfg.adm.n_lag = r.integer("adm.n_lag", 42);
    cfg.adm.measure = measure_from_string(r.str("adm.measure", "correlation"));
    cfg.adm.k = r.integer("adm.k", 10);
    cfg.adm.u = r.integer("adm.u", 21);
    cfg.adm.h = r.integer("adm.h", 21);
    const std::string split = r.str("adm.split", "0.8,0.1,0.1");
    const auto parts = csv::split(split);
    if (parts.size() != 3) throw ConfigError("adm.split needs three fractions");
    try {
        cfg.adm.split.train = std::stod(parts[0]);
        cfg.adm.split.validation = std::stod(parts[1]);
        cfg.adm.split.test = std::stod(parts[2]);
    } catch (const std::exception&) {
        throw ConfigError("adm.split: bad fraction in '" + split + "'");
    }
    const std::string degenerate = r.str("adm.degenerate_policy", "error");
    if (degenerate == "error") {
        cfg.adm.degenerate_policy = DegeneratePolicy::error;
    } else if (degenerate == "zero") {
        cfg.adm.degenerate_policy = DegeneratePolicy::zero;
    } else {
        throw ConfigError("adm.degenerate_policy must be error or zero");
    }

    cfg.model.variant = r.str("model.variant", "PT-ADNN");
    cfg.model.baseline_hidden = r.integer("model.baseline_hidden", 64);

    cfg.model.transform.n_exp = r.integer("transform.n_exp", 8);
    cfg.model.transform.top_k = r.integer("transform.top_k", 4);
    cfg.model.transform.expert_hidden = r.integer("transform.expert_hidden", 0);
    cfg.model.transform.conv_channels_1 = r.integer("transform.conv_channels_1", 8);
    cfg.model.transform.conv_channels_2 = r.integer("transform.conv_channels_2", 4);
    cfg.model.transform.noise_enabled = r.boolean("transform.noise_enabled", true);

    cfg.model.forecaster.layers = r.integer("forecaster.layers", 2);
    cfg.model.forecaster.hidden_channels = r.integer("forecaster.hidden_channels", 32);
    cfg.model.forecaster.kernel_size = r.integer("forecaster.kernel_size", 5);
    cfg.model.forecaster.use_psd = r.boolean("forecaster.use_psd", true);
    cfg.model.forecaster.renormalize_correlation =
        r.boolean("forecaster.renormalize_correlation", false);

    cfg.train.batch_size = r.integer("train.batch_size", 128);
    cfg.train.init_lr = r.real("train.init_lr", 5e-4);
    cfg.train.warmup_epochs = r.integer("train.warmup_epochs", 5);
    cfg.train.plateau_patience = r.integer("train.plateau_patience", 10);
    cfg.train.lr_decay_factor = r.real("train.lr_decay_factor", 0.5);
    cfg.train.grad_clip = r.real("train.grad_clip", 10.0);
    cfg.train.max_epochs = r.integer("train.max_epochs", 200);
    cfg.train.seed = r.uinteger("train.seed", 7);

    cfg.scenario.id = r.integer("scenario.id", 0);
    cfg.scenario.n_assets = r.integer("scenario.n_assets", 8);
    cfg.scenario.regimes = r.integer("scenario.regimes", 5);
    cfg.scenario.phases_per_regime = r.integer("scenario.phases_per_regime", 3);
    cfg.scenario.days_per_phase = r.integer("scenario.days_per_phase", 300);
    cfg.scenario.seed = r.uinteger("scenario.seed", 11);

    cfg.portfolio.rebalance_every = r.integer("portfolio.rebalance_every", 21);

    cfg.pairs.theta_c = r.real("pairs.theta_c", 0.7);
    cfg.pairs.capital = r.real("pairs.capital", 1'000'000.0);
    cfg.pairs.period = r.integer("pairs.period", 21);
    cfg.pairs.asset_alpha = r.str("pairs.asset_alpha", "");
    cfg.pairs.asset_beta = r.str("pairs.asset_beta", "");

    cfg.eval.predictions_dir = r.str("eval.predictions_dir", "");
    cfg.out_dir = r.str("output.dir", "");
    return cfg;
}

void RunConfig::validate() const {
    if (adm.n_lag < 2) throw ConfigError("adm.n_lag must be >= 2");
    if (adm.k < 1 || adm.u < 1 || adm.h < 1) throw ConfigError("adm.k/u/h must be >= 1");
    if (!(adm.split.train > 0 && adm.split.validation > 0 && adm.split.test > 0)) {
        throw ConfigError("split fractions must be positive");
    }
    if (std::abs(adm.split.train + adm.split.validation + adm.split.test - 1.0) > 1e-9) {
        throw ConfigError("split fractions must sum to 1");
    }
    variant_flags(model.variant);
    model.transform.validate();
    model.forecaster.validate();
    train.validate();
    if (scenario.id < 0 || scenario.id > 3) throw ConfigError("scenario.id must be 0..3");
    if (scenario.id != 0) {
        if (scenario.n_assets < 2) throw ConfigError("scenario.n_assets must be >= 2");
        if (scenario.regimes < 1 || scenario.phases_per_regime < 1 ||
            scenario.days_per_phase < 1) {
            throw ConfigError("scenario phase geometry must be positive");
        }
    }
    if (data.prices.empty() && scenario.id == 0) {
        throw ConfigError("either data.prices or a scenario must be configured");
    }
    if (portfolio.rebalance_every < 1) {
        throw ConfigError("portfolio.rebalance_every must be >= 1");
    }
    if (!(pairs.theta_c >= -1.0)) throw ConfigError("pairs.theta_c must be a correlation");
    if (!(pairs.capital > 0.0)) throw ConfigError("pairs.capital must be positive");
    if (pairs.period < 1) throw ConfigError("pairs.period must be >= 1");
}

}  // namespace admf
