#include "admf/synth_market.hpp"

#include <cmath>

#include "admf/common.hpp"

namespace admf {

namespace {

Eigen::MatrixXd random_orthogonal(int n, Rng& rng) {
    Eigen::MatrixXd g(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) g(i, j) = rng.normal();
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    // Fix the sign convention so Q is uniquely determined by g.
    for (int j = 0; j < n; ++j) {
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    }
    return q;
}

/// One Givens rotation in the (i, j) plane that sets a_ii to exactly 1 while
/// preserving the eigenvalues (orthogonal similarity).
void rotate_to_unit(Eigen::MatrixXd& a, int i, int j) {
    const double aii = a(i, i), ajj = a(j, j), aij = a(i, j);
    const double disc = aij * aij - (aii - 1.0) * (ajj - 1.0);
    const double root = std::sqrt(std::max(disc, 0.0));
    const double t = std::abs(ajj - 1.0) < 1e-15
                         ? (aii - 1.0) / (2.0 * aij)  // degenerate: linear equation
                         : (aij + (aij >= 0.0 ? root : -root)) / (ajj - 1.0);
    const double c = 1.0 / std::sqrt(1.0 + t * t);
    const double s = t * c;
    // A <- G^T A G with G = [[c, s], [-s, c]] acting on coordinates (i, j).
    const Eigen::VectorXd col_i = a.col(i), col_j = a.col(j);
    a.col(i) = c * col_i - s * col_j;
    a.col(j) = s * col_i + c * col_j;
    const Eigen::RowVectorXd row_i = a.row(i), row_j = a.row(j);
    a.row(i) = c * row_i - s * row_j;
    a.row(j) = s * row_i + c * row_j;
    a(i, i) = 1.0;
    a = ((a + a.transpose()) / 2.0).eval();
}

}  // namespace

Eigen::MatrixXd correlation_from_eigenvalues(const Eigen::VectorXd& eigenvalues,
                                             Rng& rng) {
    const int n = static_cast<int>(eigenvalues.size());
    if (n < 1) throw ConfigError("need at least one eigenvalue");
    if (std::abs(eigenvalues.sum() - n) > 1e-8 * n) {
        throw NumericError("correlation eigenvalues must sum to n");
    }
    if (eigenvalues.minCoeff() < 0.0) {
        throw NumericError("correlation eigenvalues must be nonnegative");
    }
    const Eigen::MatrixXd q = random_orthogonal(n, rng);
    Eigen::MatrixXd a = q * eigenvalues.asDiagonal() * q.transpose();
    a = ((a + a.transpose()) / 2.0).eval();

    for (int iter = 0; iter < n; ++iter) {
        int lo = -1, hi = -1;
        for (int i = 0; i < n; ++i) {
            if (a(i, i) < 1.0 - 1e-13 && lo < 0) lo = i;
            if (a(i, i) > 1.0 + 1e-13 && hi < 0) hi = i;
        }
        if (lo < 0 || hi < 0) break;
        rotate_to_unit(a, lo, hi);
    }
    a.diagonal().setOnes();
    return a;
}

Eigen::MatrixXd random_correlation_matrix(int n, double eig_low, double eig_high,
                                          Rng& rng) {
    if (n < 2) throw ConfigError("random correlation matrix needs n >= 2");
    if (!(eig_low >= 0.0 && eig_high > eig_low)) {
        throw ConfigError("need 0 <= eig_low < eig_high");
    }
    Eigen::VectorXd eig(n);
    for (int i = 0; i < n; ++i) eig(i) = rng.uniform(eig_low, eig_high);
    eig *= static_cast<double>(n) / eig.sum();
    return correlation_from_eigenvalues(eig, rng);
}

MarketFactor sample_market_factor(int n, Rng& rng) {
    MarketFactor f;
    f.cm = random_correlation_matrix(n, 0.1, 2.0, rng);
    f.exp_return = rng.uniform(0.1, 0.5);
    f.vol = rng.uniform(0.01, 0.1);
    f.seed = rng.seed();
    return f;
}

namespace {

Eigen::MatrixXd correlation_sqrt(const Eigen::MatrixXd& cm) {
    Eigen::LLT<Eigen::MatrixXd> llt(cm);
    if (llt.info() == Eigen::Success) {
        return llt.matrixL();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cm);
    if (es.info() != Eigen::Success) throw NumericError("cm eigendecomposition failed");
    if (es.eigenvalues().minCoeff() < -1e-8) {
        throw NumericError("cm is not positive semidefinite");
    }
    return es.eigenvectors() *
           es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

/// `days` rows of correlated log returns for one factor.
Eigen::MatrixXd mgbm_log_returns(const MarketFactor& factor, int days, double dt,
                                 Rng& rng) {
    const int n = static_cast<int>(factor.cm.rows());
    const Eigen::MatrixXd l = correlation_sqrt(factor.cm);
    const double drift = (factor.exp_return - factor.vol * factor.vol / 2.0) * dt;
    const double scale = factor.vol * std::sqrt(dt);
    Eigen::MatrixXd lr(days, n);
    Eigen::VectorXd eps(n);
    for (int t = 0; t < days; ++t) {
        for (int i = 0; i < n; ++i) eps(i) = rng.normal();
        lr.row(t) = (drift + (scale * (l * eps).array())).transpose();
    }
    return lr;
}

PriceTable prices_from_log_returns(const Eigen::MatrixXd& lr,
                                   const Eigen::VectorXd& p0) {
    const int days = static_cast<int>(lr.rows());
    const int n = static_cast<int>(lr.cols());
    PriceTable pt;
    for (int i = 0; i < n; ++i) pt.assets.push_back("A" + std::to_string(i));
    pt.dates.reserve(days + 1);
    char buf[16];
    for (int t = 0; t <= days; ++t) {
        std::snprintf(buf, sizeof(buf), "D%06d", t);
        pt.dates.emplace_back(buf);
    }
    pt.prices.resize(days + 1, n);
    pt.prices.row(0) = p0.transpose();
    for (int t = 0; t < days; ++t) {
        pt.prices.row(t + 1) = pt.prices.row(t).array() * lr.row(t).array().exp();
    }
    return pt;
}

}  // namespace

PriceTable simulate_mgbm(const MarketFactor& factor, int days, const Eigen::VectorXd& p0,
                         double dt) {
    if (days < 1) throw ConfigError("simulate_mgbm needs days >= 1");
    if (p0.size() != factor.cm.rows()) throw ConfigError("p0 size mismatch");
    if (!(factor.vol >= 0.0)) throw ConfigError("vol must be nonnegative");
    Rng rng(factor.seed);
    const Eigen::MatrixXd lr = mgbm_log_returns(factor, days, dt, rng);
    return prices_from_log_returns(lr, p0);
}

ScenarioSpec scenario1_spec(int n_assets, int regimes, int phases_per_regime,
                            int days_per_phase, Rng& rng) {
    ScenarioSpec spec;
    for (int r = 0; r < regimes; ++r) {
        Rng frng = rng.derive(100 + static_cast<std::uint64_t>(r));
        spec.factors.push_back(sample_market_factor(n_assets, frng));
    }
    for (int r = 0; r < regimes; ++r) {
        for (int p = 0; p < phases_per_regime; ++p) {
            spec.phases.push_back({r, -1, 0.0, days_per_phase, r});
        }
    }
    return spec;
}

ScenarioSpec scenario2_spec(int n_assets, int days_per_phase, Rng& rng) {
    // The paper blends the second and third market regimes of Scenario 1.
    ScenarioSpec base = scenario1_spec(n_assets, 5, 1, days_per_phase, rng);
    ScenarioSpec spec;
    spec.shared_noise = true;
    spec.factors = {base.factors.at(1), base.factors.at(2)};
    for (int j = 1; j <= 10; ++j) {
        const double w = static_cast<double>(j - 1) / 9.0;
        spec.phases.push_back({0, 1, w, days_per_phase, j - 1});
    }
    return spec;
}

ScenarioData build_scenario(const ScenarioSpec& spec, Rng& rng) {
    if (spec.phases.empty() || spec.factors.empty()) {
        throw ConfigError("scenario needs factors and phases");
    }
    const int n = static_cast<int>(spec.factors.front().cm.rows());
    const double dt = 1.0 / 252.0;

    // Shared-noise mode draws one log-return path per factor up front.
    std::vector<Eigen::MatrixXd> shared_lr;
    if (spec.shared_noise) {
        int max_days = 0;
        for (const auto& ph : spec.phases) max_days = std::max(max_days, ph.days);
        for (std::size_t f = 0; f < spec.factors.size(); ++f) {
            Rng frng = rng.derive(500 + static_cast<std::uint64_t>(f));
            shared_lr.push_back(mgbm_log_returns(spec.factors[f], max_days, dt, frng));
        }
    }

    long total_days = 0;
    for (const auto& ph : spec.phases) total_days += ph.days;

    Eigen::MatrixXd lr(total_days, n);
    ScenarioData out;
    out.phase_of_return.reserve(total_days);
    long row = 0;
    for (std::size_t p = 0; p < spec.phases.size(); ++p) {
        const ScenarioPhase& ph = spec.phases[p];
        if (ph.factor_a < 0 || ph.factor_a >= static_cast<int>(spec.factors.size())) {
            throw ConfigError("phase references missing factor");
        }
        Eigen::MatrixXd phase_lr;
        if (ph.factor_b >= 0) {
            if (ph.factor_b >= static_cast<int>(spec.factors.size())) {
                throw ConfigError("phase references missing factor");
            }
            if (ph.w < 0.0 || ph.w > 1.0) throw ConfigError("mixing weight outside [0, 1]");
            if (!spec.shared_noise) {
                throw ConfigError("mixed phases require shared_noise");
            }
            const Eigen::MatrixXd& a = shared_lr[ph.factor_a];
            const Eigen::MatrixXd& b = shared_lr[ph.factor_b];
            phase_lr = (1.0 - ph.w) * a.topRows(ph.days) + ph.w * b.topRows(ph.days);
        } else {
            Rng prng = rng.derive(1000 + static_cast<std::uint64_t>(p));
            phase_lr = mgbm_log_returns(spec.factors[ph.factor_a], ph.days, dt, prng);
        }
        lr.middleRows(row, ph.days) = phase_lr;
        for (int d = 0; d < ph.days; ++d) out.phase_of_return.push_back(static_cast<int>(p));
        out.regime_of_phase.push_back(ph.regime);
        row += ph.days;
    }

    out.prices = prices_from_log_returns(lr, Eigen::VectorXd::Constant(n, 100.0));
    return out;
}

ScenarioData scenario3_partition(const PriceTable& prices, int days_per_phase) {
    if (days_per_phase < 1) throw ConfigError("days_per_phase must be >= 1");
    const long n_returns = static_cast<long>(prices.dates.size()) - 1;
    if (n_returns < 1) throw DataError("need at least two price rows");
    ScenarioData out;
    out.prices = prices;
    out.phase_of_return.reserve(n_returns);
    for (long t = 0; t < n_returns; ++t) {
        out.phase_of_return.push_back(static_cast<int>(t / days_per_phase));
    }
    const int n_phases = out.phase_of_return.back() + 1;
    for (int p = 0; p < n_phases; ++p) out.regime_of_phase.push_back(p);
    return out;
}

}  // namespace admf
