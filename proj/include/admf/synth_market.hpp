#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "admf/market_data.hpp"
#include "admf/rng.hpp"

namespace admf {

struct MarketFactor {
    Eigen::MatrixXd cm;       // correlation matrix, unit diagonal, PSD
    double exp_return = 0.2;  // per annum
    double vol = 0.05;        // per annum
    std::uint64_t seed = 0;
};

/// Random correlation matrix with a prescribed eigenvalue distribution:
/// eigenvalues sampled uniform(eig_low, eig_high), rescaled to sum to n
/// (a correlation matrix's trace), then rotated to unit diagonal by Givens
/// rotations (the Davies-Higham construction).
Eigen::MatrixXd random_correlation_matrix(int n, double eig_low, double eig_high,
                                          Rng& rng);

/// Same construction from explicit eigenvalues (must sum to n).
Eigen::MatrixXd correlation_from_eigenvalues(const Eigen::VectorXd& eigenvalues,
                                             Rng& rng);

/// Exact-scheme multidimensional GBM: `days` steps from p0, returning a price
/// table with days + 1 rows. Cross-asset correlation enters through a matrix
/// square root of cm (Cholesky, eigenvalue-based fallback on semidefinite
/// input). mu/sigma are per annum with step dt.
PriceTable simulate_mgbm(const MarketFactor& factor, int days,
                         const Eigen::VectorXd& p0, double dt = 1.0 / 252.0);

/// Sample a full market factor: random cm plus exp ~ U(0.1, 0.5) and
/// vol ~ U(0.01, 0.1), broadcast to all assets.
MarketFactor sample_market_factor(int n, Rng& rng);

struct ScenarioPhase {
    int factor_a = 0;
    int factor_b = -1;  // >= 0 blends two factors' log returns
    double w = 0.0;     // weight of factor_b
    int days = 300;
    int regime = 0;
};

struct ScenarioSpec {
    std::vector<MarketFactor> factors;
    std::vector<ScenarioPhase> phases;
    bool shared_noise = false;  // mixed phases reuse one noise path per factor
};

struct ScenarioData {
    PriceTable prices;                // (total return days + 1) rows
    std::vector<int> phase_of_return; // phase index per return day (0-based)
    std::vector<int> regime_of_phase; // phase -> regime
};

/// Scenario 1: `regimes` market factors, `phases_per_regime` phases each,
/// fresh noise per phase, prices chained across phases.
ScenarioSpec scenario1_spec(int n_assets, int regimes, int phases_per_regime,
                            int days_per_phase, Rng& rng);

/// Scenario 2: ten phases blending two factors' log returns with
/// w = (j-1)/9; the two base series keep one fixed noise path each.
ScenarioSpec scenario2_spec(int n_assets, int days_per_phase, Rng& rng);

ScenarioData build_scenario(const ScenarioSpec& spec, Rng& rng);

/// Scenario 3: partition real prices into fixed-length (yearly) phases.
ScenarioData scenario3_partition(const PriceTable& prices, int days_per_phase = 252);

}  // namespace admf
