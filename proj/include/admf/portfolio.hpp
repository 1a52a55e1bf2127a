#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace admf {

/// Sigma_hat = diag(s) * corr * diag(s).
Eigen::MatrixXd predicted_covariance(const Eigen::MatrixXd& corr,
                                     const Eigen::VectorXd& s);

struct MinVarianceResult {
    Eigen::VectorXd weights;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
};

/// min w' Sigma w  s.t.  sum w = 1, 0 <= w <= 1, solved by accelerated
/// projected gradient on the capped simplex from equal weights.
/// Throws NumericError with the residual if the KKT residual stays above
/// 1e-6 after max_iter iterations.
MinVarianceResult min_variance_weights(const Eigen::MatrixXd& sigma, double tol = 1e-10,
                                       int max_iter = 200000);

/// Euclidean projection onto {w : sum w = 1, 0 <= w <= 1}.
Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd& v);

struct PortfolioResult {
    long timestamp = 0;
    Eigen::VectorXd weights;
    double predicted_risk = 0.0;  // w' Sigma_hat w
    double realized_risk = 0.0;   // w' Sigma w
};

/// One rebalance per date: build Sigma_hat from the predicted correlation and
/// the realized std vector (sqrt of the true covariance diagonal), solve for
/// weights, score against the true covariance.
std::vector<PortfolioResult> portfolio_backtest(
    const std::vector<Eigen::MatrixXd>& predicted_corr,
    const std::vector<Eigen::MatrixXd>& true_cov, const std::vector<long>& dates);

double mean_realized_risk(const std::vector<PortfolioResult>& results);

/// Appends `date,predicted_risk,realized_risk,method` rows.
void write_portfolio_summary(const std::string& path,
                             const std::vector<std::pair<std::string,
                                                         std::vector<PortfolioResult>>>& runs);

}  // namespace admf
