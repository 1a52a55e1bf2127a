#include "admf/portfolio.hpp"

#include <cmath>
#include <fstream>

#include "admf/common.hpp"
#include "admf/csv.hpp"
#include "admf/forecaster.hpp"

namespace admf {

Eigen::MatrixXd predicted_covariance(const Eigen::MatrixXd& corr,
                                     const Eigen::VectorXd& s) {
    if (corr.rows() != corr.cols() || corr.rows() != s.size()) {
        throw DataError("predicted_covariance: dimension mismatch");
    }
    if (s.minCoeff() <= 0.0) throw DataError("standard deviations must be positive");
    Eigen::MatrixXd sigma = s.asDiagonal() * corr * s.asDiagonal();
    return ((sigma + sigma.transpose()) / 2.0).eval();
}

Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd& v) {
    // Find lambda with sum clip(v - lambda, 0, 1) = 1 (monotone in lambda).
    double lo = v.minCoeff() - 1.0;
    double hi = v.maxCoeff();
    for (int it = 0; it < 200; ++it) {
        const double mid = (lo + hi) / 2.0;
        const double sum =
            (v.array() - mid).cwiseMax(0.0).cwiseMin(1.0).sum();
        if (sum > 1.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double lambda = (lo + hi) / 2.0;
    return (v.array() - lambda).cwiseMax(0.0).cwiseMin(1.0).matrix();
}

MinVarianceResult min_variance_weights(const Eigen::MatrixXd& sigma, double tol,
                                       int max_iter) {
    const int n = static_cast<int>(sigma.rows());
    if (sigma.cols() != n || n < 1) throw DataError("sigma must be square");
    const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-8) throw NumericError("sigma must be symmetric");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
    if (es.info() != Eigen::Success) throw NumericError("sigma eigendecomposition failed");
    if (es.eigenvalues().minCoeff() < -1e-8) {
        throw NumericError("sigma is not positive semidefinite; apply enforce_psd first");
    }
    const double lip = 2.0 * std::max(es.eigenvalues().maxCoeff(), 0.0);

    MinVarianceResult result;
    Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / n);
    if (lip <= 0.0) {  // zero matrix: every feasible point is optimal
        result.weights = w;
        return result;
    }
    const double step = 1.0 / lip;

    auto objective = [&](const Eigen::VectorXd& x) { return x.dot(sigma * x); };
    auto residual = [&](const Eigen::VectorXd& x) {
        const Eigen::VectorXd g = 2.0 * (sigma * x);
        return (x - project_capped_simplex(x - g)).cwiseAbs().maxCoeff();
    };

    // Nesterov-accelerated projected gradient with function-value restart.
    Eigen::VectorXd y = w, w_prev = w;
    double theta = 1.0;
    double f_prev = objective(w);
    int it = 0;
    for (; it < max_iter; ++it) {
        const Eigen::VectorXd grad = 2.0 * (sigma * y);
        Eigen::VectorXd w_next = project_capped_simplex(y - step * grad);
        const double f_next = objective(w_next);
        if (f_next > f_prev) {  // restart momentum
            theta = 1.0;
            y = w;
            continue;
        }
        const double theta_next =
            (1.0 + std::sqrt(1.0 + 4.0 * theta * theta)) / 2.0;
        y = w_next + ((theta - 1.0) / theta_next) * (w_next - w);
        w_prev = w;
        w = w_next;
        theta = theta_next;
        const double delta = std::abs(f_prev - f_next);
        f_prev = f_next;
        if (delta < tol && residual(w) <= 1e-8) break;
    }

    result.weights = w;
    result.objective = objective(w);
    result.kkt_residual = residual(w);
    result.iterations = it;
    if (result.kkt_residual > 1e-6) {
        throw NumericError("min_variance_weights did not converge: KKT residual " +
                           std::to_string(result.kkt_residual) + " after " +
                           std::to_string(it) + " iterations");
    }
    return result;
}

std::vector<PortfolioResult> portfolio_backtest(
    const std::vector<Eigen::MatrixXd>& predicted_corr,
    const std::vector<Eigen::MatrixXd>& true_cov, const std::vector<long>& dates) {
    if (predicted_corr.size() != true_cov.size() || predicted_corr.size() != dates.size()) {
        throw DataError("portfolio_backtest: date alignment failure");
    }
    std::vector<PortfolioResult> results;
    results.reserve(dates.size());
    for (std::size_t i = 0; i < dates.size(); ++i) {
        const Eigen::VectorXd s = true_cov[i].diagonal().cwiseMax(0.0).cwiseSqrt();
        if (s.minCoeff() <= 0.0) {
            throw DataError("true covariance has a zero-variance asset at date " +
                            std::to_string(dates[i]));
        }
        Eigen::MatrixXd sigma_hat = predicted_covariance(predicted_corr[i], s);
        sigma_hat = enforce_psd(sigma_hat);
        const MinVarianceResult mv = min_variance_weights(sigma_hat);
        PortfolioResult r;
        r.timestamp = dates[i];
        r.weights = mv.weights;
        r.predicted_risk = mv.weights.dot(sigma_hat * mv.weights);
        r.realized_risk = mv.weights.dot(true_cov[i] * mv.weights);
        results.push_back(std::move(r));
    }
    return results;
}

double mean_realized_risk(const std::vector<PortfolioResult>& results) {
    if (results.empty()) throw DataError("no portfolio results");
    double sum = 0.0;
    for (const auto& r : results) sum += r.realized_risk;
    return sum / static_cast<double>(results.size());
}

void write_portfolio_summary(
    const std::string& path,
    const std::vector<std::pair<std::string, std::vector<PortfolioResult>>>& runs) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "date,predicted_risk,realized_risk,method\n";
    for (const auto& [method, results] : runs) {
        for (const auto& r : results) {
            out << r.timestamp << ',' << csv::format(r.predicted_risk) << ','
                << csv::format(r.realized_risk) << ',' << method << '\n';
        }
    }
}

}  // namespace admf
