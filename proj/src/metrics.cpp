#include "admf/metrics.hpp"

#include <fstream>

#include "admf/common.hpp"
#include "admf/csv.hpp"

namespace admf {

ForecastReport evaluate(const std::vector<Eigen::MatrixXd>& predictions,
                        const std::vector<Eigen::MatrixXd>& targets,
                        const std::vector<Eigen::MatrixXd>& previous) {
    if (predictions.empty() || predictions.size() != targets.size() ||
        predictions.size() != previous.size()) {
        throw DataError("evaluate: prediction/target/previous length mismatch");
    }
    ForecastReport report;
    double err_sum = 0.0;      // over all samples' upper triangles
    double prev_err_sum = 0.0;
    for (std::size_t s = 0; s < predictions.size(); ++s) {
        const Eigen::MatrixXd& p = predictions[s];
        const Eigen::MatrixXd& t = targets[s];
        const Eigen::MatrixXd& q = previous[s];
        if (p.rows() != t.rows() || p.cols() != t.cols() || q.rows() != t.rows()) {
            throw DataError("evaluate: matrix shape mismatch at sample " +
                            std::to_string(s));
        }
        double se = 0.0, se_prev = 0.0;
        long count = 0;
        for (Eigen::Index i = 0; i < t.rows(); ++i) {
            for (Eigen::Index j = i; j < t.cols(); ++j) {
                const double dp = t(i, j) - p(i, j);
                const double dq = t(i, j) - q(i, j);
                se += dp * dp;
                se_prev += dq * dq;
                ++count;
            }
        }
        report.per_sample_mse.push_back(se / static_cast<double>(count));
        err_sum += se;
        prev_err_sum += se_prev;
    }
    report.mse = 0.0;
    for (double v : report.per_sample_mse) report.mse += v;
    report.mse /= static_cast<double>(report.per_sample_mse.size());
    if (prev_err_sum == 0.0) {
        throw NumericError("Gain undefined: every target equals its previous ADM");
    }
    report.gain = 1.0 - err_sum / prev_err_sum;
    return report;
}

void write_report(const std::string& report_path, const std::string& per_sample_path,
                  const ForecastReport& report) {
    {
        std::ofstream out(report_path);
        if (!out) throw DataError("cannot open for writing: " + report_path);
        out << "mse=" << csv::format(report.mse) << '\n';
        out << "gain=" << csv::format(report.gain) << '\n';
        out << "n_samples=" << report.per_sample_mse.size() << '\n';
    }
    std::ofstream out(per_sample_path);
    if (!out) throw DataError("cannot open for writing: " + per_sample_path);
    out << "index,mse\n";
    for (std::size_t i = 0; i < report.per_sample_mse.size(); ++i) {
        out << i << ',' << csv::format(report.per_sample_mse[i]) << '\n';
    }
}

}  // namespace admf
