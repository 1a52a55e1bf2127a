#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace admf {

struct ForecastReport {
    double mse = 0.0;   // mean over samples of mean squared upper-triangle error
    double gain = 0.0;  // 1 - sum squared error / sum squared error of Previous
    std::vector<double> per_sample_mse;
};

/// Scores predictions against targets with the carry-forward matrices as the
/// Gain reference. All three lists are aligned by sample.
ForecastReport evaluate(const std::vector<Eigen::MatrixXd>& predictions,
                        const std::vector<Eigen::MatrixXd>& targets,
                        const std::vector<Eigen::MatrixXd>& previous);

void write_report(const std::string& report_path, const std::string& per_sample_path,
                  const ForecastReport& report);

}  // namespace admf
