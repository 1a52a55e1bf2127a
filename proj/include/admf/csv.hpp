#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace admf::csv {

/// Split one line on `delim`, trimming surrounding whitespace per field.
std::vector<std::string> split(const std::string& line, char delim = ',');

std::string trim(const std::string& s);

/// Full-precision scalar formatting (round-trips doubles exactly).
std::string format(double v);

void write_matrix(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(const std::string& path);

}  // namespace admf::csv
