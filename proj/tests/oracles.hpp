#pragma once

// Test-only reference implementations. These stay independent of the library
// code paths they are used to check.

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "admf/nn.hpp"
#include "admf/rng.hpp"

namespace oracle {

/// Plain two-pass sample covariance / correlation of a window
/// [rows x assets], 1/(rows - 1) normalization.
inline Eigen::MatrixXd two_pass_dependency(const Eigen::MatrixXd& window,
                                           bool correlation) {
    const int rows = static_cast<int>(window.rows());
    const int n = static_cast<int>(window.cols());
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    for (int a = 0; a < n; ++a) {
        for (int t = 0; t < rows; ++t) mean(a) += window(t, a);
        mean(a) /= rows;
    }
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            double s = 0.0;
            for (int t = 0; t < rows; ++t) {
                s += (window(t, a) - mean(a)) * (window(t, b) - mean(b));
            }
            cov(a, b) = s / (rows - 1);
        }
    }
    if (!correlation) return cov;
    Eigen::MatrixXd corr(n, n);
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            if (a == b) {
                corr(a, b) = 1.0;
            } else {
                corr(a, b) = cov(a, b) / std::sqrt(cov(a, a) * cov(b, b));
            }
        }
    }
    return corr;
}

struct ScalarLstmParams {
    double wxi = 0, whi = 0, wci = 0, bi = 0;
    double wxf = 0, whf = 0, wcf = 0, bf = 0;
    double wxc = 0, whc = 0, bc = 0;
    double wxo = 0, who = 0, wco = 0, bo = 0;
};

/// One peephole-LSTM step on scalars; returns (h, c).
inline std::pair<double, double> scalar_peephole_lstm_step(const ScalarLstmParams& p,
                                                           double x, double h,
                                                           double c) {
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    const double i = sig(p.wxi * x + p.whi * h + p.wci * c + p.bi);
    const double f = sig(p.wxf * x + p.whf * h + p.wcf * c + p.bf);
    const double g = std::tanh(p.wxc * x + p.whc * h + p.bc);
    const double c_new = f * c + i * g;
    const double o = sig(p.wxo * x + p.who * h + p.wco * c_new + p.bo);
    return {o * std::tanh(c_new), c_new};
}

/// Central-difference gradient check over every parameter whose name passes
/// `filter` (capped at `max_coords` sampled coordinates per tensor).
/// `loss` must recompute the full forward pass; analytic gradients must
/// already be in the store. Returns the max relative error.
inline double max_grad_rel_err(admf::nn::ParamStore& store,
                               const std::function<double()>& loss,
                               const std::function<bool(const std::string&)>& filter,
                               double eps, int max_coords, admf::Rng& rng) {
    double worst = 0.0;
    for (const auto& p : store.items()) {
        if (!filter(p->name)) continue;
        const int n = static_cast<int>(p->value.size());
        std::vector<int> coords;
        if (n <= max_coords) {
            for (int i = 0; i < n; ++i) coords.push_back(i);
        } else {
            for (int i = 0; i < max_coords; ++i) {
                coords.push_back(static_cast<int>(rng.below(n)));
            }
        }
        for (int i : coords) {
            const double v0 = p->value[i];
            p->value[i] = v0 + eps;
            const double lp = loss();
            p->value[i] = v0 - eps;
            const double lm = loss();
            p->value[i] = v0;
            const double fd = (lp - lm) / (2.0 * eps);
            const double an = p->grad[i];
            const double rel = std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("admf_" + tag + "_" + std::to_string(++counter) + "_" +
                 std::to_string(::getpid()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

}  // namespace oracle
