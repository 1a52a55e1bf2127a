#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "admf/convlstm.hpp"
#include "admf/nn.hpp"

namespace admf {

struct ForecasterConfig {
    int layers = 2;
    int hidden_channels = 32;
    int kernel_size = 5;  // size_c; must be odd
    bool use_psd = true;
    bool renormalize_correlation = false;

    void validate() const;
};

/// Stacked ConvLSTM over the k input frames; the final top-layer hidden state
/// maps through a 1x1 convolution to the raw prediction E.
class ConvLstmForecaster {
public:
    ConvLstmForecaster(nn::ParamStore& store, const std::string& prefix,
                       const ForecasterConfig& cfg, int in_ch, int rows, int cols,
                       Rng& init);

    /// window: [k, c, rows, cols], c == in_ch. Returns E as a rows x cols matrix.
    Eigen::MatrixXd forward(const nn::Tensor& window);

    /// Returns the gradient w.r.t. the window.
    nn::Tensor backward(const Eigen::MatrixXd& d_raw);

private:
    int in_ch_, rows_, cols_;
    std::vector<std::unique_ptr<ConvLstmLayer>> layers_;
    nn::ParamTensor* head_w_;  // [hidden]
    nn::ParamTensor* head_b_;  // [1]
    int last_k_ = 0;
};

/// Duplicate the upper triangle onto the lower one (upper wins).
Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& e);

/// Zero out negative eigenvalues of a symmetric matrix (input asserted
/// symmetric to 1e-9). The diagonal is NOT rescaled afterwards.
Eigen::MatrixXd enforce_psd(const Eigen::MatrixXd& m);

/// Optional correlation-convention repair: D^{-1/2} M D^{-1/2}.
Eigen::MatrixXd renormalize_correlation(const Eigen::MatrixXd& m);

}  // namespace admf
