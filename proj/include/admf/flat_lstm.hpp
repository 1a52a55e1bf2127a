#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "admf/nn.hpp"
#include "admf/rng.hpp"

namespace admf {

/// Standard (non-convolutional, non-peephole) LSTM over flattened frames,
/// with a linear head back to n*n values.
class FlatLstm {
public:
    FlatLstm(nn::ParamStore& store, const std::string& prefix, int input_len,
             int hidden, Rng& init);

    /// frames: k pointers to input_len-long vectors. Returns the head output.
    const Eigen::VectorXd& forward(const std::vector<const double*>& frames);
    void backward(const Eigen::VectorXd& dy);

    int hidden_size() const { return hidden_; }

private:
    struct StepCache {
        Eigen::VectorXd z;  // [x; h_prev]
        Eigen::VectorXd c_prev, i, f, g, o, c, tanh_c;
    };

    int input_len_, hidden_;
    nn::ParamTensor* w_;       // [4*hidden, input_len + hidden]
    nn::ParamTensor* b_;       // [4*hidden]
    nn::ParamTensor* head_w_;  // [input_len, hidden]
    nn::ParamTensor* head_b_;  // [input_len]
    std::vector<StepCache> cache_;
    std::vector<Eigen::VectorXd> h_seq_;
    Eigen::VectorXd y_;
};

}  // namespace admf
