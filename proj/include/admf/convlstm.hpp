#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "admf/nn.hpp"
#include "admf/rng.hpp"

namespace admf {

struct ConvLstmState {
    nn::Tensor hidden;  // [hidden_ch, rows, cols]
    nn::Tensor cell;    // same shape
};

/// Peephole ConvLSTM layer. Gates are one same-padded convolution over the
/// channel-concatenated [input; hidden] pair, split i/f/c/o; the peephole
/// terms are Hadamard products with per-location weights, matching the
/// state-shaped peepholes of the original formulation.
class ConvLstmLayer {
public:
    ConvLstmLayer(nn::ParamStore& store, const std::string& prefix, int in_ch,
                  int hidden_ch, int kernel, int rows, int cols, Rng& init);

    /// Single cell step (used directly by tests); states updated in place.
    void step(const double* x, ConvLstmState& state);

    /// Process a whole sequence from zero state, caching activations for
    /// backward. Returns the per-step hidden tensors.
    const std::vector<nn::Tensor>& forward(const std::vector<const double*>& frames);

    /// dh_seq: one upstream gradient per step (zeros where unused).
    /// Returns gradients w.r.t. the input frames.
    std::vector<nn::Tensor> backward(const std::vector<nn::Tensor>& dh_seq);

    const std::vector<nn::Tensor>& hidden_seq() const { return h_seq_; }

    int in_channels() const { return in_ch_; }
    int hidden_channels() const { return hidden_; }
    int rows() const { return rows_; }
    int cols() const { return cols_; }

private:
    struct StepCache {
        nn::Tensor z;        // concat [x; h_prev]
        Eigen::MatrixXd col; // im2col of z
        nn::Tensor c_prev;
        nn::Tensor i, f, g, o, c, tanh_c;
    };

    void step_impl(const double* x, const nn::Tensor& h_prev, const nn::Tensor& c_prev,
                   nn::Tensor& h_out, StepCache* cache);

    int in_ch_, hidden_, kernel_, rows_, cols_;
    nn::ParamTensor* w_;     // [4*hidden, in+hidden, k, k]
    nn::ParamTensor* b_;     // [4*hidden]
    nn::ParamTensor* w_ci_;  // [hidden, rows, cols]
    nn::ParamTensor* w_cf_;
    nn::ParamTensor* w_co_;
    std::vector<StepCache> cache_;
    std::vector<nn::Tensor> h_seq_;
    Eigen::MatrixXd scratch_col_;
};

}  // namespace admf
