#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "admf/nn.hpp"
#include "admf/rng.hpp"

namespace admf {

struct TransformConfig {
    int n_exp = 8;
    int top_k = 4;
    int expert_hidden = 0;  // 0 -> twice the feature length
    int conv_channels_1 = 8;
    int conv_channels_2 = 4;
    int conv_kernel = 3;
    int conv_stride = 2;
    bool noise_enabled = true;

    void validate() const;
};

struct GateDecision {
    Eigen::VectorXd weights;   // length n_exp; zero exactly outside `selected`
    std::vector<int> selected; // ascending indices, |selected| == top_k
};

/// Two valid 3D convolutions (stride 2, ReLU after each), flattened.
/// Per-axis kernels clamp to the input extent so short windows still map to a
/// nonempty feature vector.
class FeatureExtractor {
public:
    FeatureExtractor(nn::ParamStore& store, const std::string& prefix,
                     const TransformConfig& cfg, int k, int c, int rows, int cols,
                     Rng& init);

    int phi_length() const { return phi_len_; }

    /// window: [k, c, rows, cols] with c == 1.
    const nn::Tensor& forward(const nn::Tensor& window);
    void backward(const nn::Tensor& dphi);

    static int feature_length(const TransformConfig& cfg, int k, int c, int rows,
                              int cols);

private:
    TransformConfig cfg_;
    int k_, c_, rows_, cols_;
    int d1_ = 0, h1_ = 0, w1out_ = 0;  // conv1 output dims
    int d2_ = 0, h2_ = 0, w2out_ = 0;  // conv2 output dims
    int phi_len_ = 0;
    nn::ParamTensor* w1_ = nullptr;
    nn::ParamTensor* b1_ = nullptr;
    nn::ParamTensor* w2_ = nullptr;
    nn::ParamTensor* b2_ = nullptr;
    // forward cache
    const nn::Tensor* x_ = nullptr;
    nn::Tensor a1_, y1_, a2_, phi_;
    nn::Tensor da1_, dy1_, dx_;
};

/// Noisy top-k gating (Eq.-style): H_i = (W_g phi)_i + eps_i * softplus((W_noise phi)_i)
/// while training with noise enabled; keep the top_k entries, softmax over them.
/// Ties break toward the lower expert index.
class NoisyTopKGate {
public:
    NoisyTopKGate(nn::ParamStore& store, const std::string& prefix, int n_exp,
                  int top_k, int phi_len, bool noise_enabled);

    const GateDecision& forward(const double* phi, Rng* noise_rng, bool training);
    /// d_selected_weight: gradient w.r.t. the kept softmax weights, indexed as
    /// `decision.selected`. Accumulates into dphi.
    void backward(const Eigen::VectorXd& d_selected_weight, double* dphi_accum);

    const GateDecision& last_decision() const { return decision_; }

private:
    int n_exp_, top_k_, phi_len_;
    bool noise_enabled_;
    nn::ParamTensor* w_gate_;
    nn::ParamTensor* w_noise_;
    // forward cache
    const double* phi_ = nullptr;
    bool noise_active_ = false;
    Eigen::VectorXd noise_pre_, eps_;
    GateDecision decision_;
};

/// Sparse mixture: evaluates only the selected experts (two-layer perceptrons
/// phi -> hidden -> out) and sums them with the gate weights.
class MoeBlock {
public:
    MoeBlock(nn::ParamStore& store, const std::string& prefix,
             const TransformConfig& cfg, int phi_len, int out_len, Rng& init);

    const Eigen::VectorXd& forward(const double* phi, Rng* noise_rng, bool training);
    void backward(const Eigen::VectorXd& dy, double* dphi_accum);

    const GateDecision& last_gate() const { return gate_.last_decision(); }
    int out_length() const { return out_len_; }

private:
    struct Expert {
        nn::ParamTensor* w1;
        nn::ParamTensor* b1;
        nn::ParamTensor* w2;
        nn::ParamTensor* b2;
    };
    int phi_len_, hidden_, out_len_;
    NoisyTopKGate gate_;
    std::vector<Expert> experts_;
    // forward cache (selected experts only)
    const double* phi_ = nullptr;
    std::vector<Eigen::VectorXd> h_pre_, h_, y_e_;
    Eigen::VectorXd y_;
};

struct CoefficientTensors {
    Eigen::VectorXd alpha, beta, gamma;  // flattened [1, c, rows, cols]
};

/// Elementwise alpha*M^2 + beta*M + gamma applied per frame, coefficients
/// shared across the k frames.
void quadratic_transform(const nn::Tensor& window, const CoefficientTensors& coeffs,
                         nn::Tensor& out);

/// The dynamic transformation block: feature extractor feeding three MoE
/// blocks that emit the quadratic/linear/constant coefficients.
class TransformBlock {
public:
    TransformBlock(nn::ParamStore& store, const std::string& prefix,
                   const TransformConfig& cfg, int k, int c, int rows, int cols,
                   Rng& init);

    const nn::Tensor& forward(const nn::Tensor& window, Rng* noise_rng, bool training);
    void backward(const nn::Tensor& dout);

    const GateDecision& quad_gate() const { return moe_quad_.last_gate(); }
    int phi_length() const { return extractor_.phi_length(); }

private:
    int k_, c_, rows_, cols_;
    FeatureExtractor extractor_;
    MoeBlock moe_quad_, moe_linear_, moe_const_;
    // forward cache
    const nn::Tensor* window_ = nullptr;
    CoefficientTensors coeffs_;
    nn::Tensor out_;
    nn::Tensor dphi_;
};

}  // namespace admf
