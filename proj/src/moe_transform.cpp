#include "admf/moe_transform.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace admf {

using nn::Tensor;

void TransformConfig::validate() const {
    if (n_exp < 1) throw ConfigError("n_exp must be >= 1");
    if (top_k < 1 || top_k > n_exp) throw ConfigError("need 1 <= top_k <= n_exp");
    if (expert_hidden < 0) throw ConfigError("expert_hidden must be >= 0");
    if (conv_channels_1 < 1 || conv_channels_2 < 1) {
        throw ConfigError("conv channels must be >= 1");
    }
    if (conv_kernel < 1 || conv_stride < 1) {
        throw ConfigError("conv kernel/stride must be >= 1");
    }
}

// ---------------------------------------------------------------------------
// FeatureExtractor
// ---------------------------------------------------------------------------

int FeatureExtractor::feature_length(const TransformConfig& cfg, int k, int /*c*/,
                                     int rows, int cols) {
    const auto s1 = nn::conv3d_shape(k, rows, cols, cfg.conv_kernel, cfg.conv_stride);
    const auto s2 =
        nn::conv3d_shape(s1.od, s1.oh, s1.ow, cfg.conv_kernel, cfg.conv_stride);
    return cfg.conv_channels_2 * s2.od * s2.oh * s2.ow;
}

FeatureExtractor::FeatureExtractor(nn::ParamStore& store, const std::string& prefix,
                                   const TransformConfig& cfg, int k, int c, int rows,
                                   int cols, Rng& init)
    : cfg_(cfg), k_(k), c_(c), rows_(rows), cols_(cols) {
    if (c != 1) throw ConfigError("transform block expects a single channel");
    const auto s1 = nn::conv3d_shape(k, rows, cols, cfg.conv_kernel, cfg.conv_stride);
    d1_ = s1.od;
    h1_ = s1.oh;
    w1out_ = s1.ow;
    const auto s2 = nn::conv3d_shape(s1.od, s1.oh, s1.ow, cfg.conv_kernel, cfg.conv_stride);
    d2_ = s2.od;
    h2_ = s2.oh;
    w2out_ = s2.ow;

    const int c1 = cfg.conv_channels_1, c2 = cfg.conv_channels_2;
    w1_ = store.add(prefix + ".conv1.weight", {c1, c_, s1.kd, s1.kh, s1.kw});
    b1_ = store.add(prefix + ".conv1.bias", {c1});
    w2_ = store.add(prefix + ".conv2.weight", {c2, c1, s2.kd, s2.kh, s2.kw});
    b2_ = store.add(prefix + ".conv2.bias", {c2});
    fan_in_uniform(w1_->value, c_ * s1.kd * s1.kh * s1.kw, init);
    fan_in_uniform(w2_->value, c1 * s2.kd * s2.kh * s2.kw, init);

    phi_len_ = c2 * s2.od * s2.oh * s2.ow;
    a1_ = Tensor({c1, s1.od, s1.oh, s1.ow});
    y1_ = Tensor({c1, s1.od, s1.oh, s1.ow});
    a2_ = Tensor({c2, s2.od, s2.oh, s2.ow});
    phi_ = Tensor({phi_len_});
    da1_ = Tensor({c1, s1.od, s1.oh, s1.ow});
    dy1_ = Tensor({c1, s1.od, s1.oh, s1.ow});
    dx_ = Tensor({c_, k_, rows_, cols_});
}

const Tensor& FeatureExtractor::forward(const Tensor& window) {
    if (window.size() != static_cast<std::size_t>(k_) * c_ * rows_ * cols_) {
        throw NumericError("feature extractor: window shape mismatch");
    }
    x_ = &window;
    // c == 1, so the [k,c,rows,cols] window doubles as [c=1, d=k, rows, cols].
    nn::conv3d_forward(window, c_, k_, rows_, cols_, w1_->value, b1_->value,
                       cfg_.conv_channels_1, cfg_.conv_kernel, cfg_.conv_stride, a1_);
    y1_.flat() = a1_.flat().max(0.0);
    nn::conv3d_forward(y1_, cfg_.conv_channels_1, d1_, h1_, w1out_, w2_->value,
                       b2_->value, cfg_.conv_channels_2, cfg_.conv_kernel,
                       cfg_.conv_stride, a2_);
    phi_.flat() = a2_.flat().max(0.0);
    return phi_;
}

void FeatureExtractor::backward(const Tensor& dphi) {
    Tensor da2(a2_.shape());
    da2.flat() = dphi.flat() * (a2_.flat() > 0.0).cast<double>();
    nn::conv3d_backward(y1_, cfg_.conv_channels_1, d1_, h1_, w1out_, w2_->value,
                        cfg_.conv_channels_2, cfg_.conv_kernel, cfg_.conv_stride, da2,
                        w2_->grad, b2_->grad, dy1_);
    da1_.flat() = dy1_.flat() * (a1_.flat() > 0.0).cast<double>();
    nn::conv3d_backward(*x_, c_, k_, rows_, cols_, w1_->value, cfg_.conv_channels_1,
                        cfg_.conv_kernel, cfg_.conv_stride, da1_, w1_->grad, b1_->grad,
                        dx_);
}

// ---------------------------------------------------------------------------
// NoisyTopKGate
// ---------------------------------------------------------------------------

NoisyTopKGate::NoisyTopKGate(nn::ParamStore& store, const std::string& prefix,
                             int n_exp, int top_k, int phi_len, bool noise_enabled)
    : n_exp_(n_exp), top_k_(top_k), phi_len_(phi_len), noise_enabled_(noise_enabled) {
    // Zero-init keeps gating uniform at step 0; noise provides exploration.
    w_gate_ = store.add(prefix + ".w_gate", {n_exp, phi_len});
    w_noise_ = store.add(prefix + ".w_noise", {n_exp, phi_len});
}

const GateDecision& NoisyTopKGate::forward(const double* phi, Rng* noise_rng,
                                           bool training) {
    phi_ = phi;
    Eigen::Map<const Eigen::VectorXd> phiv(phi, phi_len_);
    using ConstRowMap =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    ConstRowMap wg(w_gate_->value.data(), n_exp_, phi_len_);
    Eigen::VectorXd logits = wg * phiv;

    noise_active_ = noise_enabled_ && training && noise_rng != nullptr;
    if (noise_active_) {
        ConstRowMap wn(w_noise_->value.data(), n_exp_, phi_len_);
        noise_pre_ = wn * phiv;
        eps_.resize(n_exp_);
        for (int i = 0; i < n_exp_; ++i) eps_(i) = noise_rng->normal();
        for (int i = 0; i < n_exp_; ++i) {
            logits(i) += eps_(i) * nn::softplus(noise_pre_(i));
        }
    }

    // Top-k by value, tie toward the lower index.
    std::vector<int> idx(n_exp_);
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + top_k_, idx.end(),
                      [&](int a, int b) {
                          if (logits(a) != logits(b)) return logits(a) > logits(b);
                          return a < b;
                      });
    decision_.selected.assign(idx.begin(), idx.begin() + top_k_);
    std::sort(decision_.selected.begin(), decision_.selected.end());

    double mx = -std::numeric_limits<double>::infinity();
    for (int i : decision_.selected) mx = std::max(mx, logits(i));
    double denom = 0.0;
    decision_.weights = Eigen::VectorXd::Zero(n_exp_);
    for (int i : decision_.selected) {
        decision_.weights(i) = std::exp(logits(i) - mx);
        denom += decision_.weights(i);
    }
    for (int i : decision_.selected) decision_.weights(i) /= denom;
    return decision_;
}

void NoisyTopKGate::backward(const Eigen::VectorXd& d_selected_weight,
                             double* dphi_accum) {
    // Softmax Jacobian restricted to the kept entries.
    const int m = static_cast<int>(decision_.selected.size());
    double dot = 0.0;
    for (int s = 0; s < m; ++s) {
        dot += decision_.weights(decision_.selected[s]) * d_selected_weight(s);
    }
    Eigen::Map<const Eigen::VectorXd> phiv(phi_, phi_len_);
    Eigen::Map<Eigen::VectorXd> dphi(dphi_accum, phi_len_);
    using RowMap =
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    using ConstRowMap =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    ConstRowMap wg(w_gate_->value.data(), n_exp_, phi_len_);
    RowMap dwg(w_gate_->grad.data(), n_exp_, phi_len_);
    ConstRowMap wn(w_noise_->value.data(), n_exp_, phi_len_);
    RowMap dwn(w_noise_->grad.data(), n_exp_, phi_len_);

    for (int s = 0; s < m; ++s) {
        const int i = decision_.selected[s];
        const double g = decision_.weights(i);
        const double dlogit = g * (d_selected_weight(s) - dot);
        dwg.row(i) += dlogit * phiv.transpose();
        dphi.noalias() += dlogit * wg.row(i).transpose();
        if (noise_active_) {
            const double dnp = dlogit * eps_(i) * nn::sigmoid(noise_pre_(i));
            dwn.row(i) += dnp * phiv.transpose();
            dphi.noalias() += dnp * wn.row(i).transpose();
        }
    }
}

// ---------------------------------------------------------------------------
// MoeBlock
// ---------------------------------------------------------------------------

MoeBlock::MoeBlock(nn::ParamStore& store, const std::string& prefix,
                   const TransformConfig& cfg, int phi_len, int out_len, Rng& init)
    : phi_len_(phi_len),
      hidden_(cfg.expert_hidden > 0 ? cfg.expert_hidden : 2 * phi_len),
      out_len_(out_len),
      gate_(store, prefix + ".gate", cfg.n_exp, cfg.top_k, phi_len, cfg.noise_enabled) {
    for (int e = 0; e < cfg.n_exp; ++e) {
        const std::string ep = prefix + ".expert" + std::to_string(e);
        Expert ex;
        ex.w1 = store.add(ep + ".w1", {hidden_, phi_len_});
        ex.b1 = store.add(ep + ".b1", {hidden_});
        ex.w2 = store.add(ep + ".w2", {out_len_, hidden_});
        ex.b2 = store.add(ep + ".b2", {out_len_});
        fan_in_uniform(ex.w1->value, phi_len_, init);
        fan_in_uniform(ex.w2->value, hidden_, init);
        experts_.push_back(ex);
    }
}

const Eigen::VectorXd& MoeBlock::forward(const double* phi, Rng* noise_rng,
                                         bool training) {
    phi_ = phi;
    const GateDecision& d = gate_.forward(phi, noise_rng, training);
    const int m = static_cast<int>(d.selected.size());
    h_pre_.assign(m, Eigen::VectorXd(hidden_));
    h_.assign(m, Eigen::VectorXd(hidden_));
    y_e_.assign(m, Eigen::VectorXd(out_len_));
    y_ = Eigen::VectorXd::Zero(out_len_);
    for (int s = 0; s < m; ++s) {
        const Expert& ex = experts_[d.selected[s]];
        nn::dense_forward(ex.w1->value, ex.b1->value, phi, h_pre_[s].data());
        h_[s] = h_pre_[s].cwiseMax(0.0);
        nn::dense_forward(ex.w2->value, ex.b2->value, h_[s].data(), y_e_[s].data());
        y_ += d.weights(d.selected[s]) * y_e_[s];
    }
    return y_;
}

void MoeBlock::backward(const Eigen::VectorXd& dy, double* dphi_accum) {
    const GateDecision& d = gate_.last_decision();
    const int m = static_cast<int>(d.selected.size());
    Eigen::VectorXd d_weight(m);
    for (int s = 0; s < m; ++s) {
        const int i = d.selected[s];
        const Expert& ex = experts_[i];
        d_weight(s) = dy.dot(y_e_[s]);
        Eigen::VectorXd dy_e = d.weights(i) * dy;
        Eigen::VectorXd dh = Eigen::VectorXd::Zero(hidden_);
        nn::dense_backward(ex.w2->value, h_[s].data(), dy_e.data(), ex.w2->grad,
                           ex.b2->grad, dh.data());
        for (int j = 0; j < hidden_; ++j) {
            if (h_pre_[s](j) <= 0.0) dh(j) = 0.0;
        }
        nn::dense_backward(ex.w1->value, phi_, dh.data(), ex.w1->grad, ex.b1->grad,
                           dphi_accum);
    }
    gate_.backward(d_weight, dphi_accum);
}

// ---------------------------------------------------------------------------
// Quadratic transform
// ---------------------------------------------------------------------------

void quadratic_transform(const Tensor& window, const CoefficientTensors& coeffs,
                         Tensor& out) {
    const auto& shape = window.shape();
    if (shape.size() != 4) throw NumericError("window must be [k, c, rows, cols]");
    const int k = shape[0];
    const long frame = static_cast<long>(shape[1]) * shape[2] * shape[3];
    if (coeffs.alpha.size() != frame || coeffs.beta.size() != frame ||
        coeffs.gamma.size() != frame) {
        throw NumericError("coefficient tensors do not broadcast over the window");
    }
    if (out.size() != window.size()) out = Tensor(window.shape());
    for (int d = 0; d < k; ++d) {
        Eigen::Map<const Eigen::ArrayXd> m(window.data() + d * frame, frame);
        Eigen::Map<Eigen::ArrayXd> o(out.data() + d * frame, frame);
        o = coeffs.alpha.array() * m * m + coeffs.beta.array() * m + coeffs.gamma.array();
    }
}

// ---------------------------------------------------------------------------
// TransformBlock
// ---------------------------------------------------------------------------

TransformBlock::TransformBlock(nn::ParamStore& store, const std::string& prefix,
                               const TransformConfig& cfg, int k, int c, int rows,
                               int cols, Rng& init)
    : k_(k),
      c_(c),
      rows_(rows),
      cols_(cols),
      extractor_(store, prefix + ".feat", cfg, k, c, rows, cols, init),
      moe_quad_(store, prefix + ".moe_quad", cfg, extractor_.phi_length(),
                c * rows * cols, init),
      moe_linear_(store, prefix + ".moe_linear", cfg, extractor_.phi_length(),
                  c * rows * cols, init),
      moe_const_(store, prefix + ".moe_const", cfg, extractor_.phi_length(),
                 c * rows * cols, init) {
    cfg.validate();
}

const Tensor& TransformBlock::forward(const Tensor& window, Rng* noise_rng,
                                      bool training) {
    window_ = &window;
    const Tensor& phi = extractor_.forward(window);
    coeffs_.alpha = moe_quad_.forward(phi.data(), noise_rng, training);
    coeffs_.beta = moe_linear_.forward(phi.data(), noise_rng, training);
    coeffs_.gamma = moe_const_.forward(phi.data(), noise_rng, training);
    quadratic_transform(window, coeffs_, out_);
    return out_;
}

void TransformBlock::backward(const Tensor& dout) {
    const long frame = static_cast<long>(c_) * rows_ * cols_;
    Eigen::VectorXd dalpha = Eigen::VectorXd::Zero(frame);
    Eigen::VectorXd dbeta = Eigen::VectorXd::Zero(frame);
    Eigen::VectorXd dgamma = Eigen::VectorXd::Zero(frame);
    for (int d = 0; d < k_; ++d) {
        Eigen::Map<const Eigen::ArrayXd> m(window_->data() + d * frame, frame);
        Eigen::Map<const Eigen::ArrayXd> g(dout.data() + d * frame, frame);
        dalpha.array() += g * m * m;
        dbeta.array() += g * m;
        dgamma.array() += g;
    }
    if (dphi_.size() != static_cast<std::size_t>(extractor_.phi_length())) {
        dphi_ = Tensor({extractor_.phi_length()});
    }
    dphi_.set_zero();
    moe_quad_.backward(dalpha, dphi_.data());
    moe_linear_.backward(dbeta, dphi_.data());
    moe_const_.backward(dgamma, dphi_.data());
    extractor_.backward(dphi_);
}

}  // namespace admf
