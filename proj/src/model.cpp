#include "admf/model.hpp"

namespace admf {

using nn::Tensor;

VariantFlags variant_flags(const std::string& name) {
    if (name == "P-ADNN") return {true, false};
    if (name == "T-ADNN") return {false, true};
    if (name == "PT-ADNN") return {true, true};
    if (name == "Raw-ConvLSTM") return {false, false};
    if (name == "LSTM") return {false, false};
    throw ConfigError("unknown variant '" + name +
                      "' (expected P-ADNN, T-ADNN, PT-ADNN, Raw-ConvLSTM or LSTM)");
}

AdnnModel::AdnnModel(bool use_transform, const TransformConfig& tc,
                     const ForecasterConfig& fc, int k, int n, std::uint64_t init_seed)
    : use_transform_(use_transform), k_(k), n_(n) {
    Rng init(init_seed);
    if (use_transform_) {
        transform_ = std::make_unique<TransformBlock>(store_, "transform", tc, k, 1, n,
                                                      n, init);
    }
    forecaster_ =
        std::make_unique<ConvLstmForecaster>(store_, "forecaster", fc, 1, n, n, init);
    window_ = Tensor({k_, 1, n_, n_});
}

Eigen::MatrixXd AdnnModel::forward(const std::vector<const Eigen::MatrixXd*>& frames,
                                   Rng* noise_rng, bool training) {
    if (static_cast<int>(frames.size()) != k_) {
        throw NumericError("expected " + std::to_string(k_) + " input frames");
    }
    const long plane = static_cast<long>(n_) * n_;
    for (int t = 0; t < k_; ++t) {
        const Eigen::MatrixXd& m = *frames[t];
        if (m.rows() != n_ || m.cols() != n_) throw NumericError("frame shape mismatch");
        double* dst = window_.data() + t * plane;
        for (int i = 0; i < n_; ++i) {
            for (int j = 0; j < n_; ++j) dst[i * n_ + j] = m(i, j);
        }
    }
    const Tensor& in =
        use_transform_ ? transform_->forward(window_, noise_rng, training) : window_;
    return forecaster_->forward(in);
}

void AdnnModel::backward(const Eigen::MatrixXd& d_raw) {
    Tensor dwindow = forecaster_->backward(d_raw);
    if (use_transform_) transform_->backward(dwindow);
}

const GateDecision* AdnnModel::quad_gate() const {
    return use_transform_ ? &transform_->quad_gate() : nullptr;
}

FlatLstmModel::FlatLstmModel(int k, int n, int hidden, std::uint64_t init_seed)
    : k_(k), n_(n) {
    Rng init(init_seed);
    lstm_ = std::make_unique<FlatLstm>(store_, "flat_lstm", n * n, hidden, init);
}

Eigen::MatrixXd FlatLstmModel::forward(const std::vector<const Eigen::MatrixXd*>& frames,
                                       Rng*, bool) {
    if (static_cast<int>(frames.size()) != k_) {
        throw NumericError("expected " + std::to_string(k_) + " input frames");
    }
    flat_frames_.assign(k_, Eigen::VectorXd(n_ * n_));
    std::vector<const double*> ptrs(k_);
    for (int t = 0; t < k_; ++t) {
        const Eigen::MatrixXd& m = *frames[t];
        for (int i = 0; i < n_; ++i) {
            for (int j = 0; j < n_; ++j) flat_frames_[t](i * n_ + j) = m(i, j);
        }
        ptrs[t] = flat_frames_[t].data();
    }
    const Eigen::VectorXd& y = lstm_->forward(ptrs);
    Eigen::MatrixXd e(n_, n_);
    for (int i = 0; i < n_; ++i) {
        for (int j = 0; j < n_; ++j) e(i, j) = y(i * n_ + j);
    }
    return e;
}

void FlatLstmModel::backward(const Eigen::MatrixXd& d_raw) {
    Eigen::VectorXd dy(n_ * n_);
    for (int i = 0; i < n_; ++i) {
        for (int j = 0; j < n_; ++j) dy(i * n_ + j) = d_raw(i, j);
    }
    lstm_->backward(dy);
}

std::unique_ptr<ForecastModel> make_model(const ModelConfig& cfg, int k, int n,
                                          std::uint64_t init_seed) {
    const VariantFlags flags = variant_flags(cfg.variant);
    if (cfg.variant == "LSTM") {
        return std::make_unique<FlatLstmModel>(k, n, cfg.baseline_hidden, init_seed);
    }
    return std::make_unique<AdnnModel>(flags.use_transform, cfg.transform,
                                       cfg.forecaster, k, n, init_seed);
}

Eigen::MatrixXd predict_adm(ForecastModel& model,
                            const std::vector<const Eigen::MatrixXd*>& frames,
                            const ForecasterConfig& fc) {
    Eigen::MatrixXd m = symmetrize(model.forward(frames, nullptr, false));
    if (fc.use_psd) m = enforce_psd(m);
    if (fc.renormalize_correlation) m = renormalize_correlation(m);
    return m;
}

}  // namespace admf
