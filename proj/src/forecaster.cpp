#include "admf/forecaster.hpp"

#include <cmath>

namespace admf {

using nn::Tensor;

void ForecasterConfig::validate() const {
    if (layers < 1) throw ConfigError("forecaster needs at least one layer");
    if (hidden_channels < 1) throw ConfigError("hidden_channels must be >= 1");
    if (kernel_size < 1 || kernel_size % 2 == 0) {
        throw ConfigError("kernel_size must be odd and >= 1");
    }
}

ConvLstmForecaster::ConvLstmForecaster(nn::ParamStore& store, const std::string& prefix,
                                       const ForecasterConfig& cfg, int in_ch, int rows,
                                       int cols, Rng& init)
    : in_ch_(in_ch), rows_(rows), cols_(cols) {
    cfg.validate();
    for (int l = 0; l < cfg.layers; ++l) {
        const int lin = l == 0 ? in_ch : cfg.hidden_channels;
        layers_.push_back(std::make_unique<ConvLstmLayer>(
            store, prefix + ".layer" + std::to_string(l), lin, cfg.hidden_channels,
            cfg.kernel_size, rows, cols, init));
    }
    head_w_ = store.add(prefix + ".head.w", {cfg.hidden_channels});
    head_b_ = store.add(prefix + ".head.b", {1});
    fan_in_uniform(head_w_->value, cfg.hidden_channels, init);
}

Eigen::MatrixXd ConvLstmForecaster::forward(const Tensor& window) {
    const auto& shape = window.shape();
    if (shape.size() != 4 || shape[1] != in_ch_ || shape[2] != rows_ ||
        shape[3] != cols_) {
        throw NumericError("forecaster: window shape mismatch");
    }
    const int k = shape[0];
    last_k_ = k;
    const long frame = static_cast<long>(in_ch_) * rows_ * cols_;

    std::vector<const double*> frames(k);
    for (int t = 0; t < k; ++t) frames[t] = window.data() + t * frame;
    const std::vector<Tensor>* h_seq = &layers_[0]->forward(frames);
    for (std::size_t l = 1; l < layers_.size(); ++l) {
        std::vector<const double*> hs(k);
        for (int t = 0; t < k; ++t) hs[t] = (*h_seq)[t].data();
        h_seq = &layers_[l]->forward(hs);
    }

    const Tensor& top = h_seq->back();
    const int hidden = layers_.back()->hidden_channels();
    const int plane = rows_ * cols_;
    Eigen::MatrixXd e(rows_, cols_);
    for (int y = 0; y < rows_; ++y) {
        for (int x = 0; x < cols_; ++x) {
            double acc = head_b_->value[0];
            for (int c = 0; c < hidden; ++c) acc += head_w_->value[c] * top[c * plane + y * cols_ + x];
            e(y, x) = acc;
        }
    }
    return e;
}

Tensor ConvLstmForecaster::backward(const Eigen::MatrixXd& d_raw) {
    const int k = last_k_;
    const int hidden = layers_.back()->hidden_channels();
    const int plane = rows_ * cols_;

    // Head backward into the final top hidden state.
    std::vector<Tensor> dh(k, Tensor({hidden, rows_, cols_}));
    const Tensor& top = layers_.back()->hidden_seq().back();
    Tensor& dh_last = dh.back();
    for (int y = 0; y < rows_; ++y) {
        for (int x = 0; x < cols_; ++x) {
            const double g = d_raw(y, x);
            head_b_->grad[0] += g;
            for (int c = 0; c < hidden; ++c) {
                head_w_->grad[c] += g * top[c * plane + y * cols_ + x];
                dh_last[c * plane + y * cols_ + x] = head_w_->value[c] * g;
            }
        }
    }

    std::vector<Tensor> dx;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        dx = layers_[l]->backward(dh);
        if (l > 0) dh = std::move(dx);
    }

    Tensor dwindow({k, in_ch_, rows_, cols_});
    const long frame = static_cast<long>(in_ch_) * rows_ * cols_;
    for (int t = 0; t < k; ++t) {
        std::copy(dx[t].data(), dx[t].data() + frame, dwindow.data() + t * frame);
    }
    return dwindow;
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& e) {
    if (e.rows() != e.cols()) throw NumericError("symmetrize requires a square matrix");
    Eigen::MatrixXd m = e;
    for (Eigen::Index i = 1; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < i; ++j) m(i, j) = m(j, i);
    }
    return m;
}

Eigen::MatrixXd enforce_psd(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw NumericError("enforce_psd requires a square matrix");
    if (!m.allFinite()) throw NumericError("enforce_psd on non-finite input");
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-9) {
        throw NumericError("enforce_psd input asymmetry " + std::to_string(asym));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) {
        throw NumericError("eigendecomposition failed in enforce_psd");
    }
    const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    Eigen::MatrixXd out =
        es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    return (out + out.transpose()) / 2.0;
}

Eigen::MatrixXd renormalize_correlation(const Eigen::MatrixXd& m) {
    Eigen::VectorXd d = m.diagonal().cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd out = m;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double denom = d(i) * d(j);
            out(i, j) = denom > 0.0 ? m(i, j) / denom : 0.0;
        }
    }
    return out;
}

}  // namespace admf
