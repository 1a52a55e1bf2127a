#include "admf/flat_lstm.hpp"

#include <cmath>

namespace admf {

FlatLstm::FlatLstm(nn::ParamStore& store, const std::string& prefix, int input_len,
                   int hidden, Rng& init)
    : input_len_(input_len), hidden_(hidden) {
    w_ = store.add(prefix + ".w", {4 * hidden_, input_len_ + hidden_});
    b_ = store.add(prefix + ".b", {4 * hidden_});
    head_w_ = store.add(prefix + ".head.w", {input_len_, hidden_});
    head_b_ = store.add(prefix + ".head.b", {input_len_});
    fan_in_uniform(w_->value, input_len_ + hidden_, init);
    fan_in_uniform(head_w_->value, hidden_, init);
    for (int c = hidden_; c < 2 * hidden_; ++c) b_->value[c] = 1.0;
}

const Eigen::VectorXd& FlatLstm::forward(const std::vector<const double*>& frames) {
    const std::size_t k = frames.size();
    cache_.assign(k, StepCache{});
    h_seq_.assign(k, Eigen::VectorXd(hidden_));
    Eigen::VectorXd h = Eigen::VectorXd::Zero(hidden_);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(hidden_);
    Eigen::VectorXd pre(4 * hidden_);
    for (std::size_t t = 0; t < k; ++t) {
        StepCache& s = cache_[t];
        s.z.resize(input_len_ + hidden_);
        s.z.head(input_len_) = Eigen::Map<const Eigen::VectorXd>(frames[t], input_len_);
        s.z.tail(hidden_) = h;
        s.c_prev = c;
        nn::dense_forward(w_->value, b_->value, s.z.data(), pre.data());
        s.i = pre.segment(0, hidden_).unaryExpr([](double v) { return nn::sigmoid(v); });
        s.f = pre.segment(hidden_, hidden_).unaryExpr([](double v) { return nn::sigmoid(v); });
        s.g = pre.segment(2 * hidden_, hidden_).array().tanh();
        s.o = pre.segment(3 * hidden_, hidden_).unaryExpr([](double v) { return nn::sigmoid(v); });
        c = s.f.cwiseProduct(c) + s.i.cwiseProduct(s.g);
        s.c = c;
        s.tanh_c = c.array().tanh();
        h = s.o.cwiseProduct(s.tanh_c);
        h_seq_[t] = h;
    }
    y_.resize(input_len_);
    nn::dense_forward(head_w_->value, head_b_->value, h.data(), y_.data());
    return y_;
}

void FlatLstm::backward(const Eigen::VectorXd& dy) {
    const std::size_t k = cache_.size();
    Eigen::VectorXd dh = Eigen::VectorXd::Zero(hidden_);
    nn::dense_backward(head_w_->value, h_seq_.back().data(), dy.data(), head_w_->grad,
                       head_b_->grad, dh.data());

    Eigen::VectorXd dc = Eigen::VectorXd::Zero(hidden_);
    Eigen::VectorXd dpre(4 * hidden_);
    for (std::size_t ti = k; ti-- > 0;) {
        const StepCache& s = cache_[ti];
        dc.array() += dh.array() * s.o.array() * (1.0 - s.tanh_c.array().square());
        const Eigen::ArrayXd d_o = dh.array() * s.tanh_c.array();
        const Eigen::ArrayXd di = dc.array() * s.g.array();
        const Eigen::ArrayXd df = dc.array() * s.c_prev.array();
        const Eigen::ArrayXd dg = dc.array() * s.i.array();
        Eigen::VectorXd dc_prev = dc.cwiseProduct(s.f);

        dpre.segment(0, hidden_) = di * s.i.array() * (1.0 - s.i.array());
        dpre.segment(hidden_, hidden_) = df * s.f.array() * (1.0 - s.f.array());
        dpre.segment(2 * hidden_, hidden_) = dg * (1.0 - s.g.array().square());
        dpre.segment(3 * hidden_, hidden_) = d_o * s.o.array() * (1.0 - s.o.array());

        Eigen::VectorXd dz = Eigen::VectorXd::Zero(input_len_ + hidden_);
        nn::dense_backward(w_->value, s.z.data(), dpre.data(), w_->grad, b_->grad,
                           dz.data());
        dh = dz.tail(hidden_);
        dc = std::move(dc_prev);
    }
}

}  // namespace admf
