#include "admf/convlstm.hpp"

#include <cmath>

namespace admf {

using nn::Tensor;

ConvLstmLayer::ConvLstmLayer(nn::ParamStore& store, const std::string& prefix,
                             int in_ch, int hidden_ch, int kernel, int rows, int cols,
                             Rng& init)
    : in_ch_(in_ch), hidden_(hidden_ch), kernel_(kernel), rows_(rows), cols_(cols) {
    if (kernel % 2 == 0) throw ConfigError("ConvLSTM kernel must be odd");
    w_ = store.add(prefix + ".w", {4 * hidden_, in_ch_ + hidden_, kernel_, kernel_});
    b_ = store.add(prefix + ".b", {4 * hidden_});
    w_ci_ = store.add(prefix + ".w_ci", {hidden_, rows_, cols_});
    w_cf_ = store.add(prefix + ".w_cf", {hidden_, rows_, cols_});
    w_co_ = store.add(prefix + ".w_co", {hidden_, rows_, cols_});
    fan_in_uniform(w_->value, (in_ch_ + hidden_) * kernel_ * kernel_, init);
    // Forget-gate bias starts open so early steps carry state.
    for (int c = hidden_; c < 2 * hidden_; ++c) b_->value[c] = 1.0;
}

void ConvLstmLayer::step_impl(const double* x, const Tensor& h_prev,
                              const Tensor& c_prev, Tensor& h_out, StepCache* cache) {
    const int plane = rows_ * cols_;
    const int state_len = hidden_ * plane;

    Tensor z({in_ch_ + hidden_, rows_, cols_});
    std::copy(x, x + static_cast<std::size_t>(in_ch_) * plane, z.data());
    std::copy(h_prev.data(), h_prev.data() + state_len,
              z.data() + static_cast<std::size_t>(in_ch_) * plane);

    Tensor pre({4 * hidden_, rows_, cols_});
    Eigen::MatrixXd& col = cache ? cache->col : scratch_col_;
    nn::conv2d_same_forward(z.data(), in_ch_ + hidden_, rows_, cols_, w_->value,
                            b_->value, 4 * hidden_, kernel_, pre.data(), col);

    Tensor i({hidden_, rows_, cols_}), f({hidden_, rows_, cols_});
    Tensor g({hidden_, rows_, cols_}), o({hidden_, rows_, cols_});
    Tensor c_new({hidden_, rows_, cols_}), tanh_c({hidden_, rows_, cols_});
    const double* a_i = pre.data();
    const double* a_f = pre.data() + state_len;
    const double* a_c = pre.data() + 2 * state_len;
    const double* a_o = pre.data() + 3 * state_len;
    for (int j = 0; j < state_len; ++j) {
        i[j] = nn::sigmoid(a_i[j] + w_ci_->value[j] * c_prev[j]);
        f[j] = nn::sigmoid(a_f[j] + w_cf_->value[j] * c_prev[j]);
        g[j] = std::tanh(a_c[j]);
        c_new[j] = f[j] * c_prev[j] + i[j] * g[j];
        o[j] = nn::sigmoid(a_o[j] + w_co_->value[j] * c_new[j]);
        tanh_c[j] = std::tanh(c_new[j]);
        h_out[j] = o[j] * tanh_c[j];
    }

    if (cache) {
        cache->z = std::move(z);
        cache->c_prev = c_prev;
        cache->i = std::move(i);
        cache->f = std::move(f);
        cache->g = std::move(g);
        cache->o = std::move(o);
        cache->c = c_new;
        cache->tanh_c = std::move(tanh_c);
    }
}

void ConvLstmLayer::step(const double* x, ConvLstmState& state) {
    if (state.hidden.empty()) {
        state.hidden = Tensor({hidden_, rows_, cols_});
        state.cell = Tensor({hidden_, rows_, cols_});
    }
    Tensor h_new({hidden_, rows_, cols_});
    StepCache cache;
    step_impl(x, state.hidden, state.cell, h_new, &cache);
    state.hidden = std::move(h_new);
    state.cell = std::move(cache.c);
}

const std::vector<Tensor>& ConvLstmLayer::forward(
    const std::vector<const double*>& frames) {
    const std::size_t k = frames.size();
    cache_.assign(k, StepCache{});
    h_seq_.assign(k, Tensor({hidden_, rows_, cols_}));
    Tensor h_prev({hidden_, rows_, cols_});
    Tensor c_prev({hidden_, rows_, cols_});
    for (std::size_t t = 0; t < k; ++t) {
        step_impl(frames[t], h_prev, c_prev, h_seq_[t], &cache_[t]);
        h_prev = h_seq_[t];
        c_prev = cache_[t].c;
    }
    return h_seq_;
}

std::vector<Tensor> ConvLstmLayer::backward(const std::vector<Tensor>& dh_seq) {
    const std::size_t k = cache_.size();
    if (dh_seq.size() != k) throw NumericError("BPTT gradient count mismatch");
    const int plane = rows_ * cols_;
    const int state_len = hidden_ * plane;

    std::vector<Tensor> dx(k);
    Tensor dh_next({hidden_, rows_, cols_});  // from step t+1
    Tensor dc_next({hidden_, rows_, cols_});
    Tensor dpre({4 * hidden_, rows_, cols_});
    Tensor dz({in_ch_ + hidden_, rows_, cols_});

    for (std::size_t ti = k; ti-- > 0;) {
        const StepCache& s = cache_[ti];
        Tensor dh = dh_seq[ti];
        dh.flat() += dh_next.flat();

        double* da_i = dpre.data();
        double* da_f = dpre.data() + state_len;
        double* da_c = dpre.data() + 2 * state_len;
        double* da_o = dpre.data() + 3 * state_len;
        Tensor dc_prev({hidden_, rows_, cols_});
        for (int j = 0; j < state_len; ++j) {
            const double o = s.o[j], tc = s.tanh_c[j];
            double dc = dc_next[j] + dh[j] * o * (1.0 - tc * tc);
            const double d_o = dh[j] * tc;
            const double dao = d_o * o * (1.0 - o);
            w_co_->grad[j] += dao * s.c[j];
            dc += dao * w_co_->value[j];

            const double di = dc * s.g[j];
            const double df = dc * s.c_prev[j];
            const double dg = dc * s.i[j];
            double dcp = dc * s.f[j];

            const double dai = di * s.i[j] * (1.0 - s.i[j]);
            const double daf = df * s.f[j] * (1.0 - s.f[j]);
            w_ci_->grad[j] += dai * s.c_prev[j];
            w_cf_->grad[j] += daf * s.c_prev[j];
            dcp += dai * w_ci_->value[j] + daf * w_cf_->value[j];

            da_i[j] = dai;
            da_f[j] = daf;
            da_c[j] = dg * (1.0 - s.g[j] * s.g[j]);
            da_o[j] = dao;
            dc_prev[j] = dcp;
        }

        nn::conv2d_same_backward(s.col, in_ch_ + hidden_, rows_, cols_, w_->value,
                                 4 * hidden_, kernel_, dpre.data(), w_->grad, b_->grad,
                                 dz.data());
        dx[ti] = Tensor({in_ch_, rows_, cols_});
        std::copy(dz.data(), dz.data() + static_cast<std::size_t>(in_ch_) * plane,
                  dx[ti].data());
        std::copy(dz.data() + static_cast<std::size_t>(in_ch_) * plane,
                  dz.data() + dz.size(), dh_next.data());
        dc_next = std::move(dc_prev);
    }
    return dx;
}

}  // namespace admf
