#include "admf/training.hpp"

#include <cmath>
#include <fstream>

#include "admf/csv.hpp"

namespace admf {

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(init_lr > 0.0)) throw ConfigError("init_lr must be positive");
    if (warmup_epochs < 1) throw ConfigError("warmup_epochs must be >= 1");
    if (plateau_patience < 1) throw ConfigError("plateau_patience must be >= 1");
    if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0)) {
        throw ConfigError("lr_decay_factor must be in (0, 1)");
    }
    if (!(grad_clip > 0.0)) throw ConfigError("grad_clip must be positive");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
}

double upper_triangle_sq_error(const Eigen::MatrixXd& e, const Eigen::MatrixXd& target) {
    if (e.rows() != target.rows() || e.cols() != target.cols()) {
        throw NumericError("loss shape mismatch");
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < e.rows(); ++i) {
        for (Eigen::Index j = i; j < e.cols(); ++j) {
            const double d = e(i, j) - target(i, j);
            sum += d * d;
        }
    }
    return sum;
}

double upper_triangle_mse_loss(const std::vector<Eigen::MatrixXd>& es,
                               const std::vector<Eigen::MatrixXd>& targets) {
    if (es.size() != targets.size() || es.empty()) {
        throw NumericError("loss batch mismatch");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < es.size(); ++i) {
        sum += upper_triangle_sq_error(es[i], targets[i]);
    }
    return sum / static_cast<double>(es.size());
}

Eigen::MatrixXd upper_triangle_loss_grad(const Eigen::MatrixXd& e,
                                         const Eigen::MatrixXd& target, double scale) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(e.rows(), e.cols());
    for (Eigen::Index i = 0; i < e.rows(); ++i) {
        for (Eigen::Index j = i; j < e.cols(); ++j) {
            g(i, j) = 2.0 * (e(i, j) - target(i, j)) * scale;
        }
    }
    return g;
}

AdamOptimizer::AdamOptimizer(nn::ParamStore& store, double beta1, double beta2,
                             double eps)
    : store_(store), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : store_.items()) {
        m_.emplace_back(Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(p->value.size())));
        v_.emplace_back(Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(p->value.size())));
    }
}

void AdamOptimizer::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    const auto& items = store_.items();
    for (std::size_t i = 0; i < items.size(); ++i) {
        auto g = items[i]->grad.flat();
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.square();
        items[i]->value.flat() -=
            lr * (m_[i] / bc1) / ((v_[i] / bc2).sqrt() + eps_);
    }
}

LrSchedule::LrSchedule(const TrainConfig& cfg) : cfg_(cfg) {}

double LrSchedule::on_epoch_start(int epoch) const {
    if (epoch <= cfg_.warmup_epochs) {
        return cfg_.init_lr * static_cast<double>(epoch) / cfg_.warmup_epochs;
    }
    return cfg_.init_lr * scale_;
}

void LrSchedule::on_validation(double val_loss) {
    if (val_loss < best_) {
        best_ = val_loss;
        stale_ = 0;
        return;
    }
    if (++stale_ >= cfg_.plateau_patience) {
        scale_ *= cfg_.lr_decay_factor;
        stale_ = 0;
    }
}

namespace {

double dataset_loss(ForecastModel& model, const AdmSequence& seq,
                    const std::vector<AdmSample>& samples) {
    double sum = 0.0;
    for (const auto& s : samples) {
        const auto frames = sample_frames(seq, s);
        const Eigen::MatrixXd e = model.forward(frames, nullptr, false);
        sum += upper_triangle_sq_error(e, seq.mats[s.target]);
    }
    return sum / static_cast<double>(samples.size());
}

std::vector<nn::Tensor> snapshot(const nn::ParamStore& store) {
    std::vector<nn::Tensor> vals;
    vals.reserve(store.items().size());
    for (const auto& p : store.items()) vals.push_back(p->value);
    return vals;
}

void restore(nn::ParamStore& store, const std::vector<nn::Tensor>& vals) {
    const auto& items = store.items();
    for (std::size_t i = 0; i < items.size(); ++i) items[i]->value = vals[i];
}

}  // namespace

TrainResult train_model(ForecastModel& model, const AdmSequence& seq,
                        const DatasetSplit& split, const TrainConfig& cfg,
                        const StepObserver& observer) {
    cfg.validate();
    if (split.train.empty() || split.validation.empty()) {
        throw DataError("training requires non-empty train and validation splits");
    }
    Rng run_rng(cfg.seed);
    Rng noise_rng = run_rng.derive(1);
    AdamOptimizer opt(model.params());
    LrSchedule schedule(cfg);
    TrainResult result;
    std::vector<nn::Tensor> best_params = snapshot(model.params());

    std::vector<std::size_t> order(split.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const double lr = schedule.on_epoch_start(epoch);
        Rng epoch_rng = run_rng.derive(1000 + static_cast<std::uint64_t>(epoch));
        shuffle(order, epoch_rng);

        double train_loss_sum = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const double inv_b = 1.0 / static_cast<double>(stop - start);
            model.params().zero_grads();
            double batch_loss = 0.0;
            for (std::size_t idx = start; idx < stop; ++idx) {
                const AdmSample& s = split.train[order[idx]];
                const auto frames = sample_frames(seq, s);
                const Eigen::MatrixXd e = model.forward(frames, &noise_rng, true);
                const Eigen::MatrixXd& target = seq.mats[s.target];
                batch_loss += upper_triangle_sq_error(e, target) * inv_b;
                model.backward(upper_triangle_loss_grad(e, target, inv_b));
            }
            if (!std::isfinite(batch_loss)) {
                throw NumericError("non-finite loss in epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(n_batches));
            }
            const double norm = model.params().global_grad_norm();
            if (norm > cfg.grad_clip) {
                model.params().scale_grads(cfg.grad_clip / norm);
            }
            if (observer) {
                observer(epoch, static_cast<int>(n_batches),
                         model.params().global_grad_norm());
            }
            opt.step(lr);
            train_loss_sum += batch_loss;
            ++n_batches;
        }

        const double train_loss = train_loss_sum / static_cast<double>(n_batches);
        const double val_loss = dataset_loss(model, seq, split.validation);
        if (!std::isfinite(val_loss)) {
            throw NumericError("non-finite validation loss in epoch " +
                               std::to_string(epoch));
        }
        result.log.push_back({epoch, train_loss, val_loss, lr});
        if (val_loss < result.best_val) {
            result.best_val = val_loss;
            result.best_epoch = epoch;
            best_params = snapshot(model.params());
        }
        schedule.on_validation(val_loss);
    }

    restore(model.params(), best_params);
    return result;
}

void write_training_log(const std::string& path, const std::vector<EpochLog>& log) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "epoch,train_loss,val_loss,lr\n";
    for (const auto& row : log) {
        out << row.epoch << ',' << csv::format(row.train_loss) << ','
            << csv::format(row.val_loss) << ',' << csv::format(row.lr) << '\n';
    }
}

}  // namespace admf
