#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "admf/market_data.hpp"
#include "admf/model.hpp"

namespace admf {

struct TrainConfig {
    int batch_size = 128;
    double init_lr = 5e-4;
    int warmup_epochs = 5;
    int plateau_patience = 10;
    double lr_decay_factor = 0.5;
    double grad_clip = 10.0;
    int max_epochs = 200;
    std::uint64_t seed = 7;

    void validate() const;
};

/// Sum over the upper triangle (diagonal included) of squared differences.
double upper_triangle_sq_error(const Eigen::MatrixXd& e, const Eigen::MatrixXd& target);

/// Batch loss: mean over the batch of per-sample upper-triangle sums.
double upper_triangle_mse_loss(const std::vector<Eigen::MatrixXd>& es,
                               const std::vector<Eigen::MatrixXd>& targets);

/// d/dE of upper_triangle_sq_error scaled by `scale` (zeros below diagonal).
Eigen::MatrixXd upper_triangle_loss_grad(const Eigen::MatrixXd& e,
                                         const Eigen::MatrixXd& target, double scale);

/// Adaptive-moment optimizer over a parameter store.
class AdamOptimizer {
public:
    explicit AdamOptimizer(nn::ParamStore& store, double beta1 = 0.9,
                           double beta2 = 0.999, double eps = 1e-8);
    void step(double lr);

private:
    nn::ParamStore& store_;
    double beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Eigen::ArrayXd> m_, v_;
};

/// Linear warmup to init_lr, then multiply by decay_factor whenever the
/// validation loss fails to improve for `plateau_patience` consecutive epochs.
class LrSchedule {
public:
    explicit LrSchedule(const TrainConfig& cfg);
    double on_epoch_start(int epoch) const;  // lr for this epoch (1-based)
    void on_validation(double val_loss);

private:
    TrainConfig cfg_;
    double scale_ = 1.0;
    double best_ = std::numeric_limits<double>::infinity();
    int stale_ = 0;
};

struct EpochLog {
    int epoch;
    double train_loss;
    double val_loss;
    double lr;
};

struct TrainResult {
    std::vector<EpochLog> log;
    int best_epoch = 0;
    double best_val = std::numeric_limits<double>::infinity();
};

/// Optional per-step observer (post-clip gradient norm hook for tests).
using StepObserver = std::function<void(int epoch, int step, double grad_norm)>;

/// Seeded minibatch training with gradient-norm clipping, warmup + plateau
/// scheduling and best-validation parameter selection (restored into the
/// model before returning).
TrainResult train_model(ForecastModel& model, const AdmSequence& seq,
                        const DatasetSplit& split, const TrainConfig& cfg,
                        const StepObserver& observer = nullptr);

void write_training_log(const std::string& path, const std::vector<EpochLog>& log);

}  // namespace admf
