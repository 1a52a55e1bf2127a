#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "admf/flat_lstm.hpp"
#include "admf/forecaster.hpp"
#include "admf/moe_transform.hpp"

namespace admf {

/// Framework variants (paper naming): which transformation stages are active.
struct VariantFlags {
    bool use_rearrangement = false;
    bool use_transform = false;
};

/// Accepts P-ADNN, T-ADNN, PT-ADNN, Raw-ConvLSTM, LSTM.
VariantFlags variant_flags(const std::string& name);

/// One trainable forecaster. forward/backward operate on a single sample;
/// parameter gradients accumulate across calls until zeroed by the optimizer.
class ForecastModel {
public:
    virtual ~ForecastModel() = default;

    /// frames: the k input matrices (already rearranged when applicable).
    /// Returns the raw prediction E (not yet symmetrized).
    virtual Eigen::MatrixXd forward(const std::vector<const Eigen::MatrixXd*>& frames,
                                    Rng* noise_rng, bool training) = 0;
    virtual void backward(const Eigen::MatrixXd& d_raw) = 0;
    virtual nn::ParamStore& params() = 0;

    /// Gate decision of the quadratic-coefficient MoE block from the latest
    /// forward, when the model has one.
    virtual const GateDecision* quad_gate() const { return nullptr; }

    virtual std::string kind() const = 0;
};

/// ConvLSTM forecaster with an optional MoE quadratic transform in front.
class AdnnModel : public ForecastModel {
public:
    AdnnModel(bool use_transform, const TransformConfig& tc, const ForecasterConfig& fc,
              int k, int n, std::uint64_t init_seed);

    Eigen::MatrixXd forward(const std::vector<const Eigen::MatrixXd*>& frames,
                            Rng* noise_rng, bool training) override;
    void backward(const Eigen::MatrixXd& d_raw) override;
    nn::ParamStore& params() override { return store_; }
    const GateDecision* quad_gate() const override;
    std::string kind() const override { return use_transform_ ? "T" : "Raw"; }

private:
    bool use_transform_;
    int k_, n_;
    nn::ParamStore store_;
    std::unique_ptr<TransformBlock> transform_;
    std::unique_ptr<ConvLstmForecaster> forecaster_;
    nn::Tensor window_;
};

/// Flattened-input LSTM baseline; output reshaped to n x n.
class FlatLstmModel : public ForecastModel {
public:
    FlatLstmModel(int k, int n, int hidden, std::uint64_t init_seed);

    Eigen::MatrixXd forward(const std::vector<const Eigen::MatrixXd*>& frames,
                            Rng* noise_rng, bool training) override;
    void backward(const Eigen::MatrixXd& d_raw) override;
    nn::ParamStore& params() override { return store_; }
    std::string kind() const override { return "LSTM"; }

private:
    int k_, n_;
    nn::ParamStore store_;
    std::unique_ptr<FlatLstm> lstm_;
    std::vector<Eigen::VectorXd> flat_frames_;
};

struct ModelConfig {
    std::string variant = "PT-ADNN";
    TransformConfig transform;
    ForecasterConfig forecaster;
    int baseline_hidden = 64;  // flat-LSTM baseline
};

std::unique_ptr<ForecastModel> make_model(const ModelConfig& cfg, int k, int n,
                                          std::uint64_t init_seed);

/// Full prediction pipeline for evaluation: symmetrize, then optionally
/// enforce PSD / renormalize per the forecaster config.
Eigen::MatrixXd predict_adm(ForecastModel& model,
                            const std::vector<const Eigen::MatrixXd*>& frames,
                            const ForecasterConfig& fc);

}  // namespace admf
