#include <doctest.h>

#include <cmath>

#include "admf/baselines.hpp"
#include "admf/metrics.hpp"
#include "admf/training.hpp"
#include "oracles.hpp"

using namespace admf;

namespace {

/// n x n matrix of free parameters, ignoring the input frames. The simplest
/// trainable forecaster: a learnable constant.
class ConstantModel : public ForecastModel {
public:
    explicit ConstantModel(int n) : n_(n) { m_ = store_.add("constant", {n, n}); }

    Eigen::MatrixXd forward(const std::vector<const Eigen::MatrixXd*>&, Rng*,
                            bool) override {
        Eigen::MatrixXd e(n_, n_);
        for (int i = 0; i < n_; ++i) {
            for (int j = 0; j < n_; ++j) e(i, j) = m_->value[i * n_ + j];
        }
        return e;
    }

    void backward(const Eigen::MatrixXd& d_raw) override {
        for (int i = 0; i < n_; ++i) {
            for (int j = 0; j < n_; ++j) m_->grad[i * n_ + j] += d_raw(i, j);
        }
    }

    nn::ParamStore& params() override { return store_; }
    std::string kind() const override { return "constant"; }

private:
    int n_;
    nn::ParamStore store_;
    nn::ParamTensor* m_;
};

AdmSequence constant_sequence(int count, int n, double offdiag) {
    AdmSequence seq;
    for (int a = 0; a < n; ++a) seq.assets.push_back("A" + std::to_string(a));
    seq.measure = Measure::correlation;
    seq.n_lag = 5;
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(n, n, offdiag);
    m.diagonal().setOnes();
    for (int t = 0; t < count; ++t) {
        seq.timestamps.push_back(t + 4);
        seq.mats.push_back(m);
    }
    return seq;
}

AdmSequence noisy_sequence(int count, int n, std::uint64_t seed) {
    Rng rng(seed);
    AdmSequence seq;
    for (int a = 0; a < n; ++a) seq.assets.push_back("A" + std::to_string(a));
    seq.measure = Measure::correlation;
    seq.n_lag = 5;
    for (int t = 0; t < count; ++t) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                m(i, j) = m(j, i) = 0.6 * std::sin(0.15 * t) + 0.05 * rng.normal();
                m(i, j) = m(j, i) = std::clamp(m(i, j), -0.99, 0.99);
            }
        }
        seq.timestamps.push_back(t + 4);
        seq.mats.push_back(m);
    }
    return seq;
}

DatasetSplit split_of(const AdmSequence& seq, int k, int u, int h) {
    return split_samples(window_samples(seq.size(), k, u, h), SplitFractions{});
}

}  // namespace

TEST_CASE("upper-triangle loss matches hand ledgers") {
    SUBCASE("exact prediction has zero loss") {
        Eigen::MatrixXd t(2, 2);
        t << 1, .5, .5, 1;
        CHECK(upper_triangle_sq_error(t, t) == 0.0);
    }

    SUBCASE("single differing entry") {
        Eigen::MatrixXd e(2, 2), t(2, 2);
        e << 1, 0.5, 99, 1;  // below-diagonal entry must not matter
        t << 1, 0.7, 0.7, 1;
        CHECK(upper_triangle_sq_error(e, t) == doctest::Approx(0.04).epsilon(1e-12));
    }

    SUBCASE("batch mean over identical pairs equals the single-pair loss") {
        Eigen::MatrixXd e(2, 2), t(2, 2);
        e << 1, 0.5, 0.5, 1;
        t << 1, 0.7, 0.7, 1;
        const double one = upper_triangle_mse_loss({e}, {t});
        const double two = upper_triangle_mse_loss({e, e}, {t, t});
        CHECK(one == two);
    }
}

TEST_CASE("learnable constant converges on constant targets") {
    AdmSequence seq;
    seq.assets = {"A", "B"};
    seq.measure = Measure::covariance;
    seq.n_lag = 5;
    for (int t = 0; t < 14; ++t) {
        seq.timestamps.push_back(t + 4);
        seq.mats.push_back(Eigen::MatrixXd::Constant(2, 2, 0.3));
    }
    const DatasetSplit split = split_of(seq, 2, 1, 1);
    ConstantModel model(2);
    TrainConfig cfg;
    cfg.batch_size = 1;
    cfg.init_lr = 5e-4;  // keeps the adaptive-moment limit cycle below 1e-6
    cfg.warmup_epochs = 5;
    cfg.max_epochs = 200;
    cfg.seed = 5;
    const TrainResult result = train_model(model, seq, split, cfg);
    REQUIRE(result.log.size() == 200);

    // Monotone decrease until the loss first drops below 1e-6.
    std::size_t crossed = result.log.size();
    for (std::size_t i = 0; i < result.log.size(); ++i) {
        if (result.log[i].val_loss < 1e-6) {
            crossed = i;
            break;
        }
    }
    REQUIRE(crossed < result.log.size());
    for (std::size_t i = 1; i <= crossed; ++i) {
        CHECK(result.log[i].val_loss <= result.log[i - 1].val_loss + 1e-12);
    }
    CHECK(result.best_val < 1e-6);
}

TEST_CASE("max_epochs = 1 logs exactly one epoch") {
    const AdmSequence seq = constant_sequence(14, 2, 0.2);
    const DatasetSplit split = split_of(seq, 2, 1, 1);
    ConstantModel model(2);
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.max_epochs = 1;
    const TrainResult result = train_model(model, seq, split, cfg);
    CHECK(result.log.size() == 1);
    CHECK(result.log[0].epoch == 1);
}

TEST_CASE("seeded reruns produce identical loss trajectories") {
    const AdmSequence seq = noisy_sequence(30, 3, 42);
    const DatasetSplit split = split_of(seq, 2, 1, 1);
    ModelConfig mc;
    mc.variant = "T-ADNN";
    mc.transform.n_exp = 2;
    mc.transform.top_k = 1;
    mc.transform.expert_hidden = 3;
    mc.forecaster.layers = 1;
    mc.forecaster.hidden_channels = 2;
    mc.forecaster.kernel_size = 3;
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.max_epochs = 3;
    cfg.seed = 99;

    auto run = [&]() {
        auto model = make_model(mc, split.k, seq.n_assets(), cfg.seed);
        return train_model(*model, seq, split, cfg);
    };
    const TrainResult a = run();
    const TrainResult b = run();
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].train_loss == b.log[i].train_loss);
        CHECK(a.log[i].val_loss == b.log[i].val_loss);
        CHECK(a.log[i].lr == b.log[i].lr);
    }
}

TEST_CASE("gradient clipping bounds the post-clip norm on every step") {
    const AdmSequence seq = noisy_sequence(30, 3, 43);
    const DatasetSplit split = split_of(seq, 2, 1, 1);
    ModelConfig mc;
    mc.variant = "Raw-ConvLSTM";
    mc.forecaster.layers = 1;
    mc.forecaster.hidden_channels = 2;
    mc.forecaster.kernel_size = 3;
    auto model = make_model(mc, split.k, seq.n_assets(), 7);
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.max_epochs = 2;
    cfg.grad_clip = 0.05;  // low enough that clipping actually engages
    int steps = 0;
    train_model(*model, seq, split, cfg, [&](int, int, double post_clip_norm) {
        CHECK(post_clip_norm <= cfg.grad_clip + 1e-6);
        ++steps;
    });
    CHECK(steps > 0);
}

TEST_CASE("warmup ramps linearly and the plateau decays the rate") {
    TrainConfig cfg;
    cfg.init_lr = 1e-3;
    cfg.warmup_epochs = 5;
    cfg.plateau_patience = 2;
    cfg.lr_decay_factor = 0.5;
    LrSchedule sched(cfg);

    double prev = 0.0;
    for (int e = 1; e <= 5; ++e) {
        const double lr = sched.on_epoch_start(e);
        CHECK(lr >= prev);
        CHECK(lr <= cfg.init_lr + 1e-15);
        prev = lr;
    }
    CHECK(sched.on_epoch_start(5) == doctest::Approx(cfg.init_lr));

    sched.on_validation(1.0);   // best
    sched.on_validation(1.1);   // stale 1
    sched.on_validation(1.2);   // stale 2 -> decay
    CHECK(sched.on_epoch_start(6) == doctest::Approx(cfg.init_lr * 0.5));
    sched.on_validation(0.5);   // new best resets the counter
    CHECK(sched.on_epoch_start(7) == doctest::Approx(cfg.init_lr * 0.5));
}

TEST_CASE("non-finite loss aborts with a batch diagnostic") {
    const AdmSequence seq = constant_sequence(14, 2, 0.3);
    const DatasetSplit split = split_of(seq, 2, 1, 1);
    ConstantModel model(2);
    model.params().items().front()->value.fill(std::nan(""));
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.max_epochs = 1;
    CHECK_THROWS_AS(train_model(model, seq, split, cfg), NumericError);
}

TEST_CASE("evaluate: definitions and the documented scalar case") {
    Eigen::MatrixXd target(2, 2), prev(2, 2), pred(2, 2);
    target << 1, 0.5, 0.5, 1;
    prev << 1, 0.7, 0.7, 1;
    pred << 1, 0.4, 0.4, 1;

    SUBCASE("previous as prediction gives gain exactly 0") {
        const ForecastReport r = evaluate({prev}, {target}, {prev});
        CHECK(r.gain == 0.0);
    }

    SUBCASE("perfect prediction gives mse 0 and gain 1") {
        const ForecastReport r = evaluate({target}, {target}, {prev});
        CHECK(r.mse == 0.0);
        CHECK(r.gain == 1.0);
    }

    SUBCASE("gain = 1 - 0.01/0.04") {
        const ForecastReport r = evaluate({pred}, {target}, {prev});
        CHECK(r.gain == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(r.per_sample_mse.size() == 1);
    }

    SUBCASE("all targets equal previous is an undefined gain") {
        CHECK_THROWS_AS(evaluate({pred}, {target}, {target}), NumericError);
    }

    SUBCASE("length mismatch is rejected") {
        CHECK_THROWS_AS(evaluate({pred}, {target, target}, {prev}), DataError);
    }
}

TEST_CASE("MSE and Gain are permutation-equivariant") {
    Rng rng(71);
    const int n = 5;
    std::vector<Eigen::MatrixXd> preds, targets, prevs;
    for (int s = 0; s < 6; ++s) {
        auto make = [&]() {
            Eigen::MatrixXd g(n, n);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) g(i, j) = rng.normal();
            }
            return Eigen::MatrixXd((g + g.transpose()) / 2.0);
        };
        preds.push_back(make());
        targets.push_back(make());
        prevs.push_back(make());
    }
    const ForecastReport base = evaluate(preds, targets, prevs);

    std::vector<int> perm{3, 1, 4, 0, 2};
    auto apply = [&](const Eigen::MatrixXd& m) {
        Eigen::MatrixXd r(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) r(i, j) = m(perm[i], perm[j]);
        }
        return r;
    };
    std::vector<Eigen::MatrixXd> p2, t2, q2;
    for (int s = 0; s < 6; ++s) {
        p2.push_back(apply(preds[s]));
        t2.push_back(apply(targets[s]));
        q2.push_back(apply(prevs[s]));
    }
    const ForecastReport after = evaluate(p2, t2, q2);
    CHECK(std::abs(base.mse - after.mse) < 1e-12);
    CHECK(std::abs(base.gain - after.gain) < 1e-12);
}

TEST_CASE("baseline_previous returns the anchor frame bitwise") {
    const AdmSequence seq = noisy_sequence(20, 3, 44);
    const SampleSet set = window_samples(seq.size(), 3, 2, 4);
    for (const auto& s : set.samples) {
        const Eigen::MatrixXd& prev = baseline_previous(seq, s);
        CHECK(&prev == &seq.mats[s.anchor]);
        CHECK((prev - seq.mats[s.inputs.back()]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("baseline_ccm grand means") {
    SUBCASE("single history matrix") {
        const AdmSequence seq = constant_sequence(1, 3, 0.3);
        const Eigen::MatrixXd m = baseline_ccm(seq, 0);
        CHECK(m(0, 1) == doctest::Approx(0.3));
        CHECK(m(0, 0) == 1.0);
    }

    SUBCASE("two matrices with off-diagonal means 0.2 and 0.4") {
        AdmSequence seq = constant_sequence(2, 3, 0.2);
        Eigen::MatrixXd second = Eigen::MatrixXd::Constant(3, 3, 0.4);
        second.diagonal().setOnes();
        seq.mats[1] = second;
        const Eigen::MatrixXd m = baseline_ccm(seq, 1);
        CHECK(m(0, 1) == doctest::Approx(0.3));
        CHECK(m(2, 1) == doctest::Approx(0.3));
    }

    SUBCASE("diagonal is 1 regardless of history") {
        const AdmSequence seq = noisy_sequence(40, 4, 45);
        const Eigen::MatrixXd m = baseline_ccm(seq, 39);
        for (int i = 0; i < 4; ++i) CHECK(m(i, i) == 1.0);
    }

    SUBCASE("rolling window excludes old history") {
        AdmSequence seq = constant_sequence(10, 3, 0.2);
        // Timestamps 4..13; a window of 5 days at anchor 9 (ts 13) keeps ts 9..13.
        for (int i = 0; i < 5; ++i) {
            Eigen::MatrixXd m = Eigen::MatrixXd::Constant(3, 3, 0.8);
            m.diagonal().setOnes();
            seq.mats[5 + i] = m;
        }
        const Eigen::MatrixXd m = baseline_ccm(seq, 9, 5);
        CHECK(m(0, 1) == doctest::Approx(0.8));
    }
}

TEST_CASE("flat LSTM baseline: shape, determinism, gradient check") {
    const int k = 3, n = 3;
    ModelConfig mc;
    mc.variant = "LSTM";
    mc.baseline_hidden = 5;
    auto model = make_model(mc, k, n, 17);

    Rng rng(18);
    std::vector<Eigen::MatrixXd> mats;
    for (int t = 0; t < k; ++t) {
        Eigen::MatrixXd g(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) g(i, j) = rng.normal();
        }
        mats.push_back((g + g.transpose()) / 2.0);
    }
    std::vector<const Eigen::MatrixXd*> frames;
    for (const auto& m : mats) frames.push_back(&m);

    const Eigen::MatrixXd e1 = model->forward(frames, nullptr, false);
    CHECK(e1.rows() == n);
    CHECK(e1.cols() == n);
    const Eigen::MatrixXd e2 = model->forward(frames, nullptr, false);
    CHECK((e1 - e2).cwiseAbs().maxCoeff() == 0.0);

    const Eigen::MatrixXd sym = symmetrize(e1);
    CHECK((sym - sym.transpose()).cwiseAbs().maxCoeff() == 0.0);

    // Gradient check against central finite differences.
    Eigen::MatrixXd target(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) target(i, j) = rng.normal();
    }
    auto loss = [&]() {
        const Eigen::MatrixXd e = model->forward(frames, nullptr, false);
        return (e - target).squaredNorm();
    };
    model->params().zero_grads();
    const Eigen::MatrixXd e = model->forward(frames, nullptr, false);
    model->backward(2.0 * (e - target));
    Rng pick(19);
    const double worst = oracle::max_grad_rel_err(
        model->params(), loss, [](const std::string&) { return true; }, 1e-4, 25, pick);
    CHECK(worst < 1e-3);
}

TEST_CASE("assemble_variant flag mapping and Raw/P equivalence") {
    CHECK(variant_flags("P-ADNN").use_rearrangement);
    CHECK_FALSE(variant_flags("P-ADNN").use_transform);
    CHECK_FALSE(variant_flags("T-ADNN").use_rearrangement);
    CHECK(variant_flags("T-ADNN").use_transform);
    CHECK(variant_flags("PT-ADNN").use_rearrangement);
    CHECK(variant_flags("PT-ADNN").use_transform);
    CHECK_FALSE(variant_flags("Raw-ConvLSTM").use_rearrangement);
    CHECK_FALSE(variant_flags("Raw-ConvLSTM").use_transform);
    CHECK_THROWS_AS(variant_flags("GPT"), ConfigError);

    // P-ADNN and Raw-ConvLSTM share the same network; on an identity
    // ordering their outputs coincide exactly.
    ModelConfig p, raw;
    p.variant = "P-ADNN";
    raw.variant = "Raw-ConvLSTM";
    p.forecaster.layers = raw.forecaster.layers = 1;
    p.forecaster.hidden_channels = raw.forecaster.hidden_channels = 2;
    p.forecaster.kernel_size = raw.forecaster.kernel_size = 3;
    auto mp = make_model(p, 2, 3, 55);
    auto mr = make_model(raw, 2, 3, 55);

    Rng rng(56);
    Eigen::MatrixXd a(3, 3), b(3, 3);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            a(i, j) = rng.normal();
            b(i, j) = rng.normal();
        }
    }
    a = ((a + a.transpose()) / 2.0).eval();
    b = ((b + b.transpose()) / 2.0).eval();
    const std::vector<const Eigen::MatrixXd*> frames{&a, &b};
    const Eigen::MatrixXd ep = mp->forward(frames, nullptr, false);
    const Eigen::MatrixXd er = mr->forward(frames, nullptr, false);
    CHECK((ep - er).cwiseAbs().maxCoeff() == 0.0);

    // T-ADNN exposes its quadratic gate; Raw does not have one.
    ModelConfig t = raw;
    t.variant = "T-ADNN";
    t.transform.n_exp = 2;
    t.transform.top_k = 1;
    t.transform.expert_hidden = 3;
    auto mt = make_model(t, 2, 3, 55);
    mt->forward(frames, nullptr, false);
    REQUIRE(mt->quad_gate() != nullptr);
    CHECK(mt->quad_gate()->selected.size() == 1);
    CHECK(mr->quad_gate() == nullptr);
}
