#include <doctest.h>

#include "admf/nn.hpp"
#include "oracles.hpp"

using namespace admf;
using nn::Tensor;

namespace {

void randomize(Tensor& t, Rng& rng, double scale = 0.5) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
}

}  // namespace

TEST_CASE("conv3d output shape formula with kernel clamping") {
    auto s = nn::conv3d_shape(10, 32, 32, 3, 2);
    CHECK(s.od == 4);
    CHECK(s.oh == 15);
    CHECK(s.ow == 15);
    s = nn::conv3d_shape(4, 15, 15, 3, 2);
    CHECK(s.od == 1);
    CHECK(s.oh == 7);
    CHECK(s.ow == 7);
    // Inputs shorter than the kernel clamp it instead of failing.
    s = nn::conv3d_shape(2, 4, 4, 3, 2);
    CHECK(s.kd == 2);
    CHECK(s.od == 1);
    CHECK(s.oh == 1);
}

TEST_CASE("conv3d forward/backward against finite differences") {
    Rng rng(1);
    const int ic = 2, d = 4, h = 5, w = 5, oc = 3, kernel = 3, stride = 2;
    const auto shape = nn::conv3d_shape(d, h, w, kernel, stride);
    Tensor x({ic, d, h, w}), weight({oc, ic, shape.kd, shape.kh, shape.kw}), bias({oc});
    Tensor y({oc, shape.od, shape.oh, shape.ow});
    randomize(x, rng);
    randomize(weight, rng);
    randomize(bias, rng);

    Tensor probe(y.shape());
    randomize(probe, rng);
    auto loss = [&]() {
        nn::conv3d_forward(x, ic, d, h, w, weight, bias, oc, kernel, stride, y);
        return (y.flat() * probe.flat()).sum();
    };
    loss();
    Tensor dweight(weight.shape()), dbias(bias.shape()), dx(x.shape());
    nn::conv3d_backward(x, ic, d, h, w, weight, oc, kernel, stride, probe, dweight,
                        dbias, dx);

    const double eps = 1e-6;
    double worst = 0.0;
    auto fd_check = [&](Tensor& target, const Tensor& analytic) {
        for (std::size_t i = 0; i < target.size(); ++i) {
            const double v = target[i];
            target[i] = v + eps;
            const double lp = loss();
            target[i] = v - eps;
            const double lm = loss();
            target[i] = v;
            const double fd = (lp - lm) / (2 * eps);
            worst = std::max(worst, std::abs(fd - analytic[i]) /
                                        std::max({1.0, std::abs(fd), std::abs(analytic[i])}));
        }
    };
    fd_check(weight, dweight);
    fd_check(bias, dbias);
    fd_check(x, dx);
    CHECK(worst < 1e-7);
}

TEST_CASE("conv2d same-padding forward/backward against finite differences") {
    Rng rng(2);
    const int ic = 3, h = 5, w = 4, oc = 2, kernel = 3;
    Tensor x({ic, h, w}), weight({oc, ic, kernel, kernel}), bias({oc});
    Tensor y({oc, h, w});
    randomize(x, rng);
    randomize(weight, rng);
    randomize(bias, rng);

    Tensor probe(y.shape());
    randomize(probe, rng);
    Eigen::MatrixXd col;
    auto loss = [&]() {
        nn::conv2d_same_forward(x.data(), ic, h, w, weight, bias, oc, kernel, y.data(),
                                col);
        return (y.flat() * probe.flat()).sum();
    };
    loss();
    Tensor dweight(weight.shape()), dbias(bias.shape()), dx(x.shape());
    nn::conv2d_same_backward(col, ic, h, w, weight, oc, kernel, probe.data(), dweight,
                             dbias, dx.data());

    const double eps = 1e-6;
    double worst = 0.0;
    auto fd_check = [&](Tensor& target, const Tensor& analytic) {
        for (std::size_t i = 0; i < target.size(); ++i) {
            const double v = target[i];
            target[i] = v + eps;
            const double lp = loss();
            target[i] = v - eps;
            const double lm = loss();
            target[i] = v;
            const double fd = (lp - lm) / (2 * eps);
            worst = std::max(worst, std::abs(fd - analytic[i]) /
                                        std::max({1.0, std::abs(fd), std::abs(analytic[i])}));
        }
    };
    fd_check(weight, dweight);
    fd_check(bias, dbias);
    fd_check(x, dx);
    CHECK(worst < 1e-7);
}

TEST_CASE("same-padded conv with a centered delta kernel is the identity") {
    Rng rng(3);
    const int h = 4, w = 4, kernel = 3;
    Tensor x({1, h, w});
    randomize(x, rng);
    Tensor weight({1, 1, kernel, kernel}), bias({1});
    weight[4] = 1.0;  // center tap
    Tensor y({1, h, w});
    Eigen::MatrixXd col;
    nn::conv2d_same_forward(x.data(), 1, h, w, weight, bias, 1, kernel, y.data(), col);
    CHECK((y.flat() - x.flat()).abs().maxCoeff() == 0.0);
}

TEST_CASE("dense layer algebra") {
    Rng rng(4);
    Tensor weight({3, 2}), bias({3});
    randomize(weight, rng);
    randomize(bias, rng);
    const double x[2] = {0.5, -1.25};
    double y[3];
    nn::dense_forward(weight, bias, x, y);
    for (int o = 0; o < 3; ++o) {
        const double want = weight[o * 2] * x[0] + weight[o * 2 + 1] * x[1] + bias[o];
        CHECK(y[o] == doctest::Approx(want).epsilon(1e-15));
    }

    Tensor dweight(weight.shape()), dbias(bias.shape());
    double dx[2] = {0, 0};
    const double dy[3] = {1.0, -2.0, 0.5};
    nn::dense_backward(weight, x, dy, dweight, dbias, dx);
    CHECK(dweight[0] == doctest::Approx(dy[0] * x[0]));
    CHECK(dweight[5] == doctest::Approx(dy[2] * x[1]));
    CHECK(dbias[1] == doctest::Approx(dy[1]));
    CHECK(dx[0] ==
          doctest::Approx(weight[0] * dy[0] + weight[2] * dy[1] + weight[4] * dy[2]));
}

TEST_CASE("param store bookkeeping") {
    nn::ParamStore store;
    auto* a = store.add("a", {2, 2});
    auto* b = store.add("b", {3});
    CHECK_THROWS_AS(store.add("a", {1}), ConfigError);
    CHECK(store.total_size() == 7);
    a->grad.fill(2.0);
    b->grad.fill(1.0);
    CHECK(store.global_grad_norm() == doctest::Approx(std::sqrt(4 * 4.0 + 3 * 1.0)));
    store.scale_grads(0.5);
    CHECK(a->grad[0] == 1.0);
    store.zero_grads();
    CHECK(store.global_grad_norm() == 0.0);
    CHECK(store.find("b") == b);
    CHECK(store.find("zzz") == nullptr);
}
