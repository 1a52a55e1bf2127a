#pragma once

#include <Eigen/Dense>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "admf/common.hpp"
#include "admf/rng.hpp"

namespace admf::nn {

/// Dense nd-array, row-major, double precision. Layout convention across the
/// model code: channels-first, e.g. [C, H, W] or [C, D, H, W].
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        std::size_t n = 1;
        for (int d : shape_) {
            if (d <= 0) throw ConfigError("tensor dims must be positive");
            n *= static_cast<std::size_t>(d);
        }
        data_.assign(n, 0.0);
    }

    const std::vector<int>& shape() const { return shape_; }
    int dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }
    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    Eigen::Map<Eigen::ArrayXd> flat() {
        return {data_.data(), static_cast<Eigen::Index>(data_.size())};
    }
    Eigen::Map<const Eigen::ArrayXd> flat() const {
        return {data_.data(), static_cast<Eigen::Index>(data_.size())};
    }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

struct ParamTensor {
    std::string name;
    Tensor value;
    Tensor grad;
};

/// Owns every learnable tensor of a model, in registration order. The order
/// is the checkpoint and optimizer-state layout, so it must be stable.
class ParamStore {
public:
    ParamTensor* add(const std::string& name, std::vector<int> shape) {
        for (const auto& p : items_) {
            if (p->name == name) throw ConfigError("duplicate parameter: " + name);
        }
        auto p = std::make_unique<ParamTensor>();
        p->name = name;
        p->value = Tensor(shape);
        p->grad = Tensor(std::move(shape));
        items_.push_back(std::move(p));
        return items_.back().get();
    }

    const std::vector<std::unique_ptr<ParamTensor>>& items() const { return items_; }

    ParamTensor* find(const std::string& name) {
        for (const auto& p : items_) {
            if (p->name == name) return p.get();
        }
        return nullptr;
    }

    void zero_grads() {
        for (auto& p : items_) p->grad.set_zero();
    }

    double global_grad_norm() const {
        double sq = 0.0;
        for (const auto& p : items_) sq += p->grad.flat().square().sum();
        return std::sqrt(sq);
    }

    void scale_grads(double s) {
        for (auto& p : items_) p->grad.flat() *= s;
    }

    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& p : items_) n += p->value.size();
        return n;
    }

private:
    std::vector<std::unique_ptr<ParamTensor>> items_;
};

/// Uniform init with fan-in scaling: U(-sqrt(3/fan_in), +sqrt(3/fan_in)).
void fan_in_uniform(Tensor& t, int fan_in, Rng& rng);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double softplus(double x) {
    // Overflow-safe: softplus(x) = max(x, 0) + log1p(exp(-|x|)).
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// ---------------------------------------------------------------------------
// Convolutions. All tensors channels-first; weights [OC, IC, (KD,) KH, KW].
// ---------------------------------------------------------------------------

/// Valid 3D convolution with stride and per-axis kernel clamped to the input
/// extent (so short sequences still produce one output slab).
struct Conv3dShape {
    int kd, kh, kw;      // effective kernel
    int od, oh, ow;      // output dims
};
Conv3dShape conv3d_shape(int d, int h, int w, int kernel, int stride);

void conv3d_forward(const Tensor& x, int ic, int d, int h, int w, const Tensor& weight,
                    const Tensor& bias, int oc, int kernel, int stride, Tensor& y);
void conv3d_backward(const Tensor& x, int ic, int d, int h, int w, const Tensor& weight,
                     int oc, int kernel, int stride, const Tensor& dy, Tensor& dweight,
                     Tensor& dbias, Tensor& dx);

/// Same-padded 2D convolution (odd kernel) via im2col + GEMM.
/// `col` is caller-provided scratch, resized as needed.
void conv2d_same_forward(const double* x, int ic, int h, int w, const Tensor& weight,
                         const Tensor& bias, int oc, int kernel, double* y,
                         Eigen::MatrixXd& col);
/// Backward from stored `col` (of the matching forward call). Accumulates into
/// dweight/dbias; writes dx (overwrites).
void conv2d_same_backward(const Eigen::MatrixXd& col, int ic, int h, int w,
                          const Tensor& weight, int oc, int kernel, const double* dy,
                          Tensor& dweight, Tensor& dbias, double* dx);

// ---------------------------------------------------------------------------
// Dense layer: y = W x + b, W row-major [out, in].
// ---------------------------------------------------------------------------
void dense_forward(const Tensor& weight, const Tensor& bias, const double* x, double* y);
void dense_backward(const Tensor& weight, const double* x, const double* dy,
                    Tensor& dweight, Tensor& dbias, double* dx_accum);

}  // namespace admf::nn
