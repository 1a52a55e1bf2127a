#include "admf/nn.hpp"

#include <cmath>

namespace admf::nn {

using RowMajorMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void fan_in_uniform(Tensor& t, int fan_in, Rng& rng) {
    const double limit = std::sqrt(3.0 / std::max(1, fan_in));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
}

Conv3dShape conv3d_shape(int d, int h, int w, int kernel, int stride) {
    Conv3dShape s;
    s.kd = std::min(kernel, d);
    s.kh = std::min(kernel, h);
    s.kw = std::min(kernel, w);
    s.od = (d - s.kd) / stride + 1;
    s.oh = (h - s.kh) / stride + 1;
    s.ow = (w - s.kw) / stride + 1;
    return s;
}

void conv3d_forward(const Tensor& x, int ic, int d, int h, int w, const Tensor& weight,
                    const Tensor& bias, int oc, int kernel, int stride, Tensor& y) {
    const Conv3dShape s = conv3d_shape(d, h, w, kernel, stride);
    const int plane = h * w, vol = d * plane;
    const int kvol = s.kd * s.kh * s.kw;
    const int oplane = s.oh * s.ow, ovol = s.od * oplane;
    for (int o = 0; o < oc; ++o) {
        const double* wt = weight.data() + static_cast<std::size_t>(o) * ic * kvol;
        for (int od = 0; od < s.od; ++od) {
            for (int oy = 0; oy < s.oh; ++oy) {
                for (int ox = 0; ox < s.ow; ++ox) {
                    double acc = bias[o];
                    const int bd = od * stride, by = oy * stride, bx = ox * stride;
                    for (int c = 0; c < ic; ++c) {
                        const double* xc = x.data() + static_cast<std::size_t>(c) * vol;
                        const double* wc = wt + static_cast<std::size_t>(c) * kvol;
                        for (int kd = 0; kd < s.kd; ++kd) {
                            for (int ky = 0; ky < s.kh; ++ky) {
                                const double* xr = xc + (bd + kd) * plane + (by + ky) * w + bx;
                                const double* wr = wc + (kd * s.kh + ky) * s.kw;
                                for (int kx = 0; kx < s.kw; ++kx) acc += xr[kx] * wr[kx];
                            }
                        }
                    }
                    y[static_cast<std::size_t>(o) * ovol + od * oplane + oy * s.ow + ox] = acc;
                }
            }
        }
    }
}

void conv3d_backward(const Tensor& x, int ic, int d, int h, int w, const Tensor& weight,
                     int oc, int kernel, int stride, const Tensor& dy, Tensor& dweight,
                     Tensor& dbias, Tensor& dx) {
    const Conv3dShape s = conv3d_shape(d, h, w, kernel, stride);
    const int plane = h * w, vol = d * plane;
    const int kvol = s.kd * s.kh * s.kw;
    const int oplane = s.oh * s.ow, ovol = s.od * oplane;
    dx.set_zero();
    for (int o = 0; o < oc; ++o) {
        const double* wt = weight.data() + static_cast<std::size_t>(o) * ic * kvol;
        double* dwt = dweight.data() + static_cast<std::size_t>(o) * ic * kvol;
        for (int od = 0; od < s.od; ++od) {
            for (int oy = 0; oy < s.oh; ++oy) {
                for (int ox = 0; ox < s.ow; ++ox) {
                    const double g =
                        dy[static_cast<std::size_t>(o) * ovol + od * oplane + oy * s.ow + ox];
                    if (g == 0.0) continue;
                    dbias[o] += g;
                    const int bd = od * stride, by = oy * stride, bx = ox * stride;
                    for (int c = 0; c < ic; ++c) {
                        const double* xc = x.data() + static_cast<std::size_t>(c) * vol;
                        double* dxc = dx.data() + static_cast<std::size_t>(c) * vol;
                        const double* wc = wt + static_cast<std::size_t>(c) * kvol;
                        double* dwc = dwt + static_cast<std::size_t>(c) * kvol;
                        for (int kd = 0; kd < s.kd; ++kd) {
                            for (int ky = 0; ky < s.kh; ++ky) {
                                const int off = (bd + kd) * plane + (by + ky) * w + bx;
                                const int woff = (kd * s.kh + ky) * s.kw;
                                for (int kx = 0; kx < s.kw; ++kx) {
                                    dwc[woff + kx] += g * xc[off + kx];
                                    dxc[off + kx] += g * wc[woff + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

void conv2d_same_forward(const double* x, int ic, int h, int w, const Tensor& weight,
                         const Tensor& bias, int oc, int kernel, double* y,
                         Eigen::MatrixXd& col) {
    const int pad = kernel / 2;
    const int hw = h * w;
    const int kk = kernel * kernel;
    col.resize(static_cast<Eigen::Index>(ic) * kk, hw);
    for (int c = 0; c < ic; ++c) {
        const double* xc = x + static_cast<std::size_t>(c) * hw;
        for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
                const Eigen::Index row = static_cast<Eigen::Index>(c) * kk + ky * kernel + kx;
                for (int yy = 0; yy < h; ++yy) {
                    const int iy = yy + ky - pad;
                    for (int xx = 0; xx < w; ++xx) {
                        const int ix = xx + kx - pad;
                        col(row, yy * w + xx) =
                            (iy >= 0 && iy < h && ix >= 0 && ix < w) ? xc[iy * w + ix] : 0.0;
                    }
                }
            }
        }
    }
    ConstRowMajorMap wmat(weight.data(), oc, static_cast<Eigen::Index>(ic) * kk);
    RowMajorMap ymat(y, oc, hw);
    ymat.noalias() = wmat * col;
    for (int o = 0; o < oc; ++o) ymat.row(o).array() += bias[o];
}

void conv2d_same_backward(const Eigen::MatrixXd& col, int ic, int h, int w,
                          const Tensor& weight, int oc, int kernel, const double* dy,
                          Tensor& dweight, Tensor& dbias, double* dx) {
    const int pad = kernel / 2;
    const int hw = h * w;
    const int kk = kernel * kernel;
    ConstRowMajorMap wmat(weight.data(), oc, static_cast<Eigen::Index>(ic) * kk);
    RowMajorMap dwmat(dweight.data(), oc, static_cast<Eigen::Index>(ic) * kk);
    ConstRowMajorMap dymat(dy, oc, hw);

    dwmat.noalias() += dymat * col.transpose();
    for (int o = 0; o < oc; ++o) dbias[o] += dymat.row(o).sum();

    Eigen::MatrixXd dcol(static_cast<Eigen::Index>(ic) * kk, hw);
    dcol.noalias() = wmat.transpose() * dymat;

    std::fill(dx, dx + static_cast<std::size_t>(ic) * hw, 0.0);
    for (int c = 0; c < ic; ++c) {
        double* dxc = dx + static_cast<std::size_t>(c) * hw;
        for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
                const Eigen::Index row = static_cast<Eigen::Index>(c) * kk + ky * kernel + kx;
                for (int yy = 0; yy < h; ++yy) {
                    const int iy = yy + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    for (int xx = 0; xx < w; ++xx) {
                        const int ix = xx + kx - pad;
                        if (ix < 0 || ix >= w) continue;
                        dxc[iy * w + ix] += dcol(row, yy * w + xx);
                    }
                }
            }
        }
    }
}

void dense_forward(const Tensor& weight, const Tensor& bias, const double* x, double* y) {
    const int out = weight.dim(0), in = weight.dim(1);
    ConstRowMajorMap wmat(weight.data(), out, in);
    Eigen::Map<const Eigen::VectorXd> xv(x, in);
    Eigen::Map<Eigen::VectorXd> yv(y, out);
    yv.noalias() = wmat * xv;
    yv += Eigen::Map<const Eigen::VectorXd>(bias.data(), out);
}

void dense_backward(const Tensor& weight, const double* x, const double* dy,
                    Tensor& dweight, Tensor& dbias, double* dx_accum) {
    const int out = weight.dim(0), in = weight.dim(1);
    ConstRowMajorMap wmat(weight.data(), out, in);
    RowMajorMap dwmat(dweight.data(), out, in);
    Eigen::Map<const Eigen::VectorXd> xv(x, in);
    Eigen::Map<const Eigen::VectorXd> dyv(dy, out);
    dwmat.noalias() += dyv * xv.transpose();
    Eigen::Map<Eigen::VectorXd>(dbias.data(), out) += dyv;
    if (dx_accum) {
        Eigen::Map<Eigen::VectorXd> dxv(dx_accum, in);
        dxv.noalias() += wmat.transpose() * dyv;
    }
}

}  // namespace admf::nn
