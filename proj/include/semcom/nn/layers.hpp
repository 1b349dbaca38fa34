#pragma once

// Layers with hand-written backward passes. Every layer caches what its
// backward needs from the most recent forward call, so one instance must not
// be shared between two live forward passes.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <concepts>
#include <numeric>
#include <string>

#include "semcom/nn/param.hpp"
#include "semcom/tensor.hpp"

namespace semcom::nn {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

struct ConvGeometry {
    std::size_t channels, height, width;  // image being unfolded
    std::size_t kernel, stride, pad;
    std::size_t out_h, out_w;             // number of kernel positions

    std::size_t rows() const { return channels * kernel * kernel; }
    std::size_t cols() const { return out_h * out_w; }
};

// Unfold image patches: col is rows() x cols(), row-major.
template <std::floating_point T>
void im2col(const T* img, const ConvGeometry& g, T* col) {
    const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(g.height);
    const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(g.width);
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.channels; ++c)
        for (std::size_t ki = 0; ki < g.kernel; ++ki)
            for (std::size_t kj = 0; kj < g.kernel; ++kj, ++row) {
                T* dst = col + row * g.cols();
                for (std::size_t oi = 0; oi < g.out_h; ++oi) {
                    const std::ptrdiff_t i = static_cast<std::ptrdiff_t>(oi * g.stride + ki) -
                                             static_cast<std::ptrdiff_t>(g.pad);
                    for (std::size_t oj = 0; oj < g.out_w; ++oj) {
                        const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(oj * g.stride + kj) -
                                                 static_cast<std::ptrdiff_t>(g.pad);
                        dst[oi * g.out_w + oj] =
                            (i >= 0 && i < H && j >= 0 && j < W) ? img[(c * g.height + i) * g.width + j] : T{0};
                    }
                }
            }
}

// Adjoint of im2col: accumulates col back into img.
template <std::floating_point T>
void col2im(const T* col, const ConvGeometry& g, T* img) {
    const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(g.height);
    const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(g.width);
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.channels; ++c)
        for (std::size_t ki = 0; ki < g.kernel; ++ki)
            for (std::size_t kj = 0; kj < g.kernel; ++kj, ++row) {
                const T* src = col + row * g.cols();
                for (std::size_t oi = 0; oi < g.out_h; ++oi) {
                    const std::ptrdiff_t i = static_cast<std::ptrdiff_t>(oi * g.stride + ki) -
                                             static_cast<std::ptrdiff_t>(g.pad);
                    if (i < 0 || i >= H) continue;
                    for (std::size_t oj = 0; oj < g.out_w; ++oj) {
                        const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(oj * g.stride + kj) -
                                                 static_cast<std::ptrdiff_t>(g.pad);
                        if (j < 0 || j >= W) continue;
                        img[(c * g.height + i) * g.width + j] += src[oi * g.out_w + oj];
                    }
                }
            }
}

inline void require_rank4_channels(const Shape& s, std::size_t channels, const char* layer) {
    if (s.size() != 4 || s[1] != channels)
        throw ArgumentError(std::string(layer) + ": expected [N x " + std::to_string(channels) +
                            " x H x W], got " + shape_str(s));
}

// 2-d convolution, NCHW, square kernel, zero padding.
template <std::floating_point T>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride, std::size_t pad,
           Rng& rng)
        : in_(in_ch), out_(out_ch), k_(kernel), s_(stride), p_(pad),
          weight_({out_ch, in_ch, kernel, kernel}), bias_({out_ch}) {
        he_normal(weight_.value, in_ch * kernel * kernel, rng);
    }

    void collect(ParamRefs<T>& refs, const std::string& prefix) {
        refs.add(weight_, prefix + "weight");
        refs.add(bias_, prefix + "bias");
    }

    std::size_t out_size(std::size_t n) const { return (n + 2 * p_ - k_) / s_ + 1; }

    Tensor<T> forward(const Tensor<T>& x) {
        require_rank4_channels(x.shape(), in_, "Conv2d");
        input_ = x;
        const auto g = geometry(x.dim(2), x.dim(3));
        Tensor<T> y({x.dim(0), out_, g.out_h, g.out_w});
        std::vector<T> col(g.rows() * g.cols());
        ConstMatMap<T> w(weight_.value.data(), out_, g.rows());
        for (std::size_t n = 0; n < x.dim(0); ++n) {
            im2col(x.sample(n).data(), g, col.data());
            MatMap<T> out(y.sample(n).data(), out_, g.cols());
            out.noalias() = w * ConstMatMap<T>(col.data(), g.rows(), g.cols());
            for (std::size_t o = 0; o < out_; ++o) out.row(o).array() += bias_.value[o];
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const auto g = geometry(input_.dim(2), input_.dim(3));
        Tensor<T> dx(input_.shape());
        std::vector<T> col(g.rows() * g.cols());
        ConstMatMap<T> w(weight_.value.data(), out_, g.rows());
        MatMap<T> dw(weight_.grad.data(), out_, g.rows());
        for (std::size_t n = 0; n < input_.dim(0); ++n) {
            ConstMatMap<T> d(dy.sample(n).data(), out_, g.cols());
            im2col(input_.sample(n).data(), g, col.data());
            dw.noalias() += d * ConstMatMap<T>(col.data(), g.rows(), g.cols()).transpose();
            // plain loops: Eigen reductions vary with buffer alignment
            for (std::size_t o = 0; o < out_; ++o) {
                const T* row = dy.sample(n).data() + o * g.cols();
                bias_.grad[o] += std::accumulate(row, row + g.cols(), T{0});
            }
            MatMap<T>(col.data(), g.rows(), g.cols()).noalias() = w.transpose() * d;
            col2im(col.data(), g, dx.sample(n).data());
        }
        return dx;
    }

    Param<T>& weight() { return weight_; }
    Param<T>& bias() { return bias_; }

private:
    ConvGeometry geometry(std::size_t h, std::size_t w) const {
        return {in_, h, w, k_, s_, p_, out_size(h), out_size(w)};
    }

    std::size_t in_ = 0, out_ = 0, k_ = 1, s_ = 1, p_ = 0;
    Param<T> weight_, bias_;
    Tensor<T> input_;
};

// Transposed convolution (gradient of Conv2d w.r.t. its input), weight laid
// out [in, out, k, k]. Output size (H-1)*stride - 2*pad + k + output_pad.
template <std::floating_point T>
class ConvTranspose2d {
public:
    ConvTranspose2d() = default;
    ConvTranspose2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride,
                    std::size_t pad, std::size_t output_pad, Rng& rng)
        : in_(in_ch), out_(out_ch), k_(kernel), s_(stride), p_(pad), op_(output_pad),
          weight_({in_ch, out_ch, kernel, kernel}), bias_({out_ch}) {
        if (output_pad != 0 && output_pad >= stride)
            throw ArgumentError("ConvTranspose2d: output_pad must be smaller than stride");
        // fan-in seen by each output pixel
        he_normal(weight_.value, std::max<std::size_t>(1, in_ch * kernel * kernel / (stride * stride)), rng);
    }

    void collect(ParamRefs<T>& refs, const std::string& prefix) {
        refs.add(weight_, prefix + "weight");
        refs.add(bias_, prefix + "bias");
    }

    std::size_t out_size(std::size_t n) const { return (n - 1) * s_ + k_ + op_ - 2 * p_; }

    Tensor<T> forward(const Tensor<T>& x) {
        require_rank4_channels(x.shape(), in_, "ConvTranspose2d");
        input_ = x;
        const auto g = geometry(x.dim(2), x.dim(3));
        Tensor<T> y({x.dim(0), out_, g.height, g.width});
        std::vector<T> col(g.rows() * g.cols());
        ConstMatMap<T> w(weight_.value.data(), in_, g.rows());
        for (std::size_t n = 0; n < x.dim(0); ++n) {
            ConstMatMap<T> xin(x.sample(n).data(), in_, g.cols());
            MatMap<T>(col.data(), g.rows(), g.cols()).noalias() = w.transpose() * xin;
            T* out = y.sample(n).data();
            col2im(col.data(), g, out);
            const std::size_t plane = g.height * g.width;
            for (std::size_t o = 0; o < out_; ++o)
                for (std::size_t i = 0; i < plane; ++i) out[o * plane + i] += bias_.value[o];
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const auto g = geometry(input_.dim(2), input_.dim(3));
        Tensor<T> dx(input_.shape());
        std::vector<T> col(g.rows() * g.cols());
        ConstMatMap<T> w(weight_.value.data(), in_, g.rows());
        MatMap<T> dw(weight_.grad.data(), in_, g.rows());
        const std::size_t plane = g.height * g.width;
        for (std::size_t n = 0; n < input_.dim(0); ++n) {
            const T* d = dy.sample(n).data();
            for (std::size_t o = 0; o < out_; ++o)
                for (std::size_t i = 0; i < plane; ++i) bias_.grad[o] += d[o * plane + i];
            im2col(d, g, col.data());
            ConstMatMap<T> cm(col.data(), g.rows(), g.cols());
            ConstMatMap<T> xin(input_.sample(n).data(), in_, g.cols());
            dw.noalias() += xin * cm.transpose();
            MatMap<T>(dx.sample(n).data(), in_, g.cols()).noalias() = w * cm;
        }
        return dx;
    }

    Param<T>& weight() { return weight_; }

private:
    // The unfolded image is the output; kernel positions map onto the input grid.
    ConvGeometry geometry(std::size_t h, std::size_t w) const {
        return {out_, out_size(h), out_size(w), k_, s_, p_, h, w};
    }

    std::size_t in_ = 0, out_ = 0, k_ = 1, s_ = 1, p_ = 0, op_ = 0;
    Param<T> weight_, bias_;
    Tensor<T> input_;
};

// Per-channel batch normalization over (N, H, W).
template <std::floating_point T>
class BatchNorm2d {
public:
    BatchNorm2d() = default;
    explicit BatchNorm2d(std::size_t channels, double momentum = 0.1, double eps = 1e-5)
        : c_(channels), momentum_(momentum), eps_(eps), gamma_({channels}), beta_({channels}),
          running_mean_{"", Tensor<T>({channels}, T{0})}, running_var_{"", Tensor<T>({channels}, T{1})} {
        gamma_.value.fill(T{1});
    }

    void collect(ParamRefs<T>& refs, const std::string& prefix) {
        refs.add(gamma_, prefix + "gamma");
        refs.add(beta_, prefix + "beta");
        refs.add(running_mean_, prefix + "running_mean");
        refs.add(running_var_, prefix + "running_var");
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) {
        require_rank4_channels(x.shape(), c_, "BatchNorm2d");
        train_ = train;
        const std::size_t n = x.dim(0), plane = x.dim(2) * x.dim(3);
        const std::size_t m = n * plane;
        xhat_ = Tensor<T>(x.shape());
        invstd_.assign(c_, T{0});
        Tensor<T> y(x.shape());
        for (std::size_t c = 0; c < c_; ++c) {
            double mean, var;
            if (train) {
                double s = 0, ss = 0;
                for (std::size_t b = 0; b < n; ++b) {
                    const T* p = x.data() + (b * c_ + c) * plane;
                    for (std::size_t i = 0; i < plane; ++i) s += p[i];
                }
                mean = s / static_cast<double>(m);
                for (std::size_t b = 0; b < n; ++b) {
                    const T* p = x.data() + (b * c_ + c) * plane;
                    for (std::size_t i = 0; i < plane; ++i) ss += (p[i] - mean) * (p[i] - mean);
                }
                var = ss / static_cast<double>(m);
                const double unbiased = m > 1 ? ss / static_cast<double>(m - 1) : var;
                running_mean_.value[c] =
                    static_cast<T>((1 - momentum_) * running_mean_.value[c] + momentum_ * mean);
                running_var_.value[c] =
                    static_cast<T>((1 - momentum_) * running_var_.value[c] + momentum_ * unbiased);
            } else {
                mean = running_mean_.value[c];
                var = running_var_.value[c];
            }
            const double inv = 1.0 / std::sqrt(var + eps_);
            invstd_[c] = static_cast<T>(inv);
            for (std::size_t b = 0; b < n; ++b) {
                const std::size_t off = (b * c_ + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const T h = static_cast<T>((x[off + i] - mean) * inv);
                    xhat_[off + i] = h;
                    y[off + i] = gamma_.value[c] * h + beta_.value[c];
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const std::size_t n = dy.dim(0), plane = dy.dim(2) * dy.dim(3);
        const double m = static_cast<double>(n * plane);
        Tensor<T> dx(dy.shape());
        for (std::size_t c = 0; c < c_; ++c) {
            double sum_dy = 0, sum_dy_xhat = 0;
            for (std::size_t b = 0; b < n; ++b) {
                const std::size_t off = (b * c_ + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    sum_dy += dy[off + i];
                    sum_dy_xhat += dy[off + i] * xhat_[off + i];
                }
            }
            gamma_.grad[c] += static_cast<T>(sum_dy_xhat);
            beta_.grad[c] += static_cast<T>(sum_dy);
            const double g = gamma_.value[c], inv = invstd_[c];
            for (std::size_t b = 0; b < n; ++b) {
                const std::size_t off = (b * c_ + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    if (train_)
                        dx[off + i] = static_cast<T>(g * inv / m *
                                                     (m * dy[off + i] - sum_dy - xhat_[off + i] * sum_dy_xhat));
                    else
                        dx[off + i] = static_cast<T>(g * inv * dy[off + i]);
                }
            }
        }
        return dx;
    }

private:
    std::size_t c_ = 0;
    double momentum_ = 0.1, eps_ = 1e-5;
    Param<T> gamma_, beta_;
    Buffer<T> running_mean_, running_var_;
    Tensor<T> xhat_;
    std::vector<T> invstd_;
    bool train_ = true;
};

// Fully connected layer on [N x in].
template <std::floating_point T>
class Linear {
public:
    Linear() = default;
    Linear(std::size_t in, std::size_t out, Rng& rng) : in_(in), out_(out), weight_({out, in}), bias_({out}) {
        he_normal(weight_.value, in, rng);
    }

    void collect(ParamRefs<T>& refs, const std::string& prefix) {
        refs.add(weight_, prefix + "weight");
        refs.add(bias_, prefix + "bias");
    }

    Tensor<T> forward(const Tensor<T>& x) {
        if (x.rank() != 2 || x.dim(1) != in_)
            throw ArgumentError("Linear: expected [N x " + std::to_string(in_) + "], got " + shape_str(x.shape()));
        input_ = x;
        Tensor<T> y({x.dim(0), out_});
        MatMap<T> ym(y.data(), x.dim(0), out_);
        ym.noalias() = ConstMatMap<T>(x.data(), x.dim(0), in_) *
                       ConstMatMap<T>(weight_.value.data(), out_, in_).transpose();
        ym.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias_.value.data(), out_);
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const std::size_t n = input_.dim(0);
        ConstMatMap<T> d(dy.data(), n, out_);
        MatMap<T>(weight_.grad.data(), out_, in_).noalias() += d.transpose() * ConstMatMap<T>(input_.data(), n, in_);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t o = 0; o < out_; ++o) bias_.grad[o] += dy[r * out_ + o];
        Tensor<T> dx(input_.shape());
        MatMap<T>(dx.data(), n, in_).noalias() = d * ConstMatMap<T>(weight_.value.data(), out_, in_);
        return dx;
    }

    Param<T>& weight() { return weight_; }
    Param<T>& bias() { return bias_; }

private:
    std::size_t in_ = 0, out_ = 0;
    Param<T> weight_, bias_;
    Tensor<T> input_;
};

template <std::floating_point T>
class ReLU {
public:
    Tensor<T> forward(const Tensor<T>& x) {
        Tensor<T> y = x;
        mask_.assign(x.size(), 0);
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (y[i] > T{0}) mask_[i] = 1;
            else y[i] = T{0};
        }
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i)
            if (!mask_[i]) dx[i] = T{0};
        return dx;
    }

private:
    std::vector<unsigned char> mask_;
};

template <std::floating_point T>
class Sigmoid {
public:
    Tensor<T> forward(const Tensor<T>& x) {
        out_ = x;
        for (auto& v : out_.vec()) v = T{1} / (T{1} + std::exp(-v));
        return out_;
    }
    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= out_[i] * (T{1} - out_[i]);
        return dx;
    }

private:
    Tensor<T> out_;
};

// Row-wise softmax on [N x K].
template <std::floating_point T>
class Softmax {
public:
    Tensor<T> forward(const Tensor<T>& x) {
        if (x.rank() != 2) throw ArgumentError("Softmax expects rank 2, got " + shape_str(x.shape()));
        out_ = x;
        for (std::size_t n = 0; n < x.dim(0); ++n) {
            auto row = out_.sample(n);
            const T mx = *std::max_element(row.begin(), row.end());
            double z = 0;
            for (auto& v : row) {
                v = std::exp(v - mx);
                z += v;
            }
            for (auto& v : row) v = static_cast<T>(v / z);
        }
        return out_;
    }
    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx(dy.shape());
        for (std::size_t n = 0; n < dy.dim(0); ++n) {
            auto p = out_.sample(n);
            auto g = dy.sample(n);
            double dot = 0;
            for (std::size_t j = 0; j < p.size(); ++j) dot += static_cast<double>(p[j]) * g[j];
            auto d = dx.sample(n);
            for (std::size_t j = 0; j < p.size(); ++j) d[j] = static_cast<T>(p[j] * (g[j] - dot));
        }
        return dx;
    }

private:
    Tensor<T> out_;
};

}  // namespace semcom::nn
