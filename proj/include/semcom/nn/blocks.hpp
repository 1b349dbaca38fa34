#pragma once

#include <optional>
#include <string>

#include "semcom/nn/layers.hpp"

namespace semcom::nn {

// Pre-activation residual block: (BN, ReLU, conv3x3) twice plus a shortcut.
// The shortcut is a strided 1x1 projection whenever width or resolution
// changes.
template <std::floating_point T>
class ResidualBlock {
public:
    ResidualBlock() = default;
    ResidualBlock(std::size_t in_ch, std::size_t out_ch, std::size_t stride, Rng& rng)
        : bn1_(in_ch), conv1_(in_ch, out_ch, 3, stride, 1, rng), bn2_(out_ch), conv2_(out_ch, out_ch, 3, 1, 1, rng) {
        if (in_ch != out_ch || stride != 1) shortcut_.emplace(in_ch, out_ch, 1, stride, 0, rng);
    }

    void collect(ParamRefs<T>& refs, const std::string& prefix) {
        bn1_.collect(refs, prefix + "bn1.");
        conv1_.collect(refs, prefix + "conv1.");
        bn2_.collect(refs, prefix + "bn2.");
        conv2_.collect(refs, prefix + "conv2.");
        if (shortcut_) shortcut_->collect(refs, prefix + "shortcut.");
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) {
        Tensor<T> h = conv1_.forward(relu1_.forward(bn1_.forward(x, train)));
        h = conv2_.forward(relu2_.forward(bn2_.forward(h, train)));
        h += shortcut_ ? shortcut_->forward(x) : x;
        return h;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> d = bn2_.backward(relu2_.backward(conv2_.backward(dy)));
        d = bn1_.backward(relu1_.backward(conv1_.backward(d)));
        d += shortcut_ ? shortcut_->backward(dy) : dy;
        return d;
    }

private:
    BatchNorm2d<T> bn1_;
    ReLU<T> relu1_;
    Conv2d<T> conv1_;
    BatchNorm2d<T> bn2_;
    ReLU<T> relu2_;
    Conv2d<T> conv2_;
    std::optional<Conv2d<T>> shortcut_;
};

// Upsampling counterpart: the first convolution is a stride-2 transposed
// convolution doubling H and W, the shortcut a stride-2 transposed 1x1.
template <std::floating_point T>
class TransposedResidualBlock {
public:
    TransposedResidualBlock() = default;
    TransposedResidualBlock(std::size_t in_ch, std::size_t out_ch, Rng& rng)
        : bn1_(in_ch), conv1_(in_ch, out_ch, 3, 2, 1, 1, rng), bn2_(out_ch), conv2_(out_ch, out_ch, 3, 1, 1, rng),
          shortcut_(in_ch, out_ch, 1, 2, 0, 1, rng) {}

    void collect(ParamRefs<T>& refs, const std::string& prefix) {
        bn1_.collect(refs, prefix + "bn1.");
        conv1_.collect(refs, prefix + "conv1.");
        bn2_.collect(refs, prefix + "bn2.");
        conv2_.collect(refs, prefix + "conv2.");
        shortcut_.collect(refs, prefix + "shortcut.");
    }

    Tensor<T> forward(const Tensor<T>& x, bool train) {
        Tensor<T> h = conv1_.forward(relu1_.forward(bn1_.forward(x, train)));
        h = conv2_.forward(relu2_.forward(bn2_.forward(h, train)));
        h += shortcut_.forward(x);
        return h;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> d = bn2_.backward(relu2_.backward(conv2_.backward(dy)));
        d = bn1_.backward(relu1_.backward(conv1_.backward(d)));
        d += shortcut_.backward(dy);
        return d;
    }

private:
    BatchNorm2d<T> bn1_;
    ReLU<T> relu1_;
    ConvTranspose2d<T> conv1_;
    BatchNorm2d<T> bn2_;
    ReLU<T> relu2_;
    Conv2d<T> conv2_;
    ConvTranspose2d<T> shortcut_;
};

}  // namespace semcom::nn
