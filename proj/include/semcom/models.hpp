#pragma once

// The three networks: one encoder per user, the full-image reconstruction
// decoder and the classification decoder.
//
//   encoder:        16x16x3 -> conv3x3(16) -> 6 pre-activation residual blocks
//                   (16,16 | 32,32 | 64,64; stride 2 entering each new width)
//                   -> BN, ReLU -> flatten(1024) -> FC(uses) -> power norm
//   recon decoder:  y -> FC(1024) -> FC(4096) -> 8x8x64 -> residual(64)
//                   -> up-residual(32) -> up-residual(16) -> residual(16)
//                   -> BN, ReLU -> transposed conv3x3(3) -> sigmoid
//   class decoder:  y -> FC(256) -> FC(128) -> FC(10) -> softmax

#include <array>
#include <string>
#include <vector>

#include "semcom/channel.hpp"
#include "semcom/data.hpp"
#include "semcom/nn/blocks.hpp"
#include "semcom/nn/layers.hpp"

namespace semcom {

inline constexpr std::size_t kQuadrantSize = kImageSize / 2;

template <std::floating_point T>
class Encoder {
public:
    Encoder() = default;
    Encoder(std::size_t channel_uses, Rng& rng)
        : uses_(channel_uses), stem_(kImageChannels, 16, 3, 1, 1, rng),
          blocks_{nn::ResidualBlock<T>(16, 16, 1, rng), nn::ResidualBlock<T>(16, 16, 1, rng),
                  nn::ResidualBlock<T>(16, 32, 2, rng), nn::ResidualBlock<T>(32, 32, 1, rng),
                  nn::ResidualBlock<T>(32, 64, 2, rng), nn::ResidualBlock<T>(64, 64, 1, rng)},
          bn_(64), fc_(64 * 4 * 4, channel_uses, rng) {}

    void collect(nn::ParamRefs<T>& refs, const std::string& prefix) {
        stem_.collect(refs, prefix + "stem.");
        for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(refs, prefix + "block" + std::to_string(i) + ".");
        bn_.collect(refs, prefix + "bn.");
        fc_.collect(refs, prefix + "fc.");
    }

    // [batch x 16 x 16 x 3] in [0,1] -> power-normalized [batch x uses].
    Tensor<T> forward(const UserObservation<T>& obs, bool train) {
        const auto& s = obs.pixels.shape();
        if (s.size() != 4 || s[1] != kQuadrantSize || s[2] != kQuadrantSize || s[3] != kImageChannels)
            throw ArgumentError("encoder expects [batch x 16 x 16 x 3], got " + shape_str(s));
        return forward_nchw(nhwc_to_nchw(obs.pixels), train);
    }

    Tensor<T> forward_nchw(const Tensor<T>& x, bool train) {
        Tensor<T> h = stem_.forward(x);
        for (auto& b : blocks_) h = b.forward(h, train);
        h = relu_.forward(bn_.forward(h, train));
        flat_shape_ = h.shape();
        raw_ = fc_.forward(std::move(h).reshaped({flat_shape_[0], shape_numel(flat_shape_) / flat_shape_[0]}));
        return power_normalize(raw_);
    }

    // Accumulates parameter gradients; returns d loss / d input (NCHW).
    Tensor<T> backward(const Tensor<T>& grad_codeword) {
        Tensor<T> g = fc_.backward(power_normalize_backward(raw_, grad_codeword));
        g = bn_.backward(relu_.backward(std::move(g).reshaped(flat_shape_)));
        for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = it->backward(g);
        return stem_.backward(g);
    }

    std::size_t channel_uses() const { return uses_; }

private:
    std::size_t uses_ = 0;
    nn::Conv2d<T> stem_;
    std::array<nn::ResidualBlock<T>, 6> blocks_;
    nn::BatchNorm2d<T> bn_;
    nn::ReLU<T> relu_;
    nn::Linear<T> fc_;
    Shape flat_shape_;
    Tensor<T> raw_;
};

template <std::floating_point T>
class ReconDecoder {
public:
    ReconDecoder() = default;
    ReconDecoder(std::size_t total_uses, Rng& rng)
        : in_(total_uses), fc1_(total_uses, 1024, rng), fc2_(1024, 64 * 8 * 8, rng), res1_(64, 64, 1, rng),
          up1_(64, 32, rng), up2_(32, 16, rng), res2_(16, 16, 1, rng), bn_(16),
          out_(16, kImageChannels, 3, 1, 1, 0, rng) {}

    void collect(nn::ParamRefs<T>& refs, const std::string& prefix) {
        fc1_.collect(refs, prefix + "fc1.");
        fc2_.collect(refs, prefix + "fc2.");
        res1_.collect(refs, prefix + "res1.");
        up1_.collect(refs, prefix + "up1.");
        up2_.collect(refs, prefix + "up2.");
        res2_.collect(refs, prefix + "res2.");
        bn_.collect(refs, prefix + "bn.");
        out_.collect(refs, prefix + "out.");
    }

    // [batch x uses] -> [batch x 32 x 32 x 3] in [0,1].
    Tensor<T> forward(const Tensor<T>& y, bool train) {
        if (y.rank() != 2 || y.dim(1) != in_)
            throw ArgumentError("reconstruction decoder expects [batch x " + std::to_string(in_) + "], got " +
                                shape_str(y.shape()));
        const std::size_t n = y.dim(0);
        Tensor<T> h = relu2_.forward(fc2_.forward(relu1_.forward(fc1_.forward(y))));
        h.reshape({n, 64, 8, 8});
        h = res1_.forward(h, train);
        h = up1_.forward(h, train);
        h = up2_.forward(h, train);
        h = res2_.forward(h, train);
        h = sigmoid_.forward(out_.forward(relu3_.forward(bn_.forward(h, train))));
        return nchw_to_nhwc(h);
    }

    Tensor<T> backward(const Tensor<T>& grad_image) {
        Tensor<T> g = out_.backward(sigmoid_.backward(nhwc_to_nchw(grad_image)));
        g = bn_.backward(relu3_.backward(g));
        g = res2_.backward(g);
        g = up2_.backward(g);
        g = up1_.backward(g);
        g = res1_.backward(g);
        g.reshape({g.dim(0), 64 * 8 * 8});
        return fc1_.backward(relu1_.backward(fc2_.backward(relu2_.backward(g))));
    }

private:
    std::size_t in_ = 0;
    nn::Linear<T> fc1_;
    nn::ReLU<T> relu1_;
    nn::Linear<T> fc2_;
    nn::ReLU<T> relu2_;
    nn::ResidualBlock<T> res1_;
    nn::TransposedResidualBlock<T> up1_, up2_;
    nn::ResidualBlock<T> res2_;
    nn::BatchNorm2d<T> bn_;
    nn::ReLU<T> relu3_;
    nn::ConvTranspose2d<T> out_;
    nn::Sigmoid<T> sigmoid_;
};

template <std::floating_point T>
class ClassDecoder {
public:
    ClassDecoder() = default;
    ClassDecoder(std::size_t total_uses, Rng& rng)
        : in_(total_uses), fc1_(total_uses, 256, rng), fc2_(256, 128, rng), fc3_(128, kNumClasses, rng) {}

    void collect(nn::ParamRefs<T>& refs, const std::string& prefix) {
        fc1_.collect(refs, prefix + "fc1.");
        fc2_.collect(refs, prefix + "fc2.");
        fc3_.collect(refs, prefix + "fc3.");
    }

    // [batch x uses] -> class probabilities [batch x 10].
    Tensor<T> forward(const Tensor<T>& y) {
        if (y.rank() != 2 || y.dim(1) != in_)
            throw ArgumentError("classification decoder expects [batch x " + std::to_string(in_) + "], got " +
                                shape_str(y.shape()));
        return softmax_.forward(fc3_.forward(relu2_.forward(fc2_.forward(relu1_.forward(fc1_.forward(y))))));
    }

    Tensor<T> backward(const Tensor<T>& grad_probs) {
        return fc1_.backward(relu1_.backward(fc2_.backward(relu2_.backward(fc3_.backward(softmax_.backward(grad_probs))))));
    }

private:
    std::size_t in_ = 0;
    nn::Linear<T> fc1_;
    nn::ReLU<T> relu1_;
    nn::Linear<T> fc2_;
    nn::ReLU<T> relu2_;
    nn::Linear<T> fc3_;
    nn::Softmax<T> softmax_;
};

template <std::floating_point T>
std::size_t parameter_count(const nn::ParamRefs<T>& refs) {
    std::size_t n = 0;
    for (const auto* p : refs.params) n += p->value.size();
    return n;
}

}  // namespace semcom
