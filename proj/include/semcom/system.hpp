#pragma once

// Transmitter side (one encoder per user) + AWGN channel + both decoders.

#include <memory>
#include <vector>

#include "semcom/channel.hpp"
#include "semcom/data.hpp"
#include "semcom/models.hpp"

namespace semcom {

template <std::floating_point T>
struct ForwardPass {
    std::vector<Tensor<T>> codewords;  // per user, [batch x uses]
    Tensor<T> received;                // [batch x n_users*uses]
    Tensor<T> reconstruction;          // [batch x 32 x 32 x 3]
    Tensor<T> probs;                   // [batch x 10]
};

enum class Mode { train_all, train_decoders, inference };

template <std::floating_point T>
class SemcomSystem {
public:
    SemcomSystem(const ChannelConfig& channel, std::uint64_t init_seed) : channel_(channel) {
        channel_.validate();
        if (channel_.n_users != static_cast<int>(kSupportedUsers))
            throw UnsupportedConfiguration("only 4 users are supported, got " + std::to_string(channel_.n_users));
        const auto uses = static_cast<std::size_t>(channel_.channel_uses_per_user);
        for (int u = 0; u < channel_.n_users; ++u) {
            Rng rng(derive_seed(init_seed, {0x454e43ULL, static_cast<std::uint64_t>(u)}));
            encoders_.push_back(std::make_unique<Encoder<T>>(uses, rng));
        }
        reinit_recon_decoder(init_seed);
        reinit_class_decoder(init_seed);
    }

    void reinit_recon_decoder(std::uint64_t seed) {
        Rng rng(derive_seed(seed, {0x524543ULL}));
        recon_ = std::make_unique<ReconDecoder<T>>(total_uses(), rng);
    }
    void reinit_class_decoder(std::uint64_t seed) {
        Rng rng(derive_seed(seed, {0x434c53ULL}));
        class_ = std::make_unique<ClassDecoder<T>>(total_uses(), rng);
    }

    std::size_t total_uses() const { return static_cast<std::size_t>(channel_.total_uses()); }
    const ChannelConfig& channel() const { return channel_; }
    Encoder<T>& encoder(std::size_t user) { return *encoders_.at(user); }
    ReconDecoder<T>& recon_decoder() { return *recon_; }
    ClassDecoder<T>& class_decoder() { return *class_; }

    nn::ParamRefs<T> encoder_refs(std::size_t user) {
        nn::ParamRefs<T> refs;
        encoders_.at(user)->collect(refs, "encoder" + std::to_string(user + 1) + ".");
        return refs;
    }
    nn::ParamRefs<T> recon_refs() {
        nn::ParamRefs<T> refs;
        recon_->collect(refs, "recon_decoder.");
        return refs;
    }
    nn::ParamRefs<T> class_refs() {
        nn::ParamRefs<T> refs;
        class_->collect(refs, "class_decoder.");
        return refs;
    }
    nn::ParamRefs<T> all_refs() {
        nn::ParamRefs<T> refs;
        for (std::size_t u = 0; u < encoders_.size(); ++u) append(refs, encoder_refs(u));
        append(refs, recon_refs());
        append(refs, class_refs());
        return refs;
    }
    nn::ParamRefs<T> decoder_refs() {
        nn::ParamRefs<T> refs = recon_refs();
        append(refs, class_refs());
        return refs;
    }

    // Full pipeline. With noise == false the channel is bypassed (perfect
    // channel baseline).
    ForwardPass<T> forward(const Tensor<T>& images, Mode mode, Rng& noise_rng, bool noise = true) {
        ForwardPass<T> out;
        const auto obs = partition_quadrants(images, channel_.n_users);
        const bool train_enc = mode == Mode::train_all;
        const bool train_dec = mode != Mode::inference;
        for (std::size_t u = 0; u < obs.size(); ++u) out.codewords.push_back(encoders_[u]->forward(obs[u], train_enc));
        ChannelConfig cfg = channel_;
        if (!noise) cfg.snr_db = std::numeric_limits<double>::infinity();
        out.received = transmit(out.codewords, cfg, noise_rng);
        out.reconstruction = recon_->forward(out.received, train_dec);
        out.probs = class_->forward(out.received);
        return out;
    }

    // Backpropagates decoder output gradients. An empty tensor marks a branch
    // with exactly zero gradient, which is skipped. Encoders are reached only
    // when into_encoders is set.
    void backward(const Tensor<T>& grad_reconstruction, const Tensor<T>& grad_probs, bool into_encoders) {
        Tensor<T> grad_y;
        if (!grad_reconstruction.empty()) grad_y = recon_->backward(grad_reconstruction);
        if (!grad_probs.empty()) {
            Tensor<T> g = class_->backward(grad_probs);
            if (grad_y.empty()) grad_y = std::move(g);
            else grad_y += g;
        }
        if (!into_encoders || grad_y.empty()) return;
        const auto per_user = split_received_gradient(grad_y, channel_.n_users);
        for (std::size_t u = 0; u < encoders_.size(); ++u) encoders_[u]->backward(per_user[u]);
    }

private:
    static void append(nn::ParamRefs<T>& dst, const nn::ParamRefs<T>& src) {
        dst.params.insert(dst.params.end(), src.params.begin(), src.params.end());
        dst.buffers.insert(dst.buffers.end(), src.buffers.begin(), src.buffers.end());
    }

    ChannelConfig channel_;
    std::vector<std::unique_ptr<Encoder<T>>> encoders_;
    std::unique_ptr<ReconDecoder<T>> recon_;
    std::unique_ptr<ClassDecoder<T>> class_;
};

}  // namespace semcom
