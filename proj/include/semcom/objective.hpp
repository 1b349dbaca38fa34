#pragma once

// Training losses:
//   reconstruction = (1 - beta) * MSE(s, v) + beta * (1 - SSIM(s, v))
//   total          = alpha * reconstruction + (1 - alpha) * CE(labels, probs)
// All reductions over the batch are arithmetic means.

#include <cmath>
#include <string>
#include <vector>

#include "semcom/ssim.hpp"
#include "semcom/tensor.hpp"

namespace semcom {

struct LossWeights {
    double alpha = 0.75;
    double beta = 0.25;

    void validate() const {
        if (!(alpha >= 0 && alpha <= 1)) throw ArgumentError("alpha must lie in [0,1], got " + std::to_string(alpha));
        if (!(beta >= 0 && beta <= 1)) throw ArgumentError("beta must lie in [0,1], got " + std::to_string(beta));
    }
    bool operator==(const LossWeights&) const = default;
};

// Probabilities are clamped to this before taking the log.
inline constexpr double kProbabilityFloor = 1e-12;

template <std::floating_point T>
double mse(const Tensor<T>& s, const Tensor<T>& v, Tensor<T>* grad_v = nullptr) {
    s.require_same_shape(v, "mse");
    if (s.empty()) throw ArgumentError("mse of empty tensors");
    const double inv = 1.0 / static_cast<double>(s.size());
    double acc = 0;
    if (grad_v) *grad_v = Tensor<T>(v.shape());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double d = static_cast<double>(v[i]) - s[i];
        acc += d * d;
        if (grad_v) (*grad_v)[i] = static_cast<T>(2 * d * inv);
    }
    return acc * inv;
}

// Per-sample MSE of a batch (leading dimension = batch).
template <std::floating_point T>
std::vector<double> mse_per_sample(const Tensor<T>& s, const Tensor<T>& v) {
    s.require_same_shape(v, "mse");
    std::vector<double> out(s.dim(0));
    const std::size_t m = s.stride0();
    for (std::size_t n = 0; n < out.size(); ++n) {
        double acc = 0;
        for (std::size_t i = 0; i < m; ++i) {
            const double d = static_cast<double>(v[n * m + i]) - s[n * m + i];
            acc += d * d;
        }
        out[n] = acc / static_cast<double>(m);
    }
    return out;
}

template <std::floating_point T>
double classification_cross_entropy(const Tensor<T>& probs, const std::vector<int>& labels,
                                    Tensor<T>* grad_probs = nullptr) {
    if (probs.rank() != 2 || probs.dim(0) != labels.size())
        throw ArgumentError("cross entropy: probs " + shape_str(probs.shape()) + " vs " +
                            std::to_string(labels.size()) + " labels");
    const std::size_t n = labels.size(), k = probs.dim(1);
    if (grad_probs) *grad_probs = Tensor<T>(probs.shape());
    double acc = 0;
    for (std::size_t b = 0; b < n; ++b) {
        if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= k)
            throw ArgumentError("label " + std::to_string(labels[b]) + " out of range");
        const double p = probs[b * k + static_cast<std::size_t>(labels[b])];
        acc -= std::log(std::max(p, kProbabilityFloor));
        if (grad_probs && p > kProbabilityFloor)
            (*grad_probs)[b * k + static_cast<std::size_t>(labels[b])] = static_cast<T>(-1.0 / (p * static_cast<double>(n)));
    }
    return acc / static_cast<double>(n);
}

struct ReconstructionTerms {
    double mse = 0;
    double ssim = 1;
    double loss = 0;
};

// Cached Gaussian window for a config.
class SsimKernel {
public:
    explicit SsimKernel(const SsimConfig& cfg = {}) : cfg_(cfg), window_(gaussian_window(cfg)) {}
    const SsimConfig& config() const { return cfg_; }
    const SsimWindow& window() const { return window_; }

private:
    SsimConfig cfg_;
    SsimWindow window_;
};

// With grad_v given, it receives d loss / d v. SSIM is skipped entirely at
// beta = 0 unless need_ssim_value is set (it then still reports the metric).
template <std::floating_point T>
ReconstructionTerms reconstruction_loss(const Tensor<T>& s, const Tensor<T>& v, double beta, const SsimKernel& kernel,
                                        Tensor<T>* grad_v = nullptr, bool need_ssim_value = true) {
    if (!(beta >= 0 && beta <= 1)) throw ArgumentError("beta must lie in [0,1]");
    ReconstructionTerms t;
    Tensor<T> g_mse, g_ssim;
    t.mse = mse(s, v, grad_v ? &g_mse : nullptr);
    if (beta > 0 || need_ssim_value)
        t.ssim = ssim_batch(s, v, kernel.window(), (grad_v && beta > 0) ? &g_ssim : nullptr);
    t.loss = (1 - beta) * t.mse + beta * (1 - t.ssim);
    if (grad_v) {
        *grad_v = Tensor<T>(v.shape());
        for (std::size_t i = 0; i < v.size(); ++i) {
            double g = (1 - beta) * g_mse[i];
            if (beta > 0) g -= beta * g_ssim[i];
            (*grad_v)[i] = static_cast<T>(g);
        }
    }
    return t;
}

template <std::floating_point T>
double reconstruction_loss_value(const Tensor<T>& s, const Tensor<T>& v, double beta, const SsimConfig& cfg) {
    return reconstruction_loss(s, v, beta, SsimKernel(cfg), static_cast<Tensor<T>*>(nullptr), beta > 0).loss;
}

template <std::floating_point T>
struct LossBreakdown {
    double total = 0;
    ReconstructionTerms reconstruction;
    double cross_entropy = 0;
    Tensor<T> grad_v;      // d total / d v
    Tensor<T> grad_probs;  // d total / d probs
};

template <std::floating_point T>
LossBreakdown<T> total_loss(const Tensor<T>& s, const Tensor<T>& v, const Tensor<T>& probs,
                            const std::vector<int>& labels, const LossWeights& weights, const SsimKernel& kernel,
                            bool with_gradients = true) {
    weights.validate();
    LossBreakdown<T> out;
    out.reconstruction = reconstruction_loss(s, v, weights.beta, kernel, with_gradients ? &out.grad_v : nullptr);
    out.cross_entropy = classification_cross_entropy(probs, labels, with_gradients ? &out.grad_probs : nullptr);
    out.total = weights.alpha * out.reconstruction.loss + (1 - weights.alpha) * out.cross_entropy;
    if (with_gradients) {
        out.grad_v *= static_cast<T>(weights.alpha);
        out.grad_probs *= static_cast<T>(1 - weights.alpha);
    }
    return out;
}

}  // namespace semcom
