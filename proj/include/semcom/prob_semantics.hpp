#pragma once

// Decoder densities behind the reconstruction losses.
//
//   q'(s|y)  = N(s; mu, sigma^2 I)                      -> MSE
//   q''(s|y) = d * exp(SSIM(s, gamma) - 1) on [0,1]^L    -> 1 - SSIM
//   q(s|y)   = (1 - beta) q' + beta q''  with mu = gamma = v
//
// d is constant in the decoder parameters for a fixed window, so training
// never needs it; it is estimated here by Monte Carlo for tiny images only.

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "semcom/random.hpp"
#include "semcom/ssim.hpp"

namespace semcom {

// Stand-in for log(0) outside the SSIM density's support.
inline constexpr double kLogZero = -1e30;
inline constexpr std::size_t kMaxOracleDimension = 64;
inline constexpr std::size_t kMinNormalizerSamples = 10000;

class NormalizerNotEstimated : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct GaussianDecoderDensity {
    std::vector<double> mean;
    double variance = 1;
};

// An h x w x c image flattened HWC; window defaults to one rectangular
// window over the whole image.
struct SsimDecoderDensity {
    std::vector<double> gamma;
    std::size_t height = 0, width = 0, channels = 1;
    SsimWindow window;
    std::optional<double> log_normalizer;

    static SsimDecoderDensity single_window(std::vector<double> gamma, std::size_t h, std::size_t w, std::size_t c = 1,
                                            const SsimConfig& cfg = {}) {
        if (gamma.size() != h * w * c) throw ArgumentError("gamma length does not match image dimensions");
        return {std::move(gamma), h, w, c, rectangular_window(h, w, cfg), std::nullopt};
    }

    std::size_t dimension() const { return gamma.size(); }
};

inline double gaussian_nll(std::span<const double> s, const GaussianDecoderDensity& q) {
    if (!(q.variance > 0)) throw ArgumentError("gaussian variance must be positive");
    if (s.size() != q.mean.size()) throw ArgumentError("gaussian_nll: dimension mismatch");
    double quad = 0;
    for (std::size_t i = 0; i < s.size(); ++i) quad += (s[i] - q.mean[i]) * (s[i] - q.mean[i]);
    const double L = static_cast<double>(s.size());
    return quad / (2 * q.variance) + 0.5 * L * std::log(2 * std::numbers::pi * q.variance);
}

inline bool in_unit_cube(std::span<const double> s) {
    for (double x : s)
        if (!(x >= 0 && x <= 1)) return false;
    return true;
}

inline double density_ssim(std::span<const double> s, const SsimDecoderDensity& q) {
    if (s.size() != q.dimension()) throw ArgumentError("ssim density: dimension mismatch");
    return ssim_single(s.data(), q.gamma.data(), q.height, q.width, q.channels, q.window);
}

// SSIM(s, gamma) - 1 in [-2, 0], or kLogZero off [0,1]^L.
inline double ssim_exp_log_density_unnormalized(std::span<const double> s, const SsimDecoderDensity& q) {
    if (!in_unit_cube(s)) return kLogZero;
    return density_ssim(s, q) - 1.0;
}

struct NormalizerEstimate {
    double log_d = 0;
    double std_err = 0;  // standard error of log_d (delta method)
};

// d = 1 / integral over [0,1]^L of exp(SSIM - 1); the cube has unit volume so
// the integral is a plain mean over uniform samples.
inline NormalizerEstimate estimate_log_normalizer(const SsimDecoderDensity& q, std::size_t n_samples, Rng& rng) {
    if (q.dimension() > kMaxOracleDimension)
        throw UnsupportedConfiguration("normalizer estimation is an oracle for L <= 64, got L = " +
                                       std::to_string(q.dimension()));
    if (n_samples < kMinNormalizerSamples) throw ArgumentError("normalizer estimation needs at least 10^4 samples");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> s(q.dimension());
    double mean = 0, m2 = 0;
    for (std::size_t k = 0; k < n_samples; ++k) {
        for (double& x : s) x = u(rng);
        const double f = std::exp(density_ssim(s, q) - 1.0);
        const double delta = f - mean;
        mean += delta / static_cast<double>(k + 1);
        m2 += delta * (f - mean);
    }
    const double var = m2 / static_cast<double>(n_samples - 1);
    return {-std::log(mean), std::sqrt(var / static_cast<double>(n_samples)) / mean};
}

// log q(s) for the mixture with shared parameter v. 0 < beta < 1 requires
// ssim_shape.log_normalizer; at beta = 1 a missing normalizer leaves the
// result short by the constant log d (argmax unaffected).
inline double mixture_log_pdf(std::span<const double> s, std::span<const double> v, double beta, double sigma2,
                              const SsimDecoderDensity& ssim_shape) {
    if (!(beta >= 0 && beta <= 1)) throw ArgumentError("beta must lie in [0,1]");
    if (s.size() != v.size()) throw ArgumentError("mixture_log_pdf: dimension mismatch");
    SsimDecoderDensity q2 = ssim_shape;
    q2.gamma.assign(v.begin(), v.end());
    const GaussianDecoderDensity q1{std::vector<double>(v.begin(), v.end()), sigma2};
    if (beta == 0) return -gaussian_nll(s, q1);
    const double log_ssim = ssim_exp_log_density_unnormalized(s, q2);
    if (beta == 1) {
        if (log_ssim == kLogZero) return kLogZero;
        return q2.log_normalizer.value_or(0.0) + log_ssim;
    }
    if (!q2.log_normalizer)
        throw NormalizerNotEstimated("mixture density at 0 < beta < 1 needs the SSIM normalizer; estimate it first");
    const double a = std::log1p(-beta) - gaussian_nll(s, q1);
    if (log_ssim == kLogZero) return a;
    const double b = std::log(beta) + *q2.log_normalizer + log_ssim;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// The mixture's maximizer under parameter sharing is the shared mean itself.
inline std::vector<double> ml_estimate(std::span<const double> v) {
    if (!in_unit_cube(v)) throw ArgumentError("ml_estimate: v must lie in [0,1]^L");
    return {v.begin(), v.end()};
}

}  // namespace semcom
