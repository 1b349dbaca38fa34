#pragma once

// Windowed structural similarity with its exact gradient.
//
// For a window with weights w (summing to 1) placed at position p:
//   mu_s = sum w s,  mu_v = sum w v,
//   var_s = sum w s^2 - mu_s^2,  var_v = sum w v^2 - mu_v^2,
//   cov = sum w s v - mu_s mu_v,
//   l = (2 mu_s mu_v + c1) / (mu_s^2 + mu_v^2 + c1)
//   g = (2 cov + c2) / (var_s + var_v + c2)
// SSIM is the mean of l*g over all positions where the window fits entirely
// inside the image ("valid" placement), then over channels.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "semcom/tensor.hpp"

namespace semcom {

struct SsimConfig {
    int window_size = 11;
    double window_sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;

    double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
    double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }

    void validate() const {
        if (window_size < 3 || window_size % 2 == 0)
            throw ArgumentError("ssim window_size must be odd and >= 3, got " + std::to_string(window_size));
        if (!(window_sigma > 0)) throw ArgumentError("ssim window_sigma must be positive");
        if (!(k1 > 0) || !(k2 > 0)) throw ArgumentError("ssim k1 and k2 must be positive");
        if (!(dynamic_range > 0)) throw ArgumentError("ssim dynamic_range must be positive");
    }

    bool operator==(const SsimConfig&) const = default;
};

// 2-d window weights, row-major, summing to one.
struct SsimWindow {
    std::size_t height = 0, width = 0;
    std::vector<double> weights;
    double c1 = 1e-4, c2 = 9e-4;
};

inline SsimWindow gaussian_window(const SsimConfig& cfg) {
    cfg.validate();
    const auto k = static_cast<std::size_t>(cfg.window_size);
    std::vector<double> g(k);
    double sum = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const double x = static_cast<double>(i) - (static_cast<double>(k) - 1) / 2;
        g[i] = std::exp(-x * x / (2 * cfg.window_sigma * cfg.window_sigma));
        sum += g[i];
    }
    SsimWindow w{k, k, std::vector<double>(k * k), cfg.c1(), cfg.c2()};
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) w.weights[i * k + j] = g[i] * g[j] / (sum * sum);
    return w;
}

// Uniform weights over an h x w patch; with the patch equal to the image
// this is a single window covering every pixel.
inline SsimWindow rectangular_window(std::size_t h, std::size_t w, const SsimConfig& cfg = {}) {
    if (h == 0 || w == 0) throw ArgumentError("rectangular window must be non-empty");
    return {h, w, std::vector<double>(h * w, 1.0 / static_cast<double>(h * w)), cfg.c1(), cfg.c2()};
}

// SSIM of one HWC image pair, optionally with d SSIM / d v written to grad_v.
// s and v must both hold h*w*c values.
template <std::floating_point T>
double ssim_single(const T* s, const T* v, std::size_t h, std::size_t w, std::size_t c, const SsimWindow& win,
                   T* grad_v = nullptr, double grad_scale = 1.0) {
    if (h < win.height || w < win.width)
        throw ArgumentError("image " + std::to_string(h) + "x" + std::to_string(w) + " smaller than ssim window " +
                            std::to_string(win.height) + "x" + std::to_string(win.width));
    const std::size_t ph = h - win.height + 1, pw = w - win.width + 1;
    const double inv_count = 1.0 / static_cast<double>(ph * pw * c);
    const double c1 = win.c1, c2 = win.c2;
    double total = 0;
    for (std::size_t ch = 0; ch < c; ++ch) {
        auto at = [&](const T* img, std::size_t i, std::size_t j) -> double { return img[(i * w + j) * c + ch]; };
        for (std::size_t pi = 0; pi < ph; ++pi)
            for (std::size_t pj = 0; pj < pw; ++pj) {
                double ms = 0, mv = 0, ess = 0, evv = 0, esv = 0;
                for (std::size_t a = 0; a < win.height; ++a)
                    for (std::size_t b = 0; b < win.width; ++b) {
                        const double wt = win.weights[a * win.width + b];
                        const double x = at(s, pi + a, pj + b), y = at(v, pi + a, pj + b);
                        ms += wt * x;
                        mv += wt * y;
                        ess += wt * x * x;
                        evv += wt * y * y;
                        esv += wt * x * y;
                    }
                const double var_s = ess - ms * ms, var_v = evv - mv * mv, cov = esv - ms * mv;
                const double a1 = 2 * ms * mv + c1, b1 = ms * ms + mv * mv + c1;
                const double a2 = 2 * cov + c2, b2 = var_s + var_v + c2;
                const double l = a1 / b1, g = a2 / b2;
                total += l * g;
                if (grad_v) {
                    const double dl_dmv = (2 * ms * b1 - a1 * 2 * mv) / (b1 * b1);
                    const double dg_dcov = 2 / b2;
                    const double dg_dvar = -a2 / (b2 * b2);
                    const double d_mv = dl_dmv * g + l * (dg_dcov * (-ms) + dg_dvar * (-2 * mv));
                    const double d_evv = l * dg_dvar;
                    const double d_esv = l * dg_dcov;
                    const double k = grad_scale * inv_count;
                    for (std::size_t a = 0; a < win.height; ++a)
                        for (std::size_t b = 0; b < win.width; ++b) {
                            const double wt = win.weights[a * win.width + b];
                            const std::size_t idx = ((pi + a) * w + pj + b) * c + ch;
                            grad_v[idx] += static_cast<T>(k * wt * (d_mv + 2 * v[idx] * d_evv + s[idx] * d_esv));
                        }
                }
            }
    }
    return total * inv_count;
}

namespace detail {

template <std::floating_point T>
void require_image_pair(const Tensor<T>& s, const Tensor<T>& v, const char* what) {
    if (s.shape() != v.shape())
        throw ArgumentError(std::string(what) + ": shape mismatch " + shape_str(s.shape()) + " vs " + shape_str(v.shape()));
    if (s.rank() != 4) throw ArgumentError(std::string(what) + ": expected [batch x H x W x C], got " + shape_str(s.shape()));
}

}  // namespace detail

// Per-image SSIM values of an NHWC batch.
template <std::floating_point T>
std::vector<double> ssim_per_image(const Tensor<T>& s, const Tensor<T>& v, const SsimWindow& win) {
    detail::require_image_pair(s, v, "ssim");
    std::vector<double> out(s.dim(0));
    for (std::size_t n = 0; n < s.dim(0); ++n)
        out[n] = ssim_single(s.sample(n).data(), v.sample(n).data(), s.dim(1), s.dim(2), s.dim(3), win);
    return out;
}

// Batch-mean SSIM; when grad_v is given it receives d mean / d v.
template <std::floating_point T>
double ssim_batch(const Tensor<T>& s, const Tensor<T>& v, const SsimWindow& win, Tensor<T>* grad_v = nullptr) {
    detail::require_image_pair(s, v, "ssim");
    const std::size_t n = s.dim(0);
    if (grad_v) *grad_v = Tensor<T>(v.shape());
    double total = 0;
    for (std::size_t b = 0; b < n; ++b)
        total += ssim_single(s.sample(b).data(), v.sample(b).data(), s.dim(1), s.dim(2), s.dim(3), win,
                             grad_v ? grad_v->sample(b).data() : nullptr, 1.0 / static_cast<double>(n));
    return total / static_cast<double>(n);
}

template <std::floating_point T>
double ssim(const Tensor<T>& s, const Tensor<T>& v, const SsimConfig& cfg) {
    return ssim_batch(s, v, gaussian_window(cfg));
}

}  // namespace semcom
