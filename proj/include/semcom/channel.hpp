#pragma once

// Per-user power normalization and the orthogonal AWGN channel.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "semcom/random.hpp"
#include "semcom/tensor.hpp"

namespace semcom {

class DegenerateInput : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct ChannelConfig {
    double snr_db = 3.0;
    int n_users = 4;
    int channel_uses_per_user = 50;
    std::uint64_t noise_seed = 1;

    int total_uses() const { return n_users * channel_uses_per_user; }

    void validate() const {
        if (n_users < 1) throw ArgumentError("n_users must be >= 1");
        if (channel_uses_per_user < 1) throw ArgumentError("channel_uses_per_user must be >= 1");
        if (std::isnan(snr_db)) throw ArgumentError("snr_db is NaN");
    }

    bool operator==(const ChannelConfig&) const = default;
};

inline constexpr double kDegeneratePower = 1e-20;

// Rows of raw ([batch x n], or a single [n] vector) scaled to mean square 1.
template <std::floating_point T>
Tensor<T> power_normalize(const Tensor<T>& raw) {
    if (raw.rank() != 1 && raw.rank() != 2)
        throw ArgumentError("power_normalize expects [n] or [batch x n], got " + shape_str(raw.shape()));
    Tensor<T> out = raw;
    const std::size_t rows = raw.rank() == 1 ? 1 : raw.dim(0);
    const std::size_t n = raw.size() / rows;
    for (std::size_t r = 0; r < rows; ++r) {
        double energy = 0;
        for (std::size_t i = 0; i < n; ++i) energy += static_cast<double>(raw[r * n + i]) * raw[r * n + i];
        if (energy < kDegeneratePower)
            throw DegenerateInput("power_normalize: all-zero input (energy " + std::to_string(energy) + ")");
        const double scale = std::sqrt(static_cast<double>(n) / energy);
        for (std::size_t i = 0; i < n; ++i) out[r * n + i] = static_cast<T>(raw[r * n + i] * scale);
    }
    return out;
}

// Vector-Jacobian product of power_normalize: with S = sum raw^2 and
// r = sqrt(n/S), d out / d raw = r (I - raw raw^T / S).
template <std::floating_point T>
Tensor<T> power_normalize_backward(const Tensor<T>& raw, const Tensor<T>& grad_out) {
    raw.require_same_shape(grad_out, "power_normalize_backward");
    Tensor<T> dx(raw.shape());
    const std::size_t rows = raw.rank() == 1 ? 1 : raw.dim(0);
    const std::size_t n = raw.size() / rows;
    for (std::size_t r = 0; r < rows; ++r) {
        double energy = 0, dot = 0;
        for (std::size_t i = 0; i < n; ++i) {
            energy += static_cast<double>(raw[r * n + i]) * raw[r * n + i];
            dot += static_cast<double>(raw[r * n + i]) * grad_out[r * n + i];
        }
        const double scale = std::sqrt(static_cast<double>(n) / energy);
        for (std::size_t i = 0; i < n; ++i)
            dx[r * n + i] = static_cast<T>(scale * (grad_out[r * n + i] - raw[r * n + i] * dot / energy));
    }
    return dx;
}

// Noise variance per real dimension for unit signal power.
inline double snr_db_to_noise_variance(double snr_db) {
    if (snr_db == std::numeric_limits<double>::infinity()) return 0.0;
    return std::pow(10.0, -snr_db / 10.0);
}

inline bool noiseless(const ChannelConfig& cfg) { return snr_db_to_noise_variance(cfg.snr_db) == 0.0; }

// y[b] = concat(c_1[b], ..., c_N[b]) + n[b], n i.i.d. N(0, sigma^2). Noise is
// drawn sample-major from rng; the Jacobian of y w.r.t. every codeword is
// the identity on its slice.
template <std::floating_point T>
Tensor<T> transmit(const std::vector<Tensor<T>>& codewords, const ChannelConfig& cfg, Rng& rng) {
    cfg.validate();
    if (codewords.size() != static_cast<std::size_t>(cfg.n_users))
        throw ArgumentError("transmit: " + std::to_string(codewords.size()) + " codewords for " +
                            std::to_string(cfg.n_users) + " users");
    const std::size_t per = static_cast<std::size_t>(cfg.channel_uses_per_user);
    const std::size_t batch = codewords.front().rank() == 2 ? codewords.front().dim(0) : 1;
    for (const auto& c : codewords) {
        const bool ok = (c.rank() == 2 && c.dim(0) == batch && c.dim(1) == per) || (c.rank() == 1 && c.dim(0) == per && batch == 1);
        if (!ok)
            throw ArgumentError("transmit: codeword shape " + shape_str(c.shape()) + " does not match [" +
                                std::to_string(batch) + " x " + std::to_string(per) + "]");
    }
    const std::size_t total = per * codewords.size();
    Tensor<T> y({batch, total});
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t u = 0; u < codewords.size(); ++u)
            for (std::size_t i = 0; i < per; ++i) y[b * total + u * per + i] = codewords[u][b * per + i];
    const double var = snr_db_to_noise_variance(cfg.snr_db);
    if (var > 0) {
        std::normal_distribution<double> noise(0.0, std::sqrt(var));
        for (auto& v : y.vec()) v = static_cast<T>(v + noise(rng));
    }
    return y;
}

// Gradient of the loss w.r.t. y split back onto the users' codewords.
template <std::floating_point T>
std::vector<Tensor<T>> split_received_gradient(const Tensor<T>& grad_y, int n_users) {
    if (grad_y.rank() != 2 || n_users < 1 || grad_y.dim(1) % static_cast<std::size_t>(n_users))
        throw ArgumentError("split_received_gradient: bad shape " + shape_str(grad_y.shape()));
    const std::size_t batch = grad_y.dim(0), total = grad_y.dim(1), per = total / static_cast<std::size_t>(n_users);
    std::vector<Tensor<T>> out;
    for (std::size_t u = 0; u < static_cast<std::size_t>(n_users); ++u) {
        Tensor<T> g({batch, per});
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < per; ++i) g[b * per + i] = grad_y[b * total + u * per + i];
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace semcom
