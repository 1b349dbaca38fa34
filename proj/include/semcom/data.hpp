#pragma once

// Image batches and their split into per-user quadrant observations.
//
// Quadrant convention (fixed, checkpoints depend on it): user 1 = top-left,
// user 2 = top-right, user 3 = bottom-left, user 4 = bottom-right.

#include <algorithm>
#include <string>
#include <vector>

#include "semcom/tensor.hpp"

namespace semcom {

inline constexpr std::size_t kImageSize = 32;
inline constexpr std::size_t kImageChannels = 3;
inline constexpr std::size_t kNumClasses = 10;
inline constexpr std::size_t kSupportedUsers = 4;

// pixels: [batch x H x W x 3] in [0,1]; labels in {0..9}.
template <std::floating_point T = float>
struct ImageBatch {
    Tensor<T> pixels;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }

    void validate() const {
        if (pixels.rank() != 4 || pixels.dim(3) != kImageChannels)
            throw ArgumentError("ImageBatch pixels must be [batch x H x W x 3], got " + shape_str(pixels.shape()));
        if (pixels.dim(0) != labels.size())
            throw ArgumentError("ImageBatch has " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(pixels.dim(0)) + " images");
        for (T p : pixels.vec())
            if (!(p >= T{0} && p <= T{1})) throw ArgumentError("ImageBatch pixel outside [0,1]");
        for (int l : labels)
            if (l < 0 || l >= static_cast<int>(kNumClasses))
                throw ArgumentError("ImageBatch label " + std::to_string(l) + " outside {0..9}");
    }
};

// One user's view: [batch x H/2 x W/2 x 3]; user_index is 1-based.
template <std::floating_point T = float>
struct UserObservation {
    Tensor<T> pixels;
    int user_index = 1;
};

namespace detail {

inline void quadrant_origin(int user_index, std::size_t qh, std::size_t qw, std::size_t& r0, std::size_t& c0) {
    const int q = user_index - 1;
    r0 = static_cast<std::size_t>(q / 2) * qh;
    c0 = static_cast<std::size_t>(q % 2) * qw;
}

}  // namespace detail

template <std::floating_point T>
std::vector<UserObservation<T>> partition_quadrants(const Tensor<T>& pixels, int n_users) {
    if (n_users != static_cast<int>(kSupportedUsers))
        throw UnsupportedConfiguration("partition_quadrants supports exactly 4 users, got " +
                                       std::to_string(n_users));
    if (pixels.rank() != 4) throw ArgumentError("partition_quadrants expects NHWC pixels, got " + shape_str(pixels.shape()));
    const std::size_t n = pixels.dim(0), h = pixels.dim(1), w = pixels.dim(2), c = pixels.dim(3);
    if (h % 2 || w % 2) throw ArgumentError("image height and width must be even, got " + shape_str(pixels.shape()));
    const std::size_t qh = h / 2, qw = w / 2;

    std::vector<UserObservation<T>> out;
    out.reserve(kSupportedUsers);
    for (int u = 1; u <= n_users; ++u) {
        UserObservation<T> obs{Tensor<T>({n, qh, qw, c}), u};
        std::size_t r0, c0;
        detail::quadrant_origin(u, qh, qw, r0, c0);
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t i = 0; i < qh; ++i) {
                const T* src = pixels.data() + ((b * h + r0 + i) * w + c0) * c;
                std::copy(src, src + qw * c, obs.pixels.data() + ((b * qh + i) * qw) * c);
            }
        out.push_back(std::move(obs));
    }
    return out;
}

template <std::floating_point T>
std::vector<UserObservation<T>> partition_quadrants(const ImageBatch<T>& batch, int n_users) {
    return partition_quadrants(batch.pixels, n_users);
}

// Inverse of partition_quadrants; each observation lands at the quadrant of
// its own user_index.
template <std::floating_point T>
Tensor<T> reassemble(const std::vector<UserObservation<T>>& observations) {
    if (observations.size() != kSupportedUsers)
        throw ArgumentError("reassemble needs exactly 4 observations, got " + std::to_string(observations.size()));
    std::vector<bool> seen(kSupportedUsers + 1, false);
    for (const auto& o : observations) {
        if (o.user_index < 1 || o.user_index > static_cast<int>(kSupportedUsers))
            throw ArgumentError("user index " + std::to_string(o.user_index) + " outside {1..4}");
        if (seen[static_cast<std::size_t>(o.user_index)])
            throw ArgumentError("duplicate user index " + std::to_string(o.user_index));
        seen[static_cast<std::size_t>(o.user_index)] = true;
        if (o.pixels.shape() != observations.front().pixels.shape() || o.pixels.rank() != 4)
            throw ArgumentError("observations must share one NHWC shape");
    }
    const auto& s = observations.front().pixels.shape();
    const std::size_t n = s[0], qh = s[1], qw = s[2], c = s[3];
    const std::size_t h = 2 * qh, w = 2 * qw;
    Tensor<T> out({n, h, w, c});
    for (const auto& o : observations) {
        std::size_t r0, c0;
        detail::quadrant_origin(o.user_index, qh, qw, r0, c0);
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t i = 0; i < qh; ++i) {
                const T* src = o.pixels.data() + ((b * qh + i) * qw) * c;
                std::copy(src, src + qw * c, out.data() + ((b * h + r0 + i) * w + c0) * c);
            }
    }
    return out;
}

}  // namespace semcom
