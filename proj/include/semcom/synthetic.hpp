#pragma once

// Class-conditional synthetic images in the CIFAR-10 layout, for smoke runs
// and tests when the real archive is not available. Each class has its own
// tint and stripe orientation/frequency, spread over the whole image so
// every quadrant carries some class evidence.

#include <cmath>
#include <filesystem>
#include <numbers>

#include "semcom/cifar10.hpp"

namespace semcom {

inline Cifar10Set make_synthetic_set(std::size_t n, std::uint64_t seed, double pixel_noise = 0.08) {
    Rng rng(derive_seed(seed, {0x53594e5448ULL}));
    std::normal_distribution<double> noise(0.0, pixel_noise);
    std::uniform_real_distribution<double> phase(0.0, 2 * std::numbers::pi);
    std::uniform_int_distribution<int> cls(0, static_cast<int>(kNumClasses) - 1);
    std::vector<std::uint8_t> pixels(n * kImagePixels), labels(n);
    for (std::size_t k = 0; k < n; ++k) {
        const int c = cls(rng);
        labels[k] = static_cast<std::uint8_t>(c);
        const double angle = std::numbers::pi * c / kNumClasses;
        const double freq = 0.25 + 0.05 * (c % 5);
        const double ph = phase(rng);
        const double tint[3] = {0.3 + 0.4 * ((c >> 0) & 1), 0.3 + 0.4 * ((c >> 1) & 1), 0.3 + 0.4 * ((c >> 2) & 1)};
        for (std::size_t i = 0; i < kImageSize; ++i)
            for (std::size_t j = 0; j < kImageSize; ++j) {
                const double t = std::cos(angle) * i + std::sin(angle) * j;
                const double stripe = 0.2 * std::sin(freq * t + ph);
                for (std::size_t ch = 0; ch < kImageChannels; ++ch) {
                    const double v = std::clamp(tint[ch] + stripe + noise(rng), 0.0, 1.0);
                    pixels[k * kImagePixels + (i * kImageSize + j) * kImageChannels + ch] =
                        static_cast<std::uint8_t>(std::lround(v * 255.0));
                }
            }
    }
    return Cifar10Set(std::move(pixels), std::move(labels));
}

// Writes a directory that load_dataset accepts: five train files and a
// test file.
inline void write_synthetic_dataset(const std::filesystem::path& dir, std::size_t train_per_file,
                                    std::size_t test_count, std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    const auto files = split_files(Split::train);
    for (std::size_t f = 0; f < files.size(); ++f) {
        const auto set = make_synthetic_set(train_per_file, derive_seed(seed, {f}));
        write_cifar10_file(dir / files[f], set.labels(), set.raw_pixels());
    }
    const auto test = make_synthetic_set(test_count, derive_seed(seed, {99}));
    write_cifar10_file(dir / "test_batch.bin", test.labels(), test.raw_pixels());
}

}  // namespace semcom
