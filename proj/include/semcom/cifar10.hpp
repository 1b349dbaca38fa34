#pragma once

// Reader for the CIFAR-10 binary distribution (cifar-10-binary.tar.gz,
// extracted). Each file holds fixed-size records:
//
//   [offset] [size] [description]
//   0        1      label, 0..9
//   1        1024   red plane, row-major 32x32
//   1025     1024   green plane
//   2049     1024   blue plane
//
// train = data_batch_1.bin .. data_batch_5.bin, test = test_batch.bin.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "semcom/data.hpp"
#include "semcom/random.hpp"

namespace semcom {

inline constexpr std::size_t kImagePixels = kImageSize * kImageSize * kImageChannels;  // 3072
inline constexpr std::size_t kRecordBytes = 1 + kImagePixels;
inline constexpr const char* kDatasetRootEnv = "SEMCOM_CIFAR10_ROOT";

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Split { train, test };

inline Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    throw ArgumentError("unknown split '" + s + "' (expected train or test)");
}

inline std::vector<std::string> split_files(Split split) {
    if (split == Split::test) return {"test_batch.bin"};
    return {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin", "data_batch_4.bin", "data_batch_5.bin"};
}

// Configured root, overridden by SEMCOM_CIFAR10_ROOT when that is set.
inline std::filesystem::path resolve_dataset_root(const std::filesystem::path& configured) {
    if (const char* env = std::getenv(kDatasetRootEnv); env && *env) return env;
    return configured;
}

// Accept both the extraction parent and the cifar-10-batches-bin directory.
inline std::filesystem::path locate_batches_dir(const std::filesystem::path& root) {
    if (std::filesystem::exists(root / "test_batch.bin") || std::filesystem::exists(root / "data_batch_1.bin"))
        return root;
    if (std::filesystem::exists(root / "cifar-10-batches-bin")) return root / "cifar-10-batches-bin";
    return root;
}

// Whole split held as raw bytes, pixels already interleaved to HWC.
class Cifar10Set {
public:
    Cifar10Set() = default;
    Cifar10Set(std::vector<std::uint8_t> pixels, std::vector<std::uint8_t> labels)
        : pixels_(std::move(pixels)), labels_(std::move(labels)) {
        if (pixels_.size() != labels_.size() * kImagePixels)
            throw ArgumentError("Cifar10Set: pixel buffer does not match label count");
    }

    std::size_t size() const { return labels_.size(); }
    const std::vector<std::uint8_t>& raw_pixels() const { return pixels_; }
    const std::vector<std::uint8_t>& labels() const { return labels_; }

    // Keep only the first n images (desk-scale subsets).
    void truncate(std::size_t n) {
        if (n >= size()) return;
        labels_.resize(n);
        pixels_.resize(n * kImagePixels);
    }

    template <std::floating_point T = float>
    ImageBatch<T> gather(std::span<const std::size_t> indices) const {
        ImageBatch<T> batch{Tensor<T>({indices.size(), kImageSize, kImageSize, kImageChannels}), {}};
        batch.labels.reserve(indices.size());
        for (std::size_t k = 0; k < indices.size(); ++k) {
            const std::size_t idx = indices[k];
            if (idx >= size()) throw ArgumentError("image index out of range");
            const std::uint8_t* src = pixels_.data() + idx * kImagePixels;
            T* dst = batch.pixels.data() + k * kImagePixels;
            for (std::size_t i = 0; i < kImagePixels; ++i) dst[i] = static_cast<T>(src[i]) / T{255};
            batch.labels.push_back(labels_[idx]);
        }
        return batch;
    }

    template <std::floating_point T = float>
    ImageBatch<T> all() const {
        std::vector<std::size_t> idx(size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        return gather<T>(idx);
    }

private:
    std::vector<std::uint8_t> pixels_;
    std::vector<std::uint8_t> labels_;
};

inline void read_cifar10_file(const std::filesystem::path& file, std::vector<std::uint8_t>& pixels,
                              std::vector<std::uint8_t>& labels) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DatasetError("cannot open dataset file " + file.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.empty() || bytes.size() % kRecordBytes != 0)
        throw DatasetError("corrupt dataset file " + file.string() + ": size " + std::to_string(bytes.size()) +
                           " is not a positive multiple of " + std::to_string(kRecordBytes));
    const std::size_t records = bytes.size() / kRecordBytes;
    const std::size_t plane = kImageSize * kImageSize;
    for (std::size_t r = 0; r < records; ++r) {
        const auto* rec = reinterpret_cast<const std::uint8_t*>(bytes.data() + r * kRecordBytes);
        if (rec[0] >= kNumClasses)
            throw DatasetError("corrupt dataset file " + file.string() + ": record " + std::to_string(r) +
                               " has label " + std::to_string(rec[0]));
        labels.push_back(rec[0]);
        const std::size_t base = pixels.size();
        pixels.resize(base + kImagePixels);
        for (std::size_t i = 0; i < plane; ++i)
            for (std::size_t c = 0; c < kImageChannels; ++c) pixels[base + i * kImageChannels + c] = rec[1 + c * plane + i];
    }
}

inline Cifar10Set load_dataset(const std::filesystem::path& source_path, Split split) {
    const auto dir = locate_batches_dir(source_path);
    std::vector<std::uint8_t> pixels, labels;
    for (const auto& name : split_files(split)) {
        const auto file = dir / name;
        if (!std::filesystem::exists(file)) throw DatasetError("missing dataset file " + file.string());
        read_cifar10_file(file, pixels, labels);
    }
    return Cifar10Set(std::move(pixels), std::move(labels));
}

inline Cifar10Set load_dataset(const std::filesystem::path& source_path, const std::string& split) {
    return load_dataset(source_path, split_from_string(split));
}

// Writes records in the published layout; pixels are HWC bytes.
inline void write_cifar10_file(const std::filesystem::path& file, std::span<const std::uint8_t> labels,
                               std::span<const std::uint8_t> hwc_pixels) {
    if (hwc_pixels.size() != labels.size() * kImagePixels)
        throw ArgumentError("write_cifar10_file: pixel buffer does not match label count");
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DatasetError("cannot write " + file.string());
    const std::size_t plane = kImageSize * kImageSize;
    std::vector<char> rec(kRecordBytes);
    for (std::size_t r = 0; r < labels.size(); ++r) {
        rec[0] = static_cast<char>(labels[r]);
        for (std::size_t i = 0; i < plane; ++i)
            for (std::size_t c = 0; c < kImageChannels; ++c)
                rec[1 + c * plane + i] = static_cast<char>(hwc_pixels[r * kImagePixels + i * kImageChannels + c]);
        out.write(rec.data(), static_cast<std::streamsize>(rec.size()));
    }
}

// Index order for one epoch: identity without a seed, otherwise a
// Fisher-Yates shuffle that depends only on (seed, epoch).
inline std::vector<std::size_t> epoch_order(std::size_t n, std::optional<std::uint64_t> seed, std::uint64_t epoch) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (seed) {
        Rng rng(derive_seed(*seed, {0x5348554646ULL, epoch}));
        for (std::size_t i = n; i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(idx[i - 1], idx[pick(rng)]);
        }
    }
    return idx;
}

// Sequential batches over one epoch of a split. The final partial batch is
// delivered.
template <std::floating_point T = float>
class BatchStream {
public:
    BatchStream(const Cifar10Set& set, std::size_t batch_size, std::optional<std::uint64_t> shuffle_seed = {},
                std::uint64_t epoch = 0)
        : set_(&set), batch_size_(batch_size), order_(epoch_order(set.size(), shuffle_seed, epoch)) {
        if (batch_size == 0) throw ArgumentError("batch size must be at least 1");
    }

    bool next(ImageBatch<T>& out) {
        if (pos_ >= order_.size()) return false;
        const std::size_t len = std::min(batch_size_, order_.size() - pos_);
        out = set_->gather<T>(std::span<const std::size_t>(order_).subspan(pos_, len));
        pos_ += len;
        ++batch_index_;
        return true;
    }

    std::size_t batches() const { return (order_.size() + batch_size_ - 1) / batch_size_; }
    std::size_t batch_index() const { return batch_index_; }

private:
    const Cifar10Set* set_;
    std::size_t batch_size_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
    std::size_t batch_index_ = 0;
};

}  // namespace semcom
