#pragma once

// Checkpoint archive: one file,
//   "SEMCKPT1" | u64 header length | JSON header | raw tensor payload
// The header carries arbitrary metadata plus a tensor index
// [{name, shape, offset}] with offsets into the payload, in units of the
// stored scalar type ("f32" or "f64", little-endian host order).

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "semcom/nn/param.hpp"
#include "semcom/tensor.hpp"

namespace semcom {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[8] = {'S', 'E', 'M', 'C', 'K', 'P', 'T', '1'};

template <std::floating_point T>
constexpr const char* dtype_name() {
    return sizeof(T) == 4 ? "f32" : "f64";
}

// Writes to a sibling temporary file and renames it into place.
inline void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw CheckpointError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

template <std::floating_point T>
struct Archive {
    nlohmann::json meta;
    std::map<std::string, Tensor<T>> tensors;
};

template <std::floating_point T>
void write_archive(const std::filesystem::path& path, nlohmann::json meta,
                   const std::vector<std::pair<std::string, const Tensor<T>*>>& tensors) {
    nlohmann::json index = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& [name, t] : tensors) {
        index.push_back({{"name", name}, {"shape", t->shape()}, {"offset", offset}});
        offset += t->size();
    }
    meta["dtype"] = dtype_name<T>();
    meta["tensors"] = std::move(index);
    const std::string header = meta.dump();
    std::string bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
    const std::uint64_t len = header.size();
    bytes.append(reinterpret_cast<const char*>(&len), sizeof(len));
    bytes += header;
    for (const auto& [name, t] : tensors)
        bytes.append(reinterpret_cast<const char*>(t->data()), t->size() * sizeof(T));
    atomic_write(path, bytes);
}

template <std::floating_point T>
Archive<T> read_archive(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    char magic[sizeof(kCheckpointMagic)];
    std::uint64_t len = 0;
    in.read(magic, sizeof(magic));
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw CheckpointError(path.string() + " is not a semcom checkpoint");
    std::string header(len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(len));
    Archive<T> ar;
    try {
        ar.meta = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError("corrupt checkpoint header in " + path.string() + ": " + e.what());
    }
    if (ar.meta.value("dtype", "") != dtype_name<T>())
        throw CheckpointError("checkpoint " + path.string() + " stores " + ar.meta.value("dtype", "?") + ", expected " +
                              dtype_name<T>());
    std::vector<char> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    for (const auto& entry : ar.meta.at("tensors")) {
        Shape shape = entry.at("shape").template get<Shape>();
        const std::size_t off = entry.at("offset").template get<std::size_t>();
        Tensor<T> t(shape);
        if ((off + t.size()) * sizeof(T) > payload.size())
            throw CheckpointError("checkpoint " + path.string() + " is truncated");
        std::memcpy(t.data(), payload.data() + off * sizeof(T), t.size() * sizeof(T));
        ar.tensors.emplace(entry.at("name").template get<std::string>(), std::move(t));
    }
    return ar;
}

// Copies archived tensors into params/buffers, verifying that every one is
// present with a matching shape.
template <std::floating_point T>
void restore_into(const Archive<T>& ar, const nn::ParamRefs<T>& refs) {
    auto take = [&](const std::string& name, Tensor<T>& dst) {
        const auto it = ar.tensors.find(name);
        if (it == ar.tensors.end()) throw CheckpointError("checkpoint lacks tensor '" + name + "'");
        if (it->second.shape() != dst.shape())
            throw CheckpointError("checkpoint tensor '" + name + "' has shape " + shape_str(it->second.shape()) +
                                  ", model expects " + shape_str(dst.shape()));
        dst = it->second;
    };
    for (auto* p : refs.params) take(p->name, p->value);
    for (auto* b : refs.buffers) take(b->name, b->value);
}

// Content hash over parameter and buffer values (freeze checks).
template <std::floating_point T>
std::string hash_parameters(const nn::ParamRefs<T>& refs) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const Tensor<T>& t) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
        for (std::size_t i = 0; i < t.size() * sizeof(T); ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto* p : refs.params) mix(p->value);
    for (const auto* b : refs.buffers) mix(b->value);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace semcom
