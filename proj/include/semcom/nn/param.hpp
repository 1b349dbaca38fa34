#pragma once

#include <cmath>
#include <concepts>
#include <string>
#include <vector>

#include "semcom/random.hpp"
#include "semcom/tensor.hpp"

namespace semcom::nn {

// A learnable tensor with its accumulated gradient.
template <std::floating_point T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    Param() = default;
    explicit Param(Shape shape) : value(shape), grad(shape) {}

    void zero_grad() { grad.zero(); }
};

// Non-learnable state saved with a model (batch norm running statistics).
template <std::floating_point T>
struct Buffer {
    std::string name;
    Tensor<T> value;
};

template <std::floating_point T>
struct ParamRefs {
    std::vector<Param<T>*> params;
    std::vector<Buffer<T>*> buffers;

    void add(Param<T>& p, std::string full_name) {
        p.name = std::move(full_name);
        params.push_back(&p);
    }
    void add(Buffer<T>& b, std::string full_name) {
        b.name = std::move(full_name);
        buffers.push_back(&b);
    }

    void zero_grad() {
        for (auto* p : params) p->zero_grad();
    }
};

// He-normal initialization with the given fan-in.
template <std::floating_point T>
void he_normal(Tensor<T>& w, std::size_t fan_in, Rng& rng) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (auto& x : w.vec()) x = static_cast<T>(dist(rng));
}

template <std::floating_point T>
void uniform_fan_in(Tensor<T>& w, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& x : w.vec()) x = static_cast<T>(dist(rng));
}

}  // namespace semcom::nn
