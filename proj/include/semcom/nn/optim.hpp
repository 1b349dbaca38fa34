#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "semcom/nn/param.hpp"

namespace semcom::nn {

enum class OptimizerKind { adam, sgd };

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

inline OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "adam") return OptimizerKind::adam;
    if (s == "sgd") return OptimizerKind::sgd;
    throw ArgumentError("unknown optimizer '" + s + "' (expected adam or sgd)");
}

// Adam (or plain SGD) over a fixed list of parameters. The parameter list
// order defines the order of the moment tensors.
template <std::floating_point T>
class Optimizer {
public:
    Optimizer() = default;
    Optimizer(std::vector<Param<T>*> params, OptimizerKind kind, double lr, double beta1 = 0.9,
              double beta2 = 0.999, double eps = 1e-8)
        : params_(std::move(params)), kind_(kind), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        if (!(lr >= 0)) throw ArgumentError("learning rate must be non-negative");
        if (kind_ == OptimizerKind::adam) {
            for (auto* p : params_) {
                m_.emplace_back(p->value.shape());
                v_.emplace_back(p->value.shape());
            }
        }
    }

    void step() {
        ++steps_;
        if (kind_ == OptimizerKind::sgd) {
            for (auto* p : params_)
                for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] -= static_cast<T>(lr_ * p->grad[i]);
            return;
        }
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto& p = *params_[k];
            auto& m = m_[k];
            auto& v = v_[k];
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                const double g = p.grad[i];
                const double mi = beta1_ * m[i] + (1 - beta1_) * g;
                const double vi = beta2_ * v[i] + (1 - beta2_) * g * g;
                m[i] = static_cast<T>(mi);
                v[i] = static_cast<T>(vi);
                p.value[i] -= static_cast<T>(lr_ * (mi / bc1) / (std::sqrt(vi / bc2) + eps_));
            }
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->zero_grad();
    }

    std::uint64_t steps() const { return steps_; }
    void set_steps(std::uint64_t s) { steps_ = s; }
    OptimizerKind kind() const { return kind_; }
    double learning_rate() const { return lr_; }
    const std::vector<Param<T>*>& params() const { return params_; }
    std::vector<Tensor<T>>& first_moments() { return m_; }
    std::vector<Tensor<T>>& second_moments() { return v_; }

private:
    std::vector<Param<T>*> params_;
    OptimizerKind kind_ = OptimizerKind::adam;
    double lr_ = 1e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    std::uint64_t steps_ = 0;
    std::vector<Tensor<T>> m_, v_;
};

}  // namespace semcom::nn
