/// @file optim.hpp
/// @brief Named parameter store with per-parameter Adam state and the
/// learning-rate schedules used by the training loops.
#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>

#include "af/kernels.hpp"
#include "af/rng.hpp"
#include "af/tensor.hpp"

namespace af {

struct AdamConfig {
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

template <class T>
class ParamStoreT {
  public:
    struct Entry {
        TensorT<T> value;
        TensorT<T> m;  // first moment
        TensorT<T> v;  // second moment
        std::int64_t step = 0;
        float lr_scale = 1.f;  // per-parameter multiplier on the global lr
    };

    void add(const std::string& name, TensorT<T> value, float lr_scale = 1.f) {
        if (entries_.count(name)) throw std::invalid_argument("param exists: " + name);
        Entry e;
        e.m = TensorT<T>(value.shape());
        e.v = TensorT<T>(value.shape());
        e.value = std::move(value);
        e.lr_scale = lr_scale;
        entries_.emplace(name, std::move(e));
    }

    bool has(const std::string& name) const { return entries_.count(name) != 0; }

    const TensorT<T>& get(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw std::out_of_range("no such param: " + name);
        return it->second.value;
    }

    TensorT<T>& mutable_value(const std::string& name) {
        return entries_.at(name).value;
    }

    const std::map<std::string, Entry>& entries() const { return entries_; }
    std::map<std::string, Entry>& entries() { return entries_; }

    std::size_t count() const { return entries_.size(); }

    /// One Adam step over every parameter that has a gradient in `grads`.
    void adam_step(const std::map<std::string, TensorT<T>>& grads, float lr,
                   const AdamConfig& cfg = {}) {
        for (auto& [name, e] : entries_) {
            auto git = grads.find(name);
            if (git == grads.end()) continue;
            const TensorT<T>& g = git->second;
            if (!g.same_shape(e.value))
                throw std::invalid_argument("adam: gradient shape mismatch for " + name);
            for (std::size_t i = 0; i < g.size(); ++i)
                if (!std::isfinite(g[i]))
                    throw std::runtime_error("adam: non-finite gradient for " + name);
            e.step += 1;
            const float bias1 = 1.f - std::pow(cfg.beta1, static_cast<float>(e.step));
            const float bias2 = 1.f - std::pow(cfg.beta2, static_cast<float>(e.step));
            const float eff_lr = lr * e.lr_scale;
            if constexpr (std::is_same_v<T, float>) {
                kern::adam_update(g.size(), e.value.data(), g.data(), e.m.data(),
                                  e.v.data(), eff_lr, cfg.beta1, cfg.beta2,
                                  cfg.eps, bias1, bias2);
            } else {
                for (std::size_t i = 0; i < g.size(); ++i) {
                    e.m[i] = cfg.beta1 * e.m[i] + (1 - cfg.beta1) * g[i];
                    e.v[i] = cfg.beta2 * e.v[i] + (1 - cfg.beta2) * g[i] * g[i];
                    e.value[i] -= eff_lr * (e.m[i] / bias1) /
                                  (std::sqrt(e.v[i] / bias2) + cfg.eps);
                }
            }
            e.value.check_finite("adam_step");
        }
    }

    // ---- init helpers -----------------------------------------------------

    /// Dense weight, scaled-uniform init (Glorot-style over fan_in/fan_out).
    void add_dense(const std::string& name, int out, int in, RngStream& rng,
                   float lr_scale = 1.f) {
        TensorT<T> w({out, in});
        const double bound = std::sqrt(6.0 / (in + out));
        for (std::size_t i = 0; i < w.size(); ++i)
            w[i] = static_cast<T>(rng.uniform(-bound, bound));
        add(name, std::move(w), lr_scale);
    }

    void add_zeros(const std::string& name, std::vector<int> shape,
                   float lr_scale = 1.f) {
        add(name, TensorT<T>(std::move(shape)), lr_scale);
    }

    void add_normal(const std::string& name, std::vector<int> shape,
                    double stddev, RngStream& rng, float lr_scale = 1.f) {
        TensorT<T> w(std::move(shape));
        for (std::size_t i = 0; i < w.size(); ++i)
            w[i] = static_cast<T>(stddev * rng.normal());
        add(name, std::move(w), lr_scale);
    }

    template <class U>
    ParamStoreT<U> cast() const {
        ParamStoreT<U> out;
        for (const auto& [name, e] : entries_)
            out.add(name, e.value.template cast<U>(), e.lr_scale);
        return out;
    }

  private:
    std::map<std::string, Entry> entries_;
};

using ParamStore = ParamStoreT<float>;

// ---- learning-rate schedules ----------------------------------------------

/// Cosine annealing from `lr0` down to `floor` over `total` steps.
inline float cosine_lr(float lr0, float floor, std::int64_t step,
                       std::int64_t total) {
    if (step >= total) return floor;
    const double t = static_cast<double>(step) / static_cast<double>(total);
    return static_cast<float>(floor + 0.5 * (lr0 - floor) *
                                          (1.0 + std::cos(std::numbers::pi * t)));
}

/// Linear anneal lr0 -> lr1 over the first half of `total`, then constant lr1.
inline float linear_then_constant_lr(float lr0, float lr1, std::int64_t step,
                                     std::int64_t total) {
    const std::int64_t half = total / 2;
    if (half <= 0 || step >= half) return lr1;
    const double t = static_cast<double>(step) / static_cast<double>(half);
    return static_cast<float>(lr0 + (lr1 - lr0) * t);
}

}  // namespace af
