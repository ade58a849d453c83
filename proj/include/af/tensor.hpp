/// @file tensor.hpp
/// @brief Dense row-major tensor. Float is the production scalar type; the
/// double instantiation exists for the finite-difference oracles in tests.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace af {

#ifndef NDEBUG
inline constexpr bool kDebugFiniteChecks = true;
#else
inline constexpr bool kDebugFiniteChecks = false;
#endif

template <class T>
class TensorT {
  public:
    TensorT() = default;

    explicit TensorT(std::vector<int> shape)
        : shape_(std::move(shape)), data_(checked_count(shape_), T(0)) {}

    TensorT(std::vector<int> shape, std::vector<T> values)
        : shape_(std::move(shape)), data_(std::move(values)) {
        if (data_.size() != checked_count(shape_))
            throw std::invalid_argument("tensor: value count does not match shape");
        check_finite("construction");
    }

    static TensorT zeros(std::vector<int> shape) { return TensorT(std::move(shape)); }

    static TensorT full(std::vector<int> shape, T value) {
        TensorT t(std::move(shape));
        for (auto& x : t.data_) x = value;
        return t;
    }

    static TensorT row(std::initializer_list<T> values) {
        return TensorT({1, static_cast<int>(values.size())},
                       std::vector<T>(values));
    }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::size_t size() const { return data_.size(); }

    int extent(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
    // 2-D convenience accessors.
    int rows() const { return shape_.at(0); }
    int cols() const { return shape_.at(1); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols() + c]; }
    const T& at(int r, int c) const {
        return data_[static_cast<std::size_t>(r) * cols() + c];
    }

    bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

    void check_finite(const char* where) const {
        if constexpr (kDebugFiniteChecks) {
            for (const T& x : data_)
                if (!std::isfinite(x))
                    throw std::runtime_error(std::string("tensor: non-finite value after ") + where);
        }
    }

    template <class U>
    TensorT<U> cast() const {
        std::vector<U> out(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i)
            out[i] = static_cast<U>(data_[i]);
        return TensorT<U>(shape_, std::move(out));
    }

    bool operator==(const TensorT& o) const {
        return shape_ == o.shape_ && data_ == o.data_;
    }

  private:
    static std::size_t checked_count(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (int e : shape) {
            if (e <= 0) throw std::invalid_argument("tensor: non-positive extent");
            n *= static_cast<std::size_t>(e);
        }
        return n;
    }

    std::vector<int> shape_;
    std::vector<T> data_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

}  // namespace af
