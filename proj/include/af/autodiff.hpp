/// @file autodiff.hpp
/// @brief Tape-based reverse-mode autodiff over dense tensors.
///
/// A Tape owns all intermediate values of one forward computation. Ops append
/// nodes and record backward closures; backward() runs them in reverse
/// creation order, which is a valid topological order because ops can only
/// reference earlier nodes. Parameters registered through param() get their
/// gradients collected by name after backward().
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "af/kernels.hpp"
#include "af/tensor.hpp"

namespace af {

namespace detail {

template <class T>
void mm_nn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b,
           T* c) {
    if constexpr (std::is_same_v<T, float>) {
        kern::matmul_nn(m, k, n, a, b, c);
    } else {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                const T aip = a[i * k + p];
                for (std::size_t j = 0; j < n; ++j)
                    c[i * n + j] += aip * b[p * n + j];
            }
    }
}

template <class T>
void mm_nt(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b,
           T* c) {
    if constexpr (std::is_same_v<T, float>) {
        kern::matmul_nt(m, k, n, a, b, c);
    } else {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                T acc = 0;
                for (std::size_t p = 0; p < k; ++p)
                    acc += a[i * k + p] * b[j * k + p];
                c[i * n + j] += acc;
            }
    }
}

template <class T>
void mm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b,
           T* c) {
    if constexpr (std::is_same_v<T, float>) {
        kern::matmul_tn(m, k, n, a, b, c);
    } else {
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t i = 0; i < m; ++i) {
                const T api = a[p * m + i];
                for (std::size_t j = 0; j < n; ++j)
                    c[i * n + j] += api * b[p * n + j];
            }
    }
}

template <class T>
void axpy(std::size_t n, T a, const T* x, T* y) {
    if constexpr (std::is_same_v<T, float>) {
        kern::axpy(n, a, x, y);
    } else {
        for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
    }
}

}  // namespace detail

/// Handle to a node on a Tape. Only valid for the tape that produced it.
using Ref = int;

template <class T>
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // ---- leaves -----------------------------------------------------------

    Ref leaf(TensorT<T> value, bool requires_grad = false) {
        return push(std::move(value), requires_grad, {}, nullptr);
    }

    Ref constant(TensorT<T> value) { return leaf(std::move(value), false); }

    Ref scalar(T value) {
        return leaf(TensorT<T>({1}, {value}), false);
    }

    /// Register a named trainable parameter.
    Ref param(const std::string& name, const TensorT<T>& value) {
        Ref r = leaf(value, true);
        params_.emplace_back(name, r);
        return r;
    }

    const TensorT<T>& val(Ref r) const { return nodes_[r].value; }
    const TensorT<T>& grad(Ref r) const { return nodes_[r].grad; }

    // ---- elementwise ------------------------------------------------------

    Ref add(Ref a, Ref b) {
        require_same_shape(a, b, "add");
        TensorT<T> out(val(a).shape());
        const auto &x = val(a), &y = val(b);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
        return push(std::move(out), needs(a) || needs(b), {a, b},
                    [this, a, b](Ref self) {
                        accum(a, grad(self));
                        accum(b, grad(self));
                    });
    }

    Ref sub(Ref a, Ref b) {
        require_same_shape(a, b, "sub");
        TensorT<T> out(val(a).shape());
        const auto &x = val(a), &y = val(b);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
        return push(std::move(out), needs(a) || needs(b), {a, b},
                    [this, a, b](Ref self) {
                        accum(a, grad(self));
                        accum_scaled(b, grad(self), T(-1));
                    });
    }

    Ref mul(Ref a, Ref b) {
        require_same_shape(a, b, "mul");
        TensorT<T> out(val(a).shape());
        const auto &x = val(a), &y = val(b);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
        return push(std::move(out), needs(a) || needs(b), {a, b},
                    [this, a, b](Ref self) {
                        accum_mul(a, grad(self), val(b));
                        accum_mul(b, grad(self), val(a));
                    });
    }

    /// c * a + d elementwise with scalar constants.
    Ref affine(Ref a, T c, T d = T(0)) {
        TensorT<T> out(val(a).shape());
        const auto& x = val(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * x[i] + d;
        return push(std::move(out), needs(a), {a},
                    [this, a, c](Ref self) { accum_scaled(a, grad(self), c); });
    }

    Ref neg(Ref a) { return affine(a, T(-1)); }

    Ref clamp(Ref a, T lo, T hi) {
        TensorT<T> out(val(a).shape());
        const auto& x = val(a);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = std::min(hi, std::max(lo, x[i]));
        return push(std::move(out), needs(a), {a},
                    [this, a, lo, hi](Ref self) {
                        auto& g = nodes_[a].grad;
                        const auto &x = val(a), &dy = grad(self);
                        for (std::size_t i = 0; i < g.size(); ++i)
                            if (x[i] > lo && x[i] < hi) g[i] += dy[i];
                    });
    }

    Ref exp_(Ref a) {
        TensorT<T> out(val(a).shape());
        const auto& x = val(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(x[i]);
        return push(std::move(out), needs(a), {a},
                    [this, a](Ref self) { accum_mul(a, grad(self), val(self)); });
    }

    Ref sigmoid(Ref a) {
        TensorT<T> out(val(a).shape());
        const auto& x = val(a);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = T(1) / (T(1) + std::exp(-x[i]));
        return push(std::move(out), needs(a), {a}, [this, a](Ref self) {
            auto& g = nodes_[a].grad;
            const auto &s = val(self), &dy = grad(self);
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] += dy[i] * s[i] * (T(1) - s[i]);
        });
    }

    Ref tanh_(Ref a) {
        TensorT<T> out(val(a).shape());
        const auto& x = val(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x[i]);
        return push(std::move(out), needs(a), {a}, [this, a](Ref self) {
            auto& g = nodes_[a].grad;
            const auto &s = val(self), &dy = grad(self);
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] += dy[i] * (T(1) - s[i] * s[i]);
        });
    }

    /// x * sigmoid(x)
    Ref silu(Ref a) {
        TensorT<T> out(val(a).shape());
        const auto& x = val(a);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = x[i] / (T(1) + std::exp(-x[i]));
        return push(std::move(out), needs(a), {a}, [this, a](Ref self) {
            auto& g = nodes_[a].grad;
            const auto &x = val(a), &dy = grad(self);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const T s = T(1) / (T(1) + std::exp(-x[i]));
                g[i] += dy[i] * s * (T(1) + x[i] * (T(1) - s));
            }
        });
    }

    // ---- matrix ops -------------------------------------------------------

    Ref matmul(Ref a, Ref b) {  // A(m x k) * B(k x n)
        const int m = val(a).rows(), k = val(a).cols(), n = val(b).cols();
        if (val(b).rows() != k) throw std::invalid_argument("matmul: inner extents differ");
        TensorT<T> out({m, n});
        detail::mm_nn<T>(m, k, n, val(a).data(), val(b).data(), out.data());
        return push(std::move(out), needs(a) || needs(b), {a, b},
                    [this, a, b, m, k, n](Ref self) {
                        const auto& dy = grad(self);
                        if (needs(a))
                            detail::mm_nt<T>(m, n, k, dy.data(), val(b).data(),
                                             nodes_[a].grad.data());
                        if (needs(b))
                            detail::mm_tn<T>(k, m, n, val(a).data(), dy.data(),
                                             nodes_[b].grad.data());
                    });
    }

    Ref matmul_nt(Ref a, Ref b) {  // A(m x k) * B(n x k)^T
        const int m = val(a).rows(), k = val(a).cols(), n = val(b).rows();
        if (val(b).cols() != k) throw std::invalid_argument("matmul_nt: inner extents differ");
        TensorT<T> out({m, n});
        detail::mm_nt<T>(m, k, n, val(a).data(), val(b).data(), out.data());
        return push(std::move(out), needs(a) || needs(b), {a, b},
                    [this, a, b, m, k, n](Ref self) {
                        const auto& dy = grad(self);
                        if (needs(a))  // dA = dY * B
                            detail::mm_nn<T>(m, n, k, dy.data(), val(b).data(),
                                             nodes_[a].grad.data());
                        if (needs(b))  // dB = dY^T * A
                            detail::mm_tn<T>(n, m, k, dy.data(), val(a).data(),
                                             nodes_[b].grad.data());
                    });
    }

    /// Linear layer y = x * W^T + bias, W is (out x in), bias (1 x out).
    Ref linear(Ref x, Ref w, Ref bias) {
        return add_rowvec(matmul_nt(x, w), bias);
    }

    Ref add_rowvec(Ref a, Ref v) {  // A(m x n) + v(1 x n) broadcast over rows
        const int m = val(a).rows(), n = val(a).cols();
        if (val(v).rows() != 1 || val(v).cols() != n)
            throw std::invalid_argument("add_rowvec: shape mismatch");
        TensorT<T> out({m, n});
        const auto &x = val(a), &b = val(v);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) out.at(i, j) = x.at(i, j) + b[j];
        return push(std::move(out), needs(a) || needs(v), {a, v},
                    [this, a, v, m, n](Ref self) {
                        const auto& dy = grad(self);
                        accum(a, dy);
                        if (needs(v)) {
                            auto& g = nodes_[v].grad;
                            for (int i = 0; i < m; ++i)
                                for (int j = 0; j < n; ++j) g[j] += dy.at(i, j);
                        }
                    });
    }

    // ---- shape ops --------------------------------------------------------

    Ref reshape(Ref a, std::vector<int> shape) {
        TensorT<T> out(std::move(shape));
        if (out.size() != val(a).size())
            throw std::invalid_argument("reshape: element count differs");
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = val(a)[i];
        return push(std::move(out), needs(a), {a}, [this, a](Ref self) {
            auto& g = nodes_[a].grad;
            const auto& dy = grad(self);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy[i];
        });
    }

    Ref slice_rows(Ref a, int r0, int r1) {
        const int n = val(a).cols();
        TensorT<T> out({r1 - r0, n});
        for (int i = r0; i < r1; ++i)
            for (int j = 0; j < n; ++j) out.at(i - r0, j) = val(a).at(i, j);
        return push(std::move(out), needs(a), {a},
                    [this, a, r0, r1, n](Ref self) {
                        auto& g = nodes_[a].grad;
                        const auto& dy = grad(self);
                        for (int i = r0; i < r1; ++i)
                            for (int j = 0; j < n; ++j)
                                g[static_cast<std::size_t>(i) * n + j] +=
                                    dy.at(i - r0, j);
                    });
    }

    Ref slice_cols(Ref a, int c0, int c1) {
        const int m = val(a).rows();
        TensorT<T> out({m, c1 - c0});
        for (int i = 0; i < m; ++i)
            for (int j = c0; j < c1; ++j) out.at(i, j - c0) = val(a).at(i, j);
        return push(std::move(out), needs(a), {a},
                    [this, a, c0, c1, m](Ref self) {
                        auto& g = nodes_[a].grad;
                        const auto& dy = grad(self);
                        const int n = val(a).cols();
                        for (int i = 0; i < m; ++i)
                            for (int j = c0; j < c1; ++j)
                                g[static_cast<std::size_t>(i) * n + j] +=
                                    dy.at(i, j - c0);
                    });
    }

    Ref concat_rows(Ref a, Ref b) {
        const int n = val(a).cols();
        if (val(b).cols() != n) throw std::invalid_argument("concat_rows: column mismatch");
        const int ma = val(a).rows(), mb = val(b).rows();
        TensorT<T> out({ma + mb, n});
        for (int i = 0; i < ma; ++i)
            for (int j = 0; j < n; ++j) out.at(i, j) = val(a).at(i, j);
        for (int i = 0; i < mb; ++i)
            for (int j = 0; j < n; ++j) out.at(ma + i, j) = val(b).at(i, j);
        return push(std::move(out), needs(a) || needs(b), {a, b},
                    [this, a, b, ma, mb, n](Ref self) {
                        const auto& dy = grad(self);
                        if (needs(a)) {
                            auto& g = nodes_[a].grad;
                            for (int i = 0; i < ma; ++i)
                                for (int j = 0; j < n; ++j)
                                    g[static_cast<std::size_t>(i) * n + j] += dy.at(i, j);
                        }
                        if (needs(b)) {
                            auto& g = nodes_[b].grad;
                            for (int i = 0; i < mb; ++i)
                                for (int j = 0; j < n; ++j)
                                    g[static_cast<std::size_t>(i) * n + j] += dy.at(ma + i, j);
                        }
                    });
    }

    Ref concat_cols(const std::vector<Ref>& parts) {
        if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
        const int m = val(parts[0]).rows();
        int n = 0;
        bool any = false;
        for (Ref p : parts) {
            if (val(p).rows() != m) throw std::invalid_argument("concat_cols: row mismatch");
            n += val(p).cols();
            any = any || needs(p);
        }
        TensorT<T> out({m, n});
        int off = 0;
        for (Ref p : parts) {
            const int w = val(p).cols();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < w; ++j) out.at(i, off + j) = val(p).at(i, j);
            off += w;
        }
        auto parts_copy = parts;
        return push(std::move(out), any, parts,
                    [this, parts_copy, m](Ref self) {
                        const auto& dy = grad(self);
                        int off = 0;
                        for (Ref p : parts_copy) {
                            const int w = val(p).cols();
                            if (needs(p)) {
                                auto& g = nodes_[p].grad;
                                for (int i = 0; i < m; ++i)
                                    for (int j = 0; j < w; ++j)
                                        g[static_cast<std::size_t>(i) * w + j] +=
                                            dy.at(i, off + j);
                            }
                            off += w;
                        }
                    });
    }

    /// Stack `times` copies of a (1 x n) row into (times x n).
    Ref repeat_rows(Ref a, int times) {
        if (val(a).rows() != 1) throw std::invalid_argument("repeat_rows: expects one row");
        const int n = val(a).cols();
        TensorT<T> out({times, n});
        for (int i = 0; i < times; ++i)
            for (int j = 0; j < n; ++j) out.at(i, j) = val(a)[j];
        return push(std::move(out), needs(a), {a},
                    [this, a, times, n](Ref self) {
                        auto& g = nodes_[a].grad;
                        const auto& dy = grad(self);
                        for (int i = 0; i < times; ++i)
                            for (int j = 0; j < n; ++j) g[j] += dy.at(i, j);
                    });
    }

    // ---- reductions and normalizations ------------------------------------

    Ref sum(Ref a) {
        T acc = 0;
        for (std::size_t i = 0; i < val(a).size(); ++i) acc += val(a)[i];
        return push(TensorT<T>({1}, {acc}), needs(a), {a},
                    [this, a](Ref self) {
                        const T dy = grad(self)[0];
                        auto& g = nodes_[a].grad;
                        for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy;
                    });
    }

    Ref mean(Ref a) {
        return affine(sum(a), T(1) / static_cast<T>(val(a).size()));
    }

    /// Mean squared error against a constant target (no grad to target).
    Ref mse(Ref pred, const TensorT<T>& target) {
        Ref t = constant(target);
        Ref d = sub(pred, t);
        return mean(mul(d, d));
    }

    Ref softmax_rows(Ref a) {
        const int m = val(a).rows(), n = val(a).cols();
        TensorT<T> out({m, n});
        for (int i = 0; i < m; ++i) {
            T mx = val(a).at(i, 0);
            for (int j = 1; j < n; ++j) mx = std::max(mx, val(a).at(i, j));
            T denom = 0;
            for (int j = 0; j < n; ++j) {
                out.at(i, j) = std::exp(val(a).at(i, j) - mx);
                denom += out.at(i, j);
            }
            for (int j = 0; j < n; ++j) out.at(i, j) /= denom;
        }
        return push(std::move(out), needs(a), {a}, [this, a, m, n](Ref self) {
            auto& g = nodes_[a].grad;
            const auto &y = val(self), &dy = grad(self);
            for (int i = 0; i < m; ++i) {
                T dot = 0;
                for (int j = 0; j < n; ++j) dot += dy.at(i, j) * y.at(i, j);
                for (int j = 0; j < n; ++j)
                    g[static_cast<std::size_t>(i) * n + j] +=
                        y.at(i, j) * (dy.at(i, j) - dot);
            }
        });
    }

    /// Per-row normalization without learnable affine.
    Ref layernorm_rows(Ref a, T eps = T(1e-5)) {
        const int m = val(a).rows(), n = val(a).cols();
        TensorT<T> out({m, n});
        std::vector<T> inv_std(m), mu(m);
        for (int i = 0; i < m; ++i) {
            T s = 0;
            for (int j = 0; j < n; ++j) s += val(a).at(i, j);
            mu[i] = s / n;
            T v = 0;
            for (int j = 0; j < n; ++j) {
                const T d = val(a).at(i, j) - mu[i];
                v += d * d;
            }
            inv_std[i] = T(1) / std::sqrt(v / n + eps);
            for (int j = 0; j < n; ++j)
                out.at(i, j) = (val(a).at(i, j) - mu[i]) * inv_std[i];
        }
        return push(std::move(out), needs(a), {a},
                    [this, a, m, n, inv_std](Ref self) {
                        auto& g = nodes_[a].grad;
                        const auto &y = val(self), &dy = grad(self);
                        for (int i = 0; i < m; ++i) {
                            T dsum = 0, dysum = 0;
                            for (int j = 0; j < n; ++j) {
                                dsum += dy.at(i, j);
                                dysum += dy.at(i, j) * y.at(i, j);
                            }
                            for (int j = 0; j < n; ++j)
                                g[static_cast<std::size_t>(i) * n + j] +=
                                    inv_std[i] * (dy.at(i, j) - dsum / n -
                                                  y.at(i, j) * dysum / n);
                        }
                    });
    }

    // ---- attention --------------------------------------------------------

    /// softmax(q k^T / sqrt(d)) v with q (L x d), k (S x d), v (S x dv).
    Ref attention(Ref q, Ref k, Ref v) {
        const int d = val(q).cols();
        if (val(k).cols() != d) throw std::invalid_argument("attention: q/k width mismatch");
        if (val(k).rows() < 1) throw std::invalid_argument("attention: empty key set");
        if (val(v).rows() != val(k).rows())
            throw std::invalid_argument("attention: k/v row mismatch");
        Ref scores = affine(matmul_nt(q, k), T(1) / std::sqrt(static_cast<T>(d)));
        return matmul(softmax_rows(scores), v);
    }

    /// Softmax weights of the same attention, exposed for invariant checks.
    Ref attention_weights(Ref q, Ref k) {
        const int d = val(q).cols();
        Ref scores = affine(matmul_nt(q, k), T(1) / std::sqrt(static_cast<T>(d)));
        return softmax_rows(scores);
    }

    // ---- backward ---------------------------------------------------------

    void backward(Ref loss) {
        if (val(loss).size() != 1)
            throw std::invalid_argument("backward: objective must be scalar");
        if (!std::isfinite(val(loss)[0]))
            throw std::runtime_error("backward: non-finite objective");
        for (auto& node : nodes_)
            if (node.requires_grad)
                node.grad = TensorT<T>(node.value.shape());
        if (!nodes_[loss].requires_grad) return;  // constant objective
        nodes_[loss].grad[0] = T(1);
        for (Ref r = loss; r >= 0; --r)
            if (nodes_[r].requires_grad && nodes_[r].back) nodes_[r].back(r);
    }

    /// Gradients of all registered parameters; zero tensors for parameters the
    /// objective never touched.
    std::map<std::string, TensorT<T>> param_grads() const {
        std::map<std::string, TensorT<T>> out;
        for (const auto& [name, r] : params_) {
            if (nodes_[r].grad.size() == nodes_[r].value.size())
                out.emplace(name, nodes_[r].grad);
            else
                out.emplace(name, TensorT<T>(nodes_[r].value.shape()));
        }
        return out;
    }

    std::size_t node_count() const { return nodes_.size(); }

  private:
    struct Node {
        TensorT<T> value;
        TensorT<T> grad;  // empty until backward()
        bool requires_grad = false;
        std::function<void(Ref)> back;
    };

    bool needs(Ref r) const { return nodes_[r].requires_grad; }

    void require_same_shape(Ref a, Ref b, const char* op) const {
        if (!val(a).same_shape(val(b)))
            throw std::invalid_argument(std::string(op) + ": shape mismatch");
    }

    void accum(Ref r, const TensorT<T>& dy) {
        if (!needs(r)) return;
        auto& g = nodes_[r].grad;
        detail::axpy<T>(g.size(), T(1), dy.data(), g.data());
    }

    void accum_scaled(Ref r, const TensorT<T>& dy, T c) {
        if (!needs(r)) return;
        auto& g = nodes_[r].grad;
        detail::axpy<T>(g.size(), c, dy.data(), g.data());
    }

    void accum_mul(Ref r, const TensorT<T>& dy, const TensorT<T>& other) {
        if (!needs(r)) return;
        auto& g = nodes_[r].grad;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy[i] * other[i];
    }

    Ref push(TensorT<T> value, bool requires_grad, std::vector<Ref> /*parents*/,
             std::function<void(Ref)> back) {
        value.check_finite("op");
        nodes_.push_back(Node{std::move(value), {}, requires_grad,
                              requires_grad ? std::move(back) : nullptr});
        return static_cast<Ref>(nodes_.size() - 1);
    }

    std::vector<Node> nodes_;
    std::vector<std::pair<std::string, Ref>> params_;
};

using TapeF = Tape<float>;
using TapeD = Tape<double>;

}  // namespace af
