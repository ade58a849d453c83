/// @file kernels_scalar.cpp
/// @brief Reference kernel implementations. These define correct behavior;
/// the SIMD variants are tested against them.

#include "af/kernels.hpp"

#include <cmath>

namespace af::kern {
namespace {

void s_axpy(std::size_t n, float a, const float* x, float* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void s_add(std::size_t n, const float* x, const float* y, float* z) {
    for (std::size_t i = 0; i < n; ++i) z[i] = x[i] + y[i];
}

void s_mul(std::size_t n, const float* x, const float* y, float* z) {
    for (std::size_t i = 0; i < n; ++i) z[i] = x[i] * y[i];
}

void s_scale(std::size_t n, float a, float b, const float* x, float* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i] + b;
}

float s_dot(std::size_t n, const float* x, const float* y) {
    float acc = 0.f;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

float s_sum(std::size_t n, const float* x) {
    float acc = 0.f;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

void s_matmul_nn(std::size_t m, std::size_t k, std::size_t n, const float* a,
                 const float* b, float* c) {
    for (std::size_t i = 0; i < m; ++i) {
        float* ci = c + i * n;
        const float* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const float aip = ai[p];
            const float* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void s_matmul_nt(std::size_t m, std::size_t k, std::size_t n, const float* a,
                 const float* b, float* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const float* ai = a + i * k;
        float* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const float* bj = b + j * k;
            float acc = 0.f;
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] += acc;
        }
    }
}

void s_matmul_tn(std::size_t m, std::size_t k, std::size_t n, const float* a,
                 const float* b, float* c) {
    for (std::size_t p = 0; p < k; ++p) {
        const float* ap = a + p * m;
        const float* bp = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const float api = ap[i];
            float* ci = c + i * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
        }
    }
}

void s_adam(std::size_t n, float* p, const float* g, float* m, float* v,
            float lr, float beta1, float beta2, float eps, float bias1,
            float bias2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.f - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.f - beta2) * g[i] * g[i];
        const float mhat = m[i] / bias1;
        const float vhat = v[i] / bias2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

const KernelTable kScalar = {
    "scalar",     s_axpy,      s_add,       s_mul,       s_scale, s_dot,
    s_sum,        s_matmul_nn, s_matmul_nt, s_matmul_tn, s_adam,
};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace af::kern
