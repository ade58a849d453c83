/// @file kernels_avx2.cpp
/// @brief AVX2+FMA kernel variants. Compiled only on x86-64; this translation
/// unit is built with -mavx2 -mfma, so nothing here may be called before the
/// CPUID check in kernels_dispatch.cpp.

#if defined(__x86_64__)

#include <immintrin.h>

#include <cmath>

#include "af/kernels.hpp"

namespace af::kern {
namespace {

inline float hsum8(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_hadd_ps(lo, lo);
    lo = _mm_hadd_ps(lo, lo);
    return _mm_cvtss_f32(lo);
}

void v_axpy(std::size_t n, float a, const float* x, float* y) {
    const __m256 va = _mm256_set1_ps(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 vy = _mm256_loadu_ps(y + i);
        vy = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vy);
        _mm256_storeu_ps(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void v_add(std::size_t n, const float* x, const float* y, float* z) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(z + i, _mm256_add_ps(_mm256_loadu_ps(x + i),
                                              _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) z[i] = x[i] + y[i];
}

void v_mul(std::size_t n, const float* x, const float* y, float* z) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(z + i, _mm256_mul_ps(_mm256_loadu_ps(x + i),
                                              _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) z[i] = x[i] * y[i];
}

void v_scale(std::size_t n, float a, float b, const float* x, float* y) {
    const __m256 va = _mm256_set1_ps(a);
    const __m256 vb = _mm256_set1_ps(b);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vb));
    for (; i < n; ++i) y[i] = a * x[i] + b;
}

float v_dot(std::size_t n, const float* x, const float* y) {
    __m256 acc = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i),
                              acc);
    float r = hsum8(acc);
    for (; i < n; ++i) r += x[i] * y[i];
    return r;
}

float v_sum(std::size_t n, const float* x) {
    __m256 acc = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
    float r = hsum8(acc);
    for (; i < n; ++i) r += x[i];
    return r;
}

void v_matmul_nn(std::size_t m, std::size_t k, std::size_t n, const float* a,
                 const float* b, float* c) {
    for (std::size_t i = 0; i < m; ++i) {
        float* ci = c + i * n;
        const float* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const __m256 va = _mm256_set1_ps(ai[p]);
            const float* bp = b + p * n;
            std::size_t j = 0;
            for (; j + 8 <= n; j += 8) {
                __m256 vc = _mm256_loadu_ps(ci + j);
                vc = _mm256_fmadd_ps(va, _mm256_loadu_ps(bp + j), vc);
                _mm256_storeu_ps(ci + j, vc);
            }
            for (; j < n; ++j) ci[j] += ai[p] * bp[j];
        }
    }
}

void v_matmul_nt(std::size_t m, std::size_t k, std::size_t n, const float* a,
                 const float* b, float* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const float* ai = a + i * k;
        float* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += v_dot(k, ai, b + j * k);
    }
}

void v_matmul_tn(std::size_t m, std::size_t k, std::size_t n, const float* a,
                 const float* b, float* c) {
    for (std::size_t p = 0; p < k; ++p) {
        const float* ap = a + p * m;
        const float* bp = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const __m256 va = _mm256_set1_ps(ap[i]);
            float* ci = c + i * n;
            std::size_t j = 0;
            for (; j + 8 <= n; j += 8) {
                __m256 vc = _mm256_loadu_ps(ci + j);
                vc = _mm256_fmadd_ps(va, _mm256_loadu_ps(bp + j), vc);
                _mm256_storeu_ps(ci + j, vc);
            }
            for (; j < n; ++j) ci[j] += ap[i] * bp[j];
        }
    }
}

void v_adam(std::size_t n, float* p, const float* g, float* m, float* v,
            float lr, float beta1, float beta2, float eps, float bias1,
            float bias2) {
    const __m256 vb1 = _mm256_set1_ps(beta1);
    const __m256 vb2 = _mm256_set1_ps(beta2);
    const __m256 vo1 = _mm256_set1_ps(1.f - beta1);
    const __m256 vo2 = _mm256_set1_ps(1.f - beta2);
    const __m256 vib1 = _mm256_set1_ps(1.f / bias1);
    const __m256 vib2 = _mm256_set1_ps(1.f / bias2);
    const __m256 vlr = _mm256_set1_ps(lr);
    const __m256 veps = _mm256_set1_ps(eps);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 vg = _mm256_loadu_ps(g + i);
        __m256 vm = _mm256_fmadd_ps(vo1, vg, _mm256_mul_ps(vb1, _mm256_loadu_ps(m + i)));
        __m256 vv = _mm256_fmadd_ps(vo2, _mm256_mul_ps(vg, vg),
                                    _mm256_mul_ps(vb2, _mm256_loadu_ps(v + i)));
        _mm256_storeu_ps(m + i, vm);
        _mm256_storeu_ps(v + i, vv);
        const __m256 mhat = _mm256_mul_ps(vm, vib1);
        const __m256 vhat = _mm256_mul_ps(vv, vib2);
        const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), veps);
        __m256 vp = _mm256_loadu_ps(p + i);
        vp = _mm256_sub_ps(vp, _mm256_div_ps(_mm256_mul_ps(vlr, mhat), denom));
        _mm256_storeu_ps(p + i, vp);
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.f - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.f - beta2) * g[i] * g[i];
        p[i] -= lr * (m[i] / bias1) / (std::sqrt(v[i] / bias2) + eps);
    }
}

const KernelTable kAvx2 = {
    "avx2",       v_axpy,      v_add,       v_mul,       v_scale, v_dot,
    v_sum,        v_matmul_nn, v_matmul_nt, v_matmul_tn, v_adam,
};

}  // namespace

const KernelTable& avx2_table() { return kAvx2; }

}  // namespace af::kern

#endif  // __x86_64__
