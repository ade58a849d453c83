/// @file kernels.hpp
/// @brief Float inner-loop kernels with runtime ISA dispatch.
///
/// Every kernel has a scalar reference implementation and (on x86-64 with
/// AVX2+FMA) a vectorized variant. The active table is chosen once at startup
/// from CPUID; set AF_KERNEL=scalar in the environment to force the reference
/// path. Both tables are always compiled so equivalence tests can compare them
/// directly.
#pragma once

#include <cstddef>

namespace af::kern {

struct KernelTable {
    const char* name;

    // y[i] += a * x[i]
    void (*axpy)(std::size_t n, float a, const float* x, float* y);
    // z[i] = x[i] + y[i] / z[i] = x[i] * y[i]
    void (*add)(std::size_t n, const float* x, const float* y, float* z);
    void (*mul)(std::size_t n, const float* x, const float* y, float* z);
    // y[i] = a * x[i] + b
    void (*scale)(std::size_t n, float a, float b, const float* x, float* y);
    float (*dot)(std::size_t n, const float* x, const float* y);
    float (*sum)(std::size_t n, const float* x);

    // C(m x n) += op(A) * op(B), row-major, accumulate into C.
    // nn: A(m x k) * B(k x n); nt: A(m x k) * B^T with B(n x k);
    // tn: A^T * B with A(k x m), B(k x n).
    void (*matmul_nn)(std::size_t m, std::size_t k, std::size_t n,
                      const float* a, const float* b, float* c);
    void (*matmul_nt)(std::size_t m, std::size_t k, std::size_t n,
                      const float* a, const float* b, float* c);
    void (*matmul_tn)(std::size_t m, std::size_t k, std::size_t n,
                      const float* a, const float* b, float* c);

    // One fused Adam update over a flat parameter block.
    void (*adam_update)(std::size_t n, float* p, const float* g, float* m,
                        float* v, float lr, float beta1, float beta2, float eps,
                        float bias1, float bias2);
};

const KernelTable& scalar_table();
const KernelTable& active_table();
bool avx2_available();
#if defined(__x86_64__)
const KernelTable& avx2_table();
#endif

// Convenience forwarders through the active table.
inline void axpy(std::size_t n, float a, const float* x, float* y) {
    active_table().axpy(n, a, x, y);
}
inline void add(std::size_t n, const float* x, const float* y, float* z) {
    active_table().add(n, x, y, z);
}
inline void mul(std::size_t n, const float* x, const float* y, float* z) {
    active_table().mul(n, x, y, z);
}
inline void scale(std::size_t n, float a, float b, const float* x, float* y) {
    active_table().scale(n, a, b, x, y);
}
inline float dot(std::size_t n, const float* x, const float* y) {
    return active_table().dot(n, x, y);
}
inline float sum(std::size_t n, const float* x) {
    return active_table().sum(n, x);
}
inline void matmul_nn(std::size_t m, std::size_t k, std::size_t n,
                      const float* a, const float* b, float* c) {
    active_table().matmul_nn(m, k, n, a, b, c);
}
inline void matmul_nt(std::size_t m, std::size_t k, std::size_t n,
                      const float* a, const float* b, float* c) {
    active_table().matmul_nt(m, k, n, a, b, c);
}
inline void matmul_tn(std::size_t m, std::size_t k, std::size_t n,
                      const float* a, const float* b, float* c) {
    active_table().matmul_tn(m, k, n, a, b, c);
}
inline void adam_update(std::size_t n, float* p, const float* g, float* m,
                        float* v, float lr, float beta1, float beta2, float eps,
                        float bias1, float bias2) {
    active_table().adam_update(n, p, g, m, v, lr, beta1, beta2, eps, bias1,
                               bias2);
}

}  // namespace af::kern
