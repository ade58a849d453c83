/// @file kernels_dispatch.cpp
/// @brief Runtime selection of the active kernel table.

#include <cstdlib>
#include <cstring>

#include "af/kernels.hpp"

#if defined(__x86_64__)
#include <cpuid.h>
#endif

namespace af::kern {

bool avx2_available() {
#if defined(__x86_64__)
    unsigned eax, ebx, ecx, edx;
    if (!__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) return false;
    const bool avx2 = (ebx & bit_AVX2) != 0;
    if (!__get_cpuid(1, &eax, &ebx, &ecx, &edx)) return false;
    const bool fma = (ecx & bit_FMA) != 0;
    return avx2 && fma;
#else
    return false;
#endif
}

const KernelTable& active_table() {
    static const KernelTable* table = [] {
        const char* force = std::getenv("AF_KERNEL");
        if (force && std::strcmp(force, "scalar") == 0) return &scalar_table();
#if defined(__x86_64__)
        if (avx2_available() && !(force && std::strcmp(force, "avx2") != 0))
            return &avx2_table();
#endif
        return &scalar_table();
    }();
    return *table;
}

}  // namespace af::kern
